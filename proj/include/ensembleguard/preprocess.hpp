#pragma once

#include "ensembleguard/common.hpp"
#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/rng.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <tuple>
#include <unordered_map>

namespace ensembleguard {

struct CellIndex {
    std::size_t record = 0;
    std::size_t feature = 0;

    bool operator==(const CellIndex&) const = default;
};

inline std::vector<CellIndex> find_missing(const Dataset& ds) {
    std::vector<CellIndex> out;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& values = ds.records[i].values;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (is_missing(values[j])) out.push_back({i, j});
        }
    }
    return out;
}

enum class ImputeStrategy { MeanMode };

/// Numeric cells get the feature mean over observed values; categorical cells
/// get the mode, ties going to the lexicographically smallest value.
inline Dataset impute(const Dataset& ds, ImputeStrategy = ImputeStrategy::MeanMode) {
    Dataset out = ds;
    const auto p = ds.p();
    for (std::size_t j = 0; j < p; ++j) {
        bool any_missing = false;
        for (const auto& rec : ds.records) any_missing = any_missing || is_missing(rec.values[j]);
        if (!any_missing) continue;

        Cell fill;
        if (ds.schema.features[j].kind == FeatureKind::Numeric) {
            double sum = 0.0;
            std::size_t count = 0;
            for (const auto& rec : ds.records) {
                if (const auto* v = std::get_if<double>(&rec.values[j])) {
                    sum += *v;
                    ++count;
                }
            }
            if (count == 0) throw UserError("feature fully missing: " + ds.schema.features[j].name);
            fill = sum / static_cast<double>(count);
        } else {
            std::map<std::string, std::size_t> freq;
            for (const auto& rec : ds.records) {
                if (const auto* v = std::get_if<std::string>(&rec.values[j])) ++freq[*v];
            }
            if (freq.empty()) throw UserError("feature fully missing: " + ds.schema.features[j].name);
            auto best = freq.begin();
            for (auto it = freq.begin(); it != freq.end(); ++it) {
                if (it->second > best->second) best = it;
            }
            fill = best->first;
        }
        for (auto& rec : out.records) {
            if (is_missing(rec.values[j])) rec.values[j] = fill;
        }
    }
    return out;
}

struct OutlierFlag {
    std::size_t record = 0;
    std::size_t feature = 0;
    double value = 0.0;
    double mean = 0.0;
    double sd = 0.0;

    bool operator==(const OutlierFlag&) const = default;
};

struct OutlierReport {
    std::vector<OutlierFlag> flagged;
    double k = 3.0;

    std::set<std::size_t> flagged_records() const {
        std::set<std::size_t> out;
        for (const auto& f : flagged) out.insert(f.record);
        return out;
    }
};

/// k-sigma rule per numeric feature, population standard deviation.
/// Constant features (sd == 0) never flag.
inline OutlierReport detect_outliers(const Dataset& ds, double k) {
    if (!(k > 0.0)) throw ConfigError("outlier multiplier k must be positive");
    OutlierReport report;
    report.k = k;
    const auto n = ds.n();
    if (n == 0) return report;
    for (std::size_t j = 0; j < ds.p(); ++j) {
        if (ds.schema.features[j].kind != FeatureKind::Numeric) continue;
        double sum = 0.0;
        for (const auto& rec : ds.records) {
            const auto* v = std::get_if<double>(&rec.values[j]);
            if (!v) throw UserError("detect_outliers requires an imputed dataset (feature " + ds.schema.features[j].name + ")");
            sum += *v;
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& rec : ds.records) {
            const double d = std::get<double>(rec.values[j]) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (sd == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::get<double>(ds.records[i].values[j]);
            if (std::abs(v - mean) > k * sd) report.flagged.push_back({i, j, v, mean, sd});
        }
    }
    std::sort(report.flagged.begin(), report.flagged.end(), [](const auto& a, const auto& b) {
        return std::tie(a.record, a.feature) < std::tie(b.record, b.feature);
    });
    return report;
}

inline Dataset remove_outliers(const Dataset& ds, const OutlierReport& report) {
    const auto drop = report.flagged_records();
    if (!drop.empty() && drop.size() >= ds.n()) throw UserError("outlier removal would empty dataset");
    Dataset out;
    out.schema = ds.schema;
    out.classes = ds.classes;
    out.records.reserve(ds.n() - drop.size());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (!drop.count(i)) out.records.push_back(ds.records[i]);
    }
    return out;
}

inline void write_outlier_report(std::ostream& os, const OutlierReport& report, const FeatureSchema& schema) {
    os << "# k-sigma outlier report\n";
    os << "k " << text::fmt(report.k) << "\n";
    os << "flagged_cells " << report.flagged.size() << "\n";
    os << "flagged_records " << report.flagged_records().size() << "\n";
    os << "record,feature,value,mean,sd\n";
    for (const auto& f : report.flagged) {
        os << f.record << ',' << schema.features[f.feature].name << ',' << text::fmt(f.value) << ','
           << text::fmt(f.mean) << ',' << text::fmt(f.sd) << '\n';
    }
}

/// Sorted category vocabulary of one feature; code = position.
class CategoryEncoder {
public:
    CategoryEncoder() = default;
    explicit CategoryEncoder(std::vector<std::string> sorted_values) : values_(std::move(sorted_values)) {
        for (std::size_t i = 0; i < values_.size(); ++i) index_.emplace(values_[i], i);
    }

    std::size_t size() const { return values_.size(); }
    const std::vector<std::string>& values() const { return values_; }

    std::optional<std::size_t> code(const std::string& v) const {
        auto it = index_.find(v);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Code for inference: unseen values get the reserved code size().
    std::size_t code_or_reserved(const std::string& v) const { return code(v).value_or(values_.size()); }

    const std::string& decode(std::size_t code) const { return values_.at(code); }

    bool operator==(const CategoryEncoder& other) const { return values_ == other.values_; }

private:
    std::vector<std::string> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Encoders {
    FeatureSchema schema;
    ClassSet classes;
    std::map<std::size_t, CategoryEncoder> categorical;  // feature index -> encoder

    bool operator==(const Encoders&) const = default;
};

struct EncodedDataset {
    Matrix matrix;
    std::vector<int> labels;  // -1 for unlabeled records
    ClassSet classes;
    std::vector<std::string> feature_names;
    std::vector<bool> categorical;  // per column
    std::vector<std::size_t> source_rows;  // row index in the dataset this was encoded from
    std::size_t unseen_categories = 0;     // warning counter from apply_encoding

    std::size_t n() const { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(matrix.cols()); }
    std::size_t num_classes() const { return classes.size(); }
};

namespace detail {

inline int class_index(const ClassSet& classes, const std::string& label) {
    auto idx = classes.index_of(label);
    if (!idx) throw SchemaError("label '" + label + "' is not in the class order");
    return static_cast<int>(*idx);
}

inline EncodedDataset encode_with(const Encoders& enc, const Dataset& ds, bool count_unseen) {
    if (ds.schema.features != enc.schema.features) {
        throw SchemaError("dataset schema does not match the fitted encoders");
    }
    EncodedDataset out;
    out.classes = enc.classes;
    const auto n = ds.n();
    const auto p = ds.p();
    out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    out.labels.resize(n);
    out.source_rows = iota_indices(n);
    for (const auto& f : ds.schema.features) {
        out.feature_names.push_back(f.name);
        out.categorical.push_back(f.kind == FeatureKind::Categorical);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = ds.records[i];
        for (std::size_t j = 0; j < p; ++j) {
            const auto& cell = rec.values[j];
            if (is_missing(cell)) throw UserError("missing cell at record " + std::to_string(i) + ", feature " +
                                                  ds.schema.features[j].name + "; impute first");
            double v = 0.0;
            if (out.categorical[j]) {
                const auto* s = std::get_if<std::string>(&cell);
                if (!s) throw SchemaError("numeric value in categorical feature " + ds.schema.features[j].name);
                const auto& e = enc.categorical.at(j);
                auto code = e.code(*s);
                if (!code) {
                    if (!count_unseen) throw SchemaError("category '" + *s + "' missing from fitted encoder");
                    ++out.unseen_categories;
                }
                v = static_cast<double>(code.value_or(e.size()));
            } else {
                const auto* d = std::get_if<double>(&cell);
                if (!d) throw SchemaError("text value in numeric feature " + ds.schema.features[j].name);
                v = *d;
            }
            out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
        out.labels[i] = rec.label.empty() ? -1 : class_index(enc.classes, rec.label);
    }
    return out;
}

}  // namespace detail

/// Fits one encoder per categorical feature (lexicographic codes) and encodes.
inline std::pair<EncodedDataset, Encoders> fit_label_encoding(const Dataset& ds) {
    Encoders enc;
    enc.schema = ds.schema;
    enc.classes = ds.classes;
    for (auto j : ds.schema.categorical_indices()) {
        std::set<std::string> values;
        for (const auto& rec : ds.records) {
            if (const auto* s = std::get_if<std::string>(&rec.values[j])) values.insert(*s);
        }
        enc.categorical.emplace(j, CategoryEncoder({values.begin(), values.end()}));
    }
    auto encoded = detail::encode_with(enc, ds, false);
    return {std::move(encoded), std::move(enc)};
}

inline EncodedDataset label_encode(const Dataset& ds) { return fit_label_encoding(ds).first; }

/// Encodes with previously fitted encoders; unseen categories map to the
/// reserved code and are counted in unseen_categories.
inline EncodedDataset apply_encoding(const Encoders& encoders, const Dataset& ds) {
    return detail::encode_with(encoders, ds, true);
}

inline EncodedDataset select_rows(const EncodedDataset& ds, const std::vector<std::size_t>& rows) {
    EncodedDataset out;
    out.classes = ds.classes;
    out.feature_names = ds.feature_names;
    out.categorical = ds.categorical;
    out.matrix.resize(static_cast<Eigen::Index>(rows.size()), ds.matrix.cols());
    out.labels.reserve(rows.size());
    out.source_rows.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.matrix.row(static_cast<Eigen::Index>(r)) = ds.matrix.row(static_cast<Eigen::Index>(rows[r]));
        out.labels.push_back(ds.labels[rows[r]]);
        out.source_rows.push_back(ds.source_rows[rows[r]]);
    }
    return out;
}

/// Drops training rows whose source record was flagged. Rows are matched
/// through source_rows, so this can run after the split on train only.
inline EncodedDataset remove_outliers(const EncodedDataset& ds, const OutlierReport& report) {
    const auto drop = report.flagged_records();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (!drop.count(ds.source_rows[i])) keep.push_back(i);
    }
    if (keep.empty()) throw UserError("outlier removal would empty dataset");
    return select_rows(ds, keep);
}

struct SplitResult {
    EncodedDataset train;
    EncodedDataset test;
    std::vector<std::size_t> train_rows;  // row indices into the split input
    std::vector<std::size_t> test_rows;
    std::uint64_t seed = 0;
    double ratio = 0.8;
    std::vector<std::string> warnings;
};

namespace detail {

// Per-class train counts for a stratified draw: round(ratio * n_c), kept
// within [1, n_c - 1] so every class with two or more records is on both sides.
inline std::vector<std::vector<std::size_t>> stratified_draw(const std::vector<int>& labels, std::size_t num_classes,
                                                              double ratio, std::uint64_t seed,
                                                              std::vector<std::string>* warnings,
                                                              const ClassSet* classes) {
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<std::vector<std::size_t>> train_part(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        Rng rng(derive_seed(seed, "split-class", c));
        rng.shuffle(idx);
        std::size_t take;
        if (idx.size() == 1) {
            take = 1;
            if (warnings) {
                const auto name = classes ? classes->names[c] : std::to_string(c);
                warnings->push_back("class " + name + " has a single record; placed in train");
            }
        } else {
            take = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
            take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
        }
        train_part[c].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
        idx.erase(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::vector<std::vector<std::size_t>> out(2);
    for (std::size_t c = 0; c < num_classes; ++c) {
        out[0].insert(out[0].end(), train_part[c].begin(), train_part[c].end());
        out[1].insert(out[1].end(), by_class[c].begin(), by_class[c].end());
    }
    std::sort(out[0].begin(), out[0].end());
    std::sort(out[1].begin(), out[1].end());
    return out;
}

}  // namespace detail

/// Random train/test split. Unstratified: n_tr = floor(ratio * n).
inline SplitResult split(const EncodedDataset& ds, double ratio, std::uint64_t seed, bool stratified) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    if (ds.n() < 2) throw UserError("split needs at least two records");
    SplitResult res;
    res.seed = seed;
    res.ratio = ratio;
    if (stratified) {
        auto parts = detail::stratified_draw(ds.labels, ds.num_classes(), ratio, seed, &res.warnings, &ds.classes);
        res.train_rows = std::move(parts[0]);
        res.test_rows = std::move(parts[1]);
    } else {
        auto idx = iota_indices(ds.n());
        Rng rng(derive_seed(seed, "split"));
        rng.shuffle(idx);
        auto n_tr = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ds.n())));
        n_tr = std::clamp<std::size_t>(n_tr, 1, ds.n() - 1);
        res.train_rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_tr));
        res.test_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_tr), idx.end());
        std::sort(res.train_rows.begin(), res.train_rows.end());
        std::sort(res.test_rows.begin(), res.test_rows.end());
    }
    res.train = select_rows(ds, res.train_rows);
    res.test = select_rows(ds, res.test_rows);
    return res;
}

/// Stratified random subsample of at most max_records records (0 = all).
inline Dataset subsample(const Dataset& ds, std::size_t max_records, std::uint64_t seed) {
    if (max_records == 0 || max_records >= ds.n()) return ds;
    std::vector<int> labels(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) labels[i] = detail::class_index(ds.classes, ds.records[i].label);
    const double ratio = static_cast<double>(max_records) / static_cast<double>(ds.n());
    std::vector<std::vector<std::size_t>> by_class(ds.classes.size());
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        Rng rng(derive_seed(seed, "subsample", c));
        rng.shuffle(idx);
        auto take = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
        take = std::clamp<std::size_t>(take, 1, idx.size());
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(keep.begin(), keep.end());
    Dataset out;
    out.schema = ds.schema;
    out.classes = ds.classes;
    out.records.reserve(keep.size());
    for (auto i : keep) out.records.push_back(ds.records[i]);
    return out;
}

/// Per-feature affine scaling fitted on training data.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> sd;  // population sd; 0 means pass-through

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        const auto n = static_cast<double>(x.rows());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            double mu = 0.0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) mu += x(i, j);
            mu /= n;
            double ss = 0.0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                const double d = x(i, j) - mu;
                ss += d * d;
            }
            s.mean.push_back(mu);
            s.sd.push_back(std::sqrt(ss / n));
        }
        return s;
    }

    Matrix transform(const Matrix& x) const {
        if (static_cast<std::size_t>(x.cols()) != mean.size()) throw SchemaError("standardizer dimension mismatch");
        Matrix out = x;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (sd[jj] == 0.0) continue;
            for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = (x(i, j) - mean[jj]) / sd[jj];
        }
        return out;
    }

    bool operator==(const Standardizer&) const = default;
};

struct StandardizeResult {
    EncodedDataset train;
    EncodedDataset test;
    Standardizer stats;
};

/// Scales every column ((x - mu_train) / sd_train); constant train columns pass through.
inline StandardizeResult standardize(const EncodedDataset& train, const EncodedDataset& test) {
    StandardizeResult r;
    r.stats = Standardizer::fit(train.matrix);
    r.train = train;
    r.test = test;
    r.train.matrix = r.stats.transform(train.matrix);
    r.test.matrix = r.stats.transform(test.matrix);
    return r;
}

inline void write_encoders(std::ostream& os, const Encoders& enc) {
    os << "ensembleguard-encoders v1\n";
    os << "dataset " << to_string(enc.schema.dataset_kind) << "\n";
    os << "label_column " << enc.schema.label_column << "\n";
    os << "classes " << enc.classes.size() << "\n";
    for (std::size_t c = 0; c < enc.classes.size(); ++c) os << enc.classes.names[c] << '\t' << enc.classes.display[c] << "\n";
    os << "features " << enc.schema.size() << "\n";
    for (std::size_t j = 0; j < enc.schema.size(); ++j) {
        const auto& f = enc.schema.features[j];
        os << (f.kind == FeatureKind::Categorical ? "categorical" : "numeric") << '\t' << f.name;
        if (f.kind == FeatureKind::Categorical) {
            const auto& e = enc.categorical.at(j);
            for (const auto& v : e.values()) os << '\t' << v;
        }
        os << "\n";
    }
}

inline Encoders read_encoders(std::istream& is) {
    auto next = [&](std::string_view what) {
        std::string line;
        if (!std::getline(is, line)) throw ParseError("encoders file truncated before " + std::string(what));
        return line;
    };
    if (next("header") != "ensembleguard-encoders v1") throw ParseError("not an encoders file");
    Encoders enc;
    auto kv = [&](std::string_view key) {
        auto line = next(key);
        if (line.rfind(std::string(key) + " ", 0) != 0) throw ParseError("encoders file: expected " + std::string(key));
        return line.substr(key.size() + 1);
    };
    enc.schema.dataset_kind = parse_dataset_kind(kv("dataset"));
    enc.schema.label_column = kv("label_column");
    const auto nc = text::require_int(kv("classes"), "class count");
    for (long long c = 0; c < nc; ++c) {
        auto parts = text::tokens(next("class"), '\t');
        if (parts.size() != 2) throw ParseError("encoders file: bad class line");
        enc.classes.names.emplace_back(parts[0]);
        enc.classes.display.emplace_back(parts[1]);
    }
    const auto nf = text::require_int(kv("features"), "feature count");
    for (long long j = 0; j < nf; ++j) {
        const auto line = next("feature");
        auto parts = text::split(line, '\t');
        if (parts.size() < 2) throw ParseError("encoders file: bad feature line");
        const bool cat = parts[0] == "categorical";
        enc.schema.features.push_back({std::string(parts[1]), cat ? FeatureKind::Categorical : FeatureKind::Numeric});
        if (cat) {
            std::vector<std::string> values(parts.begin() + 2, parts.end());
            enc.categorical.emplace(static_cast<std::size_t>(j), CategoryEncoder(std::move(values)));
        }
    }
    return enc;
}

inline void write_standardizer(std::ostream& os, const Standardizer& s) {
    os << "ensembleguard-standardizer v1\n";
    os << "features " << s.mean.size() << "\n";
    for (std::size_t j = 0; j < s.mean.size(); ++j) os << text::fmt(s.mean[j]) << ' ' << text::fmt(s.sd[j]) << "\n";
}

inline Standardizer read_standardizer(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "ensembleguard-standardizer v1") throw ParseError("not a standardizer file");
    std::string key;
    std::size_t n = 0;
    if (!(is >> key >> n) || key != "features") throw ParseError("standardizer file: expected feature count");
    Standardizer s;
    for (std::size_t j = 0; j < n; ++j) {
        std::string m, d;
        if (!(is >> m >> d)) throw ParseError("standardizer file truncated");
        s.mean.push_back(text::require_double(m, "mean"));
        s.sd.push_back(text::require_double(d, "sd"));
    }
    return s;
}

}  // namespace ensembleguard
