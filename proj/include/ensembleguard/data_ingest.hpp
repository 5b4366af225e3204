#pragma once

#include "ensembleguard/common.hpp"
#include "ensembleguard/taxonomy_data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace ensembleguard {

enum class DatasetKind { NslKdd, UnswNb15, CicIds2017 };

inline std::string_view to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::NslKdd: return "nsl-kdd";
        case DatasetKind::UnswNb15: return "unsw-nb15";
        case DatasetKind::CicIds2017: return "cic-ids-2017";
    }
    return "unknown";
}

inline DatasetKind parse_dataset_kind(std::string_view s) {
    const auto k = text::lower(text::trim(s));
    if (k == "nsl-kdd" || k == "nslkdd") return DatasetKind::NslKdd;
    if (k == "unsw-nb15" || k == "unswnb15") return DatasetKind::UnswNb15;
    if (k == "cic-ids-2017" || k == "cicids2017") return DatasetKind::CicIds2017;
    throw UserError("unsupported dataset kind '" + std::string(s) + "'");
}

enum class FeatureKind { Numeric, Categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;

    bool operator==(const FeatureSpec&) const = default;
};

struct FeatureSchema {
    std::vector<FeatureSpec> features;
    std::string label_column;
    DatasetKind dataset_kind = DatasetKind::NslKdd;

    std::size_t size() const { return features.size(); }

    std::vector<std::size_t> categorical_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < features.size(); ++j) {
            if (features[j].kind == FeatureKind::Categorical) out.push_back(j);
        }
        return out;
    }

    bool operator==(const FeatureSchema&) const = default;
};

/// A cell is missing (monostate), numeric or text.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

struct RawRecord {
    std::vector<Cell> values;
    std::string label;  // class name after taxonomy mapping

    bool operator==(const RawRecord&) const = default;
};

/// Class order plus human-readable labels; index 0 is always benign/normal.
struct ClassSet {
    std::vector<std::string> names;
    std::vector<std::string> display;

    std::size_t size() const { return names.size(); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return i;
        }
        return std::nullopt;
    }

    bool operator==(const ClassSet&) const = default;
};

/// Lower-cases, trims, collapses whitespace, maps runs of non-ASCII bytes
/// (en dashes, cp1252 0x96, U+FFFD) to '-', and drops a trailing '.'.
inline std::string normalize_label(std::string_view raw) {
    std::string out;
    bool pending_space = false;
    std::size_t i = 0;
    const auto s = text::trim(raw);
    while (i < s.size()) {
        const auto ch = static_cast<unsigned char>(s[i]);
        if (ch >= 0x80) {
            while (i < s.size() && static_cast<unsigned char>(s[i]) >= 0x80) ++i;
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += '-';
            continue;
        }
        if (ch == ' ' || ch == '\t') {
            pending_space = true;
            ++i;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        out += static_cast<char>(ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch);
        ++i;
    }
    while (!out.empty() && out.back() == '.') out.pop_back();
    return out;
}

struct AttackTaxonomy {
    DatasetKind dataset_kind = DatasetKind::NslKdd;
    int version = 1;
    std::map<std::string, std::string> mapping;  // normalized raw label -> class name
    ClassSet classes;

    std::optional<std::string> map(std::string_view raw) const {
        auto it = mapping.find(normalize_label(raw));
        if (it == mapping.end()) return std::nullopt;
        return it->second;
    }
};

/// Parses the "raw_label = ClassName" taxonomy format with '@' directives.
inline AttackTaxonomy parse_taxonomy(std::string_view content, std::string_view origin = "<taxonomy>") {
    AttackTaxonomy tax;
    bool have_kind = false;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        const auto where = std::string(origin) + ":" + std::to_string(line_no);
        if (line.front() == '@') {
            const auto sp = line.find_first_of(" \t");
            const auto directive = line.substr(1, sp == std::string_view::npos ? line.size() : sp - 1);
            const auto rest = sp == std::string_view::npos ? std::string_view{} : text::trim(line.substr(sp));
            if (directive == "dataset") {
                tax.dataset_kind = parse_dataset_kind(rest);
                have_kind = true;
            } else if (directive == "version") {
                tax.version = static_cast<int>(text::require_int(rest, "taxonomy version"));
            } else if (directive == "class") {
                const auto eq = rest.find('=');
                const auto name = std::string(text::trim(rest.substr(0, eq)));
                const auto display = eq == std::string_view::npos ? name : std::string(text::trim(rest.substr(eq + 1)));
                if (name.empty()) throw ParseError(where + ": empty class name");
                if (tax.classes.index_of(name)) throw ParseError(where + ": duplicate class '" + name + "'");
                tax.classes.names.push_back(name);
                tax.classes.display.push_back(display);
            } else {
                throw ParseError(where + ": unknown directive '@" + std::string(directive) + "'");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(where + ": expected 'raw_label = ClassName'");
        const auto raw = normalize_label(line.substr(0, eq));
        const auto cls = std::string(text::trim(line.substr(eq + 1)));
        if (!tax.classes.index_of(cls)) throw ParseError(where + ": class '" + cls + "' not declared with @class");
        auto [it, inserted] = tax.mapping.emplace(raw, cls);
        if (!inserted && it->second != cls) throw ParseError(where + ": label '" + raw + "' mapped twice");
    }
    if (!have_kind) throw ParseError(std::string(origin) + ": missing @dataset directive");
    if (tax.classes.size() < 2) throw ParseError(std::string(origin) + ": need at least two classes");
    return tax;
}

inline AttackTaxonomy load_taxonomy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open taxonomy file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_taxonomy(ss.str(), path.string());
}

/// Built-in taxonomy for a dataset family (identical to data/taxonomy/<kind>.txt).
inline AttackTaxonomy class_taxonomy(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::NslKdd: return parse_taxonomy(taxonomy_data::kNslKdd, "nsl-kdd.txt");
        case DatasetKind::UnswNb15: return parse_taxonomy(taxonomy_data::kUnswNb15, "unsw-nb15.txt");
        case DatasetKind::CicIds2017: return parse_taxonomy(taxonomy_data::kCicIds2017, "cic-ids-2017.txt");
    }
    throw UserError("unsupported dataset kind");
}

struct Dataset {
    FeatureSchema schema;
    std::vector<RawRecord> records;
    ClassSet classes;

    std::size_t n() const { return records.size(); }
    std::size_t p() const { return schema.size(); }
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open data file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CsvLine {
    std::size_t number;
    std::vector<std::string_view> cells;
};

// Splits content into non-blank lines of comma-separated cells.
inline std::vector<CsvLine> csv_lines(std::string_view content) {
    std::vector<CsvLine> out;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (text::trim(line).empty()) continue;
        out.push_back({line_no, text::split(line, ',')});
    }
    return out;
}

inline bool is_missing_token(std::string_view s) {
    s = text::trim(s);
    return s.empty() || s == "?" || s == "NaN" || s == "nan" || s == "Infinity" || s == "-Infinity" ||
           s == "inf" || s == "-inf";
}

inline Cell numeric_cell(std::string_view s, const std::string& where) {
    if (is_missing_token(s)) return std::monostate{};
    auto v = text::parse_double(s);
    if (!v) throw ParseError(where + ": non-numeric value '" + std::string(text::trim(s)) + "'");
    if (!std::isfinite(*v)) return std::monostate{};
    return *v;
}

inline Cell categorical_cell(std::string_view s) {
    s = text::trim(s);
    if (s.empty() || s == "?") return std::monostate{};
    return std::string(s);
}

inline Cell make_cell(const FeatureSpec& spec, std::string_view s, const std::string& where) {
    return spec.kind == FeatureKind::Numeric ? numeric_cell(s, where) : categorical_cell(s);
}

class LabelMapper {
public:
    explicit LabelMapper(const AttackTaxonomy& tax) : tax_(tax) {}

    std::string operator()(std::string_view raw) {
        auto cls = tax_.map(raw);
        if (!cls) {
            unknown_.insert(std::string(text::trim(raw)));
            return {};
        }
        return *cls;
    }

    void finish(const std::string& origin) const {
        if (unknown_.empty()) return;
        std::vector<std::string> labels(unknown_.begin(), unknown_.end());
        throw ParseError(origin + ": unknown attack label(s) not in taxonomy: " + text::join(labels, ", "));
    }

private:
    const AttackTaxonomy& tax_;
    std::set<std::string> unknown_;
};

inline void check_taxonomy_kind(const AttackTaxonomy& tax, DatasetKind kind) {
    if (tax.dataset_kind != kind) {
        throw SchemaError("taxonomy is for " + std::string(to_string(tax.dataset_kind)) + ", data is " +
                          std::string(to_string(kind)));
    }
}

}  // namespace detail

inline const std::vector<std::string>& nslkdd_feature_names() {
    static const std::vector<std::string> names = {
        "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land", "wrong_fragment",
        "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised", "root_shell", "su_attempted",
        "num_root", "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
        "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate", "srv_serror_rate",
        "rerror_rate", "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
        "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
        "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
        "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};
    return names;
}

inline FeatureSchema nslkdd_schema() {
    FeatureSchema schema;
    schema.dataset_kind = DatasetKind::NslKdd;
    schema.label_column = "attack";
    for (const auto& name : nslkdd_feature_names()) {
        const bool cat = name == "protocol_type" || name == "service" || name == "flag";
        schema.features.push_back({name, cat ? FeatureKind::Categorical : FeatureKind::Numeric});
    }
    return schema;
}

/// Headerless NSL-KDD file: 41 features, the attack label, and an optional
/// trailing difficulty column which is dropped.
inline Dataset parse_nslkdd(const std::filesystem::path& path, const AttackTaxonomy& taxonomy) {
    detail::check_taxonomy_kind(taxonomy, DatasetKind::NslKdd);
    Dataset ds;
    ds.schema = nslkdd_schema();
    ds.classes = taxonomy.classes;
    const auto content = detail::read_file(path);
    const auto lines = detail::csv_lines(content);
    if (lines.empty()) throw ParseError(path.string() + ": no records");
    const std::size_t p = ds.schema.size();
    detail::LabelMapper mapper(taxonomy);
    ds.records.reserve(lines.size());
    for (const auto& line : lines) {
        const auto where = path.string() + ":" + std::to_string(line.number);
        if (line.cells.size() != p + 1 && line.cells.size() != p + 2) {
            throw ParseError(where + ": expected " + std::to_string(p + 1) + " or " + std::to_string(p + 2) +
                             " columns, found " + std::to_string(line.cells.size()));
        }
        RawRecord rec;
        rec.values.reserve(p);
        for (std::size_t j = 0; j < p; ++j) rec.values.push_back(detail::make_cell(ds.schema.features[j], line.cells[j], where));
        rec.label = mapper(line.cells[p]);
        ds.records.push_back(std::move(rec));
    }
    mapper.finish(path.string());
    return ds;
}

/// UNSW-NB15 partition CSV with header. id and the binary label are dropped;
/// attack_cat is the class label; proto, service and state are categorical.
inline Dataset parse_unswnb15(const std::filesystem::path& path, const AttackTaxonomy& taxonomy) {
    detail::check_taxonomy_kind(taxonomy, DatasetKind::UnswNb15);
    const auto content = detail::read_file(path);
    const auto lines = detail::csv_lines(content);
    if (lines.empty()) throw ParseError(path.string() + ": empty file, no header");
    const auto& header = lines.front().cells;

    Dataset ds;
    ds.schema.dataset_kind = DatasetKind::UnswNb15;
    ds.schema.label_column = "attack_cat";
    ds.classes = taxonomy.classes;
    std::vector<std::size_t> feature_cols;
    std::optional<std::size_t> label_col;
    std::set<std::string> seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = std::string(text::trim(header[c]));
        const auto lname = text::lower(name);
        if (lname == "attack_cat") {
            label_col = c;
            continue;
        }
        if (lname == "id" || lname == "label") continue;
        if (!seen.insert(name).second) throw SchemaError(path.string() + ": duplicate column '" + name + "'");
        const bool cat = lname == "proto" || lname == "service" || lname == "state";
        ds.schema.features.push_back({name, cat ? FeatureKind::Categorical : FeatureKind::Numeric});
        feature_cols.push_back(c);
    }
    if (!label_col) throw SchemaError(path.string() + ": missing attack_cat column");
    if (lines.size() == 1) throw ParseError(path.string() + ": no records");

    detail::LabelMapper mapper(taxonomy);
    ds.records.reserve(lines.size() - 1);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto& line = lines[li];
        const auto where = path.string() + ":" + std::to_string(line.number);
        if (line.cells.size() != header.size()) {
            throw ParseError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                             std::to_string(line.cells.size()));
        }
        RawRecord rec;
        rec.values.reserve(feature_cols.size());
        for (std::size_t j = 0; j < feature_cols.size(); ++j) {
            rec.values.push_back(detail::make_cell(ds.schema.features[j], line.cells[feature_cols[j]], where));
        }
        auto raw = text::trim(line.cells[*label_col]);
        rec.label = mapper(raw.empty() ? std::string_view("Normal") : raw);
        ds.records.push_back(std::move(rec));
    }
    mapper.finish(path.string());
    return ds;
}

/// One or more CIC-IDS-2017 daily CSVs, concatenated. Header names are
/// trimmed; a repeated name gets a ".1", ".2", ... suffix. Infinite and NaN
/// cells become missing.
inline Dataset parse_cicids2017(const std::vector<std::filesystem::path>& paths, const AttackTaxonomy& taxonomy) {
    detail::check_taxonomy_kind(taxonomy, DatasetKind::CicIds2017);
    if (paths.empty()) throw UserError("no CIC-IDS-2017 files given");
    Dataset ds;
    ds.schema.dataset_kind = DatasetKind::CicIds2017;
    ds.schema.label_column = "Label";
    ds.classes = taxonomy.classes;
    bool have_schema = false;
    detail::LabelMapper mapper(taxonomy);

    for (const auto& path : paths) {
        const auto content = detail::read_file(path);
        const auto lines = detail::csv_lines(content);
        if (lines.empty()) throw ParseError(path.string() + ": empty file, no header");
        const auto& header = lines.front().cells;
        std::vector<FeatureSpec> features;
        std::vector<std::size_t> feature_cols;
        std::optional<std::size_t> label_col;
        std::map<std::string, int> counts;
        for (std::size_t c = 0; c < header.size(); ++c) {
            auto name = std::string(text::trim(header[c]));
            if (name == "Label") {
                label_col = c;
                continue;
            }
            const int k = counts[name]++;
            if (k > 0) name += "." + std::to_string(k);
            features.push_back({name, FeatureKind::Numeric});
            feature_cols.push_back(c);
        }
        if (!label_col) throw SchemaError(path.string() + ": missing Label column");
        if (!have_schema) {
            ds.schema.features = features;
            have_schema = true;
        } else if (features != ds.schema.features) {
            throw SchemaError(path.string() + ": header conflicts with " + paths.front().string());
        }
        for (std::size_t li = 1; li < lines.size(); ++li) {
            const auto& line = lines[li];
            const auto where = path.string() + ":" + std::to_string(line.number);
            if (line.cells.size() != header.size()) {
                throw ParseError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                                 std::to_string(line.cells.size()));
            }
            RawRecord rec;
            rec.values.reserve(feature_cols.size());
            for (auto c : feature_cols) rec.values.push_back(detail::numeric_cell(line.cells[c], where));
            rec.label = mapper(line.cells[*label_col]);
            ds.records.push_back(std::move(rec));
        }
    }
    mapper.finish(paths.size() == 1 ? paths.front().string() : "CIC-IDS-2017 input");
    if (ds.records.empty()) throw ParseError("CIC-IDS-2017 input: no records");
    return ds;
}

inline Dataset parse_dataset(DatasetKind kind, const std::vector<std::filesystem::path>& paths,
                             const AttackTaxonomy& taxonomy) {
    if (paths.empty()) throw UserError("no data files given");
    auto single = [&]() -> const std::filesystem::path& {
        if (paths.size() != 1) throw UserError(std::string(to_string(kind)) + " takes exactly one data file");
        return paths.front();
    };
    switch (kind) {
        case DatasetKind::NslKdd: return parse_nslkdd(single(), taxonomy);
        case DatasetKind::UnswNb15: return parse_unswnb15(single(), taxonomy);
        case DatasetKind::CicIds2017: return parse_cicids2017(paths, taxonomy);
    }
    throw UserError("unsupported dataset kind");
}

}  // namespace ensembleguard
