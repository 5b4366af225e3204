#pragma once

#include "ensembleguard/cart.hpp"
#include "ensembleguard/common.hpp"
#include "ensembleguard/preprocess.hpp"
#include "ensembleguard/rng.hpp"
#include "ensembleguard/tree.hpp"
#include "ensembleguard/tree_growth.hpp"

#include <map>

namespace ensembleguard {

// One engine, four presets:
//   gbm   exact split search, first-order leaves (mean residual)
//   light histogram bins, leaf-wise growth up to max_leaves
//   xgb   exact split search, second-order leaves sum(r) / (sum(h) + lambda)
//   cat   oblivious trees on histogram bins, ordered target statistics
//         replacing categorical codes
enum class BoostFlavor { Gbm, Light, Xgb, Cat };

inline std::string_view to_string(BoostFlavor f) {
    switch (f) {
        case BoostFlavor::Gbm: return "gbm";
        case BoostFlavor::Light: return "light";
        case BoostFlavor::Xgb: return "xgb";
        case BoostFlavor::Cat: return "cat";
    }
    return "unknown";
}

inline BoostFlavor parse_boost_flavor(std::string_view s) {
    if (s == "gbm") return BoostFlavor::Gbm;
    if (s == "light" || s == "lightgbm") return BoostFlavor::Light;
    if (s == "xgb" || s == "xgboost") return BoostFlavor::Xgb;
    if (s == "cat" || s == "catboost") return BoostFlavor::Cat;
    throw ConfigError("unknown boosting flavor '" + std::string(s) + "'");
}

struct BoostConfig {
    BoostFlavor flavor = BoostFlavor::Gbm;
    int n_rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 6;  // <= 0: unlimited (light only)
    int max_leaves = 31;
    int min_samples_leaf = 5;
    int n_bins = 64;
    double l2_lambda = 1.0;
    bool oblivious = false;
    std::uint64_t seed = 0;
    bool unit_hessian = false;  // test hook: forces h = 1 in the second-order flavor

    static BoostConfig preset(BoostFlavor flavor) {
        BoostConfig c;
        c.flavor = flavor;
        c.oblivious = flavor == BoostFlavor::Cat;
        if (flavor == BoostFlavor::Light) c.max_depth = 0;
        return c;
    }

    bool second_order() const { return flavor == BoostFlavor::Xgb; }
    bool histogram() const { return flavor == BoostFlavor::Light || flavor == BoostFlavor::Cat; }
    double lambda() const { return flavor == BoostFlavor::Xgb ? l2_lambda : 0.0; }
};

inline void validate(const BoostConfig& c) {
    if (c.n_rounds < 0) throw ConfigError("n_rounds must be >= 0");
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (c.flavor != BoostFlavor::Light && c.max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (c.max_leaves < 2) throw ConfigError("max_leaves must be >= 2");
    if (c.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (c.n_bins < 2 || c.n_bins > 65535) throw ConfigError("n_bins must be in [2, 65535]");
    if (c.l2_lambda < 0.0) throw ConfigError("l2_lambda must be >= 0");
}

/// Ordered target statistics for categorical codes. Each categorical column
/// becomes one column per class: (prior-weighted) class frequency of that
/// category. During training a record only sees records before it in a
/// random permutation; at inference the full training counts are used.
class OrderedTargetStats {
public:
    OrderedTargetStats() = default;

    bool active() const { return !features_.empty(); }
    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return input_dim_ - features_.size() + features_.size() * classes_; }

    Matrix fit_transform(const Matrix& x, const std::vector<int>& labels, std::size_t num_classes,
                         const std::vector<bool>& categorical, std::uint64_t seed) {
        input_dim_ = static_cast<std::size_t>(x.cols());
        classes_ = num_classes;
        features_.clear();
        for (std::size_t j = 0; j < categorical.size(); ++j) {
            if (categorical[j]) features_.push_back(j);
        }
        const auto n = static_cast<std::size_t>(x.rows());
        // a label-derived prior would leak each record's own label into its row
        prior_.assign(classes_, 1.0 / static_cast<double>(std::max<std::size_t>(classes_, 1)));
        table_.assign(features_.size(), {});

        Matrix out = passthrough(x);
        if (!active()) return out;
        auto order = iota_indices(n);
        Rng rng(derive_seed(seed, "ordered-target-stats"));
        rng.shuffle(order);
        for (std::size_t k = 0; k < features_.size(); ++k) {
            auto& tab = table_[k];
            const auto col = static_cast<Eigen::Index>(features_[k]);
            for (auto i : order) {
                const auto code = static_cast<long long>(x(static_cast<Eigen::Index>(i), col));
                auto& entry = slot(tab, code);
                write_stats(out, static_cast<Eigen::Index>(i), k, entry);
                entry[0] += 1.0;
                entry[1 + static_cast<std::size_t>(labels[i])] += 1.0;
            }
        }
        return out;
    }

    Matrix transform(const Matrix& x) const {
        detail::check_row(static_cast<std::size_t>(x.cols()), input_dim_);
        Matrix out = passthrough(x);
        if (!active()) return out;
        const std::vector<double> empty(classes_ + 1, 0.0);
        for (std::size_t k = 0; k < features_.size(); ++k) {
            const auto& tab = table_[k];
            const auto col = static_cast<Eigen::Index>(features_[k]);
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                auto it = tab.find(static_cast<long long>(x(i, col)));
                write_stats(out, i, k, it == tab.end() ? empty : it->second);
            }
        }
        return out;
    }

    void write(std::ostream& os) const {
        os << "target_stats features=" << features_.size() << " classes=" << classes_ << " input_dim=" << input_dim_ << "\n";
        if (!active()) return;
        os << "prior";
        for (double p : prior_) os << ' ' << text::fmt(p);
        os << "\n";
        for (std::size_t k = 0; k < features_.size(); ++k) {
            os << "feature " << features_[k] << ' ' << table_[k].size() << "\n";
            for (const auto& [code, entry] : table_[k]) {
                os << code;
                for (double v : entry) os << ' ' << text::fmt(v);
                os << "\n";
            }
        }
    }

    static OrderedTargetStats read(std::istream& is, std::size_t input_dim) {
        OrderedTargetStats ts;
        const auto params = detail::parse_params(detail::expect_key(is, "target_stats"));
        const auto nf = static_cast<std::size_t>(text::require_int(detail::param(params, "features"), "features"));
        ts.classes_ = static_cast<std::size_t>(text::require_int(detail::param(params, "classes"), "classes"));
        ts.input_dim_ = static_cast<std::size_t>(text::require_int(detail::param(params, "input_dim"), "input_dim"));
        if (ts.input_dim_ != input_dim) throw ParseError("target stats input dimension mismatch");
        if (nf == 0) return ts;
        auto prior = text::tokens(detail::expect_key(is, "prior"), ' ');
        for (auto v : prior) ts.prior_.push_back(text::require_double(v, "prior"));
        ts.table_.resize(nf);
        for (std::size_t k = 0; k < nf; ++k) {
            auto head = text::tokens(detail::expect_key(is, "feature"), ' ');
            if (head.size() != 2) throw ParseError("target stats: bad feature line");
            ts.features_.push_back(static_cast<std::size_t>(text::require_int(head[0], "feature")));
            const auto entries = text::require_int(head[1], "entries");
            for (long long e = 0; e < entries; ++e) {
                auto parts = text::tokens(detail::expect_line(is, "target stats entry"), ' ');
                if (parts.size() != ts.classes_ + 2) throw ParseError("target stats: bad entry");
                std::vector<double> entry;
                for (std::size_t q = 1; q < parts.size(); ++q) entry.push_back(text::require_double(parts[q], "count"));
                ts.table_[k].emplace(text::require_int(parts[0], "code"), std::move(entry));
            }
        }
        return ts;
    }

private:
    static std::vector<double>& slot(std::map<long long, std::vector<double>>& tab, long long code) {
        auto it = tab.find(code);
        if (it == tab.end()) it = tab.emplace(code, std::vector<double>()).first;
        return it->second;
    }

    Matrix passthrough(const Matrix& x) const {
        Matrix out(x.rows(), static_cast<Eigen::Index>(output_dim()));
        Eigen::Index o = 0;
        std::size_t next_cat = 0;
        for (std::size_t j = 0; j < input_dim_; ++j) {
            if (next_cat < features_.size() && features_[next_cat] == j) {
                ++next_cat;
                continue;
            }
            out.col(o++) = x.col(static_cast<Eigen::Index>(j));
        }
        return out;
    }

    void write_stats(Matrix& out, Eigen::Index row, std::size_t k, std::vector<double>& entry) const {
        if (entry.empty()) entry.assign(classes_ + 1, 0.0);
        write_stats(out, row, k, static_cast<const std::vector<double>&>(entry));
    }

    void write_stats(Matrix& out, Eigen::Index row, std::size_t k, const std::vector<double>& entry) const {
        const auto base = static_cast<Eigen::Index>(input_dim_ - features_.size() + k * classes_);
        for (std::size_t c = 0; c < classes_; ++c) {
            out(row, base + static_cast<Eigen::Index>(c)) = (entry[1 + c] + kPriorWeight * prior_[c]) / (entry[0] + kPriorWeight);
        }
    }

    static constexpr double kPriorWeight = 1.0;

    std::vector<std::size_t> features_;
    std::size_t classes_ = 0;
    std::size_t input_dim_ = 0;
    std::vector<double> prior_;
    std::vector<std::map<long long, std::vector<double>>> table_;  // code -> [count, per-class counts]
};

/// score(x, c) = init[c] + eta * sum_r tree_{r,c}(x); probabilities are the softmax.
class BoostedEnsemble {
public:
    BoostedEnsemble() = default;

    BoostFlavor flavor() const { return config_.flavor; }
    const BoostConfig& config() const { return config_; }
    std::size_t num_features() const { return features_; }
    std::size_t num_classes() const { return init_.size(); }
    const std::vector<double>& init_scores() const { return init_; }
    const std::vector<std::vector<Tree>>& rounds() const { return rounds_; }
    /// Mean training cross-entropy before round 1, then after each round.
    const std::vector<double>& train_loss() const { return train_loss_; }

    std::vector<double> scores(std::span<const double> x) const {
        detail::check_row(x.size(), features_);
        Matrix row = Eigen::Map<const Matrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
        auto s = raw_scores(row);
        return {s.data(), s.data() + s.size()};
    }

    ClassDistribution predict_proba(std::span<const double> x) const { return softmax(scores(x)); }

    Matrix predict_proba(const Matrix& x) const {
        detail::check_row(static_cast<std::size_t>(x.cols()), features_);
        Matrix s = raw_scores(x);
        for (Eigen::Index i = 0; i < s.rows(); ++i) softmax_inplace(s.row(i).data(), static_cast<std::size_t>(s.cols()));
        return s;
    }

    void write(std::ostream& os) const {
        os << "ensembleguard-boost v1\n";
        os << "flavor " << to_string(config_.flavor) << "\n";
        os << "features " << features_ << "\nclasses " << init_.size() << "\n";
        os << "params n_rounds=" << config_.n_rounds << " learning_rate=" << text::fmt(config_.learning_rate)
           << " max_depth=" << config_.max_depth << " max_leaves=" << config_.max_leaves
           << " min_samples_leaf=" << config_.min_samples_leaf << " n_bins=" << config_.n_bins
           << " l2_lambda=" << text::fmt(config_.l2_lambda) << " oblivious=" << (config_.oblivious ? 1 : 0)
           << " seed=" << config_.seed << " unit_hessian=" << (config_.unit_hessian ? 1 : 0) << "\n";
        os << "init";
        for (double v : init_) os << ' ' << text::fmt(v);
        os << "\n";
        target_stats_.write(os);
        os << "rounds " << rounds_.size() << "\n";
        for (const auto& round : rounds_) {
            for (const auto& t : round) t.write(os);
        }
    }

    static BoostedEnsemble read(std::istream& is) {
        if (detail::expect_line(is, "header") != "ensembleguard-boost v1") throw ParseError("not a boosting model file");
        BoostedEnsemble m;
        m.config_.flavor = parse_boost_flavor(detail::expect_key(is, "flavor"));
        m.features_ = static_cast<std::size_t>(text::require_int(detail::expect_key(is, "features"), "features"));
        const auto classes = static_cast<std::size_t>(text::require_int(detail::expect_key(is, "classes"), "classes"));
        const auto p = detail::parse_params(detail::expect_key(is, "params"));
        auto& c = m.config_;
        c.n_rounds = static_cast<int>(text::require_int(detail::param(p, "n_rounds"), "n_rounds"));
        c.learning_rate = text::require_double(detail::param(p, "learning_rate"), "learning_rate");
        c.max_depth = static_cast<int>(text::require_int(detail::param(p, "max_depth"), "max_depth"));
        c.max_leaves = static_cast<int>(text::require_int(detail::param(p, "max_leaves"), "max_leaves"));
        c.min_samples_leaf = static_cast<int>(text::require_int(detail::param(p, "min_samples_leaf"), "min_samples_leaf"));
        c.n_bins = static_cast<int>(text::require_int(detail::param(p, "n_bins"), "n_bins"));
        c.l2_lambda = text::require_double(detail::param(p, "l2_lambda"), "l2_lambda");
        c.oblivious = detail::param(p, "oblivious") == "1";
        c.seed = text::require_uint(detail::param(p, "seed"), "seed");
        c.unit_hessian = detail::param(p, "unit_hessian") == "1";
        for (auto v : text::tokens(detail::expect_key(is, "init"), ' ')) m.init_.push_back(text::require_double(v, "init score"));
        if (m.init_.size() != classes) throw ParseError("boosting model: init score count mismatch");
        m.target_stats_ = OrderedTargetStats::read(is, m.features_);
        const auto rounds = text::require_int(detail::expect_key(is, "rounds"), "rounds");
        for (long long r = 0; r < rounds; ++r) {
            std::vector<Tree> round;
            for (std::size_t k = 0; k < classes; ++k) round.push_back(Tree::read(is));
            m.rounds_.push_back(std::move(round));
        }
        return m;
    }

private:
    friend BoostedEnsemble train_boosted(const Matrix&, const std::vector<int>&, std::size_t, const std::vector<bool>&,
                                         const BoostConfig&);

    Matrix tree_input(const Matrix& x) const { return config_.flavor == BoostFlavor::Cat ? target_stats_.transform(x) : x; }

    Matrix raw_scores(const Matrix& x) const {
        const Matrix in = tree_input(x);
        const auto C = static_cast<Eigen::Index>(init_.size());
        Matrix s(x.rows(), C);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto* row = in.row(i).data();
            for (Eigen::Index c = 0; c < C; ++c) {
                double sum = 0.0;
                for (const auto& round : rounds_) sum += round[static_cast<std::size_t>(c)].predict(row)[0];
                s(i, c) = init_[static_cast<std::size_t>(c)] + config_.learning_rate * sum;
            }
        }
        return s;
    }

    BoostConfig config_;
    std::size_t features_ = 0;
    std::vector<double> init_;
    std::vector<std::vector<Tree>> rounds_;
    OrderedTargetStats target_stats_;
    std::vector<double> train_loss_;
};

namespace detail {

inline double mean_cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        loss -= std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]), 1e-300));
    }
    return loss / static_cast<double>(std::max<Eigen::Index>(probs.rows(), 1));
}

inline Matrix row_softmax(Matrix s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) softmax_inplace(s.row(i).data(), static_cast<std::size_t>(s.cols()));
    return s;
}

}  // namespace detail

/// Multiclass boosting on softmax cross-entropy. Initial scores are log class
/// priors (-inf for classes absent from training). Each round fits one
/// regression tree per class to the residual y - p.
inline BoostedEnsemble train_boosted(const Matrix& x, const std::vector<int>& labels, std::size_t num_classes,
                                     const std::vector<bool>& categorical, const BoostConfig& cfg) {
    validate(cfg);
    const auto n = static_cast<std::size_t>(x.rows());
    if (num_classes < 2) throw UserError("boosting needs at least two classes in the class order");
    if (n < 2) throw UserError("boosting needs at least two records");
    BoostedEnsemble m;
    m.config_ = cfg;
    m.features_ = static_cast<std::size_t>(x.cols());

    std::vector<double> counts(num_classes, 0.0);
    for (auto y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const double prior = counts[c] / static_cast<double>(n);
        m.init_.push_back(counts[c] > 0.0 ? std::log(prior) : -std::numeric_limits<double>::infinity());
        present += counts[c] > 0.0 ? 1 : 0;
    }

    std::vector<bool> cat_mask = categorical;
    cat_mask.resize(m.features_, false);
    if (cfg.flavor != BoostFlavor::Cat) std::fill(cat_mask.begin(), cat_mask.end(), false);
    const Matrix in = m.target_stats_.fit_transform(x, labels, num_classes, cat_mask, cfg.seed);

    const auto C = static_cast<Eigen::Index>(num_classes);
    Matrix scores(x.rows(), C);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < C; ++c) scores(i, c) = m.init_[static_cast<std::size_t>(c)];
    }
    Matrix probs = detail::row_softmax(scores);
    m.train_loss_.push_back(detail::mean_cross_entropy(probs, labels));
    if (present < 2) return m;

    std::optional<SortedColumns> sorted;
    std::optional<FeatureBins> bins;
    if (cfg.histogram()) {
        bins = FeatureBins::build(in, static_cast<std::size_t>(cfg.n_bins));
    } else {
        sorted = SortedColumns::build(in);
    }
    const std::vector<double> ones(n, 1.0);
    std::vector<double> r(n), h(n);
    GrowthLimits limits;
    limits.max_depth = cfg.max_depth;
    limits.min_samples_leaf = cfg.min_samples_leaf;
    const bool newton = cfg.second_order() && !cfg.unit_hessian;

    for (int round = 0; round < cfg.n_rounds; ++round) {
        std::vector<Tree> trees;
        Matrix delta = Matrix::Zero(x.rows(), C);
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (counts[c] == 0.0) {
                trees.push_back(Tree::leaf({0.0}));
                continue;
            }
            const auto cc = static_cast<Eigen::Index>(c);
            for (std::size_t i = 0; i < n; ++i) {
                const double pc = probs(static_cast<Eigen::Index>(i), cc);
                r[i] = (labels[i] == static_cast<int>(c) ? 1.0 : 0.0) - pc;
                h[i] = newton ? std::max(pc * (1.0 - pc), 1e-16) : 1.0;
            }
            Tree tree;
            switch (cfg.flavor) {
                case BoostFlavor::Gbm:
                case BoostFlavor::Xgb:
                    tree = grow_exact(in, *sorted, ones, GradientPolicy(r, h, cfg.lambda()), limits);
                    break;
                case BoostFlavor::Light:
                    tree = grow_leafwise(*bins, r, h, cfg.lambda(), cfg.max_leaves, limits);
                    break;
                case BoostFlavor::Cat:
                    tree = grow_oblivious(*bins, r, h, cfg.lambda(), cfg.max_depth, limits.min_gain);
                    break;
            }
            for (Eigen::Index i = 0; i < x.rows(); ++i) delta(i, cc) = tree.predict(in.row(i).data())[0];
            trees.push_back(std::move(tree));
        }
        scores += cfg.learning_rate * delta;
        probs = detail::row_softmax(scores);
        m.train_loss_.push_back(detail::mean_cross_entropy(probs, labels));
        if (!std::isfinite(m.train_loss_.back())) {
            throw TrainingError("boosting (" + std::string(to_string(cfg.flavor)) + "): non-finite loss at round " +
                                std::to_string(round + 1));
        }
        m.rounds_.push_back(std::move(trees));
    }
    return m;
}

inline BoostedEnsemble train_boosted(const EncodedDataset& train, const BoostConfig& cfg) {
    return train_boosted(train.matrix, train.labels, train.num_classes(), train.categorical, cfg);
}

}  // namespace ensembleguard
