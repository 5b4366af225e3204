#pragma once

#include "ensembleguard/common.hpp"
#include "ensembleguard/preprocess.hpp"
#include "ensembleguard/rng.hpp"
#include "ensembleguard/tree.hpp"
#include "ensembleguard/tree_growth.hpp"

#include <istream>
#include <map>
#include <ostream>

namespace ensembleguard {

struct CartConfig {
    int max_depth = 0;  // <= 0: grow until pure
    int min_samples_leaf = 1;
};

inline void validate(const CartConfig& c) {
    if (c.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
}

namespace detail {

inline void check_row(std::size_t got, std::size_t expected) {
    if (got != expected) {
        throw SchemaError("feature vector has " + std::to_string(got) + " entries, model expects " + std::to_string(expected));
    }
}

inline Tree fit_cart(const Matrix& x, const SortedColumns& sorted, const std::vector<int>& labels,
                     std::size_t num_classes, const std::vector<double>& weight, const CartConfig& cfg) {
    GiniPolicy policy(labels, num_classes);
    GrowthLimits limits;
    limits.max_depth = cfg.max_depth;
    limits.min_samples_leaf = cfg.min_samples_leaf;
    // Impure nodes split even at zero gain; XOR needs a gainless root split.
    limits.min_gain = -1.0;
    return grow_exact(x, sorted, weight, policy, limits);
}

}  // namespace detail

/// Single CART classification tree with Gini splits.
class CartTree {
public:
    CartTree() = default;
    CartTree(Tree tree, std::size_t num_features, std::size_t num_classes, CartConfig cfg)
        : tree_(std::move(tree)), features_(num_features), classes_(num_classes), config_(cfg) {}

    const Tree& tree() const { return tree_; }
    std::size_t num_features() const { return features_; }
    std::size_t num_classes() const { return classes_; }
    const CartConfig& config() const { return config_; }

    ClassDistribution predict_proba(std::span<const double> x) const {
        detail::check_row(x.size(), features_);
        return tree_.predict(x.data());
    }

    Matrix predict_proba(const Matrix& x) const {
        detail::check_row(static_cast<std::size_t>(x.cols()), features_);
        Matrix out(x.rows(), static_cast<Eigen::Index>(classes_));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto& v = tree_.predict(x.row(i).data());
            for (std::size_t c = 0; c < classes_; ++c) out(i, static_cast<Eigen::Index>(c)) = v[c];
        }
        return out;
    }

    void write(std::ostream& os) const {
        os << "ensembleguard-cart v1\n";
        os << "features " << features_ << "\nclasses " << classes_ << "\n";
        os << "params max_depth=" << config_.max_depth << " min_samples_leaf=" << config_.min_samples_leaf << "\n";
        tree_.write(os);
    }

    static CartTree read(std::istream& is);

private:
    Tree tree_;
    std::size_t features_ = 0;
    std::size_t classes_ = 0;
    CartConfig config_;
};

inline CartTree train_cart(const Matrix& x, const std::vector<int>& labels, std::size_t num_classes,
                           const CartConfig& cfg = {}) {
    validate(cfg);
    const auto sorted = SortedColumns::build(x);
    const std::vector<double> weight(static_cast<std::size_t>(x.rows()), 1.0);
    auto tree = detail::fit_cart(x, sorted, labels, num_classes, weight, cfg);
    return CartTree(std::move(tree), static_cast<std::size_t>(x.cols()), num_classes, cfg);
}

inline CartTree train_cart(const EncodedDataset& train, int max_depth, int min_samples_leaf) {
    if (train.n() == 0) throw UserError("train_cart needs at least one record");
    return train_cart(train.matrix, train.labels, train.num_classes(), CartConfig{max_depth, min_samples_leaf});
}

struct BaggingConfig {
    int n_estimators = 1000;
    std::uint64_t seed = 0;
    CartConfig tree;
    bool bootstrap = true;  // false only as a test hook: every tree sees the full set
};

/// Bootstrap-aggregated CART trees; prediction is the mean member distribution.
class BaggedEnsemble {
public:
    BaggedEnsemble() = default;
    BaggedEnsemble(std::vector<Tree> trees, std::size_t num_features, std::size_t num_classes, BaggingConfig cfg)
        : trees_(std::move(trees)), features_(num_features), classes_(num_classes), config_(cfg) {}

    const std::vector<Tree>& trees() const { return trees_; }
    std::size_t num_features() const { return features_; }
    std::size_t num_classes() const { return classes_; }
    const BaggingConfig& config() const { return config_; }

    ClassDistribution predict_proba(std::span<const double> x) const {
        detail::check_row(x.size(), features_);
        ClassDistribution out(classes_, 0.0);
        for (const auto& t : trees_) {
            const auto& v = t.predict(x.data());
            for (std::size_t c = 0; c < classes_; ++c) out[c] += v[c];
        }
        for (auto& v : out) v /= static_cast<double>(trees_.size());
        return out;
    }

    Matrix predict_proba(const Matrix& x) const {
        detail::check_row(static_cast<std::size_t>(x.cols()), features_);
        Matrix out = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(classes_));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto* row = x.row(i).data();
            for (const auto& t : trees_) {
                const auto& v = t.predict(row);
                for (std::size_t c = 0; c < classes_; ++c) out(i, static_cast<Eigen::Index>(c)) += v[c];
            }
        }
        out /= static_cast<double>(trees_.size());
        return out;
    }

    void write(std::ostream& os) const {
        os << "ensembleguard-bagging v1\n";
        os << "features " << features_ << "\nclasses " << classes_ << "\n";
        os << "params n_estimators=" << config_.n_estimators << " seed=" << config_.seed
           << " max_depth=" << config_.tree.max_depth << " min_samples_leaf=" << config_.tree.min_samples_leaf
           << " bootstrap=" << (config_.bootstrap ? 1 : 0) << "\n";
        for (const auto& t : trees_) t.write(os);
    }

    static BaggedEnsemble read(std::istream& is);

private:
    std::vector<Tree> trees_;
    std::size_t features_ = 0;
    std::size_t classes_ = 0;
    BaggingConfig config_;
};

/// Tree t trains on n draws with replacement from substream derive_seed(seed, "bagging", t).
inline BaggedEnsemble train_bagging(const Matrix& x, const std::vector<int>& labels, std::size_t num_classes,
                                    const BaggingConfig& cfg) {
    validate(cfg.tree);
    if (cfg.n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0) throw UserError("train_bagging needs at least one record");
    const auto sorted = SortedColumns::build(x);
    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(cfg.n_estimators));
    std::vector<double> weight(n);
    for (int t = 0; t < cfg.n_estimators; ++t) {
        if (cfg.bootstrap) {
            std::fill(weight.begin(), weight.end(), 0.0);
            Rng rng(derive_seed(cfg.seed, "bagging", static_cast<std::uint64_t>(t)));
            for (std::size_t k = 0; k < n; ++k) weight[rng.below(n)] += 1.0;
        } else {
            std::fill(weight.begin(), weight.end(), 1.0);
        }
        trees.push_back(detail::fit_cart(x, sorted, labels, num_classes, weight, cfg.tree));
    }
    return BaggedEnsemble(std::move(trees), static_cast<std::size_t>(x.cols()), num_classes, cfg);
}

inline BaggedEnsemble train_bagging(const EncodedDataset& train, int n_estimators, std::uint64_t seed,
                                    CartConfig tree = {}) {
    return train_bagging(train.matrix, train.labels, train.num_classes(), BaggingConfig{n_estimators, seed, tree, true});
}

namespace detail {

inline std::string expect_line(std::istream& is, std::string_view what) {
    std::string line;
    do {
        if (!std::getline(is, line)) throw ParseError("model file truncated before " + std::string(what));
    } while (text::trim(line).empty());
    return std::string(text::trim(line));
}

inline std::string expect_key(std::istream& is, std::string_view key) {
    auto line = expect_line(is, key);
    if (line.rfind(std::string(key) + " ", 0) != 0) throw ParseError("model file: expected '" + std::string(key) + "'");
    return line.substr(key.size() + 1);
}

/// Parses "a=1 b=2" into a map.
inline std::map<std::string, std::string> parse_params(std::string_view s) {
    std::map<std::string, std::string> out;
    for (auto tok : text::split(text::trim(s), ' ')) {
        if (tok.empty()) continue;
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) throw ParseError("model file: bad parameter '" + std::string(tok) + "'");
        out.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
    return out;
}

inline const std::string& param(const std::map<std::string, std::string>& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) throw ParseError("model file: missing parameter '" + key + "'");
    return it->second;
}

}  // namespace detail

inline CartTree CartTree::read(std::istream& is) {
    if (detail::expect_line(is, "header") != "ensembleguard-cart v1") throw ParseError("not a CART model file");
    const auto features = static_cast<std::size_t>(text::require_int(detail::expect_key(is, "features"), "features"));
    const auto classes = static_cast<std::size_t>(text::require_int(detail::expect_key(is, "classes"), "classes"));
    const auto params = detail::parse_params(detail::expect_key(is, "params"));
    CartConfig cfg;
    cfg.max_depth = static_cast<int>(text::require_int(detail::param(params, "max_depth"), "max_depth"));
    cfg.min_samples_leaf = static_cast<int>(text::require_int(detail::param(params, "min_samples_leaf"), "min_samples_leaf"));
    return CartTree(Tree::read(is), features, classes, cfg);
}

inline BaggedEnsemble BaggedEnsemble::read(std::istream& is) {
    if (detail::expect_line(is, "header") != "ensembleguard-bagging v1") throw ParseError("not a bagging model file");
    const auto features = static_cast<std::size_t>(text::require_int(detail::expect_key(is, "features"), "features"));
    const auto classes = static_cast<std::size_t>(text::require_int(detail::expect_key(is, "classes"), "classes"));
    const auto params = detail::parse_params(detail::expect_key(is, "params"));
    BaggingConfig cfg;
    cfg.n_estimators = static_cast<int>(text::require_int(detail::param(params, "n_estimators"), "n_estimators"));
    cfg.seed = text::require_uint(detail::param(params, "seed"), "seed");
    cfg.tree.max_depth = static_cast<int>(text::require_int(detail::param(params, "max_depth"), "max_depth"));
    cfg.tree.min_samples_leaf = static_cast<int>(text::require_int(detail::param(params, "min_samples_leaf"), "min_samples_leaf"));
    cfg.bootstrap = detail::param(params, "bootstrap") == "1";
    std::vector<Tree> trees;
    for (int t = 0; t < cfg.n_estimators; ++t) trees.push_back(Tree::read(is));
    return BaggedEnsemble(std::move(trees), features, classes, cfg);
}

}  // namespace ensembleguard
