#pragma once

// Random inputs for property tests. Everything is driven by an explicit Rng
// so a failing case can be replayed from its seed.

#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/rng.hpp"

#include <string>
#include <vector>

namespace eg_test {

using ensembleguard::Rng;

inline std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
    std::vector<int> out(n);
    for (auto& y : out) y = static_cast<int>(rng.below(classes));
    return out;
}

/// Predictions that agree with the truth with probability `hit`.
inline std::vector<int> noisy_copy(Rng& rng, const std::vector<int>& truth, std::size_t classes, double hit) {
    std::vector<int> out = truth;
    for (auto& y : out) {
        if (!rng.bernoulli(hit)) y = static_cast<int>(rng.below(classes));
    }
    return out;
}

inline ensembleguard::Matrix random_matrix(Rng& rng, std::size_t n, std::size_t p, double scale = 1.0) {
    ensembleguard::Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = scale * rng.normal();
    }
    return x;
}

/// Small integer grid values, so ties are common.
inline ensembleguard::Matrix grid_matrix(Rng& rng, std::size_t n, std::size_t p, std::uint64_t levels) {
    ensembleguard::Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = static_cast<double>(rng.below(levels));
    }
    return x;
}

inline ensembleguard::ClassSet class_set(std::size_t classes) {
    ensembleguard::ClassSet cs;
    for (std::size_t c = 0; c < classes; ++c) {
        cs.names.push_back("C" + std::to_string(c));
        cs.display.push_back("Class " + std::to_string(c));
    }
    return cs;
}

struct DatasetShape {
    std::size_t n = 50;
    std::size_t numeric = 3;
    std::size_t categorical = 2;
    std::size_t classes = 3;
    double missing = 0.1;
    double heavy_tail = 0.05;  // share of numeric cells drawn far out
};

/// Mixed numeric/categorical records with missing cells; at least one
/// observed value per feature.
inline ensembleguard::Dataset random_dataset(Rng& rng, const DatasetShape& s) {
    using namespace ensembleguard;
    Dataset ds;
    ds.classes = class_set(s.classes);
    ds.schema.label_column = "label";
    std::vector<FeatureKind> kinds;
    for (std::size_t j = 0; j < s.numeric; ++j) kinds.push_back(FeatureKind::Numeric);
    for (std::size_t j = 0; j < s.categorical; ++j) kinds.push_back(FeatureKind::Categorical);
    rng.shuffle(kinds);
    for (std::size_t j = 0; j < kinds.size(); ++j) ds.schema.features.push_back({"f" + std::to_string(j), kinds[j]});
    static const std::vector<std::string> words{"tcp", "udp", "icmp", "http", "ftp", "smtp", "SF", "REJ"};
    for (std::size_t i = 0; i < s.n; ++i) {
        RawRecord r;
        r.label = ds.classes.names[rng.below(s.classes)];
        for (std::size_t j = 0; j < kinds.size(); ++j) {
            if (i > 0 && rng.bernoulli(s.missing)) {
                r.values.emplace_back(std::monostate{});
            } else if (kinds[j] == FeatureKind::Numeric) {
                const double v = rng.bernoulli(s.heavy_tail) ? 25.0 * rng.normal() : rng.normal();
                r.values.emplace_back(v);
            } else {
                r.values.emplace_back(words[rng.below(words.size())]);
            }
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace eg_test
