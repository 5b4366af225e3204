#pragma once

#include "ensembleguard/common.hpp"
#include "ensembleguard/tree.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace ensembleguard {

struct GrowthLimits {
    int max_depth = 0;            // <= 0: unlimited
    double min_samples_leaf = 1;  // compared against the policy's sample weight
    double min_gain = 1e-12;
};

/// Gini impurity over weighted class counts.
class GiniPolicy {
public:
    struct Stats {
        std::vector<double> counts;
        double weight = 0.0;
        double sumsq = 0.0;  // sum of squared counts
    };

    // Left-side accumulator; the right side is the parent minus the left.
    struct Acc {
        const Stats* parent = nullptr;
        std::vector<double> left;
        double lw = 0.0;
        double lsq = 0.0;
        double cross = 0.0;  // sum_c parent_c * left_c
    };

    GiniPolicy(const std::vector<int>& labels, std::size_t num_classes) : labels_(labels), classes_(num_classes) {}

    Stats make() const { return Stats{std::vector<double>(classes_, 0.0), 0.0, 0.0}; }

    void add(Stats& s, std::size_t i, double w) const {
        auto& c = s.counts[static_cast<std::size_t>(labels_[i])];
        s.sumsq += (c + w) * (c + w) - c * c;
        c += w;
        s.weight += w;
    }

    double weight(const Stats& s) const { return s.weight; }

    bool pure(const Stats& s) const {
        for (double c : s.counts) {
            if (c == s.weight) return true;
        }
        return false;
    }

    std::vector<double> leaf(const Stats& s) const {
        std::vector<double> v(classes_, 0.0);
        for (std::size_t c = 0; c < classes_; ++c) v[c] = s.counts[c] / s.weight;
        return v;
    }

    Acc begin(const Stats& parent) const { return Acc{&parent, std::vector<double>(classes_, 0.0), 0.0, 0.0, 0.0}; }

    void move(Acc& a, std::size_t i, double w) const {
        const auto c = static_cast<std::size_t>(labels_[i]);
        auto& l = a.left[c];
        a.lsq += (l + w) * (l + w) - l * l;
        a.cross += a.parent->counts[c] * w;
        l += w;
        a.lw += w;
    }

    double left_weight(const Acc& a) const { return a.lw; }

    /// Weighted Gini decrease: G(P) - wl/w G(L) - wr/w G(R).
    double gain(const Acc& a) const {
        const auto& p = *a.parent;
        const double rw = p.weight - a.lw;
        const double rsq = p.sumsq - 2.0 * a.cross + a.lsq;
        return (a.lsq / a.lw + rsq / rw - p.sumsq / p.weight) / p.weight;
    }

private:
    const std::vector<int>& labels_;
    std::size_t classes_;
};

/// Gradient statistics for boosting: leaf = sum r / (sum h + lambda), with
/// r the negative gradient. Sample weight is the record count.
class GradientPolicy {
public:
    struct Stats {
        double g = 0.0;
        double h = 0.0;
        double count = 0.0;
    };
    struct Acc {
        const Stats* parent = nullptr;
        Stats left;
    };

    GradientPolicy(const std::vector<double>& residual, const std::vector<double>& hessian, double lambda)
        : r_(residual), h_(hessian), lambda_(lambda) {}

    Stats make() const { return {}; }

    void add(Stats& s, std::size_t i, double w) const {
        s.g += w * r_[i];
        s.h += w * h_[i];
        s.count += w;
    }

    double weight(const Stats& s) const { return s.count; }
    bool pure(const Stats&) const { return false; }
    std::vector<double> leaf(const Stats& s) const { return {value(s)}; }

    double value(const Stats& s) const {
        const double den = s.h + lambda_;
        return den > 0.0 ? s.g / den : 0.0;
    }

    double score(const Stats& s) const {
        const double den = s.h + lambda_;
        return den > 0.0 ? s.g * s.g / den : 0.0;
    }

    Acc begin(const Stats& parent) const { return Acc{&parent, {}}; }
    void move(Acc& a, std::size_t i, double w) const { add(a.left, i, w); }
    double left_weight(const Acc& a) const { return a.left.count; }

    double gain(const Acc& a) const {
        const auto& p = *a.parent;
        const Stats right{p.g - a.left.g, p.h - a.left.h, p.count - a.left.count};
        return score(a.left) + score(right) - score(p);
    }

private:
    const std::vector<double>& r_;
    const std::vector<double>& h_;
    double lambda_;
};

/// Depth-wise exact greedy growth over presorted columns. Rows with zero
/// weight are excluded. Split candidates are midpoints between consecutive
/// distinct values inside a node; gain ties keep the lower feature index and
/// then the lower threshold.
template <typename Policy>
Tree grow_exact(const Matrix& x, const SortedColumns& sorted, const std::vector<double>& weight, const Policy& policy,
                const GrowthLimits& limits) {
    using Stats = typename Policy::Stats;
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const std::size_t p = static_cast<std::size_t>(x.cols());

    struct Frontier {
        int node = 0;
        int depth = 0;
        Stats stats;
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
    };

    std::vector<TreeNode> nodes(1);
    std::vector<int> slot_of(n, -1);
    Stats root = policy.make();
    for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] > 0.0) policy.add(root, i, weight[i]);
    }

    auto splittable = [&](const Stats& s, int depth) {
        if (limits.max_depth > 0 && depth >= limits.max_depth) return false;
        if (policy.weight(s) < 2.0 * limits.min_samples_leaf) return false;
        return !policy.pure(s);
    };

    std::vector<Frontier> frontier;
    if (policy.weight(root) <= 0.0) {
        nodes[0].value = {};
        return Tree(std::move(nodes));
    }
    if (splittable(root, 0)) {
        frontier.push_back({0, 0, root, -1, 0.0, limits.min_gain});
        for (std::size_t i = 0; i < n; ++i) {
            if (weight[i] > 0.0) slot_of[i] = 0;
        }
    } else {
        nodes[0].value = policy.leaf(root);
        return Tree(std::move(nodes));
    }

    std::vector<std::vector<std::uint32_t>> active(p);
    for (std::size_t f = 0; f < p; ++f) {
        active[f].reserve(n);
        for (auto i : sorted.order[f]) {
            if (weight[i] > 0.0) active[f].push_back(i);
        }
    }

    std::vector<typename Policy::Acc> acc;
    std::vector<double> last;
    std::vector<char> seen;
    while (!frontier.empty()) {
        const std::size_t slots = frontier.size();
        for (std::size_t f = 0; f < p; ++f) {
            acc.clear();
            for (const auto& fr : frontier) acc.push_back(policy.begin(fr.stats));
            last.assign(slots, 0.0);
            seen.assign(slots, 0);
            const auto col = static_cast<Eigen::Index>(f);
            for (auto i : active[f]) {
                const auto s = static_cast<std::size_t>(slot_of[i]);
                const double v = x(static_cast<Eigen::Index>(i), col);
                if (seen[s] && v != last[s]) {
                    const double lw = policy.left_weight(acc[s]);
                    const double rw = policy.weight(frontier[s].stats) - lw;
                    if (lw >= limits.min_samples_leaf && rw >= limits.min_samples_leaf) {
                        const double g = policy.gain(acc[s]);
                        auto& fr = frontier[s];
                        if (g > fr.best_gain + 1e-12 * std::max(1.0, std::abs(fr.best_gain))) {
                            fr.best_gain = g;
                            fr.best_feature = static_cast<int>(f);
                            fr.best_threshold = split_midpoint(last[s], v);
                        }
                    }
                }
                policy.move(acc[s], i, weight[i]);
                last[s] = v;
                seen[s] = 1;
            }
        }

        // Apply splits; children get fresh slots in the next frontier.
        std::vector<Frontier> next;
        std::vector<int> child_slot(slots * 2, -1);
        std::vector<Stats> child_stats(slots * 2, policy.make());
        std::vector<int> child_node(slots * 2, -1);
        for (std::size_t s = 0; s < slots; ++s) {
            auto& fr = frontier[s];
            auto& nd = nodes[static_cast<std::size_t>(fr.node)];
            if (fr.best_feature < 0) {
                nd.value = policy.leaf(fr.stats);
                continue;
            }
            nd.feature = fr.best_feature;
            nd.threshold = fr.best_threshold;
            const int l = static_cast<int>(nodes.size());
            nodes.emplace_back();
            nodes.emplace_back();
            nodes[static_cast<std::size_t>(fr.node)].left = l;
            nodes[static_cast<std::size_t>(fr.node)].right = l + 1;
            child_node[2 * s] = l;
            child_node[2 * s + 1] = l + 1;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int s = slot_of[i];
            if (s < 0) continue;
            const auto& fr = frontier[static_cast<std::size_t>(s)];
            if (fr.best_feature < 0) {
                slot_of[i] = -1;
                continue;
            }
            const bool go_left = x(static_cast<Eigen::Index>(i), fr.best_feature) <= fr.best_threshold;
            const auto c = 2 * static_cast<std::size_t>(s) + (go_left ? 0 : 1);
            policy.add(child_stats[c], i, weight[i]);
            slot_of[i] = static_cast<int>(c);  // provisional: child id
        }
        std::vector<int> remap(slots * 2, -1);
        for (std::size_t c = 0; c < slots * 2; ++c) {
            if (child_node[c] < 0) continue;
            const int depth = frontier[c / 2].depth + 1;
            if (splittable(child_stats[c], depth)) {
                remap[c] = static_cast<int>(next.size());
                next.push_back({child_node[c], depth, child_stats[c], -1, 0.0, limits.min_gain});
            } else {
                nodes[static_cast<std::size_t>(child_node[c])].value = policy.leaf(child_stats[c]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (slot_of[i] >= 0) slot_of[i] = remap[static_cast<std::size_t>(slot_of[i])];
        }
        for (auto& list : active) {
            std::erase_if(list, [&](std::uint32_t i) { return slot_of[i] < 0; });
        }
        frontier = std::move(next);
    }
    return Tree(std::move(nodes));
}

/// Quantile bins per feature. Bin b holds values <= thresholds[b]; the last
/// bin is unbounded. With at most max_bins distinct values every value gets
/// its own bin and thresholds are the exact midpoints.
struct FeatureBins {
    std::vector<std::vector<double>> thresholds;
    std::vector<std::uint16_t> bins;  // column-major n x p
    std::size_t rows = 0;

    std::size_t num_bins(std::size_t f) const { return thresholds[f].size() + 1; }
    std::uint16_t at(std::size_t i, std::size_t f) const { return bins[f * rows + i]; }

    static std::vector<double> make_thresholds(std::vector<double> values, std::size_t max_bins) {
        std::sort(values.begin(), values.end());
        std::vector<double> distinct;
        std::vector<std::size_t> counts;
        for (double v : values) {
            if (distinct.empty() || v != distinct.back()) {
                distinct.push_back(v);
                counts.push_back(1);
            } else {
                ++counts.back();
            }
        }
        std::vector<double> thr;
        if (distinct.size() <= max_bins) {
            for (std::size_t k = 0; k + 1 < distinct.size(); ++k) thr.push_back(split_midpoint(distinct[k], distinct[k + 1]));
            return thr;
        }
        const double per_bin = static_cast<double>(values.size()) / static_cast<double>(max_bins);
        double cum = 0.0;
        std::size_t cuts = 0;
        for (std::size_t k = 0; k + 1 < distinct.size() && cuts + 1 < max_bins; ++k) {
            cum += static_cast<double>(counts[k]);
            if (cum >= per_bin * static_cast<double>(cuts + 1)) {
                thr.push_back(split_midpoint(distinct[k], distinct[k + 1]));
                ++cuts;
            }
        }
        return thr;
    }

    static std::uint16_t bin_of(const std::vector<double>& thr, double v) {
        return static_cast<std::uint16_t>(std::lower_bound(thr.begin(), thr.end(), v) - thr.begin());
    }

    static FeatureBins build(const Matrix& x, std::size_t max_bins) {
        FeatureBins b;
        b.rows = static_cast<std::size_t>(x.rows());
        const auto p = static_cast<std::size_t>(x.cols());
        b.thresholds.resize(p);
        b.bins.resize(b.rows * p);
        for (std::size_t f = 0; f < p; ++f) {
            std::vector<double> col(b.rows);
            for (std::size_t i = 0; i < b.rows; ++i) col[i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
            b.thresholds[f] = make_thresholds(col, max_bins);
            for (std::size_t i = 0; i < b.rows; ++i) b.bins[f * b.rows + i] = bin_of(b.thresholds[f], col[i]);
        }
        return b;
    }
};

namespace detail {

struct GradHist {
    std::vector<double> g, h, count;  // flattened over (feature, bin)
};

inline GradHist build_hist(const FeatureBins& bins, const std::vector<std::size_t>& offsets,
                           const std::vector<std::uint32_t>& rows, const std::vector<double>& r,
                           const std::vector<double>& h) {
    GradHist hist;
    const auto total = offsets.back();
    hist.g.assign(total, 0.0);
    hist.h.assign(total, 0.0);
    hist.count.assign(total, 0.0);
    for (std::size_t f = 0; f + 1 < offsets.size(); ++f) {
        const auto base = offsets[f];
        const auto* col = &bins.bins[f * bins.rows];
        for (auto i : rows) {
            const auto k = base + col[i];
            hist.g[k] += r[i];
            hist.h[k] += h[i];
            hist.count[k] += 1.0;
        }
    }
    return hist;
}

struct HistSplit {
    int feature = -1;
    int bin = -1;
    double gain = 0.0;
};

}  // namespace detail

/// Best-first (leaf-wise) growth on binned features, up to max_leaves leaves.
inline Tree grow_leafwise(const FeatureBins& bins, const std::vector<double>& r, const std::vector<double>& h,
                          double lambda, int max_leaves, const GrowthLimits& limits) {
    const std::size_t p = bins.thresholds.size();
    std::vector<std::size_t> offsets(p + 1, 0);
    for (std::size_t f = 0; f < p; ++f) offsets[f + 1] = offsets[f] + bins.num_bins(f);
    GradientPolicy policy(r, h, lambda);
    auto score = [&](double g, double hh) { return policy.score({g, hh, 0.0}); };

    struct Leaf {
        int node = 0;
        int depth = 0;
        std::vector<std::uint32_t> rows;
        GradientPolicy::Stats stats;
        detail::GradHist hist;
        detail::HistSplit best;
    };

    auto find_best = [&](Leaf& leaf) {
        leaf.best = {};
        leaf.best.gain = limits.min_gain;
        if (limits.max_depth > 0 && leaf.depth >= limits.max_depth) return;
        if (leaf.stats.count < 2.0 * limits.min_samples_leaf) return;
        const double parent = policy.score(leaf.stats);
        for (std::size_t f = 0; f < p; ++f) {
            double gl = 0.0, hl = 0.0, cl = 0.0;
            for (std::size_t b = 0; b + 1 < bins.num_bins(f); ++b) {
                const auto k = offsets[f] + b;
                gl += leaf.hist.g[k];
                hl += leaf.hist.h[k];
                cl += leaf.hist.count[k];
                const double cr = leaf.stats.count - cl;
                if (cl < limits.min_samples_leaf || cr < limits.min_samples_leaf) continue;
                const double gain = score(gl, hl) + score(leaf.stats.g - gl, leaf.stats.h - hl) - parent;
                if (gain > leaf.best.gain + 1e-12 * std::max(1.0, std::abs(leaf.best.gain))) {
                    leaf.best = {static_cast<int>(f), static_cast<int>(b), gain};
                }
            }
        }
    };

    std::vector<TreeNode> nodes(1);
    std::vector<Leaf> leaves(1);
    leaves[0].rows.resize(bins.rows);
    for (std::uint32_t i = 0; i < bins.rows; ++i) {
        leaves[0].rows[i] = i;
        policy.add(leaves[0].stats, i, 1.0);
    }
    leaves[0].hist = detail::build_hist(bins, offsets, leaves[0].rows, r, h);
    find_best(leaves[0]);

    int num_leaves = 1;
    while (num_leaves < max_leaves) {
        std::size_t pick = leaves.size();
        for (std::size_t k = 0; k < leaves.size(); ++k) {
            if (leaves[k].best.feature < 0) continue;
            if (pick == leaves.size() || leaves[k].best.gain > leaves[pick].best.gain) pick = k;
        }
        if (pick == leaves.size()) break;

        Leaf parent = std::move(leaves[pick]);
        const auto f = static_cast<std::size_t>(parent.best.feature);
        const auto b = static_cast<std::uint16_t>(parent.best.bin);
        auto& nd = nodes[static_cast<std::size_t>(parent.node)];
        nd.feature = static_cast<int>(f);
        nd.threshold = bins.thresholds[f][b];
        const int l = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(parent.node)].left = l;
        nodes[static_cast<std::size_t>(parent.node)].right = l + 1;

        Leaf left, right;
        left.node = l;
        right.node = l + 1;
        left.depth = right.depth = parent.depth + 1;
        for (auto i : parent.rows) {
            auto& child = bins.at(i, f) <= b ? left : right;
            child.rows.push_back(i);
            policy.add(child.stats, i, 1.0);
        }
        // Build the smaller child's histogram; the other is parent - smaller.
        auto& small = left.rows.size() <= right.rows.size() ? left : right;
        auto& large = &small == &left ? right : left;
        small.hist = detail::build_hist(bins, offsets, small.rows, r, h);
        large.hist = std::move(parent.hist);
        for (std::size_t k = 0; k < large.hist.g.size(); ++k) {
            large.hist.g[k] -= small.hist.g[k];
            large.hist.h[k] -= small.hist.h[k];
            large.hist.count[k] -= small.hist.count[k];
        }
        find_best(left);
        find_best(right);
        leaves[pick] = std::move(left);
        leaves.push_back(std::move(right));
        ++num_leaves;
    }
    for (const auto& leaf : leaves) nodes[static_cast<std::size_t>(leaf.node)].value = policy.leaf(leaf.stats);
    return Tree(std::move(nodes));
}

/// Oblivious (symmetric) growth: every level applies one (feature, threshold)
/// to all of its nodes, chosen by the summed gain over the level.
inline Tree grow_oblivious(const FeatureBins& bins, const std::vector<double>& r, const std::vector<double>& h,
                           double lambda, int depth, double min_gain) {
    const std::size_t n = bins.rows;
    const std::size_t p = bins.thresholds.size();
    GradientPolicy policy(r, h, lambda);
    std::vector<std::uint32_t> leaf_of(n, 0);
    std::vector<std::pair<int, double>> levels;  // (feature, threshold)
    std::vector<std::pair<int, int>> level_bins;

    for (int d = 0; d < depth; ++d) {
        const std::size_t num_leaves = std::size_t{1} << d;
        std::vector<GradientPolicy::Stats> leaf_stats(num_leaves);
        for (std::size_t i = 0; i < n; ++i) policy.add(leaf_stats[leaf_of[i]], i, 1.0);
        double parent_score = 0.0;
        for (const auto& s : leaf_stats) parent_score += policy.score(s);

        detail::HistSplit best;
        best.gain = min_gain;
        std::vector<double> g, hh, cnt;
        for (std::size_t f = 0; f < p; ++f) {
            const std::size_t nb = bins.num_bins(f);
            if (nb < 2) continue;
            g.assign(num_leaves * nb, 0.0);
            hh.assign(num_leaves * nb, 0.0);
            cnt.assign(num_leaves * nb, 0.0);
            const auto* col = &bins.bins[f * n];
            for (std::size_t i = 0; i < n; ++i) {
                const auto k = leaf_of[i] * nb + col[i];
                g[k] += r[i];
                hh[k] += h[i];
                cnt[k] += 1.0;
            }
            std::vector<GradientPolicy::Stats> left(num_leaves);
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                double total = 0.0;
                bool useful = false;
                for (std::size_t leaf = 0; leaf < num_leaves; ++leaf) {
                    auto& L = left[leaf];
                    const auto k = leaf * nb + b;
                    L.g += g[k];
                    L.h += hh[k];
                    L.count += cnt[k];
                    const auto& P = leaf_stats[leaf];
                    const GradientPolicy::Stats R{P.g - L.g, P.h - L.h, P.count - L.count};
                    total += policy.score(L) + policy.score(R);
                    useful = useful || (L.count > 0.0 && R.count > 0.0);
                }
                const double gain = total - parent_score;
                if (useful && gain > best.gain + 1e-12 * std::max(1.0, std::abs(best.gain))) {
                    best = {static_cast<int>(f), static_cast<int>(b), gain};
                }
            }
        }
        if (best.feature < 0) break;
        const auto f = static_cast<std::size_t>(best.feature);
        const auto b = static_cast<std::uint16_t>(best.bin);
        levels.emplace_back(best.feature, bins.thresholds[f][b]);
        for (std::size_t i = 0; i < n; ++i) leaf_of[i] = leaf_of[i] * 2 + (bins.at(i, f) <= b ? 0 : 1);
    }

    const std::size_t num_leaves = std::size_t{1} << levels.size();
    std::vector<GradientPolicy::Stats> leaf_stats(num_leaves);
    for (std::size_t i = 0; i < n; ++i) policy.add(leaf_stats[leaf_of[i]], i, 1.0);

    // Expand into an explicit tree; leaf code bits follow the path (0 = left).
    std::vector<TreeNode> nodes;
    std::function<int(std::size_t, std::size_t)> build = [&](std::size_t level, std::size_t code) -> int {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        if (level == levels.size()) {
            nodes[static_cast<std::size_t>(id)].value = policy.leaf(leaf_stats[code]);
            return id;
        }
        nodes[static_cast<std::size_t>(id)].feature = levels[level].first;
        nodes[static_cast<std::size_t>(id)].threshold = levels[level].second;
        const int l = build(level + 1, code * 2);
        const int rr = build(level + 1, code * 2 + 1);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = rr;
        return id;
    };
    build(0, 0);
    return Tree(std::move(nodes));
}

}  // namespace ensembleguard
