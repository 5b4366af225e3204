#pragma once

#include "ensembleguard/common.hpp"

#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ensembleguard {

/// Internal nodes route x[feature] <= threshold to the left child. Leaves
/// carry either a class distribution or one boosting score.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> value;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

/// Binary tree stored as a flat node array; node 0 is the root.
class Tree {
public:
    Tree() = default;
    explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    static Tree leaf(std::vector<double> value) { return Tree({TreeNode{-1, 0.0, -1, -1, std::move(value)}}); }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& nodes() { return nodes_; }
    bool empty() const { return nodes_.empty(); }

    int leaf_index(const double* x) const {
        int k = 0;
        while (!nodes_[static_cast<std::size_t>(k)].is_leaf()) {
            const auto& nd = nodes_[static_cast<std::size_t>(k)];
            k = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
        }
        return k;
    }

    const std::vector<double>& predict(const double* x) const {
        return nodes_[static_cast<std::size_t>(leaf_index(x))].value;
    }

    std::size_t num_leaves() const {
        std::size_t n = 0;
        for (const auto& nd : nodes_) n += nd.is_leaf() ? 1 : 0;
        return n;
    }

    std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }

    /// Largest feature index referenced, or -1.
    int max_feature() const {
        int m = -1;
        for (const auto& nd : nodes_) m = std::max(m, nd.feature);
        return m;
    }

    // Depth-first, left child first.
    void write(std::ostream& os) const {
        os << "tree " << count_reachable(0) << "\n";
        write_node(os, 0);
    }

    static Tree read(std::istream& is) {
        std::string tag;
        std::size_t count = 0;
        if (!(is >> tag >> count) || tag != "tree") throw ParseError("tree record: expected 'tree <node count>'");
        Tree t;
        t.nodes_.reserve(count);
        read_node(is, t.nodes_);
        if (t.nodes_.size() != count) throw ParseError("tree record: node count mismatch");
        return t;
    }

    bool operator==(const Tree&) const = default;

private:
    std::size_t depth_from(int k) const {
        const auto& nd = nodes_[static_cast<std::size_t>(k)];
        if (nd.is_leaf()) return 0;
        return 1 + std::max(depth_from(nd.left), depth_from(nd.right));
    }

    std::size_t count_reachable(int k) const {
        const auto& nd = nodes_[static_cast<std::size_t>(k)];
        if (nd.is_leaf()) return 1;
        return 1 + count_reachable(nd.left) + count_reachable(nd.right);
    }

    void write_node(std::ostream& os, int k) const {
        const auto& nd = nodes_[static_cast<std::size_t>(k)];
        if (nd.is_leaf()) {
            os << 'L';
            for (double v : nd.value) os << ' ' << text::fmt(v);
            os << "\n";
            return;
        }
        os << "N " << nd.feature << ' ' << text::fmt(nd.threshold) << "\n";
        write_node(os, nd.left);
        write_node(os, nd.right);
    }

    static int read_node(std::istream& is, std::vector<TreeNode>& out) {
        std::string line;
        do {
            if (!std::getline(is, line)) throw ParseError("tree record truncated");
        } while (text::trim(line).empty());
        auto parts = text::split(text::trim(line), ' ');
        const int id = static_cast<int>(out.size());
        out.emplace_back();
        if (parts[0] == "L") {
            for (std::size_t i = 1; i < parts.size(); ++i) out.back().value.push_back(text::require_double(parts[i], "leaf value"));
            return id;
        }
        if (parts[0] != "N" || parts.size() != 3) throw ParseError("tree record: bad node line '" + line + "'");
        out.back().feature = static_cast<int>(text::require_int(parts[1], "feature index"));
        out.back().threshold = text::require_double(parts[2], "threshold");
        const int l = read_node(is, out);
        const int r = read_node(is, out);
        out[static_cast<std::size_t>(id)].left = l;
        out[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    std::vector<TreeNode> nodes_;
};

/// Per-feature row orderings by (value, row index), shared across the trees
/// trained on one matrix.
struct SortedColumns {
    std::vector<std::vector<std::uint32_t>> order;

    static SortedColumns build(const Matrix& x) {
        SortedColumns s;
        s.order.resize(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            auto& ord = s.order[static_cast<std::size_t>(j)];
            ord.resize(static_cast<std::size_t>(x.rows()));
            for (std::uint32_t i = 0; i < ord.size(); ++i) ord[i] = i;
            std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, j) < x(b, j); });
        }
        return s;
    }
};

/// Threshold strictly between two consecutive distinct values, so that
/// lo routes left and hi routes right even after rounding.
inline double split_midpoint(double lo, double hi) {
    double mid = lo + (hi - lo) / 2.0;
    if (!(mid < hi)) mid = lo;
    return mid;
}

}  // namespace ensembleguard
