#pragma once

#include "ensembleguard/cart.hpp"
#include "ensembleguard/common.hpp"
#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/evaluation.hpp"
#include "ensembleguard/meta_ensemble.hpp"

#include <span>
#include <string>
#include <vector>

namespace ensembleguard {

struct AttackRatio {
    std::string name;
    std::size_t predicted = 0;
    double percent = 0.0;
    std::optional<std::size_t> actual;  // ground-truth count when labels were supplied
};

struct AttackRatioReport {
    std::vector<AttackRatio> rows;  // taxonomy order
    std::size_t total = 0;
};

/// Share of each class among the predictions.
inline AttackRatioReport attack_ratios(const std::vector<int>& predictions, const ClassSet& classes,
                                       const std::vector<int>* truth = nullptr) {
    if (predictions.empty()) throw UserError("nothing to report");
    if (truth && truth->size() != predictions.size()) throw UserError("attack_ratios: label and prediction counts differ");
    AttackRatioReport r;
    r.total = predictions.size();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        r.rows.push_back({c < classes.display.size() ? classes.display[c] : classes.names[c], 0, 0.0,
                          truth ? std::optional<std::size_t>(0) : std::nullopt});
    }
    auto bump = [&](int c, bool actual) {
        if (c < 0 || static_cast<std::size_t>(c) >= classes.size()) throw UserError("attack_ratios: class index out of range");
        auto& row = r.rows[static_cast<std::size_t>(c)];
        if (actual) {
            ++*row.actual;
        } else {
            ++row.predicted;
        }
    };
    for (auto p : predictions) bump(p, false);
    if (truth) {
        for (auto t : *truth) bump(t, true);
    }
    for (auto& row : r.rows) row.percent = 100.0 * static_cast<double>(row.predicted) / static_cast<double>(r.total);
    return r;
}

inline std::string render_ratios(const AttackRatioReport& r, ReportFormat fmt) {
    const bool truth = !r.rows.empty() && r.rows.front().actual.has_value();
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Class", "Predicted", "Percent"});
    if (truth) rows.back().push_back("Actual");
    for (const auto& row : r.rows) {
        rows.push_back({row.name, std::to_string(row.predicted), text::fixed(row.percent, 2) + "%"});
        if (truth) rows.back().push_back(std::to_string(*row.actual));
    }
    rows.push_back({"Total", std::to_string(r.total), "100.00%"});
    if (truth) rows.back().push_back(std::to_string(r.total));
    std::string out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (fmt == ReportFormat::Markdown) {
            out += "| " + text::join(rows[i], " | ") + " |\n";
            if (i == 0) out += truth ? "|---|---:|---:|---:|\n" : "|---|---:|---:|\n";
        } else if (fmt == ReportFormat::Csv) {
            for (auto& f : rows[i]) f = detail::csv_field(f);
            out += text::join(rows[i], ",") + "\n";
        } else {
            out += text::join(rows[i], " | ") + "\n";
        }
    }
    return out;
}

struct Condition {
    int feature = 0;
    std::string name;
    bool greater = false;  // false: x <= threshold
    double threshold = 0.0;

    bool holds(std::span<const double> x) const {
        const double v = x[static_cast<std::size_t>(feature)];
        return greater ? v > threshold : v <= threshold;
    }
};

struct Rule {
    std::vector<Condition> conditions;
    std::size_t label = 0;
    std::string class_name;
    ClassDistribution distribution;

    bool matches(std::span<const double> x) const {
        for (const auto& c : conditions) {
            if (!c.holds(x)) return false;
        }
        return true;
    }
};

struct RuleSet {
    std::vector<Rule> rules;  // depth-first, left branch first

    /// Indices of every rule that fires on x.
    std::vector<std::size_t> firing(std::span<const double> x) const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < rules.size(); ++k) {
            if (rules[k].matches(x)) out.push_back(k);
        }
        return out;
    }
};

/// One rule per root-to-leaf path of the tree.
inline RuleSet extract_rules(const Tree& tree, const std::vector<std::string>& feature_names, const ClassSet& classes) {
    RuleSet rs;
    if (tree.empty()) return rs;
    std::vector<Condition> path;
    auto name_of = [&](int f) {
        return static_cast<std::size_t>(f) < feature_names.size() ? feature_names[static_cast<std::size_t>(f)]
                                                                   : "x" + std::to_string(f);
    };
    auto walk = [&](auto&& self, int k) -> void {
        const auto& nd = tree.nodes()[static_cast<std::size_t>(k)];
        if (nd.is_leaf()) {
            Rule r;
            r.conditions = path;
            r.distribution = nd.value;
            r.label = argmax(nd.value);
            r.class_name = r.label < classes.display.size() ? classes.display[r.label] : std::to_string(r.label);
            rs.rules.push_back(std::move(r));
            return;
        }
        path.push_back({nd.feature, name_of(nd.feature), false, nd.threshold});
        self(self, nd.left);
        path.back().greater = true;
        self(self, nd.right);
        path.pop_back();
    };
    walk(walk, 0);
    return rs;
}

/// Rules over meta-features named "P(model=m, class=c)".
inline RuleSet extract_rules(const DistilledTree& tree, const std::vector<std::string>& model_ids, const ClassSet& classes) {
    return extract_rules(tree.tree.tree(), meta_feature_names(model_ids, classes), classes);
}

inline std::string render_rules(const RuleSet& rs, ReportFormat fmt) {
    std::string out;
    for (std::size_t k = 0; k < rs.rules.size(); ++k) {
        const auto& r = rs.rules[k];
        std::vector<std::string> conds;
        for (const auto& c : r.conditions) conds.push_back(c.name + (c.greater ? " > " : " <= ") + text::fixed(c.threshold, 6));
        std::vector<std::string> dist;
        for (double v : r.distribution) dist.push_back(text::fixed(v, 3));
        const auto when = conds.empty() ? std::string("TRUE") : text::join(conds, " AND ");
        const auto tag = "R" + std::to_string(k + 1);
        if (fmt == ReportFormat::Markdown) {
            out += "- **" + tag + "**: IF " + when + " THEN **" + r.class_name + "** [" + text::join(dist, ", ") + "]\n";
        } else if (fmt == ReportFormat::Csv) {
            out += tag + "," + detail::csv_field(when) + "," + detail::csv_field(r.class_name) + "," + text::join(dist, " ") + "\n";
        } else {
            out += tag + ": IF " + when + " THEN " + r.class_name + " [" + text::join(dist, " ") + "]\n";
        }
    }
    return out;
}

/// Fraction of rows on which the tree and the meta-model pick the same class.
inline double fidelity_report(const DistilledTree& tree, const MetaModel& meta, const Matrix& features) {
    if (features.rows() == 0) throw UserError("fidelity: empty feature set");
    return agreement(tree.predict(features), predict_labels(meta.predict_proba(features)));
}

}  // namespace ensembleguard
