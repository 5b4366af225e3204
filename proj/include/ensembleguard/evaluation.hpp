#pragma once

#include "ensembleguard/common.hpp"
#include "ensembleguard/data_ingest.hpp"

#include <string>
#include <vector>

namespace ensembleguard {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts;

    std::size_t size() const { return counts.size(); }
    std::size_t at(std::size_t t, std::size_t p) const { return counts[t][p]; }

    std::size_t total() const {
        std::size_t s = 0;
        for (const auto& row : counts) {
            for (auto v : row) s += v;
        }
        return s;
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t num_classes) {
    if (y_true.size() != y_pred.size()) throw UserError("confusion: label and prediction counts differ");
    ConfusionMatrix m;
    m.counts.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const auto t = y_true[i];
        const auto p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes || static_cast<std::size_t>(p) >= num_classes) {
            throw UserError("confusion: class index out of range at position " + std::to_string(i));
        }
        ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return m;
}

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    std::size_t predicted = 0;

    bool operator==(const ClassMetrics&) const = default;
};

/// Zero denominators give 0. Names default to the class index.
inline std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& m, const std::vector<std::string>& names = {}) {
    const auto C = m.size();
    std::vector<ClassMetrics> out(C);
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t row = 0, col = 0;
        for (std::size_t k = 0; k < C; ++k) {
            row += m.counts[c][k];
            col += m.counts[k][c];
        }
        const auto tp = static_cast<double>(m.counts[c][c]);
        auto& r = out[c];
        r.name = c < names.size() ? names[c] : std::to_string(c);
        r.support = row;
        r.predicted = col;
        r.precision = col ? tp / static_cast<double>(col) : 0.0;
        r.recall = row ? tp / static_cast<double>(row) : 0.0;
        r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    }
    return out;
}

inline double accuracy(const ConfusionMatrix& m) {
    const auto total = m.total();
    if (total == 0) throw UserError("accuracy of an empty confusion matrix");
    std::size_t diag = 0;
    for (std::size_t c = 0; c < m.size(); ++c) diag += m.counts[c][c];
    return static_cast<double>(diag) / static_cast<double>(total);
}

struct Average {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

/// Unweighted mean over classes that occur in the truth or the predictions.
inline Average macro_average(const std::vector<ClassMetrics>& rows) {
    Average a;
    std::size_t k = 0;
    for (const auto& r : rows) {
        a.support += r.support;
        if (r.support == 0 && r.predicted == 0) continue;
        a.precision += r.precision;
        a.recall += r.recall;
        a.f1 += r.f1;
        ++k;
    }
    if (k) {
        a.precision /= static_cast<double>(k);
        a.recall /= static_cast<double>(k);
        a.f1 /= static_cast<double>(k);
    }
    return a;
}

inline Average weighted_average(const std::vector<ClassMetrics>& rows) {
    Average a;
    for (const auto& r : rows) {
        const auto w = static_cast<double>(r.support);
        a.precision += w * r.precision;
        a.recall += w * r.recall;
        a.f1 += w * r.f1;
        a.support += r.support;
    }
    if (a.support) {
        const auto s = static_cast<double>(a.support);
        a.precision /= s;
        a.recall /= s;
        a.f1 /= s;
    }
    return a;
}

struct EvalReport {
    std::string model_id;
    std::string dataset;
    std::vector<ClassMetrics> classes;  // taxonomy order, names are display names
    std::optional<double> accuracy;
    std::optional<Average> macro;
    std::optional<Average> weighted;
    std::optional<double> fidelity;  // distilled tree only
    ConfusionMatrix matrix;
};

inline EvalReport evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred, const ClassSet& classes,
                           std::string model_id, std::string dataset) {
    EvalReport r;
    r.model_id = std::move(model_id);
    r.dataset = std::move(dataset);
    r.matrix = confusion(y_true, y_pred, classes.size());
    r.classes = class_metrics(r.matrix, classes.display);
    if (r.matrix.total() > 0) r.accuracy = accuracy(r.matrix);
    r.macro = macro_average(r.classes);
    r.weighted = weighted_average(r.classes);
    return r;
}

enum class ReportFormat { Plain, Csv, Markdown };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "plain" || s == "txt") return ReportFormat::Plain;
    if (s == "csv") return ReportFormat::Csv;
    if (s == "markdown" || s == "md") return ReportFormat::Markdown;
    throw ConfigError("unknown report format '" + std::string(s) + "'");
}

struct RenderOptions {
    bool attacks_only = false;  // drop class 0 (benign / normal) rows
};

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

}  // namespace detail

/// One row per class, then accuracy, averages and fidelity when present.
/// Numbers have three decimals.
inline std::string render_report(const EvalReport& r, ReportFormat fmt, RenderOptions opt = {}) {
    using text::fixed;
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Class", "Precision", "Recall", "F1", "Support"});
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        if (opt.attacks_only && c == 0) continue;
        const auto& m = r.classes[c];
        rows.push_back({m.name, fixed(m.precision, 3), fixed(m.recall, 3), fixed(m.f1, 3), std::to_string(m.support)});
    }
    if (r.accuracy) rows.push_back({"Accuracy", "", "", fixed(*r.accuracy, 3), std::to_string(r.matrix.total())});
    if (!r.classes.empty()) {
        auto avg = [&](const char* name, const std::optional<Average>& a) {
            if (a) rows.push_back({name, fixed(a->precision, 3), fixed(a->recall, 3), fixed(a->f1, 3), std::to_string(a->support)});
        };
        avg("Macro avg", r.macro);
        avg("Weighted avg", r.weighted);
    }
    if (r.fidelity) rows.push_back({"Fidelity", "", "", fixed(*r.fidelity, 3), ""});

    std::string out;
    switch (fmt) {
        case ReportFormat::Plain:
            for (const auto& row : rows) out += text::join(row, " | ") + "\n";
            break;
        case ReportFormat::Csv:
            for (auto row : rows) {
                for (auto& f : row) f = detail::csv_field(f);
                out += text::join(row, ",") + "\n";
            }
            break;
        case ReportFormat::Markdown:
            if (!r.model_id.empty()) out += "### " + r.model_id + (r.dataset.empty() ? "" : " (" + r.dataset + ")") + "\n\n";
            for (std::size_t i = 0; i < rows.size(); ++i) {
                out += "| " + text::join(rows[i], " | ") + " |\n";
                if (i == 0) out += "|---|---:|---:|---:|---:|\n";
            }
            break;
    }
    return out;
}

inline std::string render_confusion(const ConfusionMatrix& m, const std::vector<std::string>& names) {
    std::string out = "true\\pred";
    for (const auto& n : names) out += "," + detail::csv_field(n);
    out += "\n";
    for (std::size_t t = 0; t < m.size(); ++t) {
        out += detail::csv_field(t < names.size() ? names[t] : std::to_string(t));
        for (auto v : m.counts[t]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

}  // namespace ensembleguard
