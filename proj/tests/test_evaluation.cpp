#include "ensembleguard/evaluation.hpp"

#include "support/generators.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace ensembleguard;

namespace {

ConfusionMatrix from_counts(std::vector<std::vector<std::size_t>> counts) {
    ConfusionMatrix m;
    m.counts = std::move(counts);
    return m;
}

EvalReport report_with(std::vector<ClassMetrics> rows) {
    EvalReport r;
    r.model_id = "meta";
    r.dataset = "nsl-kdd";
    r.classes = std::move(rows);
    return r;
}

}  // namespace

TEST(Confusion, Examples) {
    EXPECT_EQ(confusion({0, 1}, {0, 1}, 2).counts, (std::vector<std::vector<std::size_t>>{{1, 0}, {0, 1}}));
    EXPECT_EQ(confusion({0, 0}, {1, 1}, 2).counts, (std::vector<std::vector<std::size_t>>{{0, 2}, {0, 0}}));
    const auto empty = confusion({}, {}, 3);
    EXPECT_EQ(empty.total(), 0u);
    EXPECT_EQ(empty.size(), 3u);
}

TEST(Confusion, RejectsBadIndices) {
    EXPECT_THROW(confusion({0, 2}, {0, 1}, 2), UserError);
    EXPECT_THROW(confusion({0}, {-1}, 2), UserError);
    EXPECT_THROW(confusion({0, 1}, {0}, 2), UserError);
}

TEST(ClassMetrics, DiagonalIsPerfect) {
    for (const auto& m : class_metrics(from_counts({{4, 0, 0}, {0, 2, 0}, {0, 0, 7}}))) {
        EXPECT_EQ(m.precision, 1.0);
        EXPECT_EQ(m.recall, 1.0);
        EXPECT_EQ(m.f1, 1.0);
    }
}

TEST(ClassMetrics, TwoThirds) {
    // class 0: TP 2, FP 1, FN 1
    const auto rows = class_metrics(from_counts({{2, 1}, {1, 0}}));
    EXPECT_DOUBLE_EQ(rows[0].precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(rows[0].recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(rows[0].f1, 2.0 / 3.0);
    EXPECT_EQ(rows[0].support, 3u);
}

TEST(ClassMetrics, AbsentClassIsZero) {
    const auto rows = class_metrics(from_counts({{3, 0, 1}, {0, 0, 0}, {1, 0, 2}}), {"a", "b", "c"});
    EXPECT_EQ(rows[1].name, "b");
    EXPECT_EQ(rows[1].precision, 0.0);
    EXPECT_EQ(rows[1].recall, 0.0);
    EXPECT_EQ(rows[1].f1, 0.0);
    EXPECT_EQ(rows[1].support, 0u);
}

TEST(Accuracy, Examples) {
    EXPECT_EQ(accuracy(from_counts({{1, 0}, {0, 1}})), 1.0);
    EXPECT_EQ(accuracy(from_counts({{0, 2}, {0, 0}})), 0.0);
    EXPECT_EQ(accuracy(from_counts({{3, 1}, {1, 3}})), 0.75);
    EXPECT_THROW(accuracy(from_counts({{0, 0}, {0, 0}})), UserError);
}

TEST(Averages, MacroSkipsAbsentClasses) {
    const auto rows = class_metrics(from_counts({{2, 0, 0}, {0, 0, 0}, {0, 0, 2}}));
    const auto macro = macro_average(rows);
    EXPECT_EQ(macro.f1, 1.0);
    EXPECT_EQ(macro.support, 4u);
}

TEST(Metrics, AgreeWithBruteForceOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = 2 + rng.below(5);
        // counts <= 50 per cell
        std::vector<int> truth, pred;
        for (std::size_t t = 0; t < C; ++t) {
            for (std::size_t p = 0; p < C; ++p) {
                const auto k = rng.below(51);
                for (std::size_t i = 0; i < k; ++i) {
                    truth.push_back(static_cast<int>(t));
                    pred.push_back(static_cast<int>(p));
                }
            }
        }
        if (truth.empty()) continue;
        const auto m = confusion(truth, pred, C);
        const auto rows = class_metrics(m);
        const auto want = eg_test::brute_metrics(truth, pred, C);
        for (std::size_t c = 0; c < C; ++c) {
            EXPECT_EQ(rows[c].precision, want[c].precision);
            EXPECT_EQ(rows[c].recall, want[c].recall);
            EXPECT_EQ(rows[c].f1, want[c].f1);
            EXPECT_EQ(rows[c].support, want[c].support);
        }
        EXPECT_EQ(accuracy(m), eg_test::brute_accuracy(truth, pred));
    }
}

TEST(Metrics, SupportSumsAndWeightedRecallIsAccuracy) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = 2 + rng.below(5);
        const std::size_t n = 1 + rng.below(300);
        const auto truth = eg_test::random_labels(rng, n, C);
        const auto pred = eg_test::noisy_copy(rng, truth, C, rng.uniform());
        const auto m = confusion(truth, pred, C);
        const auto rows = class_metrics(m);
        std::size_t support = 0;
        for (const auto& r : rows) support += r.support;
        EXPECT_EQ(support, n);
        EXPECT_NEAR(weighted_average(rows).recall, accuracy(m), 1e-12);
    }
}

TEST(Evaluate, FillsReport) {
    const auto classes = eg_test::class_set(3);
    const auto r = evaluate({0, 1, 2, 2}, {0, 1, 2, 1}, classes, "gbm", "nsl-kdd");
    EXPECT_EQ(r.model_id, "gbm");
    EXPECT_EQ(r.classes[2].name, "Class 2");
    ASSERT_TRUE(r.accuracy.has_value());
    EXPECT_EQ(*r.accuracy, 0.75);
    EXPECT_FALSE(r.fidelity.has_value());
}

TEST(Render, CicDosRow) {
    const auto r = report_with({{"DoS Attacks", 0.98, 0.986, 0.979, 387, 0}});
    const auto text = render_report(r, ReportFormat::Plain);
    EXPECT_NE(text.find("DoS Attacks | 0.980 | 0.986 | 0.979 | 387\n"), std::string::npos) << text;
}

TEST(Render, NslDosRow) {
    const auto r = report_with({{"DoS Attacks", 0.971, 0.981, 0.979, 100, 0}});
    const auto text = render_report(r, ReportFormat::Plain);
    EXPECT_NE(text.find("DoS Attacks | 0.971 | 0.981 | 0.979 | 100\n"), std::string::npos) << text;
}

TEST(Render, EmptyClassListIsHeaderAndAccuracy) {
    EvalReport r;
    r.accuracy = 0.5;
    r.macro = Average{};
    r.weighted = Average{};
    EXPECT_EQ(render_report(r, ReportFormat::Plain), "Class | Precision | Recall | F1 | Support\nAccuracy |  |  | 0.500 | 0\n");
}

TEST(Render, FullPlainLayout) {
    const auto classes = eg_test::class_set(2);
    auto r = evaluate({0, 0, 1, 1}, {0, 1, 1, 1}, classes, "meta", "nsl-kdd");
    r.fidelity = 0.95;
    EXPECT_EQ(render_report(r, ReportFormat::Plain),
              "Class | Precision | Recall | F1 | Support\n"
              "Class 0 | 1.000 | 0.500 | 0.667 | 2\n"
              "Class 1 | 0.667 | 1.000 | 0.800 | 2\n"
              "Accuracy |  |  | 0.750 | 4\n"
              "Macro avg | 0.833 | 0.750 | 0.733 | 4\n"
              "Weighted avg | 0.833 | 0.750 | 0.733 | 4\n"
              "Fidelity |  |  | 0.950 | \n");
    EXPECT_EQ(render_report(r, ReportFormat::Plain, RenderOptions{true}).find("Class 0 |"), std::string::npos);
}

TEST(Render, CsvAndMarkdown) {
    const auto r = report_with({{"Web, XSS", 0.5, 0.25, 1.0 / 3.0, 4, 2}});
    const auto csv = render_report(r, ReportFormat::Csv);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "Class,Precision,Recall,F1,Support");
    EXPECT_NE(csv.find("\"Web, XSS\",0.500,0.250,0.333,4"), std::string::npos) << csv;
    const auto md = render_report(r, ReportFormat::Markdown);
    EXPECT_EQ(md.rfind("### meta (nsl-kdd)\n\n", 0), 0u) << md;
    EXPECT_NE(md.find("| Class | Precision | Recall | F1 | Support |\n|---|---:|---:|---:|---:|\n"), std::string::npos);
    EXPECT_EQ(parse_report_format("md"), ReportFormat::Markdown);
    EXPECT_THROW(parse_report_format("xml"), ConfigError);
}

TEST(Render, Deterministic) {
    Rng rng(3);
    const auto classes = eg_test::class_set(4);
    const auto truth = eg_test::random_labels(rng, 200, 4);
    const auto pred = eg_test::noisy_copy(rng, truth, 4, 0.7);
    const auto a = evaluate(truth, pred, classes, "m", "d");
    const auto b = evaluate(truth, pred, classes, "m", "d");
    for (auto f : {ReportFormat::Plain, ReportFormat::Csv, ReportFormat::Markdown}) EXPECT_EQ(render_report(a, f), render_report(b, f));
}

TEST(Render, CicTableLayout) {
    // EnsembleGuard block of the CIC-IDS-2017 per-class table
    const auto tax = class_taxonomy(DatasetKind::CicIds2017);
    EvalReport r;
    r.classes.push_back({tax.classes.display[0], 0, 0, 0, 0, 0});
    const double v[][3] = {{0.98, 0.986, 0.979}, {0.989, 0.993, 0.987}, {0.986, 0.979, 0.973},
                           {0.982, 0.980, 0.960}, {0.991, 0.987, 0.983}, {0.986, 0.986, 0.982}};
    const std::size_t support[] = {387, 14, 612, 8, 231, 452};
    for (std::size_t i = 0; i < 6; ++i) r.classes.push_back({tax.classes.display[i + 1], v[i][0], v[i][1], v[i][2], support[i], 0});
    EXPECT_EQ(render_report(r, ReportFormat::Plain, RenderOptions{true}),
              "Class | Precision | Recall | F1 | Support\n"
              "DoS Attacks | 0.980 | 0.986 | 0.979 | 387\n"
              "WebAttack Attacks | 0.989 | 0.993 | 0.987 | 14\n"
              "Botnet Attacks | 0.986 | 0.979 | 0.973 | 612\n"
              "PortScan Attacks | 0.982 | 0.980 | 0.960 | 8\n"
              "BruteForce Attacks | 0.991 | 0.987 | 0.983 | 231\n"
              "Infiltration Attacks | 0.986 | 0.986 | 0.982 | 452\n");
}

TEST(Render, ConfusionCsv) {
    EXPECT_EQ(render_confusion(from_counts({{1, 2}, {0, 3}}), {"a", "b"}), "true\\pred,a,b\na,1,2\nb,0,3\n");
}
