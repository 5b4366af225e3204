#include "ensembleguard/explainability.hpp"

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace ensembleguard;

namespace {

ClassSet cic_like() {
    ClassSet cs;
    cs.names = {"Benign", "DoS", "PortScan"};
    cs.display = {"Benign", "DoS Attacks", "PortScan Attacks"};
    return cs;
}

/// Leaves reachable from the root, counted with an explicit stack.
std::size_t reachable_leaves(const Tree& t) {
    std::size_t leaves = 0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const auto& nd = t.nodes()[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (nd.left < 0) {
            ++leaves;
        } else {
            stack.push_back(nd.left);
            stack.push_back(nd.right);
        }
    }
    return leaves;
}

DistilledTree distilled_from(Tree t, std::size_t features, std::size_t classes) {
    DistilledTree d;
    d.tree = CartTree(std::move(t), features, classes, CartConfig{});
    return d;
}

DistilledTree random_distilled(Rng& rng, std::size_t features, std::size_t classes) {
    const std::size_t n = 20 + rng.below(200);
    const auto x = eg_test::random_matrix(rng, n, features);
    const auto y = eg_test::random_labels(rng, n, classes);
    DistilledTree d;
    d.max_depth = 1 + static_cast<int>(rng.below(6));
    d.tree = train_cart(x, y, classes, CartConfig{d.max_depth, 1});
    return d;
}

MetaModel constant_meta(std::size_t inputs, std::size_t classes, std::size_t winner) {
    auto m = init_meta(MetaConfig{}, inputs, classes);
    m.params().setZero();
    m.b2()(static_cast<Eigen::Index>(winner)) = 1.0;
    return m;
}

}  // namespace

TEST(AttackRatios, HalfAndHalf) {
    const auto r = attack_ratios({1, 1, 0, 0}, cic_like());
    EXPECT_EQ(r.total, 4u);
    EXPECT_EQ(r.rows[0].percent, 50.0);
    EXPECT_EQ(r.rows[1].percent, 50.0);
    EXPECT_EQ(r.rows[2].percent, 0.0);
    EXPECT_EQ(r.rows[1].name, "DoS Attacks");
    EXPECT_NE(render_ratios(r, ReportFormat::Plain).find("DoS Attacks | 2 | 50.00%"), std::string::npos);
}

TEST(AttackRatios, AllOneClass) {
    const auto r = attack_ratios({2, 2, 2}, cic_like());
    EXPECT_EQ(r.rows[2].percent, 100.0);
    EXPECT_EQ(r.rows[0].percent, 0.0);
    EXPECT_EQ(r.rows[1].percent, 0.0);
}

TEST(AttackRatios, QuarterQuarterHalf) {
    const auto r = attack_ratios({0, 1, 2, 2}, cic_like());
    EXPECT_EQ(r.rows[0].percent, 25.0);
    EXPECT_EQ(r.rows[1].percent, 25.0);
    EXPECT_EQ(r.rows[2].percent, 50.0);
}

TEST(AttackRatios, EmptyIsAnError) {
    try {
        attack_ratios({}, cic_like());
        FAIL() << "expected an error";
    } catch (const UserError& e) {
        EXPECT_STREQ(e.what(), "nothing to report");
    }
}

TEST(AttackRatios, PercentagesSumToHundred) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t C = 2 + rng.below(8);
        const auto preds = eg_test::random_labels(rng, 1 + rng.below(500), C);
        const auto r = attack_ratios(preds, eg_test::class_set(C));
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& row : r.rows) {
            sum += row.percent;
            count += row.predicted;
        }
        EXPECT_NEAR(sum, 100.0, 0.01);
        EXPECT_EQ(count, preds.size());
    }
}

TEST(AttackRatios, WithTruthAddsActualColumn) {
    const std::vector<int> truth{0, 0, 1, 2};
    const auto r = attack_ratios({0, 1, 1, 2}, cic_like(), &truth);
    EXPECT_EQ(*r.rows[0].actual, 2u);
    const auto text = render_ratios(r, ReportFormat::Csv);
    EXPECT_EQ(text.substr(0, text.find('\n')), "Class,Predicted,Percent,Actual");
    EXPECT_NE(text.find("Total,4,100.00%,4"), std::string::npos) << text;
}

TEST(Rules, SingleLeafIsUnconditional) {
    const auto d = distilled_from(Tree::leaf({0.1, 0.9, 0.0}), 6, 3);
    const auto rs = extract_rules(d, {"lstm", "gbm"}, cic_like());
    ASSERT_EQ(rs.rules.size(), 1u);
    EXPECT_TRUE(rs.rules[0].conditions.empty());
    EXPECT_EQ(rs.rules[0].class_name, "DoS Attacks");
    EXPECT_EQ(render_rules(rs, ReportFormat::Plain), "R1: IF TRUE THEN DoS Attacks [0.100 0.900 0.000]\n");
}

TEST(Rules, DepthOneGivesComplementaryPair) {
    const Tree t({TreeNode{4, 0.42, 1, 2, {}}, TreeNode{-1, 0, -1, -1, {1.0, 0.0, 0.0}}, TreeNode{-1, 0, -1, -1, {0.0, 1.0, 0.0}}});
    const auto rs = extract_rules(distilled_from(t, 6, 3), {"lstm", "gbm"}, cic_like());
    ASSERT_EQ(rs.rules.size(), 2u);
    const auto& a = rs.rules[0].conditions;
    const auto& b = rs.rules[1].conditions;
    ASSERT_EQ(a.size(), 1u);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(a[0].feature, b[0].feature);
    EXPECT_EQ(a[0].threshold, b[0].threshold);
    EXPECT_FALSE(a[0].greater);
    EXPECT_TRUE(b[0].greater);
    EXPECT_EQ(a[0].name, "P(model=gbm, class=DoS)");
    EXPECT_EQ(render_rules(rs, ReportFormat::Plain),
              "R1: IF P(model=gbm, class=DoS) <= 0.420000 THEN Benign [1.000 0.000 0.000]\n"
              "R2: IF P(model=gbm, class=DoS) > 0.420000 THEN DoS Attacks [0.000 1.000 0.000]\n");
}

TEST(Rules, CountEqualsLeafCount) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto d = random_distilled(rng, 6, 3);
        const auto rs = extract_rules(d, {"lstm", "gbm"}, cic_like());
        EXPECT_EQ(rs.rules.size(), reachable_leaves(d.tree.tree()));
    }
}

TEST(Rules, PartitionTheFeatureSpace) {
    Rng rng(3);
    std::size_t checked = 0;
    for (int trial = 0; trial < 5; ++trial) {
        const auto d = random_distilled(rng, 6, 3);
        const auto rs = extract_rules(d, {"lstm", "gbm"}, cic_like());
        for (int k = 0; k < 200; ++k) {
            std::vector<double> x(6);
            for (auto& v : x) v = rng.normal();
            const auto fired = rs.firing(x);
            ASSERT_EQ(fired.size(), 1u);
            EXPECT_EQ(rs.rules[fired[0]].label, argmax(d.tree.predict_proba(std::span<const double>(x))));
            ++checked;
        }
    }
    EXPECT_EQ(checked, 1000u);
}

TEST(Rules, RenderingIsDeterministic) {
    Rng a(4), b(4);
    const auto da = random_distilled(a, 6, 3);
    const auto db = random_distilled(b, 6, 3);
    for (auto f : {ReportFormat::Plain, ReportFormat::Csv, ReportFormat::Markdown}) {
        EXPECT_EQ(render_rules(extract_rules(da, {"x", "y"}, cic_like()), f), render_rules(extract_rules(db, {"x", "y"}, cic_like()), f));
    }
}

TEST(Fidelity, UnlimitedDepthOnFitSet) {
    Rng rng(5);
    const auto f = eg_test::random_matrix(rng, 100, 6);
    MetaConfig c;
    c.hidden = 8;
    c.epochs = 5;
    const auto meta = train_meta(f, eg_test::random_labels(rng, 100, 3), 3, c);
    const auto d = distill_to_tree(meta, f, 0, 1, 1.0);
    EXPECT_EQ(fidelity_report(d, meta, f), 1.0);
}

TEST(Fidelity, ConstantPredictors) {
    Rng rng(6);
    const auto f = eg_test::random_matrix(rng, 30, 4);
    const auto same = distilled_from(Tree::leaf({0.0, 1.0}), 4, 2);
    EXPECT_EQ(fidelity_report(same, constant_meta(4, 2, 1), f), 1.0);
    EXPECT_EQ(fidelity_report(same, constant_meta(4, 2, 0), f), 0.0);
    EXPECT_THROW(fidelity_report(same, constant_meta(4, 2, 0), Matrix(0, 4)), UserError);
}
