#include "ensembleguard/recurrent.hpp"

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace ensembleguard;

namespace {

RecurrentConfig cfg_for(CellKind kind, int hidden = 6, std::uint64_t seed = 1) {
    RecurrentConfig c;
    c.kind = kind;
    c.hidden = hidden;
    c.seed = seed;
    c.dropout_rate = 0.0;
    return c;
}

class BothCells : public ::testing::TestWithParam<CellKind> {};

}  // namespace

TEST_P(BothCells, InitIsDeterministic) {
    const auto a = init_recurrent(cfg_for(GetParam()), 5, 3);
    const auto b = init_recurrent(cfg_for(GetParam()), 5, 3);
    EXPECT_EQ(a.params(), b.params());
    const auto c = init_recurrent(cfg_for(GetParam(), 6, 2), 5, 3);
    EXPECT_NE(a.params(), c.params());
}

TEST_P(BothCells, InitScaleAndBiases) {
    const auto m = init_recurrent(cfg_for(GetParam(), 16), 9, 3);
    EXPECT_LE(m.W().cwiseAbs().maxCoeff(), 1.0 / 3.0);
    EXPECT_LE(m.U().cwiseAbs().maxCoeff(), 0.25);
    EXPECT_TRUE(m.c().isZero());
    if (GetParam() == CellKind::Lstm) {
        EXPECT_TRUE(m.b().segment(0, 16).isZero());
        EXPECT_TRUE((m.b().segment(16, 16).array() == 1.0).all());
        EXPECT_TRUE(m.b().segment(32, 32).isZero());
    } else {
        EXPECT_TRUE(m.b().isZero());
    }
}

TEST_P(BothCells, DefaultHiddenWidthIs128) {
    RecurrentConfig c;
    c.kind = GetParam();
    const auto m = init_recurrent(c, 4, 5);
    EXPECT_EQ(m.V().rows(), 5);
    EXPECT_EQ(m.V().cols(), 128);
    EXPECT_EQ(m.hidden(), 128u);
}

TEST_P(BothCells, ZeroWeightsGiveUniform) {
    auto m = init_recurrent(cfg_for(GetParam()), 3, 4);
    m.params().setZero();
    const std::vector<double> x{1.0, -2.0, 0.5};
    for (double p : m.predict_proba(std::span<const double>(x))) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST_P(BothCells, NoDropoutTrainEqualsEval) {
    const auto m = init_recurrent(cfg_for(GetParam()), 3, 3);
    Rng rng(1);
    const std::vector<double> x{0.3, -0.7, 1.1};
    EXPECT_EQ(forward(m, x, Mode::Train, rng), forward(m, x, Mode::Eval, rng));
}

TEST_P(BothCells, EvalIsDeterministicAndNormalized) {
    auto c = cfg_for(GetParam());
    c.dropout_rate = 0.3;
    const auto m = init_recurrent(c, 4, 3);
    Rng rng(2), data(3);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(4);
        for (auto& v : x) v = data.normal();
        const auto a = forward(m, x, Mode::Eval, rng);
        EXPECT_EQ(a, forward(m, x, Mode::Eval, rng));
        EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 1.0, 1e-9);
        const auto tr = forward(m, x, Mode::Train, rng);
        EXPECT_NEAR(std::accumulate(tr.begin(), tr.end(), 0.0), 1.0, 1e-9);
    }
}

TEST_P(BothCells, InvertedDropoutIsUnbiased) {
    auto c = cfg_for(GetParam(), 8);
    c.dropout_rate = 0.2;
    const auto m = init_recurrent(c, 4, 3);
    const std::vector<double> x{0.9, -0.4, 0.2, 1.3};
    Rng rng(4);
    const Vector eval = hidden_activation(m, x, Mode::Eval, rng);
    Vector mean = Vector::Zero(eval.size());
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) mean += hidden_activation(m, x, Mode::Train, rng);
    mean /= draws;
    for (Eigen::Index j = 0; j < eval.size(); ++j) {
        if (std::abs(eval(j)) < 1e-3) continue;
        EXPECT_NEAR(mean(j), eval(j), 0.02 * std::abs(eval(j)) + 1e-12) << "unit " << j;
    }
}

TEST_P(BothCells, DimensionMismatchRejected) {
    const auto m = init_recurrent(cfg_for(GetParam()), 3, 2);
    const std::vector<double> x{1.0, 2.0};
    EXPECT_THROW(m.predict_proba(std::span<const double>(x)), SchemaError);
}

TEST_P(BothCells, GradientCheckFreshModelTwoSamples) {
    Rng rng(5);
    const auto m = init_recurrent(cfg_for(GetParam()), 4, 3);
    const auto batch = eg_test::random_matrix(rng, 2, 4);
    EXPECT_LT(gradient_check(m, batch, {0, 2}), 1e-4);
}

TEST_P(BothCells, GradientCheckThreeSeedsWithState) {
    for (std::uint64_t seed : {1, 2, 3}) {
        Rng rng(seed);
        const auto m = init_recurrent(cfg_for(GetParam(), 5, seed), 3, 4);
        const auto batch = eg_test::random_matrix(rng, 4, 3);
        const auto labels = eg_test::random_labels(rng, 4, 4);
        ColMatrix h0(5, 4), c0(5, 4);
        for (auto& v : h0.reshaped()) v = 0.5 * rng.normal();
        for (auto& v : c0.reshaped()) v = 0.5 * rng.normal();
        EXPECT_LT(gradient_check(m, batch, labels, h0, c0), 1e-4) << "seed " << seed;
    }
}

TEST_P(BothCells, GradientCheckRejectsLargeBatch) {
    Rng rng(6);
    const auto m = init_recurrent(cfg_for(GetParam()), 3, 2);
    EXPECT_THROW(gradient_check(m, eg_test::random_matrix(rng, 5, 3), {0, 1, 0, 1, 0}), UserError);
}

TEST_P(BothCells, ZeroInputGivesZeroInputWeightGradient) {
    const auto m = init_recurrent(cfg_for(GetParam()), 3, 2);
    const Matrix zeros = Matrix::Zero(2, 3);
    const Vector g = loss_gradient(m, zeros, {0, 0});
    const auto w = m.W().size();
    EXPECT_TRUE(g.head(w).isZero(0.0));
    EXPECT_FALSE(g.tail(g.size() - w).isZero(0.0));
}

TEST_P(BothCells, MemorizesTinyToySet) {
    Rng rng(7);
    const auto x = eg_test::random_matrix(rng, 10, 4);
    std::vector<int> y(10);
    for (std::size_t i = 0; i < 10; ++i) y[i] = static_cast<int>(i % 2);
    auto c = cfg_for(GetParam(), 16);
    c.epochs = 200;
    c.batch_size = 4;
    c.learning_rate = 0.01;
    const auto [m, trace] = train_recurrent(x, y, 2, c);
    EXPECT_EQ(trace.train_accuracy, 1.0);
    EXPECT_EQ(trace.epoch_loss.size(), 200u);
}

TEST_P(BothCells, ZeroLearningRateLeavesWeights) {
    Rng rng(8);
    const auto x = eg_test::random_matrix(rng, 12, 3);
    const auto y = eg_test::random_labels(rng, 12, 3);
    auto c = cfg_for(GetParam());
    c.epochs = 3;
    c.batch_size = 5;
    c.learning_rate = 0.0;
    const auto [m, trace] = train_recurrent(x, y, 3, c);
    EXPECT_EQ(m.params(), init_recurrent(c, 3, 3).params());
    for (double l : trace.epoch_loss) EXPECT_NEAR(l, trace.epoch_loss.front(), 1e-12);
}

TEST_P(BothCells, TrainingIsDeterministic) {
    Rng rng(9);
    const auto x = eg_test::random_matrix(rng, 40, 3);
    const auto y = eg_test::random_labels(rng, 40, 3);
    auto c = cfg_for(GetParam());
    c.epochs = 3;
    c.batch_size = 8;
    c.dropout_rate = 0.2;
    const auto a = train_recurrent(x, y, 3, c);
    const auto b = train_recurrent(x, y, 3, c);
    EXPECT_EQ(a.second.epoch_loss, b.second.epoch_loss);
    EXPECT_EQ(a.first.params(), b.first.params());
}

TEST_P(BothCells, FirstEpochNearGuessingOnShuffledLabels) {
    Rng rng(10);
    const std::size_t C = 4;
    const auto x = eg_test::random_matrix(rng, 400, 6);
    const auto y = eg_test::random_labels(rng, 400, C);
    auto c = cfg_for(GetParam(), 32);
    c.epochs = 1;
    c.batch_size = 32;
    const auto [m, trace] = train_recurrent(x, y, C, c);
    EXPECT_LE(trace.epoch_loss.front(), std::log(static_cast<double>(C)) + 0.1);
}

TEST_P(BothCells, WriteReadRoundTrip) {
    const auto m = init_recurrent(cfg_for(GetParam(), 4, 3), 3, 2);
    std::stringstream ss;
    m.write(ss);
    std::stringstream in(ss.str());
    const auto back = RecurrentModel::read(in);
    EXPECT_EQ(back.params(), m.params());
    EXPECT_EQ(back.kind(), m.kind());
    std::stringstream again;
    back.write(again);
    EXPECT_EQ(again.str(), ss.str());
}

INSTANTIATE_TEST_SUITE_P(Cells, BothCells, ::testing::Values(CellKind::Lstm, CellKind::Gru),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Adam, ZeroGradientLeavesParameters) {
    Vector p = Vector::LinSpaced(5, -1.0, 1.0);
    const Vector before = p;
    Adam adam(5, 0.1);
    for (int i = 0; i < 10; ++i) adam.step(p, Vector::Zero(5));
    EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Vector p = Vector::Zero(3);
    Adam adam(3, 0.01);
    Vector g(3);
    g << 2.0, -0.5, 1e-3;
    adam.step(p, g);
    // bias-corrected first step is lr * g / (|g| + eps)
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(p(i), -0.01 * g(i) / (std::abs(g(i)) + 1e-8), 1e-15);
}

TEST(RecurrentConfig, Validation) {
    RecurrentConfig c;
    c.hidden = 0;
    EXPECT_THROW(validate(c), ConfigError);
    c = {};
    c.dropout_rate = 1.0;
    EXPECT_THROW(validate(c), ConfigError);
    c = {};
    c.adam.beta1 = 1.0;
    EXPECT_THROW(validate(c), ConfigError);
    EXPECT_THROW(init_recurrent(RecurrentConfig{}, 3, 1), ConfigError);
}

TEST(CellKind, NamesRoundTrip) {
    EXPECT_EQ(parse_cell_kind("lstm"), CellKind::Lstm);
    EXPECT_EQ(parse_cell_kind("gru"), CellKind::Gru);
}
