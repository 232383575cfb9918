#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "dada/autoencoder.hpp"
#include "test_util.hpp"

using namespace dada;
using dada::testing::for_each_entry;
using dada::testing::random_params;
using dada::testing::random_samples;

namespace {

std::vector<double> flatten(ModelParams p) {
    std::vector<double> out;
    for_each_entry(p, [&](double& v) { out.push_back(v); });
    return out;
}

// Central differences of cost over every parameter.
std::vector<double> numeric_gradient(ModelParams p, const std::vector<Sample>& xs, double lambda, double h) {
    std::vector<double> out;
    for_each_entry(p, [&](double& v) {
        const double keep = v;
        v = keep + h;
        const double up = cost(p, xs, lambda);
        v = keep - h;
        const double down = cost(p, xs, lambda);
        v = keep;
        out.push_back((up - down) / (2.0 * h));
    });
    return out;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-7});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
    }
    return worst;
}

}  // namespace

TEST(Sigmoid, KnownValues) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    const long double oracle = 1.0L / (1.0L + std::exp(-2.0L));
    EXPECT_NEAR(sigmoid(2.0), static_cast<double>(oracle), 1e-15);
    EXPECT_NEAR(sigmoid(2.0), 0.8807970779778823, 1e-15);
    EXPECT_NEAR(sigmoid(-2.0), 1.0 - sigmoid(2.0), 1e-15);
}

TEST(Sigmoid, StaysInsideOpenInterval) {
    for (double z : {-1e6, -745.0, -50.0, 0.0, 50.0, 745.0, 1e6}) {
        const double y = sigmoid(z);
        EXPECT_GT(y, 0.0) << z;
        EXPECT_LT(y, 1.0) << z;
    }
}

TEST(Forward, ZeroParamsGiveHalf) {
    const auto p = ModelParams::zeros({5, 3});
    const auto a = forward(p, Vector::Constant(5, 0.37));
    EXPECT_TRUE((a.output.array() == 0.5).all());
    EXPECT_TRUE((a.hidden.array() == 0.5).all());
}

TEST(Forward, HandEvaluatedTwoLayerExample) {
    auto p = ModelParams::zeros({2, 1});
    p.w_hidden << 1.0, 1.0;
    const auto a = forward(p, Vector::Constant(2, 1.0));
    ASSERT_EQ(a.hidden.size(), 1);
    EXPECT_NEAR(a.hidden(0), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
    EXPECT_EQ(a.output(0), 0.5);
    EXPECT_EQ(a.output(1), 0.5);
}

TEST(Forward, DeterministicAndBounded) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const NetworkShape shape{static_cast<std::size_t>(2 + trial % 7), static_cast<std::size_t>(1 + trial % 4)};
        const auto p = random_params(rng, shape, 5.0);
        const auto x = dada::testing::random_vector(rng, static_cast<Eigen::Index>(shape.input_dim));
        const auto a = forward(p, x);
        const auto b = forward(p, x);
        EXPECT_EQ(a.output, b.output);
        EXPECT_TRUE((a.output.array() > 0.0).all() && (a.output.array() < 1.0).all());
    }
}

TEST(Forward, RejectsWrongLength) {
    const auto p = ModelParams::zeros({4, 2});
    EXPECT_THROW(forward(p, Vector::Zero(3)), ContractViolation);
}

TEST(Forward, CountsMultiplyAccumulates) {
    const auto p = ModelParams::zeros({12, 4});
    OpCounter ops;
    forward(p, Vector::Zero(12), &ops);
    EXPECT_EQ(ops.mac, 2u * 12u * 4u);
}

TEST(Cost, ZeroParamsOnHalfSampleIsZero) {
    const auto p = ModelParams::zeros({6, 3});
    const std::vector<Sample> xs{Vector::Constant(6, 0.5)};
    EXPECT_EQ(cost(p, xs, 0.0), 0.0);
}

TEST(Cost, RegularizationDecomposition) {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const NetworkShape shape{static_cast<std::size_t>(2 + trial % 7), static_cast<std::size_t>(1 + trial % 5)};
        const auto p = random_params(rng, shape);
        const auto xs = random_samples(rng, 1 + trial % 4, static_cast<Eigen::Index>(shape.input_dim));
        const double lambda = 0.05 * (1 + trial % 3);
        // weight-square sum accumulated independently of the model code
        long double wsq = 0.0L;
        for (Eigen::Index i = 0; i < p.w_hidden.size(); ++i) wsq += static_cast<long double>(p.w_hidden.data()[i]) * p.w_hidden.data()[i];
        for (Eigen::Index i = 0; i < p.w_output.size(); ++i) wsq += static_cast<long double>(p.w_output.data()[i]) * p.w_output.data()[i];
        const double expected = cost(p, xs, 0.0) + 0.5 * lambda * static_cast<double>(wsq);
        EXPECT_NEAR(cost(p, xs, lambda), expected, 1e-12 * std::fabs(expected));
    }
}

TEST(Gradient, MatchesCentralDifferencesOnFiveByThree) {
    Rng rng(42);
    const auto p = random_params(rng, {5, 3});
    const auto xs = random_samples(rng, 4, 5);
    const auto analytic = flatten(gradient(p, xs, 0.01));
    const auto numeric = numeric_gradient(p, xs, 0.01, 1e-5);
    EXPECT_LT(max_rel_error(analytic, numeric), 1e-6);
}

TEST(Gradient, MatchesCentralDifferencesOnRandomInstances) {
    Rng rng(7);
    std::uniform_int_distribution<int> m_dist(2, 8), t_dist(1, 4);
    for (int trial = 0; trial < 40; ++trial) {
        const int m = m_dist(rng);
        std::uniform_int_distribution<int> h_dist(1, std::min(5, m - 1));
        const NetworkShape shape{static_cast<std::size_t>(m), static_cast<std::size_t>(h_dist(rng))};
        const auto p = random_params(rng, shape);
        const auto xs = random_samples(rng, static_cast<std::size_t>(t_dist(rng)),
                                       static_cast<Eigen::Index>(shape.input_dim));
        const double lambda = trial % 2 ? 0.0 : 1e-3;
        const auto err = max_rel_error(flatten(gradient(p, xs, lambda)), numeric_gradient(p, xs, lambda, 1e-5));
        EXPECT_LT(err, 1e-6) << "trial " << trial;
    }
}

TEST(Gradient, LambdaTermIsLambdaTimesWeights) {
    Rng rng(3);
    const auto p = random_params(rng, {6, 4});
    const auto xs = random_samples(rng, 3, 6);
    const double lambda = 0.3;
    const auto g0 = gradient(p, xs, 0.0);
    const auto gl = gradient(p, xs, lambda);
    EXPECT_TRUE(((gl.w_hidden - g0.w_hidden) - lambda * p.w_hidden).cwiseAbs().maxCoeff() < 1e-15);
    EXPECT_TRUE(((gl.w_output - g0.w_output) - lambda * p.w_output).cwiseAbs().maxCoeff() < 1e-15);
    EXPECT_EQ(gl.b_hidden, g0.b_hidden);
    EXPECT_EQ(gl.b_output, g0.b_output);
}

TEST(Gradient, VanishesAtConvergedMinimum) {
    // A tiny fittable problem trained to stationarity.
    Rng rng(9);
    const std::vector<Sample> xs{dada::testing::random_vector(rng, 3, 0.2, 0.8),
                                 dada::testing::random_vector(rng, 3, 0.2, 0.8)};
    TrainingConfig tc{.lambda = 1e-3, .step_size = 2.0, .epochs = 60000, .halve_on_increase = true};
    const auto trained = train(init_params({3, 2}, 0.5, 1), xs, tc).params;
    EXPECT_LT(std::sqrt(gradient(trained, xs, tc.lambda).squared_norm()), 1e-8);
}

TEST(InitParams, DeterministicBoundedAndSeedSensitive) {
    const NetworkShape shape{10, 4};
    const auto a = init_params(shape, 0.05, 17);
    const auto b = init_params(shape, 0.05, 17);
    const auto c = init_params(shape, 0.05, 18);
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a == c);
    EXPECT_LE(a.w_hidden.cwiseAbs().maxCoeff(), 0.05);
    EXPECT_LE(a.w_output.cwiseAbs().maxCoeff(), 0.05);
    EXPECT_TRUE(a.b_hidden.isZero() && a.b_output.isZero());
}

TEST(Train, ZeroStepLeavesParamsUnchanged) {
    Rng rng(2);
    const auto p = random_params(rng, {4, 2});
    const auto xs = random_samples(rng, 3, 4);
    const auto r = train(p, xs, TrainingConfig{.step_size = 0.0, .epochs = 1});
    EXPECT_EQ(r.params, p);
}

TEST(Train, RejectsZeroEpochs) {
    const auto p = ModelParams::zeros({4, 2});
    const std::vector<Sample> xs{Vector::Constant(4, 0.5)};
    EXPECT_THROW(train(p, xs, TrainingConfig{.epochs = 0}), ContractViolation);
}

TEST(Train, FitsTenCopiesOfOneSample) {
    const Vector x = (Vector(6) << 0.2, 0.4, 0.9, 0.1, 0.6, 0.3).finished();
    const std::vector<Sample> xs(10, x);
    TrainingConfig tc{.lambda = 0.0, .step_size = 0.5, .epochs = 2000, .init_scale = 0.05};
    const auto r = train(init_params({6, 4}, 0.05, 1), xs, tc);
    EXPECT_LT(r.cost_trace.back(), 1e-3);
    EXPECT_EQ(r.cost_trace.size(), 2001u);
}

TEST(Train, DeterministicGivenSeed) {
    Rng rng(4);
    const auto xs = random_samples(rng, 5, 8);
    TrainingConfig tc{.epochs = 50};
    const auto a = train(init_params({8, 3}, 0.05, 5), xs, tc);
    const auto b = train(init_params({8, 3}, 0.05, 5), xs, tc);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.cost_trace, b.cost_trace);
}

TEST(Train, DivergenceIsReported) {
    const std::vector<Sample> xs{Vector::Constant(3, 0.9)};
    auto p = ModelParams::zeros({3, 2});
    p.w_hidden(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(train(p, xs, TrainingConfig{.epochs = 3}), TrainingDiverged);
}

// Property: halving from 1.0 finds a strictly descending step on any
// non-stationary instance, and the halving trainer's trace never rises.
TEST(TrainProperty, DescentStepExistsAndTraceNonIncreasing) {
    Rng rng(123);
    std::uniform_int_distribution<int> m_dist(1, 8), h_dist(1, 5), t_dist(1, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const NetworkShape shape{static_cast<std::size_t>(m_dist(rng)), static_cast<std::size_t>(h_dist(rng))};
        const auto p = random_params(rng, shape, 2.0);
        const auto xs = random_samples(rng, static_cast<std::size_t>(t_dist(rng)),
                                       static_cast<Eigen::Index>(shape.input_dim));
        const double lambda = 1e-3;
        const double j0 = cost(p, xs, lambda);
        const auto g = gradient(p, xs, lambda);
        if (g.squared_norm() < 1e-20) continue;
        bool descended = false;
        double step = 1.0;
        for (int k = 0; k <= 20 && !descended; ++k, step *= 0.5) {
            auto q = p;
            auto s = g;
            s *= step;
            q -= s;
            descended = cost(q, xs, lambda) < j0;
        }
        EXPECT_TRUE(descended) << "trial " << trial;

        const auto r = train(p, xs, TrainingConfig{.lambda = lambda, .step_size = 4.0, .epochs = 30,
                                                   .halve_on_increase = true});
        for (std::size_t e = 1; e < r.cost_trace.size(); ++e)
            ASSERT_LE(r.cost_trace[e], r.cost_trace[e - 1]) << "trial " << trial << " epoch " << e;
    }
}

TEST(ModelRecord, RoundTripsBitExactly) {
    Rng rng(8);
    const auto p = random_params(rng, {7, 3});
    std::stringstream ss;
    write_params(ss, p);
    EXPECT_EQ(ss.str().size(), 8u * 3u + 8u * (7u * 3u * 2u + 3u + 7u));
    const auto q = read_params(ss);
    EXPECT_EQ(p, q);
}

TEST(ModelRecord, RejectsTruncatedInput) {
    Rng rng(8);
    std::stringstream ss;
    write_params(ss, random_params(rng, {7, 3}));
    std::stringstream cut(ss.str().substr(0, 40));
    EXPECT_ANY_THROW(read_params(cut));
}
