#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "tradeoff/classifier.hpp"

using namespace tradeoff;
using tradeoff::testing::reference_loss;
using tradeoff::testing::synthetic_records;

namespace {

struct Instance {
    std::size_t rows, cols;
    std::vector<double> x;
    std::vector<int> y;
    std::vector<double> w;
    std::vector<double> params;
    double lambda;
};

Instance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dim(1, 10), n(1, 50);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    Instance in;
    in.cols = dim(rng);
    in.rows = n(rng);
    for (std::size_t k = 0; k < in.rows * in.cols; ++k) in.x.push_back(g(rng));
    for (std::size_t i = 0; i < in.rows; ++i) {
        in.y.push_back(u(rng) < 1.0 ? 1 : 0);
        in.w.push_back(u(rng));
    }
    for (std::size_t j = 0; j <= in.cols; ++j) in.params.push_back(0.5 * g(rng));
    in.lambda = u(rng);
    return in;
}

FeatureMatrix synthetic_matrix(std::size_t n, std::uint64_t seed) {
    auto records = filter_records(synthetic_records(n, seed)).records;
    BalancedDataset d;
    d.attribute = Attribute::race;
    d.records = records;
    std::vector<std::size_t> all(records.size());
    std::iota(all.begin(), all.end(), 0);
    return encode(d, all);
}

}  // namespace

TEST(LossAndGradient, AllZeroWeights) {
    std::vector<double> x = {1.0, 2.0, -1.0, 0.5};
    MatrixView view{x, 2, 2};
    std::vector<int> y = {1, 0};
    std::vector<double> w = {0.0, 0.0};
    std::vector<double> params = {0.3, -0.2, 0.1};
    auto lg = loss_and_gradient(params, view, y, w, 0.0);
    EXPECT_EQ(lg.loss, 0.0);
    for (double g : lg.gradient) EXPECT_EQ(g, 0.0);
}

TEST(LossAndGradient, ZeroParamsSingleExampleIsLn2) {
    std::vector<double> x = {3.0};
    MatrixView view{x, 1, 1};
    std::vector<int> y = {1};
    std::vector<double> w = {1.0};
    std::vector<double> params = {0.0, 0.0};
    EXPECT_NEAR(loss_and_gradient(params, view, y, w, 0.0).loss, std::log(2.0), 1e-15);
}

TEST(LossAndGradient, MatchesCentralFiniteDifferences) {
    std::mt19937_64 rng(20240501);
    for (int trial = 0; trial < 100; ++trial) {
        auto in = random_instance(rng);
        MatrixView view{in.x, in.rows, in.cols};
        auto lg = loss_and_gradient(in.params, view, in.y, in.w, in.lambda);
        EXPECT_NEAR(lg.loss, reference_loss(in.params, in.x, in.rows, in.cols, in.y, in.w, in.lambda),
                    1e-10 * std::max(1.0, lg.loss));

        double diff2 = 0.0, norm2 = 0.0;
        for (std::size_t j = 0; j <= in.cols; ++j) {
            const double h = 1e-5;
            auto plus = in.params, minus = in.params;
            plus[j] += h;
            minus[j] -= h;
            double fd = (reference_loss(plus, in.x, in.rows, in.cols, in.y, in.w, in.lambda) -
                         reference_loss(minus, in.x, in.rows, in.cols, in.y, in.w, in.lambda)) /
                        (2 * h);
            diff2 += (fd - lg.gradient[j]) * (fd - lg.gradient[j]);
            norm2 += fd * fd;
        }
        EXPECT_LT(std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-8), 1e-5) << "trial " << trial;
    }
}

TEST(LossAndGradient, RejectsBadInput) {
    std::vector<double> x = {1.0};
    MatrixView view{x, 1, 1};
    std::vector<int> y = {1};
    std::vector<double> w = {1.0};
    std::vector<double> nan_params = {std::nan(""), 0.0};
    EXPECT_THROW(loss_and_gradient(nan_params, view, y, w, 0.0), NumericError);
    std::vector<double> params = {0.0, 0.0};
    std::vector<double> neg = {-1.0};
    EXPECT_THROW(loss_and_gradient(params, view, y, neg, 0.0), DataError);
    std::vector<double> short_params = {0.0};
    EXPECT_THROW(loss_and_gradient(short_params, view, y, w, 0.0), DataError);
}

TEST(Train, SeparablePointsLandOnCorrectSide) {
    FeatureMatrix fm;
    fm.columns = {"x"};
    fm.normalization = {{0.0, 1.0}};
    fm.raw = {-1.0, 1.0};
    fm.labels = {0, 1};
    fm.groups = {0, 1};
    std::vector<double> w = {1.0, 1.0};
    auto model = train(fm, w, TrainConfig{});
    auto scores = predict_scores(model, fm);
    EXPECT_LT(scores[0], 0.5);
    EXPECT_GT(scores[1], 0.5);
    EXPECT_LE(model.summary.final_loss, model.summary.initial_loss);
}

TEST(Train, ConvergesAndDecreasesLoss) {
    auto fm = synthetic_matrix(1500, 1);
    std::vector<double> w(fm.rows(), 1.0);
    auto model = train(fm, w, TrainConfig{});
    EXPECT_TRUE(model.summary.converged);
    EXPECT_LE(model.summary.gradient_norm, 1e-6);
    EXPECT_LT(model.summary.final_loss, model.summary.initial_loss);
    EXPECT_EQ(model.dimension(), fm.cols());
    for (double c : model.coefficients) EXPECT_TRUE(std::isfinite(c));
    // priors_count drives the synthetic label upward
    EXPECT_GT(model.coefficients[1], 0.0);
}

TEST(Train, StopsAtMaxIterations) {
    auto fm = synthetic_matrix(300, 2);
    std::vector<double> w(fm.rows(), 1.0);
    TrainConfig config;
    config.max_iterations = 3;
    auto model = train(fm, w, config);
    EXPECT_EQ(model.summary.iterations, 3);
    EXPECT_FALSE(model.summary.converged);
}

TEST(Train, Deterministic) {
    auto fm = synthetic_matrix(500, 3);
    std::vector<double> w(fm.rows(), 1.0);
    EXPECT_EQ(train(fm, w, TrainConfig{}), train(fm, w, TrainConfig{}));
}

TEST(Train, WeightScalingLeavesModelUnchanged) {
    auto fm = synthetic_matrix(500, 4);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::vector<double> w(fm.rows());
    for (auto& v : w) v = u(rng);
    TrainConfig base;
    base.l2_lambda = 0.5;
    auto reference = train(fm, w, base);

    // A power of two scales every intermediate exactly.
    auto w4 = w;
    for (auto& v : w4) v *= 4.0;
    auto scaled = base;
    scaled.l2_lambda *= 4.0;
    auto m4 = train(fm, w4, scaled);
    EXPECT_EQ(m4.coefficients, reference.coefficients);
    EXPECT_EQ(m4.intercept, reference.intercept);
    EXPECT_EQ(m4.summary.iterations, reference.summary.iterations);

    auto w3 = w;
    for (auto& v : w3) v *= 3.0;
    scaled.l2_lambda = 1.5;
    auto m3 = train(fm, w3, scaled);
    for (std::size_t j = 0; j < m3.dimension(); ++j) {
        EXPECT_NEAR(m3.coefficients[j], reference.coefficients[j], 1e-9);
    }
    EXPECT_NEAR(m3.intercept, reference.intercept, 1e-9);
}

TEST(Train, NeedsBothLabels) {
    FeatureMatrix fm;
    fm.columns = {"x"};
    fm.normalization = {{0.0, 1.0}};
    fm.raw = {-1.0, 1.0};
    fm.labels = {1, 1};
    fm.groups = {0, 0};
    std::vector<double> w = {1.0, 1.0};
    EXPECT_THROW(train(fm, w, TrainConfig{}), DataError);
    fm.labels = {0, 1};
    std::vector<double> w0 = {1.0, 0.0};
    EXPECT_THROW(train(fm, w0, TrainConfig{}), DataError);
}

TEST(Train, DivergenceReportsIteration) {
    FeatureMatrix fm;
    fm.columns = {"x"};
    fm.normalization = {{0.0, 1.0}};
    fm.raw = {-1e200, 1e200};
    fm.labels = {0, 1};
    fm.groups = {0, 0};
    std::vector<double> w = {1.0, 1.0};
    try {
        train(fm, w, TrainConfig{});
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_GE(e.iteration(), 0);
    }
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    c.max_iterations = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.gradient_tolerance = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.l2_lambda = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(PredictScores, ZeroModelIsHalf) {
    auto fm = synthetic_matrix(50, 5);
    LogisticModel model;
    model.feature_names = fm.columns;
    model.normalization = fm.normalization;
    model.coefficients.assign(fm.cols(), 0.0);
    for (double s : predict_scores(model, fm)) EXPECT_EQ(s, 0.5);
}

TEST(PredictScores, MonotoneInPositiveCoefficientFeature) {
    LogisticModel model;
    model.feature_names = {"a", "b"};
    model.normalization = {{0.0, 1.0}, {0.0, 1.0}};
    model.coefficients = {0.7, -0.3};
    FeatureMatrix fm;
    fm.columns = model.feature_names;
    fm.normalization = model.normalization;
    fm.raw = {0.0, 1.0, 0.5, 1.0, 2.0, 1.0};
    fm.labels = {0, 0, 0};
    fm.groups = {0, 0, 0};
    auto s = predict_scores(model, fm);
    EXPECT_LT(s[0], s[1]);
    EXPECT_LT(s[1], s[2]);
}

TEST(PredictScores, StrictlyInsideUnitInterval) {
    LogisticModel model;
    model.feature_names = {"a"};
    model.normalization = {{0.0, 1.0}};
    model.coefficients = {1.0};
    FeatureMatrix fm;
    fm.columns = {"a"};
    fm.normalization = model.normalization;
    fm.raw = {-1e4, 1e4};
    fm.labels = {0, 1};
    fm.groups = {0, 0};
    auto s = predict_scores(model, fm);
    EXPECT_GT(s[0], 0.0);
    EXPECT_LT(s[1], 1.0);
}

TEST(PredictScores, DimensionMismatch) {
    auto fm = synthetic_matrix(50, 6);
    LogisticModel model;
    model.coefficients = {1.0};
    model.normalization = {{0.0, 1.0}};
    EXPECT_THROW(predict_scores(model, fm), DataError);
}

TEST(PredictScores, ReplaysTrainingTimePredictions) {
    auto fm = synthetic_matrix(400, 7);
    std::vector<double> w(fm.rows(), 1.0);
    auto model = train(fm, w, TrainConfig{});
    // Replay: standardize with the fit statistics and apply the linear map by hand.
    auto data = standardize(fm.raw, fm.normalization);
    auto scores = predict_scores(model, fm);
    for (std::size_t i = 0; i < fm.rows(); ++i) {
        double z = model.intercept;
        for (std::size_t j = 0; j < fm.cols(); ++j) z += model.coefficients[j] * data[i * fm.cols() + j];
        EXPECT_EQ(scores[i], sigmoid(z));
    }
}

TEST(Classify, ThresholdRule) {
    std::vector<double> s = {0.3, 0.5, 0.7};
    EXPECT_EQ(classify(s, 0.5), (std::vector<int>{0, 1, 1}));
    EXPECT_EQ(classify(s, 0.0), (std::vector<int>{1, 1, 1}));
    EXPECT_EQ(classify(s, 1.0), (std::vector<int>{0, 0, 0}));
}

TEST(Classify, PositiveSetShrinksAsThresholdRises) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(1e-9, 1.0 - 1e-9);
    std::vector<double> s(200);
    for (auto& v : s) v = u(rng);
    for (int trial = 0; trial < 50; ++trial) {
        double t1 = u(rng), t2 = u(rng);
        if (t1 > t2) std::swap(t1, t2);
        auto p1 = classify(s, t1);
        auto p2 = classify(s, t2);
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_LE(p2[i], p1[i]);
    }
}
