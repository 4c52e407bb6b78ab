#pragma once

// Weighted L2-regularized logistic regression trained by deterministic
// full-batch gradient descent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tradeoff/dataset.hpp"
#include "tradeoff/errors.hpp"

namespace tradeoff {

// Row-major view of a dense design matrix (already standardized).
struct MatrixView {
    std::span<const double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const double> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

// Step at iteration t is initial_scale / (curvature bound * (1 + t / decay_iterations)).
struct StepSchedule {
    double initial_scale = 1.0;
    double decay_iterations = 2500.0;

    bool operator==(const StepSchedule&) const = default;
};

struct TrainConfig {
    double l2_lambda = 1e-4;
    int max_iterations = 5000;
    double gradient_tolerance = 1e-6;
    StepSchedule step;
    std::uint64_t seed = 0;  // initialization is the zero vector; kept for provenance

    void validate() const {
        if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) throw ConfigError("l2_lambda must be >= 0");
        if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
        if (!(gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance must be > 0");
        if (!(step.initial_scale > 0.0) || !(step.decay_iterations > 0.0)) {
            throw ConfigError("step schedule parameters must be > 0");
        }
    }

    bool operator==(const TrainConfig&) const = default;
};

struct TrainingSummary {
    int iterations = 0;
    double gradient_norm = 0.0;  // infinity norm of the weight-normalized gradient
    double initial_loss = 0.0;
    double final_loss = 0.0;
    bool converged = false;

    bool operator==(const TrainingSummary&) const = default;
};

struct LogisticModel {
    std::vector<std::string> feature_names;
    std::vector<Normalization> normalization;
    std::vector<double> coefficients;
    double intercept = 0.0;
    double l2_lambda = 0.0;
    TrainingSummary summary;

    std::size_t dimension() const { return coefficients.size(); }

    bool operator==(const LogisticModel&) const = default;
};

inline double sigmoid(double z) {
    // Clamped so scores stay strictly inside (0, 1).
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(s, lo, hi);
}

// log(1 + exp(-margin)) without overflow.
inline double log1p_exp_neg(double margin) {
    return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;  // one entry per coefficient, intercept last
};

// Weighted negative log-likelihood plus (l2_lambda / 2) * |coef|^2. `params`
// holds the coefficients followed by the intercept, which is not penalized.
inline LossGradient loss_and_gradient(std::span<const double> params, const MatrixView& x, std::span<const int> labels,
                                      std::span<const double> weights, double l2_lambda) {
    if (params.size() != x.cols + 1) throw DataError("parameter length does not match feature dimension");
    if (labels.size() != x.rows || weights.size() != x.rows) {
        throw DataError("labels/weights length does not match row count");
    }
    for (double p : params) {
        if (!std::isfinite(p)) throw NumericError("non-finite parameter", 0);
    }
    if (!std::isfinite(l2_lambda) || l2_lambda < 0.0) throw DataError("l2_lambda must be finite and >= 0");

    const std::size_t d = x.cols;
    LossGradient out;
    out.gradient.assign(d + 1, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double w = weights[i];
        if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("weights must be finite and >= 0");
        if (w == 0.0) continue;
        auto row = x.row(i);
        double z = params[d];
        for (std::size_t j = 0; j < d; ++j) z += params[j] * row[j];
        if (!std::isfinite(z)) throw NumericError("non-finite input", 0);
        const double y = labels[i] ? 1.0 : -1.0;
        out.loss += w * log1p_exp_neg(y * z);
        const double r = w * (sigmoid(z) - (labels[i] ? 1.0 : 0.0));
        for (std::size_t j = 0; j < d; ++j) out.gradient[j] += r * row[j];
        out.gradient[d] += r;
    }
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        norm2 += params[j] * params[j];
        out.gradient[j] += l2_lambda * params[j];
    }
    out.loss += 0.5 * l2_lambda * norm2;
    return out;
}

// Standardizes raw encoded rows with the given per-column statistics.
inline std::vector<double> standardize(std::span<const double> raw, std::span<const Normalization> normalization) {
    const std::size_t d = normalization.size();
    std::vector<double> out(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const auto& n = normalization[k % d];
        out[k] = (raw[k] - n.mean) / n.scale;
    }
    return out;
}

// Gradient descent from the zero vector on the weight-normalized objective
// (loss / sum of weights). The step is bounded by the inverse of a trace bound
// on that objective's Hessian, so the loss never increases. Everything the
// optimizer sees is invariant to scaling all weights and l2_lambda together.
inline LogisticModel train_standardized(const MatrixView& x, std::span<const int> labels,
                                        std::span<const double> weights, const TrainConfig& config,
                                        std::vector<std::string> feature_names,
                                        std::vector<Normalization> normalization) {
    config.validate();
    if (labels.size() != x.rows || weights.size() != x.rows) {
        throw DataError("labels/weights length does not match row count");
    }
    bool has_pos = false, has_neg = false;
    double total_weight = 0.0, curvature = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw DataError("weights must be finite and >= 0");
        if (weights[i] == 0.0) continue;
        (labels[i] ? has_pos : has_neg) = true;
        total_weight += weights[i];
        double sq = 1.0;
        for (double v : x.row(i)) sq += v * v;
        curvature += weights[i] * sq;
    }
    if (!has_pos || !has_neg) throw DataError("training needs both labels among positive-weight examples");
    curvature = 0.25 * curvature / total_weight + config.l2_lambda / total_weight;
    if (!std::isfinite(curvature)) throw NumericError("feature magnitudes overflow the step-size bound", 0);

    const std::size_t d = x.cols;
    std::vector<double> params(d + 1, 0.0);
    LogisticModel model;
    model.feature_names = std::move(feature_names);
    model.normalization = std::move(normalization);
    model.l2_lambda = config.l2_lambda;

    int t = 0;
    for (;; ++t) {
        auto lg = loss_and_gradient(params, x, labels, weights, config.l2_lambda);
        if (!std::isfinite(lg.loss)) throw NumericError("training diverged: non-finite loss", t);
        double gnorm = 0.0;
        for (double& g : lg.gradient) {
            g /= total_weight;
            gnorm = std::max(gnorm, std::abs(g));
        }
        if (t == 0) model.summary.initial_loss = lg.loss;
        model.summary.final_loss = lg.loss;
        model.summary.gradient_norm = gnorm;
        if (gnorm <= config.gradient_tolerance) {
            model.summary.converged = true;
            break;
        }
        if (t == config.max_iterations) break;
        const double eta =
            config.step.initial_scale / (curvature * (1.0 + double(t) / config.step.decay_iterations));
        for (std::size_t j = 0; j <= d; ++j) params[j] -= eta * lg.gradient[j];
    }
    model.summary.iterations = t;
    model.coefficients.assign(params.begin(), params.end() - 1);
    model.intercept = params[d];
    return model;
}

// Trains on every row of `features`, using its labels and stored normalization.
inline LogisticModel train(const FeatureMatrix& features, std::span<const double> weights, const TrainConfig& config) {
    auto data = standardize(features.raw, features.normalization);
    MatrixView view{data, features.rows(), features.cols()};
    return train_standardized(view, features.labels, weights, config, features.columns, features.normalization);
}

inline double score_row(const LogisticModel& model, std::span<const double> standardized_row) {
    double z = model.intercept;
    for (std::size_t j = 0; j < model.coefficients.size(); ++j) z += model.coefficients[j] * standardized_row[j];
    return sigmoid(z);
}

// Re-offense probabilities for raw encoded rows; applies the model's own
// normalization first.
inline std::vector<double> predict_scores(const LogisticModel& model, const FeatureMatrix& features) {
    if (features.cols() != model.dimension()) {
        throw DataError("feature dimension " + std::to_string(features.cols()) + " does not match model dimension " +
                        std::to_string(model.dimension()));
    }
    auto data = standardize(features.raw, model.normalization);
    std::vector<double> scores(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        scores[i] = score_row(model, std::span<const double>(data).subspan(i * model.dimension(), model.dimension()));
    }
    return scores;
}

// Positive ("re-offend") iff score >= threshold.
inline std::vector<int> classify(std::span<const double> scores, double threshold) {
    std::vector<int> out(scores.size());
    std::transform(scores.begin(), scores.end(), out.begin(), [threshold](double s) { return s >= threshold ? 1 : 0; });
    return out;
}

}  // namespace tradeoff
