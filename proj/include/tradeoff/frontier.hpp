#pragma once

// Model family over the error/disparity trade-off: a grid of group-and-label
// cost reweightings, one logistic model per grid point, and the Pareto filter
// over (overall errors, disparity).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "tradeoff/classifier.hpp"
#include "tradeoff/dataset.hpp"
#include "tradeoff/errors.hpp"
#include "tradeoff/metrics.hpp"

namespace tradeoff {

// Example-weight multipliers for group a1: alpha on positives, beta on
// negatives. Group a0 keeps weight 1.
struct GridPoint {
    double alpha = 1.0;
    double beta = 1.0;

    bool operator==(const GridPoint&) const = default;
};

struct GridConfig {
    int levels = 9;
    double range = 4.0;

    bool operator==(const GridConfig&) const = default;
};

// `levels` log-spaced values on [1/range, range] per axis, Cartesian product in
// row-major (alpha-major) order. `levels` must be odd so the unweighted point
// (1, 1) is on the grid; its multiplier is exactly 1.0.
inline std::vector<GridPoint> weight_grid(const GridConfig& config) {
    if (config.levels < 1) throw ConfigError("grid size must be >= 1");
    if (config.levels % 2 == 0) throw ConfigError("grid size must be odd so (1, 1) lies on the grid");
    if (!(config.range > 1.0) || !std::isfinite(config.range)) throw ConfigError("grid range must be > 1");

    std::vector<double> axis(config.levels);
    const int half = (config.levels - 1) / 2;
    const double log_r = std::log(config.range);
    for (int j = 0; j < config.levels; ++j) {
        axis[j] = half == 0 ? 1.0 : std::exp(log_r * double(j - half) / double(half));
    }
    std::vector<GridPoint> grid;
    grid.reserve(axis.size() * axis.size());
    for (double a : axis) {
        for (double b : axis) grid.push_back({a, b});
    }
    return grid;
}

inline std::vector<double> example_weights(std::span<const int> labels, std::span<const int> groups, GridPoint p) {
    std::vector<double> w(labels.size(), 1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (groups[i] == 1) w[i] = labels[i] ? p.alpha : p.beta;
    }
    return w;
}

inline std::string model_id_for(std::size_t grid_index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "m%03zu", grid_index);
    return buf;
}

struct Candidate {
    std::string model_id;
    std::size_t grid_index = 0;
    GridPoint grid;
    LogisticModel model;
};

struct CandidateFailure {
    std::string model_id;
    std::size_t grid_index = 0;
    GridPoint grid;
    std::string reason;
};

struct CandidateSet {
    std::vector<Candidate> candidates;
    std::vector<CandidateFailure> failures;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must only write
// to slot i of its outputs.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    const auto count = std::min<std::size_t>(threads, n);
    for (std::size_t w = 0; w < count; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// One weighted training run per grid point. Output is in grid-index order and
// does not depend on `threads`.
inline CandidateSet generate_candidates(const FeatureMatrix& train_matrix, std::span<const GridPoint> grid,
                                        const TrainConfig& config, unsigned threads = 1) {
    config.validate();
    auto data = standardize(train_matrix.raw, train_matrix.normalization);
    MatrixView view{data, train_matrix.rows(), train_matrix.cols()};

    std::vector<std::optional<LogisticModel>> models(grid.size());
    std::vector<std::string> errors(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        try {
            auto w = example_weights(train_matrix.labels, train_matrix.groups, grid[i]);
            models[i] = train_standardized(view, train_matrix.labels, w, config, train_matrix.columns,
                                           train_matrix.normalization);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    CandidateSet out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (models[i]) {
            out.candidates.push_back({model_id_for(i), i, grid[i], std::move(*models[i])});
        } else {
            out.failures.push_back({model_id_for(i), i, grid[i], errors[i]});
        }
    }
    return out;
}

struct FrontierPoint {
    std::string model_id;
    GridPoint grid;
    double threshold = 0.0;
    std::int64_t errors = 0;
    std::int64_t disparity = 0;
    GroupConfusion group_confusion;

    bool operator==(const FrontierPoint&) const = default;
};

inline FrontierPoint make_point(const Candidate& c, double threshold, const GroupConfusion& gc) {
    return {c.model_id, c.grid, threshold, gc.overall().errors(), disparity(gc), gc};
}

inline std::vector<FrontierPoint> evaluate_candidates(std::span<const Candidate> candidates,
                                                      const FeatureMatrix& eval_matrix, double threshold,
                                                      Attribute attribute = Attribute::race) {
    std::vector<FrontierPoint> points;
    points.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto predictions = classify(predict_scores(c.model, eval_matrix), threshold);
        points.push_back(make_point(c, threshold, group_confusion(predictions, eval_matrix.labels,
                                                                 eval_matrix.groups, attribute)));
    }
    return points;
}

struct FrontierSet {
    Attribute attribute = Attribute::race;
    double threshold = 0.0;
    std::vector<FrontierPoint> points;  // ascending disparity, descending errors

    bool operator==(const FrontierSet&) const = default;
};

// Keeps the points no other point weakly dominates on (errors, disparity).
// Exact duplicates keep the lowest model_id.
inline FrontierSet pareto_filter(std::span<const FrontierPoint> points) {
    if (points.empty()) throw DataError("cannot Pareto-filter an empty point set");
    std::vector<const FrontierPoint*> order;
    for (const auto& p : points) order.push_back(&p);
    std::sort(order.begin(), order.end(), [](const FrontierPoint* a, const FrontierPoint* b) {
        return std::tie(a->disparity, a->errors, a->model_id) < std::tie(b->disparity, b->errors, b->model_id);
    });

    FrontierSet out;
    out.attribute = points.front().group_confusion.attribute;
    out.threshold = points.front().threshold;
    for (const auto* p : order) {
        if (out.points.empty() || p->errors < out.points.back().errors) out.points.push_back(*p);
    }
    return out;
}

// True when no point of the set weakly dominates another and the set is
// ordered by ascending disparity with strictly decreasing errors.
inline bool is_pareto_sound(const FrontierSet& set) {
    const auto& pts = set.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            const auto& p = pts[i];
            const auto& q = pts[j];
            bool weakly = p.errors <= q.errors && p.disparity <= q.disparity &&
                          (p.errors < q.errors || p.disparity < q.disparity);
            if (weakly || (p.errors == q.errors && p.disparity == q.disparity)) return false;
        }
        if (i > 0 && !(pts[i].disparity > pts[i - 1].disparity && pts[i].errors < pts[i - 1].errors)) return false;
    }
    return true;
}

}  // namespace tradeoff
