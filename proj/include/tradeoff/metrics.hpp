#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tradeoff/classifier.hpp"
#include "tradeoff/dataset.hpp"
#include "tradeoff/errors.hpp"

namespace tradeoff {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    std::int64_t errors() const { return fp + fn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct GroupConfusion {
    Attribute attribute = Attribute::race;
    ConfusionCounts group_a0;
    ConfusionCounts group_a1;

    ConfusionCounts overall() const { return group_a0 + group_a1; }
    bool operator==(const GroupConfusion&) const = default;
};

inline void tally(ConfusionCounts& c, int predicted, int label) {
    if (predicted) {
        ++(label ? c.tp : c.fp);
    } else {
        ++(label ? c.fn : c.tn);
    }
}

inline ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw DataError("predictions and labels differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) tally(c, predictions[i], labels[i]);
    return c;
}

inline GroupConfusion group_confusion(std::span<const int> predictions, std::span<const int> labels,
                                      std::span<const int> groups, Attribute attribute = Attribute::race) {
    if (predictions.size() != labels.size() || groups.size() != labels.size()) {
        throw DataError("predictions, labels and groups differ in length");
    }
    GroupConfusion gc;
    gc.attribute = attribute;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (groups[i] != 0 && groups[i] != 1) throw DataError("group ids must be 0 or 1");
        tally(groups[i] ? gc.group_a1 : gc.group_a0, predictions[i], labels[i]);
    }
    return gc;
}

// max(|FP(a1) - FP(a0)|, |FN(a1) - FN(a0)|), in counts.
inline std::int64_t disparity(const GroupConfusion& gc) {
    return std::max(std::llabs(gc.group_a1.fp - gc.group_a0.fp), std::llabs(gc.group_a1.fn - gc.group_a0.fn));
}

// Threshold grid with values k / 10^decimals so that grid values are the
// nearest doubles to their decimal spelling (0.45 is exactly the literal 0.45).
class ThresholdGrid {
public:
    ThresholdGrid() = default;

    explicit ThresholdGrid(std::vector<double> values) : values_(std::move(values)) { validate(); }

    // Parses "start:stop:step", e.g. "0:1:0.05".
    static ThresholdGrid parse(std::string_view spec) {
        auto first = spec.find(':');
        auto second = first == std::string_view::npos ? first : spec.find(':', first + 1);
        if (second == std::string_view::npos) throw ConfigError("threshold grid must be start:stop:step");
        std::string parts[3] = {std::string(spec.substr(0, first)), std::string(spec.substr(first + 1, second - first - 1)),
                                std::string(spec.substr(second + 1))};
        int decimals = 0;
        for (const auto& p : parts) {
            auto dot = p.find('.');
            if (dot != std::string::npos) decimals = std::max(decimals, int(p.size() - dot - 1));
        }
        if (decimals > 9) throw ConfigError("threshold grid supports at most 9 decimal places");
        const double unit = std::pow(10.0, decimals);
        std::int64_t v[3];
        for (int k = 0; k < 3; ++k) {
            std::size_t used = 0;
            double d = 0.0;
            try {
                d = std::stod(parts[k], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != parts[k].size() || parts[k].empty()) {
                throw ConfigError("threshold grid component '" + parts[k] + "' is not a number");
            }
            v[k] = std::llround(d * unit);
        }
        if (v[2] <= 0) throw ConfigError("threshold grid step must be > 0");
        if (v[0] > v[1]) throw ConfigError("threshold grid start exceeds stop");
        std::vector<double> values;
        for (std::int64_t k = v[0]; k <= v[1]; k += v[2]) values.push_back(double(k) / unit);
        return ThresholdGrid(std::move(values));
    }

    static ThresholdGrid standard() { return parse("0:1:0.05"); }

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    // Index of the grid value within 1e-9 of `t`, if any.
    std::optional<std::size_t> find(double t) const {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (std::abs(values_[i] - t) <= 1e-9) return i;
        }
        return std::nullopt;
    }

    bool operator==(const ThresholdGrid&) const = default;

private:
    void validate() const {
        if (values_.empty()) throw ConfigError("threshold grid is empty");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) throw ConfigError("thresholds must lie in [0, 1]");
            if (i > 0 && !(values_[i] > values_[i - 1])) throw ConfigError("thresholds must be strictly increasing");
        }
    }

    std::vector<double> values_;
};

struct SweepPoint {
    double threshold = 0.0;
    ConfusionCounts counts;

    bool operator==(const SweepPoint&) const = default;
};

struct SweepCurve {
    std::vector<SweepPoint> points;

    bool operator==(const SweepCurve&) const = default;
};

inline SweepCurve sweep_scores(std::span<const double> scores, std::span<const int> labels, const ThresholdGrid& grid) {
    if (grid.size() == 0) throw ConfigError("threshold grid is empty");
    SweepCurve curve;
    for (double t : grid.values()) {
        curve.points.push_back({t, confusion(classify(scores, t), labels)});
    }
    return curve;
}

inline SweepCurve threshold_sweep(const LogisticModel& model, const FeatureMatrix& eval_data, const ThresholdGrid& grid) {
    if (grid.size() == 0) throw ConfigError("threshold grid is empty");
    return sweep_scores(predict_scores(model, eval_data), eval_data.labels, grid);
}

}  // namespace tradeoff
