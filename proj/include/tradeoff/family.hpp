#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tradeoff/classifier.hpp"
#include "tradeoff/dataset.hpp"
#include "tradeoff/frontier.hpp"
#include "tradeoff/metrics.hpp"

namespace tradeoff {

inline constexpr int kSchemaVersion = 1;

enum class EvalSplit { full, test };

inline std::string_view to_string(EvalSplit s) { return s == EvalSplit::full ? "full" : "test"; }

struct DatasetDescriptor {
    std::string source;
    std::size_t source_records = 0;  // filtered records the balanced sample was drawn from
    Attribute attribute = Attribute::race;
    std::size_t per_group_n = 0;
    std::size_t size = 0;
    std::array<std::string, 2> group_names;

    bool operator==(const DatasetDescriptor&) const = default;
};

struct ArtifactMetadata {
    DatasetDescriptor dataset;
    std::uint64_t sample_seed = 0;
    std::uint64_t split_seed = 0;
    double train_fraction = 0.7;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    EvalSplit eval_split = EvalSplit::full;
    std::size_t eval_size = 0;
    ThresholdGrid thresholds;
    GridConfig grid;
    TrainConfig train;
    std::vector<std::string> feature_columns;
    std::vector<std::string> warnings;
    std::vector<CandidateFailure> failures;
    std::string unweighted_model_id;
    double unweighted_test_accuracy = 0.0;
    std::optional<std::string> build_timestamp;
};

struct ModelEntry {
    std::string model_id;
    GridPoint grid;
    LogisticModel model;

    bool operator==(const ModelEntry&) const = default;
};

struct ModelFamilyArtifact {
    int schema_version = kSchemaVersion;
    ArtifactMetadata metadata;
    std::vector<ModelEntry> models;
    SweepCurve sweep;                 // unweighted model over the threshold grid
    std::vector<FrontierSet> frontiers;  // one per threshold, in grid order
    // model_id -> one GroupConfusion per threshold, in grid order
    std::map<std::string, std::vector<GroupConfusion>> evaluations;

    Attribute attribute() const { return metadata.dataset.attribute; }

    const ModelEntry* find_model(std::string_view id) const {
        for (const auto& m : models) {
            if (m.model_id == id) return &m;
        }
        return nullptr;
    }

    const FrontierSet& frontier(std::size_t threshold_index) const { return frontiers.at(threshold_index); }

    const GroupConfusion& evaluation(const std::string& model_id, std::size_t threshold_index) const {
        return evaluations.at(model_id).at(threshold_index);
    }
};

inline bool operator==(const ArtifactMetadata& a, const ArtifactMetadata& b) {
    auto failures_equal = [&] {
        if (a.failures.size() != b.failures.size()) return false;
        for (std::size_t i = 0; i < a.failures.size(); ++i) {
            const auto& x = a.failures[i];
            const auto& y = b.failures[i];
            if (x.model_id != y.model_id || x.grid_index != y.grid_index || !(x.grid == y.grid) ||
                x.reason != y.reason) {
                return false;
            }
        }
        return true;
    };
    return a.dataset == b.dataset && a.sample_seed == b.sample_seed && a.split_seed == b.split_seed &&
           a.train_fraction == b.train_fraction && a.train_size == b.train_size && a.test_size == b.test_size &&
           a.eval_split == b.eval_split && a.eval_size == b.eval_size && a.thresholds == b.thresholds &&
           a.grid == b.grid && a.train == b.train && a.feature_columns == b.feature_columns &&
           a.warnings == b.warnings && failures_equal() && a.unweighted_model_id == b.unweighted_model_id &&
           a.unweighted_test_accuracy == b.unweighted_test_accuracy && a.build_timestamp == b.build_timestamp;
}

inline bool operator==(const ModelFamilyArtifact& a, const ModelFamilyArtifact& b) {
    return a.schema_version == b.schema_version && a.metadata == b.metadata && a.models == b.models &&
           a.sweep == b.sweep && a.frontiers == b.frontiers && a.evaluations == b.evaluations;
}

struct BuildOptions {
    ThresholdGrid thresholds = ThresholdGrid::standard();
    GridConfig grid;
    TrainConfig train;
    double train_fraction = 0.7;
    std::uint64_t split_seed = 0;
    EvalSplit eval_split = EvalSplit::full;
    unsigned threads = 1;
    std::string source;
    std::size_t source_records = 0;
    std::optional<std::string> build_timestamp;
};

// Splits, encodes (statistics from the training split), trains every grid
// candidate on the training split, evaluates each at every threshold on the
// evaluation split, and Pareto-filters per threshold.
inline ModelFamilyArtifact build_family(const BalancedDataset& dataset, const BuildOptions& options) {
    const auto grid = weight_grid(options.grid);
    auto indices = split(dataset, options.train_fraction, options.split_seed);
    auto encoded = encode(dataset, indices.train);
    auto train_matrix = encoded.subset(indices.train);
    auto test_matrix = encoded.subset(indices.test);
    const FeatureMatrix& eval_matrix = options.eval_split == EvalSplit::full ? encoded : test_matrix;

    auto candidates = generate_candidates(train_matrix, grid, options.train, options.threads);

    ModelFamilyArtifact artifact;
    auto& meta = artifact.metadata;
    const auto names = group_names(dataset.attribute);
    meta.dataset = {options.source,   options.source_records, dataset.attribute,
                    dataset.size() / 2, dataset.size(),       {std::string(names[0]), std::string(names[1])}};
    meta.sample_seed = dataset.seed;
    meta.split_seed = options.split_seed;
    meta.train_fraction = options.train_fraction;
    meta.train_size = indices.train.size();
    meta.test_size = indices.test.size();
    meta.eval_split = options.eval_split;
    meta.eval_size = eval_matrix.rows();
    meta.thresholds = options.thresholds;
    meta.grid = options.grid;
    meta.train = options.train;
    meta.feature_columns = encoded.columns;
    meta.warnings = encoded.warnings;
    meta.failures = candidates.failures;
    meta.build_timestamp = options.build_timestamp;

    const Candidate* unweighted = nullptr;
    for (const auto& c : candidates.candidates) {
        if (c.grid == GridPoint{1.0, 1.0}) unweighted = &c;
    }
    if (!unweighted) throw DataError("the unweighted model failed to train");
    meta.unweighted_model_id = unweighted->model_id;
    {
        auto predictions = classify(predict_scores(unweighted->model, test_matrix), 0.5);
        auto counts = confusion(predictions, test_matrix.labels);
        meta.unweighted_test_accuracy = double(counts.tp + counts.tn) / double(counts.total());
    }

    std::vector<std::vector<double>> scores(candidates.candidates.size());
    parallel_for(scores.size(), options.threads,
                 [&](std::size_t i) { scores[i] = predict_scores(candidates.candidates[i].model, eval_matrix); });

    artifact.sweep = sweep_scores(scores[std::size_t(unweighted - candidates.candidates.data())],
                                  eval_matrix.labels, options.thresholds);

    for (std::size_t t = 0; t < options.thresholds.size(); ++t) {
        const double threshold = options.thresholds[t];
        std::vector<FrontierPoint> points;
        for (std::size_t i = 0; i < candidates.candidates.size(); ++i) {
            const auto& c = candidates.candidates[i];
            auto gc = group_confusion(classify(scores[i], threshold), eval_matrix.labels, eval_matrix.groups,
                                      dataset.attribute);
            artifact.evaluations[c.model_id].push_back(gc);
            points.push_back(make_point(c, threshold, gc));
        }
        artifact.frontiers.push_back(pareto_filter(points));
    }

    for (auto& c : candidates.candidates) {
        artifact.models.push_back({c.model_id, c.grid, std::move(c.model)});
    }
    return artifact;
}

}  // namespace tradeoff
