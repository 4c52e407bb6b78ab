#pragma once

// On-disk forms: the canonical dataset document written by `ingest`, the model
// family artifact, and the line-delimited model-selection log.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tradeoff/errors.hpp"
#include "tradeoff/family.hpp"

namespace tradeoff {

using json = nlohmann::json;

namespace detail {

inline json counts_to_json(const ConfusionCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline ConfusionCounts counts_from_json(const json& j) {
    ConfusionCounts c{j.at("tp").get<std::int64_t>(), j.at("fp").get<std::int64_t>(), j.at("fn").get<std::int64_t>(),
                      j.at("tn").get<std::int64_t>()};
    if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0) throw ParseError("negative confusion count");
    return c;
}

inline Attribute attribute_from_json(const json& j) {
    auto a = parse_attribute(j.get<std::string>());
    if (!a) throw ParseError("unknown attribute '" + j.get<std::string>() + "'");
    return *a;
}

inline double finite(const json& j, const char* what) {
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(std::string(what) + " is not finite");
    return v;
}

inline json train_config_to_json(const TrainConfig& c) {
    return {{"l2_lambda", c.l2_lambda},
            {"max_iterations", c.max_iterations},
            {"gradient_tolerance", c.gradient_tolerance},
            {"step", {{"initial_scale", c.step.initial_scale}, {"decay_iterations", c.step.decay_iterations}}},
            {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.l2_lambda = j.at("l2_lambda").get<double>();
    c.max_iterations = j.at("max_iterations").get<int>();
    c.gradient_tolerance = j.at("gradient_tolerance").get<double>();
    c.step.initial_scale = j.at("step").at("initial_scale").get<double>();
    c.step.decay_iterations = j.at("step").at("decay_iterations").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline json model_to_json(const ModelEntry& m) {
    json norm = json::array();
    for (std::size_t j = 0; j < m.model.normalization.size(); ++j) {
        norm.push_back({{"feature", m.model.feature_names[j]},
                        {"mean", m.model.normalization[j].mean},
                        {"scale", m.model.normalization[j].scale}});
    }
    const auto& s = m.model.summary;
    return {{"model_id", m.model_id},
            {"alpha", m.grid.alpha},
            {"beta", m.grid.beta},
            {"coefficients", m.model.coefficients},
            {"intercept", m.model.intercept},
            {"l2_lambda", m.model.l2_lambda},
            {"normalization", norm},
            {"training",
             {{"iterations", s.iterations},
              {"gradient_norm", s.gradient_norm},
              {"initial_loss", s.initial_loss},
              {"final_loss", s.final_loss},
              {"converged", s.converged}}}};
}

inline ModelEntry model_from_json(const json& j) {
    ModelEntry m;
    m.model_id = j.at("model_id").get<std::string>();
    m.grid = {finite(j.at("alpha"), "alpha"), finite(j.at("beta"), "beta")};
    for (const auto& c : j.at("coefficients")) m.model.coefficients.push_back(finite(c, "coefficient"));
    m.model.intercept = finite(j.at("intercept"), "intercept");
    m.model.l2_lambda = j.at("l2_lambda").get<double>();
    for (const auto& n : j.at("normalization")) {
        m.model.feature_names.push_back(n.at("feature").get<std::string>());
        m.model.normalization.push_back({finite(n.at("mean"), "mean"), finite(n.at("scale"), "scale")});
    }
    const auto& t = j.at("training");
    m.model.summary = {t.at("iterations").get<int>(), t.at("gradient_norm").get<double>(),
                       t.at("initial_loss").get<double>(), t.at("final_loss").get<double>(),
                       t.at("converged").get<bool>()};
    return m;
}

inline json group_confusion_to_json(const GroupConfusion& gc) {
    return {{"a0", counts_to_json(gc.group_a0)}, {"a1", counts_to_json(gc.group_a1)}};
}

inline GroupConfusion group_confusion_from_json(const json& j, Attribute a) {
    return {a, counts_from_json(j.at("a0")), counts_from_json(j.at("a1"))};
}

inline json frontier_point_to_json(const FrontierPoint& p) {
    return {{"model_id", p.model_id},
            {"alpha", p.grid.alpha},
            {"beta", p.grid.beta},
            {"errors", p.errors},
            {"disparity", p.disparity},
            {"by_group", group_confusion_to_json(p.group_confusion)}};
}

inline FrontierPoint frontier_point_from_json(const json& j, Attribute a, double threshold) {
    FrontierPoint p;
    p.model_id = j.at("model_id").get<std::string>();
    p.grid = {j.at("alpha").get<double>(), j.at("beta").get<double>()};
    p.threshold = threshold;
    p.errors = j.at("errors").get<std::int64_t>();
    p.disparity = j.at("disparity").get<std::int64_t>();
    p.group_confusion = group_confusion_from_json(j.at("by_group"), a);
    return p;
}

inline std::string dump(const json& j) { return j.dump(1) + "\n"; }

}  // namespace detail

inline json frontier_to_json(const FrontierSet& f) {
    json points = json::array();
    for (const auto& p : f.points) points.push_back(detail::frontier_point_to_json(p));
    return {{"attribute", std::string(to_string(f.attribute))}, {"threshold", f.threshold}, {"points", points}};
}

inline json artifact_to_json(const ModelFamilyArtifact& a) {
    const auto& m = a.metadata;
    json failures = json::array();
    for (const auto& f : m.failures) {
        failures.push_back({{"model_id", f.model_id},
                            {"grid_index", f.grid_index},
                            {"alpha", f.grid.alpha},
                            {"beta", f.grid.beta},
                            {"reason", f.reason}});
    }
    json meta = {
        {"dataset",
         {{"source", m.dataset.source},
          {"source_records", m.dataset.source_records},
          {"attribute", std::string(to_string(m.dataset.attribute))},
          {"per_group_n", m.dataset.per_group_n},
          {"size", m.dataset.size},
          {"groups", {m.dataset.group_names[0], m.dataset.group_names[1]}}}},
        {"seeds", {{"sample", m.sample_seed}, {"split", m.split_seed}}},
        {"split", {{"train_fraction", m.train_fraction}, {"train_size", m.train_size}, {"test_size", m.test_size}}},
        {"evaluation", {{"split", std::string(to_string(m.eval_split))}, {"size", m.eval_size}}},
        {"thresholds", m.thresholds.values()},
        {"grid", {{"levels", m.grid.levels}, {"range", m.grid.range}}},
        {"train_config", detail::train_config_to_json(m.train)},
        {"features", m.feature_columns},
        {"warnings", m.warnings},
        {"failed_candidates", failures},
        {"unweighted_model_id", m.unweighted_model_id},
        {"unweighted_test_accuracy", m.unweighted_test_accuracy},
        {"build_timestamp", m.build_timestamp ? json(*m.build_timestamp) : json(nullptr)},
    };

    json models = json::array();
    for (const auto& e : a.models) models.push_back(detail::model_to_json(e));

    json sweep = json::array();
    for (const auto& p : a.sweep.points) {
        auto entry = detail::counts_to_json(p.counts);
        entry["threshold"] = p.threshold;
        sweep.push_back(entry);
    }

    json frontiers = json::array();
    for (const auto& f : a.frontiers) frontiers.push_back(frontier_to_json(f));

    json evaluations = json::object();
    for (const auto& [id, per_threshold] : a.evaluations) {
        json rows = json::array();
        for (std::size_t t = 0; t < per_threshold.size(); ++t) {
            auto row = detail::group_confusion_to_json(per_threshold[t]);
            row["threshold"] = t < m.thresholds.size() ? m.thresholds[t] : 0.0;
            rows.push_back(row);
        }
        evaluations[id] = rows;
    }

    return {{"schema_version", a.schema_version}, {"metadata", meta},   {"models", models},
            {"sweep", sweep},                     {"frontiers", frontiers}, {"evaluations", evaluations}};
}

// Canonical text: sorted keys, shortest round-trip float formatting.
inline std::string export_artifact(const ModelFamilyArtifact& a) { return detail::dump(artifact_to_json(a)); }

// Re-checks every cross-reference and count invariant; throws IntegrityError
// naming the first violated invariant.
inline void validate_artifact(const ModelFamilyArtifact& a) {
    const auto& m = a.metadata;
    const auto nthr = m.thresholds.size();
    if (nthr == 0) throw IntegrityError("thresholds", "threshold grid is empty");

    std::set<std::string> ids;
    for (const auto& e : a.models) {
        if (!ids.insert(e.model_id).second) throw IntegrityError("unique_model_ids", "duplicate model " + e.model_id);
        if (e.model.coefficients.size() != m.feature_columns.size() ||
            e.model.normalization.size() != m.feature_columns.size()) {
            throw IntegrityError("model_dimension", "model " + e.model_id + " does not match the feature list");
        }
    }
    if (!ids.count(m.unweighted_model_id)) {
        throw IntegrityError("unweighted_model_reference", "unknown model " + m.unweighted_model_id);
    }

    for (const auto& [id, rows] : a.evaluations) {
        if (!ids.count(id)) throw IntegrityError("evaluation_model_reference", "unknown model " + id);
        if (rows.size() != nthr) throw IntegrityError("evaluation_coverage", "model " + id + " lacks thresholds");
        for (const auto& gc : rows) {
            if (std::size_t(gc.overall().total()) != m.eval_size) {
                throw IntegrityError("evaluation_totals", "model " + id + " counts do not sum to evaluation size");
            }
        }
    }
    for (const auto& id : ids) {
        if (!a.evaluations.count(id)) throw IntegrityError("evaluation_coverage", "model " + id + " has no evaluations");
    }

    if (a.sweep.points.size() != nthr) throw IntegrityError("sweep_coverage", "sweep does not cover the grid");
    for (std::size_t t = 0; t < nthr; ++t) {
        const auto& p = a.sweep.points[t];
        if (std::abs(p.threshold - m.thresholds[t]) > 1e-12) {
            throw IntegrityError("sweep_coverage", "sweep threshold does not match grid");
        }
        if (t > 0 && (p.counts.fp > a.sweep.points[t - 1].counts.fp || p.counts.fn < a.sweep.points[t - 1].counts.fn)) {
            throw IntegrityError("sweep_monotonicity", "fp must not increase and fn must not decrease");
        }
    }

    if (a.frontiers.size() != nthr) throw IntegrityError("frontier_coverage", "one frontier per threshold required");
    for (std::size_t t = 0; t < nthr; ++t) {
        const auto& f = a.frontiers[t];
        if (std::abs(f.threshold - m.thresholds[t]) > 1e-12 || f.attribute != a.attribute()) {
            throw IntegrityError("frontier_coverage", "frontier key does not match the grid");
        }
        if (f.points.empty()) throw IntegrityError("frontier_nonempty", "empty frontier");
        for (const auto& p : f.points) {
            if (!ids.count(p.model_id)) {
                throw IntegrityError("frontier_model_reference", "frontier references unknown model " + p.model_id);
            }
            if (p.errors != p.group_confusion.overall().errors() || p.disparity != disparity(p.group_confusion)) {
                throw IntegrityError("frontier_point_consistency", "point " + p.model_id + " counts disagree");
            }
            if (!(a.evaluation(p.model_id, t) == p.group_confusion)) {
                throw IntegrityError("frontier_point_consistency",
                                     "point " + p.model_id + " disagrees with the evaluations table");
            }
        }
        if (!is_pareto_sound(f)) {
            throw IntegrityError("pareto_property", "frontier at threshold " + std::to_string(f.threshold));
        }
    }
}

inline ModelFamilyArtifact artifact_from_json(const json& root) {
    ModelFamilyArtifact a;
    try {
        a.schema_version = root.at("schema_version").get<int>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("missing schema_version: ") + e.what());
    }
    if (a.schema_version != kSchemaVersion) throw SchemaError(a.schema_version, kSchemaVersion);

    try {
        const auto& jm = root.at("metadata");
        auto& m = a.metadata;
        const auto& d = jm.at("dataset");
        m.dataset.source = d.at("source").get<std::string>();
        m.dataset.source_records = d.at("source_records").get<std::size_t>();
        m.dataset.attribute = detail::attribute_from_json(d.at("attribute"));
        m.dataset.per_group_n = d.at("per_group_n").get<std::size_t>();
        m.dataset.size = d.at("size").get<std::size_t>();
        m.dataset.group_names = {d.at("groups").at(0).get<std::string>(), d.at("groups").at(1).get<std::string>()};
        m.sample_seed = jm.at("seeds").at("sample").get<std::uint64_t>();
        m.split_seed = jm.at("seeds").at("split").get<std::uint64_t>();
        m.train_fraction = jm.at("split").at("train_fraction").get<double>();
        m.train_size = jm.at("split").at("train_size").get<std::size_t>();
        m.test_size = jm.at("split").at("test_size").get<std::size_t>();
        auto split_name = jm.at("evaluation").at("split").get<std::string>();
        if (split_name != "full" && split_name != "test") throw ParseError("unknown evaluation split " + split_name);
        m.eval_split = split_name == "full" ? EvalSplit::full : EvalSplit::test;
        m.eval_size = jm.at("evaluation").at("size").get<std::size_t>();
        try {
            m.thresholds = ThresholdGrid(jm.at("thresholds").get<std::vector<double>>());
        } catch (const ConfigError& e) {
            throw IntegrityError("thresholds", e.what());
        }
        m.grid = {jm.at("grid").at("levels").get<int>(), jm.at("grid").at("range").get<double>()};
        m.train = detail::train_config_from_json(jm.at("train_config"));
        m.feature_columns = jm.at("features").get<std::vector<std::string>>();
        m.warnings = jm.at("warnings").get<std::vector<std::string>>();
        for (const auto& f : jm.at("failed_candidates")) {
            m.failures.push_back({f.at("model_id").get<std::string>(), f.at("grid_index").get<std::size_t>(),
                                  GridPoint{f.at("alpha").get<double>(), f.at("beta").get<double>()},
                                  f.at("reason").get<std::string>()});
        }
        m.unweighted_model_id = jm.at("unweighted_model_id").get<std::string>();
        m.unweighted_test_accuracy = jm.at("unweighted_test_accuracy").get<double>();
        if (!jm.at("build_timestamp").is_null()) m.build_timestamp = jm.at("build_timestamp").get<std::string>();

        for (const auto& jmodel : root.at("models")) a.models.push_back(detail::model_from_json(jmodel));

        for (const auto& p : root.at("sweep")) {
            a.sweep.points.push_back({p.at("threshold").get<double>(), detail::counts_from_json(p)});
        }
        for (const auto& jf : root.at("frontiers")) {
            FrontierSet f;
            f.attribute = detail::attribute_from_json(jf.at("attribute"));
            f.threshold = jf.at("threshold").get<double>();
            for (const auto& p : jf.at("points")) {
                f.points.push_back(detail::frontier_point_from_json(p, f.attribute, f.threshold));
            }
            a.frontiers.push_back(std::move(f));
        }
        for (const auto& [id, rows] : root.at("evaluations").items()) {
            auto& out = a.evaluations[id];
            for (const auto& row : rows) out.push_back(detail::group_confusion_from_json(row, m.dataset.attribute));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed artifact: ") + e.what());
    }
    validate_artifact(a);
    return a;
}

inline ModelFamilyArtifact load_artifact(std::string_view bytes, std::vector<std::string>* warnings = nullptr) {
    json root;
    try {
        root = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("artifact is not a valid document: ") + e.what());
    }
    if (!root.is_object()) throw ParseError("artifact root must be an object");
    if (warnings) {
        static const std::set<std::string> known = {"schema_version", "metadata", "models",
                                                    "sweep",          "frontiers", "evaluations"};
        for (const auto& [key, value] : root.items()) {
            if (!known.count(key)) warnings->push_back("ignored unknown top-level key '" + key + "'");
        }
    }
    return artifact_from_json(root);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
}

// --- dataset document ---

struct DatasetDocument {
    std::string source;
    std::size_t parsed = 0;
    std::size_t rejected = 0;
    FilterCounts removed;
    std::vector<DefendantRecord> records;

    bool operator==(const DatasetDocument&) const = default;
};

inline std::string export_dataset(const DatasetDocument& d) {
    json records = json::array();
    for (const auto& r : d.records) {
        records.push_back({{"id", r.id},
                           {"age", r.age},
                           {"sex", std::string(to_string(r.sex))},
                           {"race", std::string(to_string(r.race))},
                           {"priors_count", r.priors_count},
                           {"juv_fel_count", r.juv_fel_count},
                           {"juv_misd_count", r.juv_misd_count},
                           {"juv_other_count", r.juv_other_count},
                           {"charge_degree", std::string(to_string(r.charge_degree))},
                           {"is_recid", r.is_recid},
                           {"recidivated", r.recidivated}});
    }
    json root = {{"schema_version", kSchemaVersion},
                 {"kind", "dataset"},
                 {"source", d.source},
                 {"parsed", d.parsed},
                 {"rejected", d.rejected},
                 {"removed",
                  {{"incomplete", d.removed.incomplete},
                   {"under_age", d.removed.under_age},
                   {"ordinance_charge", d.removed.ordinance_charge},
                   {"non_binary_race", d.removed.non_binary_race}}},
                 {"records", records}};
    return detail::dump(root);
}

inline DatasetDocument load_dataset(std::string_view bytes) {
    json root;
    try {
        root = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("dataset is not a valid document: ") + e.what());
    }
    try {
        auto version = root.at("schema_version").get<int>();
        if (version != kSchemaVersion) throw SchemaError(version, kSchemaVersion);
        if (root.at("kind").get<std::string>() != "dataset") throw ParseError("document is not a dataset");
        DatasetDocument d;
        d.source = root.at("source").get<std::string>();
        d.parsed = root.at("parsed").get<std::size_t>();
        d.rejected = root.at("rejected").get<std::size_t>();
        const auto& rm = root.at("removed");
        d.removed = {rm.at("incomplete").get<std::size_t>(), rm.at("under_age").get<std::size_t>(),
                     rm.at("ordinance_charge").get<std::size_t>(), rm.at("non_binary_race").get<std::size_t>()};
        for (const auto& j : root.at("records")) {
            DefendantRecord r;
            r.id = j.at("id").get<std::string>();
            r.age = j.at("age").get<int>();
            auto sex = detail::parse_sex(j.at("sex").get<std::string>());
            if (!sex) throw ParseError("record " + r.id + " has an invalid sex");
            r.sex = *sex;
            r.race = detail::parse_race(j.at("race").get<std::string>());
            r.priors_count = j.at("priors_count").get<int>();
            r.juv_fel_count = j.at("juv_fel_count").get<int>();
            r.juv_misd_count = j.at("juv_misd_count").get<int>();
            r.juv_other_count = j.at("juv_other_count").get<int>();
            auto charge = j.at("charge_degree").get<std::string>();
            if (charge == "felony") {
                r.charge_degree = ChargeDegree::felony;
            } else if (charge == "misdemeanor") {
                r.charge_degree = ChargeDegree::misdemeanor;
            } else {
                throw ParseError("record " + r.id + " has an invalid charge_degree");
            }
            r.is_recid = j.at("is_recid").get<int>();
            r.recidivated = j.at("recidivated").get<int>();
            if (r.age < 18 || r.priors_count < 0 || r.juv_fel_count < 0 || r.juv_misd_count < 0 ||
                r.juv_other_count < 0 || (r.recidivated != 0 && r.recidivated != 1) || r.race == Race::other) {
                throw ParseError("record " + r.id + " violates the filtered-record invariants");
            }
            d.records.push_back(std::move(r));
        }
        return d;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed dataset: ") + e.what());
    }
}

// --- selection log ---

enum class View { matrix, text };

struct SelectionRecord {
    std::string timestamp;
    std::string session_id;
    std::optional<Attribute> attribute;
    double threshold = 0.0;
    std::string model_id;
    View view = View::matrix;
    std::optional<std::string> rationale;

    bool operator==(const SelectionRecord&) const = default;
};

inline std::string utc_now() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json selection_to_json(const SelectionRecord& r) {
    return {{"timestamp", r.timestamp},
            {"session_id", r.session_id},
            {"attribute", r.attribute ? json(std::string(to_string(*r.attribute))) : json(nullptr)},
            {"threshold", r.threshold},
            {"model_id", r.model_id},
            {"view", r.view == View::matrix ? "matrix" : "text"},
            {"rationale", r.rationale ? json(*r.rationale) : json(nullptr)}};
}

// Field-level parsing; collects every problem before throwing.
inline SelectionRecord selection_from_json(const json& j, bool require_timestamp = true) {
    std::vector<FieldIssue> issues;
    SelectionRecord r;
    if (!j.is_object()) throw ValidationError(std::vector<FieldIssue>{{"body", "must be an object"}});

    auto text = [&](const char* field, bool required) -> std::optional<std::string> {
        if (!j.contains(field) || j[field].is_null()) {
            if (required) issues.push_back({field, "missing"});
            return std::nullopt;
        }
        if (!j[field].is_string()) {
            issues.push_back({field, "must be a string"});
            return std::nullopt;
        }
        return j[field].get<std::string>();
    };
    if (auto v = text("timestamp", require_timestamp)) r.timestamp = *v;
    if (auto v = text("session_id", true)) {
        if (v->empty()) issues.push_back({"session_id", "must not be empty"});
        r.session_id = *v;
    }
    if (auto v = text("model_id", true)) {
        if (v->empty()) issues.push_back({"model_id", "must not be empty"});
        r.model_id = *v;
    }
    if (auto v = text("attribute", false)) {
        r.attribute = parse_attribute(*v);
        if (!r.attribute) issues.push_back({"attribute", "must be race or gender"});
    }
    if (auto v = text("view", true)) {
        if (*v == "matrix") {
            r.view = View::matrix;
        } else if (*v == "text") {
            r.view = View::text;
        } else {
            issues.push_back({"view", "must be matrix or text"});
        }
    }
    r.rationale = text("rationale", false);
    if (!j.contains("threshold") || j["threshold"].is_null()) {
        issues.push_back({"threshold", "missing"});
    } else if (!j["threshold"].is_number()) {
        issues.push_back({"threshold", "must be a number"});
    } else {
        r.threshold = j["threshold"].get<double>();
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return r;
}

inline void validate_selection(const SelectionRecord& r, const ModelFamilyArtifact& artifact) {
    std::vector<FieldIssue> issues;
    if (r.session_id.empty()) issues.push_back({"session_id", "must not be empty"});
    if (r.timestamp.empty()) issues.push_back({"timestamp", "must not be empty"});
    if (!artifact.find_model(r.model_id)) issues.push_back({"model_id", "unknown model '" + r.model_id + "'"});
    if (!artifact.metadata.thresholds.find(r.threshold)) issues.push_back({"threshold", "not on the threshold grid"});
    if (r.attribute && *r.attribute != artifact.attribute()) {
        issues.push_back({"attribute", "artifact serves '" + std::string(to_string(artifact.attribute())) + "'"});
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

namespace detail {

inline std::mutex& log_mutex(const std::filesystem::path& path) {
    static std::mutex registry_guard;
    static std::map<std::string, std::unique_ptr<std::mutex>> registry;
    std::error_code ec;
    auto key = std::filesystem::weakly_canonical(path, ec).string();
    if (ec) key = path.string();
    std::lock_guard lock(registry_guard);
    auto& slot = registry[key];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

// Appends exactly one line with a single write, then fsyncs. Caller holds the
// per-path mutex; flock covers other processes.
inline void append_line(const std::filesystem::path& path, const std::string& line) {
    int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw Error("cannot open selection log " + path.string() + ": " + std::strerror(errno));
    struct Closer {
        int fd;
        ~Closer() { ::close(fd); }
    } closer{fd};
    if (::flock(fd, LOCK_EX) != 0) throw Error("cannot lock selection log " + path.string());
    std::string payload = line + "\n";
    const char* p = payload.data();
    std::size_t left = payload.size();
    while (left > 0) {
        auto n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("failed writing selection log " + path.string() + ": " + std::strerror(errno));
        }
        p += n;
        left -= std::size_t(n);
    }
    if (::fsync(fd) != 0) throw Error("failed syncing selection log " + path.string());
    ::flock(fd, LOCK_UN);
}

inline std::size_t count_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++n;
    }
    return n;
}

}  // namespace detail

// Validates against the served artifact, then appends one line durably.
inline void append_selection(const SelectionRecord& record, const std::filesystem::path& log_path,
                             const ModelFamilyArtifact& artifact) {
    validate_selection(record, artifact);
    auto line = selection_to_json(record).dump();
    std::lock_guard lock(detail::log_mutex(log_path));
    detail::append_line(log_path, line);
}

// Append-only log with a sequence counter continuing from the lines already
// present when opened.
class SelectionLog {
public:
    explicit SelectionLog(std::filesystem::path path) : path_(std::move(path)) {
        std::lock_guard lock(detail::log_mutex(path_));
        sequence_ = detail::count_lines(path_);
    }

    // Returns the 1-based sequence number assigned to the record.
    std::uint64_t append(const SelectionRecord& record, const ModelFamilyArtifact& artifact) {
        validate_selection(record, artifact);
        auto line = selection_to_json(record).dump();
        std::lock_guard lock(detail::log_mutex(path_));
        detail::append_line(path_, line);
        return ++sequence_;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::uint64_t sequence_ = 0;
};

struct SelectionSummary {
    std::size_t total = 0;
    std::vector<std::size_t> invalid_lines;  // 1-based
    std::map<std::string, std::size_t> per_model;
    std::map<double, std::size_t> per_threshold;
    std::map<std::string, std::size_t> per_view;
};

inline SelectionSummary summarize_selections(std::istream& in) {
    SelectionSummary s;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto r = selection_from_json(json::parse(line));
            ++s.total;
            ++s.per_model[r.model_id];
            ++s.per_threshold[r.threshold];
            ++s.per_view[r.view == View::matrix ? "matrix" : "text"];
        } catch (const std::exception&) {
            s.invalid_lines.push_back(line_no);
        }
    }
    return s;
}

}  // namespace tradeoff
