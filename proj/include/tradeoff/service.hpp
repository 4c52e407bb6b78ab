#pragma once

// Read-only HTTP API over a loaded model family plus the selection endpoint.
// Every read is answered from the precomputed evaluations table.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "tradeoff/artifact.hpp"
#include "tradeoff/errors.hpp"

namespace tradeoff {

struct Reply {
    int status = 200;
    json body;
};

inline Reply error_reply(int status, std::string error, std::string detail, std::optional<json> valid_values = {}) {
    json body = {{"error", std::move(error)}, {"detail", std::move(detail)}};
    if (valid_values) body["valid_values"] = *valid_values;
    return {status, body};
}

inline json evaluation_response(const ModelFamilyArtifact& artifact, const std::string& model_id,
                                std::size_t threshold_index, bool with_groups) {
    const auto& gc = artifact.evaluation(model_id, threshold_index);
    const auto overall = gc.overall();
    json body = {{"model_id", model_id},
                 {"threshold", artifact.metadata.thresholds[threshold_index]},
                 {"overall", detail::counts_to_json(overall)},
                 {"errors", overall.errors()}};
    if (with_groups) {
        const auto& names = artifact.metadata.dataset.group_names;
        body["attribute"] = std::string(to_string(gc.attribute));
        body["by_group"] = {{"groups", {names[0], names[1]}},
                            {"a0", detail::counts_to_json(gc.group_a0)},
                            {"a1", detail::counts_to_json(gc.group_a1)}};
        body["disparity"] = disparity(gc);
    }
    return body;
}

class Service {
public:
    Service(ModelFamilyArtifact artifact, std::filesystem::path selection_log)
        : artifact_(std::move(artifact)), log_(std::move(selection_log)) {}

    const ModelFamilyArtifact& artifact() const { return artifact_; }

    Reply metadata() const {
        const auto& m = artifact_.metadata;
        json body = {{"schema_version", artifact_.schema_version},
                     {"dataset",
                      {{"source", m.dataset.source},
                       {"size", m.dataset.size},
                       {"per_group_n", m.dataset.per_group_n},
                       {"groups", {m.dataset.group_names[0], m.dataset.group_names[1]}},
                       {"evaluation_split", std::string(to_string(m.eval_split))},
                       {"evaluation_size", m.eval_size}}},
                     {"attributes", {std::string(to_string(artifact_.attribute()))}},
                     {"thresholds", m.thresholds.values()},
                     {"unweighted_model_id", m.unweighted_model_id},
                     {"seeds", {{"sample", m.sample_seed}, {"split", m.split_seed}}},
                     {"model_count", artifact_.models.size()}};
        return {200, body};
    }

    Reply frontier(const std::optional<std::string>& attribute, const std::optional<std::string>& threshold) const {
        if (!attribute) return missing("attribute");
        if (!threshold) return missing("threshold");
        if (auto r = check_attribute(*attribute)) return *r;
        auto index = threshold_index(*threshold);
        if (!index.first) return *index.second;
        const auto& f = artifact_.frontier(*index.first);
        auto body = frontier_to_json(f);
        return {200, body};
    }

    Reply evaluation(const std::optional<std::string>& model_id, const std::optional<std::string>& threshold,
                     const std::optional<std::string>& attribute) const {
        if (!model_id) return missing("model");
        if (!threshold) return missing("threshold");
        if (!artifact_.find_model(*model_id)) {
            json ids = json::array();
            for (const auto& m : artifact_.models) ids.push_back(m.model_id);
            return error_reply(404, "not_found", "unknown model '" + *model_id + "'", ids);
        }
        if (attribute) {
            if (auto r = check_attribute(*attribute)) return *r;
        }
        auto index = threshold_index(*threshold);
        if (!index.first) return *index.second;
        return {200, evaluation_response(artifact_, *model_id, *index.first, attribute.has_value())};
    }

    Reply post_selection(std::string_view body) {
        json parsed;
        try {
            parsed = json::parse(body);
        } catch (const json::parse_error& e) {
            return error_reply(400, "invalid_request", std::string("body is not valid JSON: ") + e.what());
        }
        try {
            auto record = selection_from_json(parsed, /*require_timestamp=*/false);
            if (record.timestamp.empty()) record.timestamp = utc_now();
            auto sequence = log_.append(record, artifact_);
            return {201, {{"status", "recorded"}, {"sequence", sequence}}};
        } catch (const ValidationError& e) {
            json fields = json::array();
            for (const auto& issue : e.issues()) fields.push_back({{"field", issue.field}, {"reason", issue.reason}});
            auto reply = error_reply(400, "invalid_request", e.what());
            reply.body["fields"] = fields;
            return reply;
        } catch (const Error& e) {
            return error_reply(500, "storage_error", e.what());
        }
    }

private:
    static Reply missing(const std::string& name) {
        return error_reply(400, "invalid_request", "missing query parameter '" + name + "'");
    }

    std::optional<Reply> check_attribute(const std::string& attribute) const {
        if (attribute == to_string(artifact_.attribute())) return std::nullopt;
        return error_reply(404, "not_found", "unknown attribute '" + attribute + "'",
                           json::array({std::string(to_string(artifact_.attribute()))}));
    }

    std::pair<std::optional<std::size_t>, std::optional<Reply>> threshold_index(const std::string& text) const {
        const auto& grid = artifact_.metadata.thresholds;
        double t = 0.0;
        std::size_t used = 0;
        try {
            t = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size()) {
            return {std::nullopt, error_reply(400, "invalid_request", "threshold '" + text + "' is not a number")};
        }
        if (auto i = grid.find(t)) return {i, std::nullopt};
        return {std::nullopt,
                error_reply(404, "not_found", "threshold " + text + " is not on the grid", json(grid.values()))};
    }

    ModelFamilyArtifact artifact_;
    SelectionLog log_;
};

inline const char* kFallbackPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>Trade-off explorer</title></head>
<body>
<h1>Trade-off explorer API</h1>
<p>No UI assets were configured. Available endpoints:</p>
<ul>
<li><code>GET /api/metadata</code></li>
<li><code>GET /api/frontier?attribute=A&amp;threshold=T</code></li>
<li><code>GET /api/evaluation?model=M&amp;threshold=T[&amp;attribute=A]</code></li>
<li><code>POST /api/selection</code></li>
</ul>
</body></html>
)";

// Registers the API routes and, when `ui_dir` exists, serves it at "/".
inline void mount(httplib::Server& server, Service& service,
                  const std::optional<std::filesystem::path>& ui_dir = std::nullopt) {
    auto send = [](httplib::Response& res, const Reply& reply) {
        res.status = reply.status;
        res.set_content(reply.body.dump(), "application/json");
    };
    auto param = [](const httplib::Request& req, const char* name) -> std::optional<std::string> {
        if (!req.has_param(name)) return std::nullopt;
        return req.get_param_value(name);
    };

    server.Get("/api/metadata", [&service, send](const httplib::Request&, httplib::Response& res) {
        send(res, service.metadata());
    });
    server.Get("/api/frontier", [&service, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, service.frontier(param(req, "attribute"), param(req, "threshold")));
    });
    server.Get("/api/evaluation", [&service, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, service.evaluation(param(req, "model"), param(req, "threshold"), param(req, "attribute")));
    });
    server.Post("/api/selection", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.post_selection(req.body));
    });

    bool mounted = false;
    if (ui_dir && std::filesystem::is_directory(*ui_dir)) mounted = server.set_mount_point("/", ui_dir->string());
    if (!mounted) {
        server.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(kFallbackPage, "text/html");
        });
    }
}

}  // namespace tradeoff
