#pragma once

// tradeoff ingest | build | serve | selections summarize

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tradeoff/artifact.hpp"
#include "tradeoff/dataset.hpp"
#include "tradeoff/family.hpp"
#include "tradeoff/service.hpp"

namespace tradeoff::cli {

struct IngestOptions {
    std::string input;
    std::string out;
    std::string rejects;
};

struct BuildCliOptions {
    std::string dataset;
    std::string attribute = "race";
    std::optional<std::size_t> per_group_n;
    std::uint64_t seed = 42;
    int grid_k = 9;
    double grid_range = 4.0;
    std::string thresholds = "0:1:0.05";
    std::string out;
    double train_fraction = 0.7;
    std::string eval_split = "full";
    double l2_lambda = 1e-4;
    int max_iterations = 5000;
    double tolerance = 1e-6;
    unsigned threads = 0;
};

struct ServeOptions {
    std::string artifact;
    std::string selections = "selections.jsonl";
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string ui_dir;
};

// Build timestamp from SOURCE_DATE_EPOCH so repeated builds stay byte-identical.
inline std::optional<std::string> reproducible_timestamp() {
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (!epoch || !*epoch) return std::nullopt;
    char* end = nullptr;
    long long v = std::strtoll(epoch, &end, 10);
    if (*end != '\0') return std::nullopt;
    std::time_t t = static_cast<std::time_t>(v);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void run_ingest(const IngestOptions& o, std::ostream& out) {
    auto parsed = parse_raw(read_file(o.input));
    auto filtered = filter_records(parsed.records);
    DatasetDocument doc;
    doc.source = std::filesystem::path(o.input).filename().string();
    doc.parsed = parsed.records.size();
    doc.rejected = parsed.rejects.size();
    doc.removed = filtered.removed;
    doc.records = std::move(filtered.records);
    write_file(o.out, export_dataset(doc));

    if (!o.rejects.empty()) {
        std::string lines;
        for (const auto& r : parsed.rejects) lines += json{{"line", r.line}, {"reason", r.reason}}.dump() + "\n";
        write_file(o.rejects, lines);
    }
    out << "parsed " << doc.parsed << " rows, rejected " << doc.rejected << "\n"
        << "removed: incomplete " << doc.removed.incomplete << ", under_age " << doc.removed.under_age
        << ", ordinance_charge " << doc.removed.ordinance_charge << ", non_binary_race "
        << doc.removed.non_binary_race << "\n"
        << "kept " << doc.records.size() << " records -> " << o.out << "\n";
}

inline ModelFamilyArtifact build_from_options(const BuildCliOptions& o) {
    auto attribute = parse_attribute(o.attribute);
    if (!attribute) throw ConfigError("attribute must be race or gender");
    auto doc = load_dataset(read_file(o.dataset));
    const std::size_t per_group = o.per_group_n.value_or(*attribute == Attribute::race ? 1500 : 800);
    auto balanced = build_balanced(doc.records, *attribute, per_group, o.seed);

    BuildOptions options;
    options.thresholds = ThresholdGrid::parse(o.thresholds);
    options.grid = {o.grid_k, o.grid_range};
    options.train.l2_lambda = o.l2_lambda;
    options.train.max_iterations = o.max_iterations;
    options.train.gradient_tolerance = o.tolerance;
    options.train.seed = o.seed;
    options.train_fraction = o.train_fraction;
    options.split_seed = o.seed + 1;
    if (o.eval_split != "full" && o.eval_split != "test") throw ConfigError("eval split must be full or test");
    options.eval_split = o.eval_split == "full" ? EvalSplit::full : EvalSplit::test;
    options.threads = o.threads == 0 ? default_threads() : o.threads;
    options.source = std::filesystem::path(o.dataset).filename().string();
    options.source_records = doc.records.size();
    options.build_timestamp = reproducible_timestamp();
    return build_family(balanced, options);
}

inline void run_build(const BuildCliOptions& o, std::ostream& out) {
    auto artifact = build_from_options(o);
    write_file(o.out, export_artifact(artifact));
    const auto& m = artifact.metadata;
    out << "trained " << artifact.models.size() << " models (" << m.failures.size() << " failed), "
        << m.thresholds.size() << " thresholds\n"
        << "unweighted model " << m.unweighted_model_id << " test accuracy " << m.unweighted_test_accuracy << "\n"
        << "artifact -> " << o.out << "\n";
}

inline void run_serve(const ServeOptions& o, std::ostream& out) {
    if (!std::filesystem::exists(o.artifact)) throw Error("artifact not found: " + o.artifact);
    Service service(load_artifact(read_file(o.artifact)), o.selections);
    httplib::Server server;
    std::optional<std::filesystem::path> ui;
    if (!o.ui_dir.empty()) ui = o.ui_dir;
    mount(server, service, ui);
    out << "serving " << o.artifact << " on http://" << o.host << ":" << o.port << "\n" << std::flush;
    if (!server.listen(o.host, o.port)) throw Error("cannot listen on " + o.host + ":" + std::to_string(o.port));
}

inline std::string format_threshold(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

inline int run_summarize(const std::string& log_path, std::ostream& out, std::ostream& err) {
    std::ifstream in(log_path);
    if (!in) throw Error("cannot open selection log " + log_path);
    auto s = summarize_selections(in);
    out << "total " << s.total << "\n";
    for (const auto& [model, n] : s.per_model) out << "model " << model << " " << n << "\n";
    for (const auto& [t, n] : s.per_threshold) out << "threshold " << format_threshold(t) << " " << n << "\n";
    for (const auto& [view, n] : s.per_view) out << "view " << view << " " << n << "\n";
    if (!s.invalid_lines.empty()) {
        err << "error: " << s.invalid_lines.size() << " invalid line(s) in " << log_path << ", first at line "
            << s.invalid_lines.front() << "\n";
        return 1;
    }
    return 0;
}

// Exit status: 0 success, 1 runtime failure, 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Pareto trade-off model families for recidivism prediction", "tradeoff"};
    app.require_subcommand(1);

    IngestOptions ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse and filter the raw recidivism table");
    ingest_cmd->add_option("--input", ingest.input, "Raw CSV file")->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--out", ingest.out, "Canonical dataset file to write")->required();
    ingest_cmd->add_option("--rejects", ingest.rejects, "Line-delimited report of rejected rows");

    BuildCliOptions build;
    auto* build_cmd = app.add_subcommand("build", "Train the model family and write the artifact");
    build_cmd->add_option("--dataset", build.dataset, "Dataset file from ingest")->required()->check(CLI::ExistingFile);
    build_cmd->add_option("--attribute", build.attribute, "Protected attribute")
        ->check(CLI::IsMember({"race", "gender"}));
    build_cmd->add_option("--per-group-n", build.per_group_n, "Records per group (default 1500 race, 800 gender)")
        ->check(CLI::PositiveNumber);
    build_cmd->add_option("--seed", build.seed, "Sampling seed; the split uses seed + 1")->capture_default_str();
    build_cmd->add_option("--grid-k", build.grid_k, "Odd number of log-spaced levels per weight axis")
        ->capture_default_str();
    build_cmd->add_option("--grid-range", build.grid_range, "Weight range r; levels span [1/r, r]")
        ->capture_default_str();
    build_cmd->add_option("--thresholds", build.thresholds, "Threshold grid start:stop:step")->capture_default_str();
    build_cmd->add_option("--out", build.out, "Artifact file to write")->required();
    build_cmd->add_option("--train-fraction", build.train_fraction)->capture_default_str();
    build_cmd->add_option("--eval-split", build.eval_split, "Evaluate on the full dataset or the test split")
        ->check(CLI::IsMember({"full", "test"}))
        ->capture_default_str();
    build_cmd->add_option("--l2", build.l2_lambda)->capture_default_str();
    build_cmd->add_option("--max-iterations", build.max_iterations)->capture_default_str();
    build_cmd->add_option("--tolerance", build.tolerance)->capture_default_str();
    build_cmd->add_option("--threads", build.threads, "Worker threads (0 = hardware concurrency)");

    ServeOptions serve;
    auto* serve_cmd = app.add_subcommand("serve", "Serve an artifact over HTTP");
    serve_cmd->add_option("--artifact", serve.artifact, "Artifact file")->required();
    serve_cmd->add_option("--selections", serve.selections, "Selection log path")->capture_default_str();
    serve_cmd->add_option("--port", serve.port)->capture_default_str()->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", serve.host)->capture_default_str();
    serve_cmd->add_option("--ui-dir", serve.ui_dir, "Directory of static UI assets served at /");

    std::string log_path;
    auto* selections_cmd = app.add_subcommand("selections", "Selection log tools");
    selections_cmd->require_subcommand(1);
    auto* summarize_cmd = selections_cmd->add_subcommand("summarize", "Selection counts per model and threshold");
    summarize_cmd->add_option("--log", log_path, "Selection log")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*ingest_cmd) {
            run_ingest(ingest, out);
        } else if (*build_cmd) {
            run_build(build, out);
        } else if (*serve_cmd) {
            run_serve(serve, out);
        } else if (*summarize_cmd) {
            return run_summarize(log_path, out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace tradeoff::cli
