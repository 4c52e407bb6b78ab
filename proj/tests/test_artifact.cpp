#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "support.hpp"
#include "tradeoff/artifact.hpp"

using namespace tradeoff;
using tradeoff::testing::small_artifact;

namespace {

class TempDir {
public:
    TempDir() {
        path_ = std::filesystem::temp_directory_path() /
                ("tradeoff_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

const ModelFamilyArtifact& shared_artifact() {
    static const auto a = small_artifact();
    return a;
}

SelectionRecord valid_selection(const ModelFamilyArtifact& a) {
    SelectionRecord r;
    r.timestamp = "2024-01-01T00:00:00Z";
    r.session_id = "s1";
    r.attribute = Attribute::race;
    r.threshold = 0.45;
    r.model_id = a.metadata.unweighted_model_id;
    r.view = View::text;
    r.rationale = "balanced";
    return r;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

}  // namespace

TEST(ExportArtifact, CanonicalAndRoundTrip) {
    const auto& a = shared_artifact();
    auto first = export_artifact(a);
    EXPECT_EQ(first, export_artifact(a));

    std::vector<std::string> warnings;
    auto loaded = load_artifact(first, &warnings);
    EXPECT_TRUE(warnings.empty());
    EXPECT_EQ(loaded, a);
    EXPECT_EQ(export_artifact(loaded), first);
}

TEST(ExportArtifact, TopLevelKeys) {
    auto j = json::parse(export_artifact(shared_artifact()));
    for (const char* key : {"schema_version", "metadata", "models", "sweep", "frontiers", "evaluations"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j.size(), 6u);
    EXPECT_EQ(j["metadata"]["seeds"]["sample"].get<std::uint64_t>(), shared_artifact().metadata.sample_seed);
}

TEST(LoadArtifact, TruncatedDocumentIsParseError) {
    auto text = export_artifact(shared_artifact());
    EXPECT_THROW(load_artifact(text.substr(0, text.size() / 2)), ParseError);
}

TEST(LoadArtifact, SchemaMismatch) {
    auto j = json::parse(export_artifact(shared_artifact()));
    j["schema_version"] = 99;
    try {
        load_artifact(j.dump());
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.found(), 99);
    }
}

TEST(LoadArtifact, UnknownFrontierModelIsIntegrityError) {
    auto j = json::parse(export_artifact(shared_artifact()));
    j["frontiers"][9]["points"][0]["model_id"] = "m999";
    try {
        load_artifact(j.dump());
        FAIL() << "expected IntegrityError";
    } catch (const IntegrityError& e) {
        EXPECT_EQ(e.invariant(), "frontier_model_reference");
    }
}

TEST(LoadArtifact, BrokenParetoPropertyIsIntegrityError) {
    auto j = json::parse(export_artifact(shared_artifact()));
    auto& points = j["frontiers"][9]["points"];
    points.push_back(points[0]);
    try {
        load_artifact(j.dump());
        FAIL() << "expected IntegrityError";
    } catch (const IntegrityError& e) {
        EXPECT_EQ(e.invariant(), "pareto_property");
    }
}

TEST(LoadArtifact, InconsistentPointIsIntegrityError) {
    auto j = json::parse(export_artifact(shared_artifact()));
    j["frontiers"][9]["points"][0]["errors"] = j["frontiers"][9]["points"][0]["errors"].get<int>() + 1;
    try {
        load_artifact(j.dump());
        FAIL() << "expected IntegrityError";
    } catch (const IntegrityError& e) {
        EXPECT_EQ(e.invariant(), "frontier_point_consistency");
    }
}

TEST(LoadArtifact, MissingSectionIsParseError) {
    auto j = json::parse(export_artifact(shared_artifact()));
    j.erase("evaluations");
    EXPECT_THROW(load_artifact(j.dump()), ParseError);
}

TEST(LoadArtifact, UnknownKeysWarn) {
    auto j = json::parse(export_artifact(shared_artifact()));
    j["extra"] = 1;
    std::vector<std::string> warnings;
    load_artifact(j.dump(), &warnings);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(DatasetDocument, RoundTrip) {
    DatasetDocument d;
    d.source = "x.csv";
    d.parsed = 3;
    d.rejected = 1;
    d.removed = {1, 0, 0, 1};
    d.records = {tradeoff::testing::make_record("7", 30, Sex::female, Race::white, 2, 1),
                 tradeoff::testing::make_record("8", 41, Sex::male, Race::african_american, 0, 0,
                                                ChargeDegree::misdemeanor)};
    auto text = export_dataset(d);
    EXPECT_EQ(load_dataset(text), d);
    EXPECT_EQ(export_dataset(load_dataset(text)), text);
    EXPECT_THROW(load_dataset(text.substr(0, 20)), ParseError);
}

TEST(Selection, ValidRecordAppendsOneLine) {
    TempDir dir;
    auto log = dir.path() / "sel.jsonl";
    const auto& a = shared_artifact();
    append_selection(valid_selection(a), log, a);
    auto lines = lines_of(log);
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(selection_from_json(json::parse(lines[0])), valid_selection(a));
    append_selection(valid_selection(a), log, a);
    EXPECT_EQ(lines_of(log).size(), 2u);
}

TEST(Selection, UnknownModelRejectedLogUnchanged) {
    TempDir dir;
    auto log = dir.path() / "sel.jsonl";
    const auto& a = shared_artifact();
    append_selection(valid_selection(a), log, a);
    auto bad = valid_selection(a);
    bad.model_id = "nope";
    try {
        append_selection(bad, log, a);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        ASSERT_EQ(e.issues().size(), 1u);
        EXPECT_EQ(e.issues()[0].field, "model_id");
    }
    EXPECT_EQ(lines_of(log).size(), 1u);
}

TEST(Selection, OffGridThresholdRejected) {
    const auto& a = shared_artifact();
    auto bad = valid_selection(a);
    bad.threshold = 0.47;
    EXPECT_THROW(validate_selection(bad, a), ValidationError);
}

TEST(Selection, UnwritableLog) {
    const auto& a = shared_artifact();
    EXPECT_THROW(append_selection(valid_selection(a), "/nonexistent-dir/x/sel.jsonl", a), Error);
}

TEST(Selection, ConcurrentAppendsStayIntact) {
    TempDir dir;
    auto log = dir.path() / "sel.jsonl";
    const auto& a = shared_artifact();
    std::vector<std::thread> threads;
    for (int i = 0; i < 100; ++i) {
        threads.emplace_back([&, i] {
            auto r = valid_selection(a);
            r.session_id = "session-" + std::to_string(i);
            r.rationale = std::string(500, char('a' + i % 26));
            append_selection(r, log, a);
        });
    }
    for (auto& t : threads) t.join();
    auto lines = lines_of(log);
    ASSERT_EQ(lines.size(), 100u);
    std::set<std::string> sessions;
    for (const auto& line : lines) {
        auto r = selection_from_json(json::parse(line));
        validate_selection(r, a);
        sessions.insert(r.session_id);
    }
    EXPECT_EQ(sessions.size(), 100u);
}

TEST(Selection, SequenceContinuesAcrossReopen) {
    TempDir dir;
    auto path = dir.path() / "sel.jsonl";
    const auto& a = shared_artifact();
    {
        SelectionLog log(path);
        EXPECT_EQ(log.append(valid_selection(a), a), 1u);
        EXPECT_EQ(log.append(valid_selection(a), a), 2u);
    }
    SelectionLog reopened(path);
    EXPECT_EQ(reopened.append(valid_selection(a), a), 3u);
}

TEST(Selection, FieldLevelParsing) {
    try {
        selection_from_json(json{{"threshold", "x"}, {"view", "chart"}});
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        std::set<std::string> fields;
        for (const auto& i : e.issues()) fields.insert(i.field);
        EXPECT_EQ(fields, (std::set<std::string>{"timestamp", "session_id", "model_id", "view", "threshold"}));
    }
}

TEST(Selection, SummaryCounts) {
    std::istringstream log(
        R"({"timestamp":"t","session_id":"a","attribute":"race","threshold":0.45,"model_id":"m001","view":"matrix","rationale":null})"
        "\n"
        R"({"timestamp":"t","session_id":"b","attribute":null,"threshold":0.5,"model_id":"m001","view":"text","rationale":null})"
        "\n"
        R"({"timestamp":"t","session_id":"c","attribute":"race","threshold":0.45,"model_id":"m002","view":"text","rationale":"x"})"
        "\nnot json\n");
    auto s = summarize_selections(log);
    EXPECT_EQ(s.total, 3u);
    EXPECT_EQ(s.per_model.at("m001"), 2u);
    EXPECT_EQ(s.per_model.at("m002"), 1u);
    EXPECT_EQ(s.per_threshold.at(0.45), 2u);
    EXPECT_EQ(s.invalid_lines, (std::vector<std::size_t>{4}));
}
