#pragma once

// Recidivism table ingestion: CSV parsing, record filtering, balanced
// per-attribute sampling, feature encoding and the stratified train/test split.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/tokenizer.hpp>

#include "tradeoff/errors.hpp"

namespace tradeoff {

enum class Sex { male, female };
enum class Race { african_american, white, other };
enum class ChargeDegree { felony, misdemeanor, ordinance };
enum class Attribute { race, gender };

inline std::string_view to_string(Sex s) { return s == Sex::male ? "male" : "female"; }

inline std::string_view to_string(Race r) {
    switch (r) {
        case Race::african_american: return "african_american";
        case Race::white: return "white";
        case Race::other: return "other";
    }
    return "other";
}

inline std::string_view to_string(ChargeDegree c) {
    switch (c) {
        case ChargeDegree::felony: return "felony";
        case ChargeDegree::misdemeanor: return "misdemeanor";
        case ChargeDegree::ordinance: return "ordinance";
    }
    return "ordinance";
}

inline std::string_view to_string(Attribute a) { return a == Attribute::race ? "race" : "gender"; }

inline std::optional<Attribute> parse_attribute(std::string_view s) {
    if (s == "race") return Attribute::race;
    if (s == "gender") return Attribute::gender;
    return std::nullopt;
}

// Group a0/a1 labels per attribute. a1 carries the reweighting multipliers.
inline std::array<std::string_view, 2> group_names(Attribute a) {
    if (a == Attribute::race) return {"white", "african_american"};
    return {"male", "female"};
}

struct DefendantRecord {
    std::string id;
    int age = 0;
    Sex sex = Sex::male;
    Race race = Race::other;
    int priors_count = 0;
    int juv_fel_count = 0;
    int juv_misd_count = 0;
    int juv_other_count = 0;
    ChargeDegree charge_degree = ChargeDegree::felony;
    int is_recid = 0;
    int recidivated = 0;
    // False when a required non-label field was empty or is_recid carries the
    // source's -1 "unknown" marker.
    bool complete = true;

    bool operator==(const DefendantRecord&) const = default;
};

// Binary group id (0 = a0, 1 = a1). Race must already be binary.
inline int group_of(const DefendantRecord& r, Attribute a) {
    if (a == Attribute::gender) return r.sex == Sex::female ? 1 : 0;
    if (r.race == Race::other) throw DataError("record " + r.id + " has non-binary race");
    return r.race == Race::african_american ? 1 : 0;
}

inline constexpr std::array<std::string_view, 11> kRequiredColumns = {
    "id",           "age",            "sex",           "race",
    "priors_count", "juv_fel_count",  "juv_misd_count", "juv_other_count",
    "c_charge_degree", "is_recid",    "two_year_recid"};

struct RejectedRow {
    std::size_t line = 0;  // 1-based line number in the source, header is line 1
    std::string reason;
};

struct ParseResult {
    std::vector<DefendantRecord> records;
    std::vector<RejectedRow> rejects;
};

namespace detail {

inline std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    using Sep = boost::escaped_list_separator<char>;
    boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
    std::vector<std::string> out;
    for (const auto& field : tok) out.push_back(trim(field));
    return out;
}

inline std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::optional<Sex> parse_sex(std::string_view s) {
    auto v = lower(s);
    if (v == "male" || v == "m") return Sex::male;
    if (v == "female" || v == "f") return Sex::female;
    return std::nullopt;
}

inline Race parse_race(std::string_view s) {
    auto v = lower(s);
    if (v == "african-american" || v == "african american" || v == "african_american") {
        return Race::african_american;
    }
    if (v == "caucasian" || v == "white") return Race::white;
    return Race::other;
}

// Degree codes: F/M/O, or the raw "(F3)", "(M1)", "(MO3)", "(CO3)" style.
inline std::optional<ChargeDegree> parse_charge(std::string_view s) {
    std::string v(s);
    if (!v.empty() && v.front() == '(') v.erase(0, 1);
    if (!v.empty() && v.back() == ')') v.pop_back();
    if (v.empty()) return std::nullopt;
    if (v == "O" || v.rfind("MO", 0) == 0 || v.rfind("CO", 0) == 0 || v.rfind("NI", 0) == 0) {
        return ChargeDegree::ordinance;
    }
    if (v.front() == 'F') return ChargeDegree::felony;
    if (v.front() == 'M') return ChargeDegree::misdemeanor;
    return std::nullopt;
}

}  // namespace detail

// Parses a comma-separated table with a header row. Missing required columns
// are fatal; malformed rows are reported in `rejects`. When a column name is
// repeated in the header, the first occurrence wins.
inline ParseResult parse_raw(std::string_view csv) {
    ParseResult result;
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("input is empty: no header row");

    auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t, std::less<>> position;
    for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);

    std::array<std::size_t, kRequiredColumns.size()> col{};
    std::vector<std::string> missing;
    for (std::size_t k = 0; k < kRequiredColumns.size(); ++k) {
        auto it = position.find(kRequiredColumns[k]);
        if (it == position.end()) {
            missing.emplace_back(kRequiredColumns[k]);
        } else {
            col[k] = it->second;
        }
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        throw ConfigError("input is missing required column(s): " + names);
    }
    enum Col { kId, kAge, kSex, kRace, kPriors, kJuvFel, kJuvMisd, kJuvOther, kCharge, kIsRecid, kLabel };

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;

        std::vector<std::string> fields;
        try {
            fields = detail::split_csv_line(line);
        } catch (const boost::escaped_list_error& e) {
            result.rejects.push_back({line_no, std::string("unparseable row: ") + e.what()});
            continue;
        }
        auto field = [&](Col c) -> const std::string& {
            static const std::string empty;
            return col[c] < fields.size() ? fields[col[c]] : empty;
        };

        const auto& label = field(kLabel);
        if (label.empty()) {
            result.rejects.push_back({line_no, "two_year_recid is empty"});
            continue;
        }
        if (label != "0" && label != "1") {
            result.rejects.push_back({line_no, "two_year_recid is not 0/1: '" + label + "'"});
            continue;
        }

        DefendantRecord r;
        r.recidivated = label == "1" ? 1 : 0;
        r.id = field(kId);
        if (r.id.empty()) r.complete = false;

        std::string problem;
        auto count = [&](Col c, int& out, const char* name, int min_value) {
            const auto& text = field(c);
            if (text.empty()) {
                r.complete = false;
                return;
            }
            auto v = detail::parse_int(text);
            if (!v || *v < min_value) {
                if (problem.empty()) problem = std::string(name) + " is malformed: '" + text + "'";
                return;
            }
            out = *v;
        };
        count(kAge, r.age, "age", 0);
        count(kPriors, r.priors_count, "priors_count", 0);
        count(kJuvFel, r.juv_fel_count, "juv_fel_count", 0);
        count(kJuvMisd, r.juv_misd_count, "juv_misd_count", 0);
        count(kJuvOther, r.juv_other_count, "juv_other_count", 0);
        count(kIsRecid, r.is_recid, "is_recid", -1);
        if (r.is_recid == -1) r.complete = false;
        if (!field(kIsRecid).empty() && r.is_recid > 1 && problem.empty()) {
            problem = "is_recid is malformed: '" + field(kIsRecid) + "'";
        }

        if (field(kSex).empty()) {
            r.complete = false;
        } else if (auto s = detail::parse_sex(field(kSex))) {
            r.sex = *s;
        } else if (problem.empty()) {
            problem = "sex is malformed: '" + field(kSex) + "'";
        }

        if (field(kRace).empty()) {
            r.complete = false;
        } else {
            r.race = detail::parse_race(field(kRace));
        }

        if (field(kCharge).empty()) {
            r.complete = false;
        } else if (auto c = detail::parse_charge(field(kCharge))) {
            r.charge_degree = *c;
        } else if (problem.empty()) {
            problem = "c_charge_degree is malformed: '" + field(kCharge) + "'";
        }

        if (!problem.empty()) {
            result.rejects.push_back({line_no, problem});
            continue;
        }
        result.records.push_back(std::move(r));
    }
    return result;
}

struct FilterCounts {
    std::size_t incomplete = 0;
    std::size_t under_age = 0;
    std::size_t ordinance_charge = 0;
    std::size_t non_binary_race = 0;

    bool operator==(const FilterCounts&) const = default;
};

struct FilterResult {
    std::vector<DefendantRecord> records;
    FilterCounts removed;
};

// Rules apply in order; each removed record is counted under the first rule
// it fails.
inline FilterResult filter_records(std::span<const DefendantRecord> records) {
    FilterResult out;
    for (const auto& r : records) {
        if (!r.complete) {
            ++out.removed.incomplete;
        } else if (r.age < 18) {
            ++out.removed.under_age;
        } else if (r.charge_degree == ChargeDegree::ordinance) {
            ++out.removed.ordinance_charge;
        } else if (r.race == Race::other) {
            ++out.removed.non_binary_race;
        } else {
            out.records.push_back(r);
        }
    }
    return out;
}

struct BalancedDataset {
    Attribute attribute = Attribute::race;
    std::vector<DefendantRecord> records;
    std::uint64_t seed = 0;

    int group_of(std::size_t i) const { return tradeoff::group_of(records[i], attribute); }
    std::size_t size() const { return records.size(); }
};

using Rng = boost::random::mt19937_64;

// Uniform sample of `n` distinct positions out of `population`, via a partial
// Fisher-Yates shuffle. Returned in ascending order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n, Rng& rng) {
    std::vector<std::size_t> pool(population);
    for (std::size_t i = 0; i < population; ++i) pool[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        boost::random::uniform_int_distribution<std::size_t> pick(i, population - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

inline void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng)]);
    }
}

// Records keep their source order; group a0 comes first, then a1.
inline BalancedDataset build_balanced(std::span<const DefendantRecord> records, Attribute attribute,
                                      std::size_t per_group_n, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 2> eligible;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (attribute == Attribute::race && r.race == Race::other) continue;
        eligible[tradeoff::group_of(r, attribute)].push_back(i);
    }
    const auto names = group_names(attribute);
    for (int g = 0; g < 2; ++g) {
        if (eligible[g].size() < per_group_n) {
            throw DataError("group '" + std::string(names[g]) + "' has only " +
                            std::to_string(eligible[g].size()) + " eligible records, " +
                            std::to_string(per_group_n) + " requested");
        }
    }

    BalancedDataset out;
    out.attribute = attribute;
    out.seed = seed;
    out.records.reserve(2 * per_group_n);
    Rng rng(seed);
    for (int g = 0; g < 2; ++g) {
        for (auto pos : sample_without_replacement(eligible[g].size(), per_group_n, rng)) {
            out.records.push_back(records[eligible[g][pos]]);
        }
    }
    return out;
}

struct Normalization {
    double mean = 0.0;
    double scale = 1.0;

    bool operator==(const Normalization&) const = default;
};

// Encoded features, row-major. `raw` holds unscaled values (numeric counts
// as-is, one-hot indicators as 0/1); `normalization` maps them to model inputs.
struct FeatureMatrix {
    std::vector<std::string> columns;
    std::vector<Normalization> normalization;
    std::vector<double> raw;
    std::vector<int> labels;
    std::vector<int> groups;
    std::vector<std::string> warnings;

    std::size_t rows() const { return labels.size(); }
    std::size_t cols() const { return columns.size(); }

    std::span<const double> raw_row(std::size_t i) const { return {raw.data() + i * cols(), cols()}; }

    double standardized(std::size_t i, std::size_t j) const {
        const auto& n = normalization[j];
        return (raw[i * cols() + j] - n.mean) / n.scale;
    }

    FeatureMatrix subset(std::span<const std::size_t> indices) const {
        FeatureMatrix out;
        out.columns = columns;
        out.normalization = normalization;
        out.raw.reserve(indices.size() * cols());
        for (auto i : indices) {
            auto row = raw_row(i);
            out.raw.insert(out.raw.end(), row.begin(), row.end());
            out.labels.push_back(labels[i]);
            out.groups.push_back(groups[i]);
        }
        return out;
    }
};

namespace detail {

struct FeatureSpec {
    std::string name;
    bool numeric;
    double (*extract)(const DefendantRecord&);
};

inline std::vector<FeatureSpec> feature_specs(Attribute excluded) {
    std::vector<FeatureSpec> specs = {
        {"age", true, [](const DefendantRecord& r) { return double(r.age); }},
        {"priors_count", true, [](const DefendantRecord& r) { return double(r.priors_count); }},
        {"juv_fel_count", true, [](const DefendantRecord& r) { return double(r.juv_fel_count); }},
        {"juv_misd_count", true, [](const DefendantRecord& r) { return double(r.juv_misd_count); }},
        {"juv_other_count", true, [](const DefendantRecord& r) { return double(r.juv_other_count); }},
        {"charge_degree=felony", false,
         [](const DefendantRecord& r) { return r.charge_degree == ChargeDegree::felony ? 1.0 : 0.0; }},
        {"charge_degree=misdemeanor", false,
         [](const DefendantRecord& r) { return r.charge_degree == ChargeDegree::misdemeanor ? 1.0 : 0.0; }},
    };
    if (excluded != Attribute::gender) {
        specs.push_back({"sex=male", false, [](const DefendantRecord& r) { return r.sex == Sex::male ? 1.0 : 0.0; }});
        specs.push_back(
            {"sex=female", false, [](const DefendantRecord& r) { return r.sex == Sex::female ? 1.0 : 0.0; }});
    }
    return specs;
}

}  // namespace detail

// Encodes the fixed feature list. Numeric columns are z-scored with mean and
// population standard deviation over `fit_indices` only; numeric columns that
// are constant there are dropped with a warning. The dataset's own attribute is
// never a feature; it only populates `groups`.
inline FeatureMatrix encode(const BalancedDataset& dataset, std::span<const std::size_t> fit_indices) {
    if (dataset.records.empty()) throw DataError("cannot encode an empty dataset");
    if (fit_indices.empty()) throw DataError("fit split is empty");

    FeatureMatrix fm;
    std::vector<detail::FeatureSpec> kept;
    for (const auto& spec : detail::feature_specs(dataset.attribute)) {
        Normalization norm;
        if (spec.numeric) {
            double sum = 0.0;
            for (auto i : fit_indices) sum += spec.extract(dataset.records.at(i));
            norm.mean = sum / double(fit_indices.size());
            double ss = 0.0;
            for (auto i : fit_indices) {
                double d = spec.extract(dataset.records[i]) - norm.mean;
                ss += d * d;
            }
            norm.scale = std::sqrt(ss / double(fit_indices.size()));
            if (!(norm.scale > 0.0)) {
                fm.warnings.push_back("dropped constant numeric column '" + spec.name + "'");
                continue;
            }
        }
        fm.columns.push_back(spec.name);
        fm.normalization.push_back(norm);
        kept.push_back(spec);
    }

    fm.raw.reserve(dataset.size() * kept.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (const auto& spec : kept) fm.raw.push_back(spec.extract(dataset.records[i]));
        fm.labels.push_back(dataset.records[i].recidivated);
        fm.groups.push_back(dataset.group_of(i));
    }
    return fm;
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Stratified by (group, label). The overall train size is round(n * fraction);
// it is apportioned across strata by largest remainder.
inline SplitIndices split(const BalancedDataset& dataset, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie strictly between 0 and 1");
    }
    std::array<std::vector<std::size_t>, 4> strata;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        strata[2 * dataset.group_of(i) + dataset.records[i].recidivated].push_back(i);
    }
    for (std::size_t s = 0; s < strata.size(); ++s) {
        if (!strata[s].empty() && strata[s].size() < 2) {
            throw DataError("stratum (group " + std::to_string(s / 2) + ", label " + std::to_string(s % 2) +
                            ") has fewer than 2 records");
        }
    }
    if (dataset.size() < 2) throw DataError("dataset too small to split");

    const auto total_train = static_cast<std::size_t>(std::llround(double(dataset.size()) * train_fraction));
    std::array<std::size_t, 4> take{};
    std::array<double, 4> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 4; ++s) {
        double exact = double(strata[s].size()) * train_fraction;
        take[s] = static_cast<std::size_t>(std::floor(exact));
        remainder[s] = exact - double(take[s]);
        assigned += take[s];
    }
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total_train && k < 4; ++k) {
        if (take[order[k]] < strata[order[k]].size()) {
            ++take[order[k]];
            ++assigned;
        }
    }

    Rng rng(seed);
    SplitIndices out;
    for (std::size_t s = 0; s < 4; ++s) {
        auto members = strata[s];
        shuffle(members, rng);
        out.train.insert(out.train.end(), members.begin(), members.begin() + std::ptrdiff_t(take[s]));
        out.test.insert(out.test.end(), members.begin() + std::ptrdiff_t(take[s]), members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace tradeoff
