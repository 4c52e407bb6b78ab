#pragma once

// Test-only helpers: synthetic records and brute-force oracles that do not
// share code paths with the library.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tradeoff/tradeoff.hpp"

namespace tradeoff::testing {

inline DefendantRecord make_record(std::string id, int age, Sex sex, Race race, int priors, int recid,
                                   ChargeDegree charge = ChargeDegree::felony) {
    DefendantRecord r;
    r.id = std::move(id);
    r.age = age;
    r.sex = sex;
    r.race = race;
    r.priors_count = priors;
    r.charge_degree = charge;
    r.recidivated = recid;
    r.is_recid = recid;
    return r;
}

// Records whose label depends on priors and age, with a group-dependent base
// rate so disparities are non-trivial.
inline std::vector<DefendantRecord> synthetic_records(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> age(18, 70);
    std::poisson_distribution<int> priors(3.0);
    std::poisson_distribution<int> juv(0.2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<DefendantRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        DefendantRecord r;
        r.id = "s" + std::to_string(i);
        r.age = age(rng);
        r.sex = u(rng) < 0.8 ? Sex::male : Sex::female;
        r.race = u(rng) < 0.55 ? Race::african_american : Race::white;
        r.priors_count = priors(rng) + (r.race == Race::african_american ? 1 : 0);
        r.juv_fel_count = juv(rng);
        r.juv_misd_count = juv(rng);
        r.juv_other_count = juv(rng);
        r.charge_degree = u(rng) < 0.65 ? ChargeDegree::felony : ChargeDegree::misdemeanor;
        double z = -0.4 + 0.25 * r.priors_count - 0.04 * (r.age - 35) + 0.3 * r.juv_fel_count +
                   (r.charge_degree == ChargeDegree::felony ? 0.2 : 0.0);
        r.recidivated = u(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
        r.is_recid = r.recidivated;
        out.push_back(r);
    }
    return out;
}

// Straight four-branch recount.
inline ConfusionCounts naive_confusion(const std::vector<int>& pred, const std::vector<int>& label) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && label[i] == 1) c.tp += 1;
        if (pred[i] == 1 && label[i] == 0) c.fp += 1;
        if (pred[i] == 0 && label[i] == 1) c.fn += 1;
        if (pred[i] == 0 && label[i] == 0) c.tn += 1;
    }
    return c;
}

struct Pt {
    std::int64_t errors;
    std::int64_t disparity;
};

// All-pairs weak-dominance check; index i survives iff no j weakly dominates
// it, and among exact duplicates only the lowest index survives.
inline std::vector<std::size_t> brute_force_pareto(const std::vector<Pt>& pts) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
            if (i == j) continue;
            bool le = pts[j].errors <= pts[i].errors && pts[j].disparity <= pts[i].disparity;
            bool lt = pts[j].errors < pts[i].errors || pts[j].disparity < pts[i].disparity;
            bool duplicate_lower = pts[j].errors == pts[i].errors && pts[j].disparity == pts[i].disparity && j < i;
            dominated = (le && lt) || duplicate_lower;
        }
        if (!dominated) keep.push_back(i);
    }
    return keep;
}

// Plain-loop objective for the finite-difference oracle.
inline double reference_loss(const std::vector<double>& params, const std::vector<double>& x, std::size_t rows,
                             std::size_t cols, const std::vector<int>& y, const std::vector<double>& w,
                             double lambda) {
    long double total = 0.0L;
    for (std::size_t i = 0; i < rows; ++i) {
        long double z = params[cols];
        for (std::size_t j = 0; j < cols; ++j) z += params[j] * x[i * cols + j];
        long double p = 1.0L / (1.0L + std::exp(-z));
        total += w[i] * (y[i] ? -std::log(p) : -std::log(1.0L - p));
    }
    long double reg = 0.0L;
    for (std::size_t j = 0; j < cols; ++j) reg += params[j] * params[j];
    return double(total + 0.5L * lambda * reg);
}

// Small family built from synthetic records; cheap enough for unit tests.
inline ModelFamilyArtifact small_artifact(Attribute attribute = Attribute::race, std::uint64_t seed = 21) {
    auto records = filter_records(synthetic_records(1500, seed)).records;
    auto d = build_balanced(records, attribute, attribute == Attribute::race ? 200 : 100, seed);
    BuildOptions options;
    options.grid = {3, 4.0};
    options.split_seed = seed + 1;
    options.source = "synthetic";
    options.source_records = records.size();
    return build_family(d, options);
}

}  // namespace tradeoff::testing
