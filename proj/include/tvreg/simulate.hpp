#pragma once

#include <cstdint>
#include <vector>

#include "tvreg/cells.hpp"
#include "tvreg/schema.hpp"

namespace tvreg {

struct GroundTruthEffect {
    std::vector<int> covariates;              // schema indices
    std::vector<std::vector<int>> level_sets; // one set per covariate
    double value = 0.0;
};

struct GroundTruth {
    double global = 0.0;
    std::vector<GroundTruthEffect> effects;
};

struct SimData {
    CovariateSchema schema;
    std::vector<UnitRow> rows;  // control block, then treatment block
    GroundTruth truth;
};

// 4 categorical covariates (10, 3, 5, 4 levels), 10,000 units per arm,
// noise sd 0.1, global effect 0.03, first-order -0.1 on the second level
// of X2 and a 0.1 block on X1 levels 4-7 x X3 levels 3-4 (1-based labels),
// both scaled by effect_scale.
SimData gen_example1(std::uint64_t seed, double effect_scale = 1.0);

// 3 covariates: ordered X1 with 20 levels (path graph), X2 with 10 and X3
// with 5 (complete graphs); global -0.01 and a single first-order effect
// +0.015 on the first level of X2.
SimData gen_example4(std::uint64_t seed);

// Zero treatment effect everywhere; uniform level draws.
std::vector<UnitRow> gen_null(const CovariateSchema& schema, long long n_per_arm,
                              double noise_sd, std::uint64_t seed);

void save_units_csv(const CovariateSchema& schema, const std::vector<UnitRow>& rows,
                    const std::string& path);
std::string ground_truth_to_json_text(const CovariateSchema& schema, const GroundTruth& truth);

}  // namespace tvreg
