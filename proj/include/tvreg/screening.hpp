#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvreg/cells.hpp"
#include "tvreg/schema.hpp"

namespace tvreg {

struct ScreenResult {
    std::vector<int> retained;         // covariate indices, ascending
    std::vector<double> group_norms;   // ||u_d||_2 at the chosen lambda
    double lambda = 0.0;
    bool pass_through = false;
    std::string note;
};

struct ScreenOptions {
    long long min_count = 2;
    bool multiplicative = false;
    int grid_count = 30;
    double min_ratio = 1e-3;
};

// Group-lasso pre-screening on first-order marginal tables (one table per
// covariate, aggregated over all others, so the full cross grid is never
// built): minimize
//   1/2 sum_d sum_l m_d(l) (tau_d(l) - u0 - u_d(l))^2
//   + lambda sum_d sqrt(|V_d|) ||u_d||_2
// by proximal gradient with backtracking, pick lambda by BIC over a
// geometric grid, and keep covariates with a nonzero group, truncated to
// keep_max by descending norm.
ScreenResult group_lasso_screen(const CovariateSchema& schema, const CellStatsMap& stats,
                                int keep_max, std::uint64_t seed,
                                const ScreenOptions& opts = {});

}  // namespace tvreg
