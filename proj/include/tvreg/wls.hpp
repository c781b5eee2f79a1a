#pragma once

#include <vector>

#include "tvreg/cells.hpp"
#include "tvreg/types.hpp"

namespace tvreg {

// Debiased weighted least squares on an intercept plus 0/1 indicator
// predictors. Measurement variances are 1/M_e, so the inverse of the
// weighted normal matrix is the exact coefficient covariance.
struct RefitModel {
    Vector coef;   // [intercept, kept predictors...]
    Matrix cov;
    Vector tstat;
    Vector pvalue;            // two-sided, df = N_t - Dof
    double res = 0.0;         // half weighted RSS
    Index n_t = 0;
    int dof = 0;              // 1 + number of predictors retained
    std::vector<int> kept;    // indices into the input predictor list
    std::vector<int> pruned;  // dropped as collinear (deterministic, later-ordered)

    double intercept() const { return coef.size() ? coef[0] : 0.0; }
};

// predictors[j] lists the usable-grid flat cell indices where indicator j
// is 1. Collinear columns are pruned in order (incremental Cholesky).
RefitModel wls_fit(const std::vector<std::vector<Index>>& predictors,
                   const MeasurementTable& m);

// (AIC, BIC) of a fitted model: 2 Res + 2 Dof and 2 Res + Dof log(N_t).
std::pair<double, double> information_criteria(double res, int dof, Index n_t);

// AIC increase from deleting predictor j (of the kept set) and refitting.
std::vector<double> deletion_importance(const std::vector<std::vector<Index>>& predictors,
                                        const RefitModel& fit, const MeasurementTable& m);

}  // namespace tvreg
