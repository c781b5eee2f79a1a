#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "tvreg/operators.hpp"
#include "tvreg/types.hpp"

namespace tvreg {

struct DualNormOptions {
    double rel_tol = 1e-6;
    int max_iter = 50000;
    int min_iter = 10;
};

struct DualNormResult {
    double gamma = 0.0;
    Vector certificate;  // v with D_k^T v = b_k and ||v||_inf == gamma
    int iterations = 0;
    bool converged = false;
};

// gamma_k = sup_{u != 0} u^T b / ||D_k u||_1 = min{ ||v||_inf : D_k^T v = b },
// solved by splitting the max-norm prox (an l1-ball projection, by Moreau)
// against the projection onto the affine constraint through a once-factored
// D_k^T D_k Gram system. Reusable across right-hand sides.
class DualNormSolver {
public:
    explicit DualNormSolver(const SpMat& d_block, DualNormOptions opts = {});
    DualNormResult solve(const Vector& b) const;

private:
    SpMat d_;  // m x nv
    Eigen::CompleteOrthogonalDecomposition<Matrix> gram_;
    DualNormOptions opts_;
};

struct WeightEstimate {
    std::vector<double> weights;     // normalized to geometric mean 1
    std::vector<double> mean_gamma;  // raw per-term E(gamma_k)
    std::vector<double> se_gamma;    // standard error of the mean
    int samples = 0;
    std::uint64_t seed = 0;
};

// Monte Carlo pre-tuning: draw n ~ N(0, M^{-1}) on usable cells, form
// b = A^T M (I - P1) n, take w_k = E(gamma_k). Deterministic given
// (seed, mc_samples) regardless of n_threads.
WeightEstimate estimate_weights(const DesignOperator& design,
                                const PenaltyOperator& penalty_unweighted,
                                const MeasurementTable& m, int mc_samples, std::uint64_t seed,
                                int n_threads = 0, DualNormOptions opts = {1e-5, 20000, 10});

// Smallest lambda with all-zero solution: max_k gamma_k(b_k) / w_k.
double lambda_max(const ReducedProblem& problem, const PenaltyOperator& penalty_weighted,
                  DualNormOptions opts = {1e-8, 200000, 10});

}  // namespace tvreg
