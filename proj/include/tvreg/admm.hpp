#pragma once

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <memory>

#include "tvreg/operators.hpp"
#include "tvreg/types.hpp"

namespace tvreg {

struct AdmmConfig {
    double rho = 10.0;
    double eps_abs = 1e-6;
    double eps_rel = 1e-4;
    int max_iter = 5000;
    double ridge = 0.0;  // auto-raised when alpha == 0 (F singular otherwise)
};

// Cholesky factor of F = B + rho D^T D (+ ridge I), reused across every
// lambda on a path. In sparse mode the dense rank-one part of B is folded
// back in through a Sherman-Morrison correction of the F0 = A^T M A +
// rho D^T D factor.
class CachedFactor {
public:
    Vector solve(const Vector& rhs) const;
    double rho() const { return rho_; }
    double ridge_used() const { return ridge_; }
    bool dense() const { return dense_; }
    // Upper factor R with R^T R = F (dense mode only).
    Matrix dense_upper() const;

private:
    friend CachedFactor factorize(const ReducedProblem&, const PenaltyOperator&,
                                  const AdmmConfig&);
    bool dense_ = true;
    Eigen::LLT<Matrix> llt_;
    std::shared_ptr<Eigen::SimplicialLLT<SpMat>> sparse_llt_;
    Vector f0q_;          // F0^{-1} q
    double sm_denom_ = 0; // s - q^T F0^{-1} q
    Vector q_;
    double rho_ = 0.0;
    double ridge_ = 0.0;
};

CachedFactor factorize(const ReducedProblem& problem, const PenaltyOperator& penalty,
                       const AdmmConfig& cfg);

struct AdmmSolution {
    Vector u;
    Vector z;  // slack, length rows(D)
    Vector y;  // dual
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
};

// Scaled-form ADMM on  1/2 (u^T B u - 2 b^T u + c) + lambda ||z||_1,
// D u = z. Stops on the usual primal/dual residual criterion.
AdmmSolution solve(const ReducedProblem& problem, const PenaltyOperator& penalty, double lambda,
                   const AdmmConfig& cfg, const CachedFactor& factor,
                   const AdmmSolution* warm_start = nullptr);

// 1/2 (u^T B u - 2 b^T u + c) + lambda ||D u||_1
double objective(const ReducedProblem& problem, const PenaltyOperator& penalty, double lambda,
                 const Vector& u);

}  // namespace tvreg
