#include "tvreg/admm.hpp"

#include <cmath>
#include <string>

#include "tvreg/mathutil.hpp"

namespace tvreg {

Vector CachedFactor::solve(const Vector& rhs) const {
    if (dense_) return llt_.solve(rhs);
    Vector y = sparse_llt_->solve(rhs);
    return y + f0q_ * (q_.dot(y) / sm_denom_);
}

Matrix CachedFactor::dense_upper() const {
    return Matrix(llt_.matrixU());
}

CachedFactor factorize(const ReducedProblem& problem, const PenaltyOperator& penalty,
                       const AdmmConfig& cfg) {
    if (penalty.cols() != problem.n_params)
        throw ConfigError("penalty and problem dimensions do not match");
    if (!(cfg.rho > 0.0)) throw ConfigError("rho must be positive");

    CachedFactor factor;
    factor.dense_ = problem.dense;
    factor.rho_ = cfg.rho;

    const Index n = problem.n_params;
    if (problem.dense) {
        Matrix f = problem.b_mat;
        penalty.add_gram(f, cfg.rho);
        const double tr = f.trace();
        double ridge = cfg.ridge;
        // alpha == 0 leaves per-term constant directions in the null space
        if (penalty.alpha == 0.0 && ridge == 0.0) ridge = 1e-10 * tr / static_cast<double>(n);
        for (int attempt = 0;; ++attempt) {
            Matrix fr = f;
            if (ridge > 0.0) fr.diagonal().array() += ridge;
            factor.llt_.compute(fr);
            if (factor.llt_.info() == Eigen::Success) break;
            if (attempt >= 1)
                throw SolveError("Cholesky factorization failed even with ridge " +
                                 std::to_string(ridge));
            ridge += 1e-10 * tr / static_cast<double>(n);
        }
        factor.ridge_ = ridge;
    } else {
        SpMat f0 = problem.atma + penalty.gram_sparse(cfg.rho);
        const double tr = Vector(f0.diagonal()).sum();
        double ridge = cfg.ridge;
        if (penalty.alpha == 0.0 && ridge == 0.0) ridge = 1e-10 * tr / static_cast<double>(n);
        SpMat eye(n, n);
        eye.setIdentity();
        factor.sparse_llt_ = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
        for (int attempt = 0;; ++attempt) {
            SpMat fr = ridge > 0.0 ? SpMat(f0 + ridge * eye) : f0;
            factor.sparse_llt_->compute(fr);
            if (factor.sparse_llt_->info() == Eigen::Success) break;
            if (attempt >= 1)
                throw SolveError("sparse Cholesky factorization failed even with ridge " +
                                 std::to_string(ridge));
            ridge += 1e-10 * tr / static_cast<double>(n);
        }
        factor.ridge_ = ridge;
        factor.q_ = problem.atm1;
        factor.f0q_ = factor.sparse_llt_->solve(factor.q_);
        factor.sm_denom_ = problem.weight_sum - factor.q_.dot(factor.f0q_);
        if (!(factor.sm_denom_ > 0.0))
            throw SolveError("reduced system is not positive definite (Sherman-Morrison)");
    }
    return factor;
}

AdmmSolution solve(const ReducedProblem& problem, const PenaltyOperator& penalty, double lambda,
                   const AdmmConfig& cfg, const CachedFactor& factor,
                   const AdmmSolution* warm_start) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    const Index n = penalty.cols();
    const Index m = penalty.rows();
    AdmmSolution sol;
    if (warm_start && warm_start->u.size() == n && warm_start->z.size() == m) {
        sol.u = warm_start->u;
        sol.z = warm_start->z;
        sol.y = warm_start->y;
    } else {
        sol.u = Vector::Zero(n);
        sol.z = Vector::Zero(m);
        sol.y = Vector::Zero(m);
    }
    const double rho = factor.rho();
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    Vector du(m), z_old(m), rhs(n);
    for (int it = 1; it <= cfg.max_iter; ++it) {
        rhs = problem.b - penalty.apply_adjoint(sol.y - rho * sol.z);
        sol.u = factor.solve(rhs);
        du = penalty.apply(sol.u);
        z_old.swap(sol.z);
        sol.z = soft_threshold((du + sol.y / rho).array(), lambda / rho).matrix();
        sol.y += rho * (du - sol.z);
        sol.iterations = it;

        if (!sol.u.allFinite() || !sol.z.allFinite())
            throw SolveError("non-finite ADMM iterate at iteration " + std::to_string(it));

        const double r_norm = (du - sol.z).norm();
        const double s_norm = rho * penalty.apply_adjoint(sol.z - z_old).norm();
        const double eps_pri =
            sqrt_m * cfg.eps_abs + cfg.eps_rel * std::max(du.norm(), sol.z.norm());
        const double eps_dual =
            sqrt_n * cfg.eps_abs + cfg.eps_rel * penalty.apply_adjoint(sol.y).norm();
        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            sol.converged = true;
            break;
        }
    }
    sol.objective = objective(problem, penalty, lambda, sol.u);
    return sol;
}

double objective(const ReducedProblem& problem, const PenaltyOperator& penalty, double lambda,
                 const Vector& u) {
    return problem.quadratic(u) + lambda * penalty.l1(u);
}

}  // namespace tvreg
