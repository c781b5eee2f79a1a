#include "tvreg/wls.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "tvreg/mathutil.hpp"

namespace tvreg {

namespace {

// Gram and moment entries over usable cells for intercept + indicators.
struct NormalSystem {
    Matrix gram;   // (p+1) x (p+1)
    Vector moment; // X^T M tau
    double tau_sq = 0.0;  // tau^T M tau
    Index n_t = 0;
};

NormalSystem build_system(const std::vector<std::vector<Index>>& predictors,
                          const MeasurementTable& m) {
    const int p = static_cast<int>(predictors.size());
    NormalSystem sys;
    sys.gram = Matrix::Zero(p + 1, p + 1);
    sys.moment = Vector::Zero(p + 1);
    double wsum = 0.0;
    for (Index x = 0; x < m.size(); ++x) {
        const double w = m.weight[x];
        if (!(w > 0.0)) continue;
        ++sys.n_t;
        wsum += w;
        sys.moment[0] += w * m.value[x];
        sys.tau_sq += w * m.value[x] * m.value[x];
    }
    sys.gram(0, 0) = wsum;
    // predictor-vs-intercept and predictor-vs-tau sums
    for (int j = 0; j < p; ++j) {
        double gj = 0.0, mj = 0.0;
        for (Index x : predictors[j]) {
            const double w = m.weight[x];
            if (!(w > 0.0)) continue;
            gj += w;
            mj += w * m.value[x];
        }
        sys.gram(0, j + 1) = sys.gram(j + 1, 0) = gj;
        sys.moment[j + 1] = mj;
    }
    // pairwise intersections of sorted index lists
    for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
            double g = 0.0;
            const auto& a = predictors[i];
            const auto& b = predictors[j];
            std::size_t ia = 0, ib = 0;
            while (ia < a.size() && ib < b.size()) {
                if (a[ia] < b[ib]) ++ia;
                else if (b[ib] < a[ia]) ++ib;
                else {
                    const double w = m.weight[a[ia]];
                    if (w > 0.0) g += w;
                    ++ia;
                    ++ib;
                }
            }
            sys.gram(i + 1, j + 1) = sys.gram(j + 1, i + 1) = g;
        }
    }
    return sys;
}

}  // namespace

RefitModel wls_fit(const std::vector<std::vector<Index>>& predictors,
                   const MeasurementTable& m) {
    const NormalSystem sys = build_system(predictors, m);
    const int p = static_cast<int>(predictors.size());
    RefitModel fit;
    fit.n_t = sys.n_t;
    if (!(sys.gram(0, 0) > 0.0)) throw SolveError("refit: no usable cells");

    // Deterministic pruning: grow an incremental Cholesky over columns in
    // order, skipping any column whose pivot collapses (collinear).
    std::vector<int> cols{0};  // gram indices kept so far (0 = intercept)
    Matrix chol = Matrix::Zero(p + 1, p + 1);
    chol(0, 0) = std::sqrt(sys.gram(0, 0));
    for (int j = 1; j <= p; ++j) {
        const int k = static_cast<int>(cols.size());
        Vector cross(k);
        for (int i = 0; i < k; ++i) cross[i] = sys.gram(cols[i], j);
        const Vector l = chol.topLeftCorner(k, k)
                             .triangularView<Eigen::Lower>()
                             .solve(cross);
        const double pivot = sys.gram(j, j) - l.squaredNorm();
        if (pivot <= 1e-10 * std::max(sys.gram(j, j), 1e-300)) {
            fit.pruned.push_back(j - 1);
            continue;
        }
        chol.block(k, 0, 1, k) = l.transpose();
        chol(k, k) = std::sqrt(pivot);
        cols.push_back(j);
        fit.kept.push_back(j - 1);
    }

    const int q = static_cast<int>(cols.size());
    Vector rhs(q);
    for (int i = 0; i < q; ++i) rhs[i] = sys.moment[cols[i]];
    const auto lower = chol.topLeftCorner(q, q).triangularView<Eigen::Lower>();
    const Vector tmp = lower.solve(rhs);
    fit.coef = lower.transpose().solve(tmp);
    // covariance = inverse of the kept normal matrix
    const Matrix linv = lower.solve(Matrix::Identity(q, q));
    fit.cov = linv.transpose() * linv;

    const double rss = std::max(0.0, sys.tau_sq - fit.coef.dot(rhs));
    fit.res = 0.5 * rss;
    fit.dof = q;

    fit.tstat = Vector::Zero(q);
    fit.pvalue = Vector::Ones(q);
    const double df = static_cast<double>(fit.n_t - fit.dof);
    for (int i = 0; i < q; ++i) {
        const double se = std::sqrt(std::max(fit.cov(i, i), 0.0));
        fit.tstat[i] = se > 0.0 ? fit.coef[i] / se : 0.0;
        fit.pvalue[i] = df > 0.0 ? student_t_two_sided_p(fit.tstat[i], df) : 1.0;
    }
    return fit;
}

std::pair<double, double> information_criteria(double res, int dof, Index n_t) {
    const double aic = 2.0 * res + 2.0 * static_cast<double>(dof);
    const double bic = 2.0 * res + static_cast<double>(dof) * std::log(static_cast<double>(n_t));
    return {aic, bic};
}

std::vector<double> deletion_importance(const std::vector<std::vector<Index>>& predictors,
                                        const RefitModel& fit, const MeasurementTable& m) {
    std::vector<double> importance(fit.kept.size(), 0.0);
    const double aic_full = 2.0 * fit.res + 2.0 * static_cast<double>(fit.dof);
    for (std::size_t j = 0; j < fit.kept.size(); ++j) {
        std::vector<std::vector<Index>> rest;
        rest.reserve(fit.kept.size() - 1);
        for (std::size_t i = 0; i < fit.kept.size(); ++i)
            if (i != j) rest.push_back(predictors[fit.kept[i]]);
        const RefitModel sub = wls_fit(rest, m);
        const double aic_sub = 2.0 * sub.res + 2.0 * static_cast<double>(sub.dof);
        importance[j] = aic_sub - aic_full;
    }
    return importance;
}

}  // namespace tvreg
