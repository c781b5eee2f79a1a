#include "tvreg/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tvreg/types.hpp"

namespace tvreg {

namespace {

struct MarginalTables {
    // concatenated over covariates, offsets per covariate
    std::vector<Index> offsets;
    Vector value;
    Vector weight;
    Index rows = 0;
};

MarginalTables build_marginals(const CovariateSchema& schema, const CellStatsMap& stats,
                               const ScreenOptions& opts) {
    MarginalTables t;
    const int d_count = schema.size();
    t.offsets.resize(d_count);
    Index off = 0;
    for (int d = 0; d < d_count; ++d) {
        t.offsets[d] = off;
        off += schema.covariates[d].size();
    }
    t.rows = off;
    t.value = Vector::Zero(off);
    t.weight = Vector::Zero(off);
    for (int d = 0; d < d_count; ++d) {
        CovariateSchema sub;
        sub.covariates = {schema.covariates[d]};
        const CellStatsMap marg = project_stats(stats, {d});
        MeasurementOptions mo;
        mo.min_count = opts.min_count;
        const MeasurementTable table = opts.multiplicative
                                           ? multiplicative_measurements(sub, marg, mo)
                                           : additive_measurements(sub, marg, mo);
        t.value.segment(t.offsets[d], table.size()) = table.value;
        t.weight.segment(t.offsets[d], table.size()) = table.weight;
    }
    return t;
}

struct GroupFit {
    double u0 = 0.0;
    Vector u;  // concatenated groups
    double res = 0.0;
    std::vector<double> norms;
};

double objective_smooth(const MarginalTables& t, double u0, const Vector& u) {
    double obj = 0.0;
    for (Index i = 0; i < t.rows; ++i) {
        const double r = t.value[i] - u0 - u[i];
        obj += 0.5 * t.weight[i] * r * r;
    }
    return obj;
}

GroupFit prox_gradient_fit(const CovariateSchema& schema, const MarginalTables& t,
                           double lambda, double u0_init, const Vector& u_init) {
    const int d_count = schema.size();
    double u0 = u0_init;
    Vector u = u_init;
    const double wmax = t.weight.maxCoeff();
    const double wsum = t.weight.sum();
    double step = 1.0 / std::max(wmax + wsum, 1e-12);

    double f_cur = objective_smooth(t, u0, u);
    for (int it = 0; it < 5000; ++it) {
        // gradient of the smooth part
        Vector grad(t.rows);
        double grad0 = 0.0;
        for (Index i = 0; i < t.rows; ++i) {
            const double g = t.weight[i] * (u0 + u[i] - t.value[i]);
            grad[i] = g;
            grad0 += g;
        }
        // backtracking on the proximal step
        double u0_next = 0.0;
        Vector u_next(t.rows);
        for (;;) {
            u0_next = u0 - step * grad0;
            for (int d = 0; d < d_count; ++d) {
                const int n = schema.covariates[d].size();
                Vector v = u.segment(t.offsets[d], n) - step * grad.segment(t.offsets[d], n);
                const double thresh = step * lambda * std::sqrt(static_cast<double>(n));
                const double norm = v.norm();
                u_next.segment(t.offsets[d], n) =
                    norm > thresh ? Vector((1.0 - thresh / norm) * v) : Vector::Zero(n);
            }
            const double f_next = objective_smooth(t, u0_next, u_next);
            const double du0 = u0_next - u0;
            const Vector du = u_next - u;
            const double quad = f_cur + grad0 * du0 + grad.dot(du) +
                                (du0 * du0 + du.squaredNorm()) / (2.0 * step);
            if (f_next <= quad + 1e-14 * std::abs(quad) || step < 1e-18) break;
            step *= 0.5;
        }
        const double change = std::abs(u0_next - u0) + (u_next - u).cwiseAbs().maxCoeff();
        u0 = u0_next;
        u.swap(u_next);
        f_cur = objective_smooth(t, u0, u);
        if (change <= 1e-10 * std::max(1.0, std::abs(u0))) break;
    }

    GroupFit fit;
    fit.u0 = u0;
    fit.u = u;
    fit.res = f_cur;
    fit.norms.resize(d_count);
    for (int d = 0; d < d_count; ++d)
        fit.norms[d] = u.segment(t.offsets[d], schema.covariates[d].size()).norm();
    return fit;
}

}  // namespace

ScreenResult group_lasso_screen(const CovariateSchema& schema, const CellStatsMap& stats,
                                int keep_max, std::uint64_t /*seed*/,
                                const ScreenOptions& opts) {
    schema.validate();
    if (keep_max < 1) throw ConfigError("screening keep_max must be >= 1");
    ScreenResult out;
    const int d_count = schema.size();
    out.group_norms.assign(d_count, 0.0);
    if (d_count <= keep_max) {
        out.retained.resize(d_count);
        std::iota(out.retained.begin(), out.retained.end(), 0);
        out.pass_through = true;
        out.note = "covariate count within keep_max";
        return out;
    }

    const MarginalTables t = build_marginals(schema, stats, opts);
    const double wsum = t.weight.sum();
    if (!(wsum > 0.0)) throw SolveError("screening: no usable marginal cells");
    const double grand_mean = t.weight.dot(t.value) / wsum;

    // group entry threshold at the null model
    double lmax = 0.0;
    for (int d = 0; d < d_count; ++d) {
        const int n = schema.covariates[d].size();
        Vector g(n);
        for (int l = 0; l < n; ++l) {
            const Index i = t.offsets[d] + l;
            g[l] = t.weight[i] * (grand_mean - t.value[i]);
        }
        lmax = std::max(lmax, g.norm() / std::sqrt(static_cast<double>(n)));
    }
    if (!(lmax > 0.0)) {
        out.retained.resize(d_count);
        std::iota(out.retained.begin(), out.retained.end(), 0);
        out.pass_through = true;
        out.note = "degenerate marginals; screening skipped";
        return out;
    }

    const Index n_scr = (t.weight.array() > 0.0).count();
    double best_bic = std::numeric_limits<double>::infinity();
    GroupFit best_fit;
    double best_lambda = lmax;
    double u0 = grand_mean;
    Vector u = Vector::Zero(t.rows);
    const double step = std::pow(opts.min_ratio, 1.0 / static_cast<double>(opts.grid_count - 1));
    double lambda = lmax;
    for (int i = 0; i < opts.grid_count; ++i, lambda *= step) {
        const GroupFit fit = prox_gradient_fit(schema, t, lambda, u0, u);
        u0 = fit.u0;
        u = fit.u;
        int dof = 1;
        for (int d = 0; d < d_count; ++d)
            if (fit.norms[d] > 0.0) dof += schema.covariates[d].size() - 1;
        const double bic =
            2.0 * fit.res + static_cast<double>(dof) * std::log(static_cast<double>(n_scr));
        if (bic < best_bic) {
            best_bic = bic;
            best_fit = fit;
            best_lambda = lambda;
        }
    }

    out.lambda = best_lambda;
    out.group_norms = best_fit.norms;
    std::vector<int> active;
    for (int d = 0; d < d_count; ++d)
        if (best_fit.norms[d] > 0.0) active.push_back(d);
    if (active.empty()) {
        out.retained.resize(d_count);
        std::iota(out.retained.begin(), out.retained.end(), 0);
        out.pass_through = true;
        out.note = "screening found no marginal signal; keeping all covariates";
        return out;
    }
    std::sort(active.begin(), active.end(), [&](int a, int b) {
        if (best_fit.norms[a] != best_fit.norms[b]) return best_fit.norms[a] > best_fit.norms[b];
        return a < b;
    });
    if (static_cast<int>(active.size()) > keep_max) active.resize(keep_max);
    std::sort(active.begin(), active.end());
    out.retained = active;
    return out;
}

}  // namespace tvreg
