#include "tvreg/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace tvreg {

std::vector<double> lambda_grid(double lambda_max, int count, double min_ratio) {
    if (count < 1) throw ConfigError("lambda grid needs at least 1 point");
    if (!(min_ratio > 0.0 && min_ratio < 1.0))
        throw ConfigError("lambda grid min_ratio must lie in (0, 1)");
    if (!(lambda_max > 0.0)) throw ConfigError("lambda_max must be positive");
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = lambda_max;
        return grid;
    }
    const double step = std::pow(min_ratio, 1.0 / static_cast<double>(count - 1));
    double v = lambda_max;
    for (int i = 0; i < count; ++i) {
        grid[i] = v;
        v *= step;
    }
    grid.back() = lambda_max * min_ratio;
    return grid;
}

namespace {

int find_root(std::vector<int>& parent, int v) {
    while (parent[v] != v) {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    return v;
}

}  // namespace

ClusterSet extract_clusters(const Vector& u, const DesignOperator& design,
                            const MeasurementTable& m, double delta_fuse, double delta_zero) {
    ClusterSet out;
    for (std::size_t k = 0; k < design.terms.size(); ++k) {
        const auto& term = design.terms[k];
        const Index off = design.term_offsets[k];
        const int nv = term.vertex_count;

        std::vector<int> parent(nv);
        std::iota(parent.begin(), parent.end(), 0);
        for (const auto& [i, j] : term.graph.edges)
            if (std::abs(u[off + i] - u[off + j]) <= delta_fuse) {
                const int ri = find_root(parent, i), rj = find_root(parent, j);
                if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
            }

        // per-vertex mass: summed cell weights mapped through A
        Vector mass = Vector::Zero(nv);
        const auto& cols = design.term_cols[k];
        for (Index x = 0; x < design.n_cells; ++x)
            if (m.weight[x] > 0.0) mass[cols[x]] += m.weight[x];

        std::map<int, Cluster> comps;
        for (int v = 0; v < nv; ++v) {
            auto& c = comps[find_root(parent, v)];
            c.term = static_cast<int>(k);
            c.vertices.push_back(v);
        }
        for (auto& [root, c] : comps) {
            double wsum = 0.0, vsum = 0.0;
            for (int v : c.vertices) {
                wsum += mass[v];
                vsum += mass[v] * u[off + v];
            }
            c.value = wsum > 0.0 ? vsum / wsum : 0.0;
            if (std::abs(c.value) > delta_zero) out.clusters.push_back(std::move(c));
        }
    }
    return out;
}

std::vector<Index> cluster_cells(const Cluster& cluster, const DesignOperator& design,
                                 const MeasurementTable& m) {
    std::vector<char> member(design.terms[cluster.term].vertex_count, 0);
    for (int v : cluster.vertices) member[v] = 1;
    std::vector<Index> cells;
    const auto& cols = design.term_cols[cluster.term];
    for (Index x = 0; x < design.n_cells; ++x)
        if (m.weight[x] > 0.0 && member[cols[x]]) cells.push_back(x);
    return cells;
}

RefitModel refit_ols(const ClusterSet& clusters, const DesignOperator& design,
                     const MeasurementTable& m) {
    std::vector<std::vector<Index>> predictors;
    predictors.reserve(clusters.clusters.size());
    for (const auto& c : clusters.clusters) predictors.push_back(cluster_cells(c, design, m));
    return wls_fit(predictors, m);
}

PathResult run_path(const ReducedProblem& problem, const PenaltyOperator& penalty,
                    const DesignOperator& design, const MeasurementTable& m,
                    const std::vector<double>& grid, const AdmmConfig& admm_cfg,
                    const PathOptions& opts) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] < grid[i - 1])) throw ConfigError("lambda grid must be descending");
    const CachedFactor factor = factorize(problem, penalty, admm_cfg);

    PathResult out;
    out.entries.reserve(grid.size());
    const AdmmSolution* warm = nullptr;
    for (double lambda : grid) {
        PathEntry entry;
        entry.lambda = lambda;
        entry.solution = solve(problem, penalty, lambda, admm_cfg, factor, warm);
        entry.converged = entry.solution.converged;

        const double u_inf =
            entry.solution.u.size() ? entry.solution.u.cwiseAbs().maxCoeff() : 0.0;
        const double dfuse =
            opts.delta_fuse > 0.0 ? opts.delta_fuse : std::max(1e-8, 1e-3 * u_inf);
        const double dzero =
            opts.delta_zero > 0.0 ? opts.delta_zero : std::max(1e-8, 1e-3 * u_inf);
        entry.clusters = extract_clusters(entry.solution.u, design, m, dfuse, dzero);
        entry.refit = refit_ols(entry.clusters, design, m);
        entry.res = entry.refit.res;
        entry.dof = entry.refit.dof;
        std::tie(entry.aic, entry.bic) =
            information_criteria(entry.res, entry.dof, entry.refit.n_t);
        entry.n_effects = static_cast<int>(entry.refit.kept.size());
        out.entries.push_back(std::move(entry));
        warm = &out.entries.back().solution;
    }

    bool any_converged = false;
    for (const auto& e : out.entries) any_converged |= e.converged;
    double best = std::numeric_limits<double>::infinity();
    out.selected = 0;
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        if (any_converged && !out.entries[i].converged) continue;
        const double score =
            opts.criterion == Criterion::Bic ? out.entries[i].bic : out.entries[i].aic;
        if (score < best) {  // strict: ties keep the larger lambda
            best = score;
            out.selected = static_cast<int>(i);
        }
    }
    return out;
}

std::vector<double> importance_scores(const PathEntry& entry, const DesignOperator& design,
                                      const MeasurementTable& m) {
    std::vector<std::vector<Index>> predictors;
    predictors.reserve(entry.clusters.clusters.size());
    for (const auto& c : entry.clusters.clusters)
        predictors.push_back(cluster_cells(c, design, m));
    return deletion_importance(predictors, entry.refit, m);
}

}  // namespace tvreg
