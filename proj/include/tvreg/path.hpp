#pragma once

#include <vector>

#include "tvreg/admm.hpp"
#include "tvreg/operators.hpp"
#include "tvreg/wls.hpp"

namespace tvreg {

// One fused block of an additive term: connected vertex set sharing a value.
struct Cluster {
    int term = -1;
    std::vector<int> vertices;  // sorted term-flat indices
    double value = 0.0;         // M-weighted mean of member parameters
};

struct ClusterSet {
    std::vector<Cluster> clusters;  // ordered by term, then smallest vertex

    int count() const { return static_cast<int>(clusters.size()); }
};

// Descending geometric sequence lambda_max .. lambda_max * min_ratio.
std::vector<double> lambda_grid(double lambda_max, int count, double min_ratio);

// Reads approximate fusion out of an ADMM iterate: per term, join edge
// (i, j) when |u_i - u_j| <= delta_fuse, take connected components, value
// each by the M-weighted mean (cell weights mapped through A), and drop
// components with |value| <= delta_zero.
ClusterSet extract_clusters(const Vector& u, const DesignOperator& design,
                            const MeasurementTable& m, double delta_fuse, double delta_zero);

// Usable-grid indicator column of one cluster.
std::vector<Index> cluster_cells(const Cluster& cluster, const DesignOperator& design,
                                 const MeasurementTable& m);

// Weighted OLS on intercept + cluster indicators (shrinkage debias).
RefitModel refit_ols(const ClusterSet& clusters, const DesignOperator& design,
                     const MeasurementTable& m);

struct PathEntry {
    double lambda = 0.0;
    AdmmSolution solution;
    ClusterSet clusters;
    RefitModel refit;
    double res = 0.0;
    int dof = 0;
    double aic = 0.0;
    double bic = 0.0;
    int n_effects = 0;
    bool converged = false;
};

enum class Criterion { Bic, Aic };

struct PathOptions {
    Criterion criterion = Criterion::Bic;
    // <= 0 selects the adaptive default max(1e-8, 1e-3 * ||u||_inf)
    double delta_fuse = -1.0;
    double delta_zero = -1.0;
};

struct PathResult {
    std::vector<PathEntry> entries;
    int selected = 0;
};

// Warm-started descending sweep; unconverged entries are kept but excluded
// from selection unless nothing converged. Ties go to the larger lambda.
PathResult run_path(const ReducedProblem& problem, const PenaltyOperator& penalty,
                    const DesignOperator& design, const MeasurementTable& m,
                    const std::vector<double>& grid, const AdmmConfig& admm_cfg,
                    const PathOptions& opts = {});

// SURE-style importance: AIC increase from deleting one cluster and
// refitting. Indexed like fit.kept of the entry's refit.
std::vector<double> importance_scores(const PathEntry& entry, const DesignOperator& design,
                                      const MeasurementTable& m);

}  // namespace tvreg
