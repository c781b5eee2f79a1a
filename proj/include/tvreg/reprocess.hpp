#pragma once

#include <string>
#include <vector>

#include "tvreg/path.hpp"

namespace tvreg {

enum class FeatureProvenance { Cluster, Complement, ComplementPart };

std::string provenance_name(FeatureProvenance p);

// One candidate predictor of the reprocess stage: a discovered cluster, the
// complement of a first-order cluster, or one rectangle of a second-order
// complement split.
struct BlockFeature {
    int term = -1;
    std::vector<int> levels_a;  // order 1: level set; order 2: row level set
    std::vector<int> levels_b;  // order 2 only: column level set
    std::vector<int> vertices;  // term-flat vertex set (always filled)
    bool rectangular = true;    // non-rectangular clusters carry no complements
    FeatureProvenance provenance = FeatureProvenance::Cluster;
    std::string label;
};

// Clusters plus their complements as block features. A second-order
// rectangle A x B contributes A x B, A^c x B, A x B^c and A^c x B^c
// (nonempty ones); non-rectangular second-order clusters contribute only
// themselves. Duplicates (same term and vertex set) are removed.
std::vector<BlockFeature> build_block_features(const ClusterSet& clusters,
                                               const DesignOperator& design,
                                               const CovariateSchema& schema);

struct ElasticNetOptions {
    int grid_count = 30;
    double min_ratio = 1e-3;
    double l2_ratio = 0.01;  // lambda2 = l2_ratio * lambda1
    double tol = 1e-9;       // coordinate convergence
    int max_pass = 100000;
};

struct ElasticNetEntry {
    double lambda1 = 0.0;
    std::vector<int> support;  // feature indices with nonzero coefficient
    Vector coef;               // penalized coefficients (diagnostics only)
    double intercept = 0.0;
};

// Coordinate descent on
//   1/2 sum M_e (tau - b0 - sum beta_j f_j)^2 + lambda1 ||beta||_1
//   + (lambda2 / 2) ||beta||_2^2
// over a descending lambda1 grid with warm starts and an active-set sweep.
std::vector<ElasticNetEntry> elastic_net_path(
    const std::vector<std::vector<Index>>& feature_cells, const MeasurementTable& m,
    const std::vector<double>& l1_grid, double l2_ratio, double tol = 1e-9,
    int max_pass = 100000);

// Entry threshold max_j |sum M f_j (tau - weighted mean)|; the grid head.
double elastic_net_lambda_max(const std::vector<std::vector<Index>>& feature_cells,
                              const MeasurementTable& m);

// Debiased OLS on a support (possibly empty: intercept only).
RefitModel finalize(const std::vector<int>& support,
                    const std::vector<std::vector<Index>>& feature_cells,
                    const MeasurementTable& m);

struct ReprocessResult {
    std::vector<BlockFeature> features;
    std::vector<std::vector<Index>> feature_cells;
    std::vector<ElasticNetEntry> path;
    int selected_entry = 0;
    std::vector<int> support;  // of the selected entry
    RefitModel model;          // finalize(support)
    std::vector<double> importance;  // per kept predictor of `model`
};

// Full reprocess: features -> elastic net path -> BIC over supports ->
// debiased OLS. An empty cluster set yields an intercept-only model.
ReprocessResult reprocess(const ClusterSet& selected, const DesignOperator& design,
                          const CovariateSchema& schema, const MeasurementTable& m,
                          Criterion criterion = Criterion::Bic,
                          const ElasticNetOptions& opts = {});

}  // namespace tvreg
