#include "tvreg/reprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tvreg/mathutil.hpp"

namespace tvreg {

std::string provenance_name(FeatureProvenance p) {
    switch (p) {
        case FeatureProvenance::Cluster: return "cluster";
        case FeatureProvenance::Complement: return "complement";
        case FeatureProvenance::ComplementPart: return "complement-part";
    }
    return "cluster";
}

namespace {

std::string level_set_label(const Covariate& cov, const std::vector<int>& levels) {
    std::string out = cov.name + ":";
    if (levels.size() == 1) return out + cov.levels[levels[0]];
    out += "(";
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i) out += ",";
        out += cov.levels[levels[i]];
    }
    return out + ")";
}

std::vector<int> complement_of(const std::vector<int>& set, int n) {
    std::vector<char> in(n, 0);
    for (int v : set) in[v] = 1;
    std::vector<int> out;
    for (int v = 0; v < n; ++v)
        if (!in[v]) out.push_back(v);
    return out;
}

std::vector<int> rect_vertices(const std::vector<int>& rows, const std::vector<int>& cols,
                               int nf) {
    std::vector<int> out;
    out.reserve(rows.size() * cols.size());
    for (int a : rows)
        for (int b : cols) out.push_back(a * nf + b);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<BlockFeature> build_block_features(const ClusterSet& clusters,
                                               const DesignOperator& design,
                                               const CovariateSchema& schema) {
    std::vector<BlockFeature> features;
    std::set<std::pair<int, std::vector<int>>> seen;
    auto push = [&](BlockFeature&& f) {
        if (f.vertices.empty()) return;
        std::sort(f.vertices.begin(), f.vertices.end());
        if (!seen.insert({f.term, f.vertices}).second) return;
        features.push_back(std::move(f));
    };

    for (const auto& c : clusters.clusters) {
        const auto& term = design.terms[c.term];
        if (term.order() == 1) {
            const auto& cov = schema.covariates[term.covariate_indices[0]];
            BlockFeature f;
            f.term = c.term;
            f.levels_a = c.vertices;
            f.vertices = c.vertices;
            f.provenance = FeatureProvenance::Cluster;
            f.label = level_set_label(cov, f.levels_a);
            push(std::move(f));

            BlockFeature fc;
            fc.term = c.term;
            fc.levels_a = complement_of(c.vertices, term.vertex_count);
            fc.vertices = fc.levels_a;
            fc.provenance = FeatureProvenance::Complement;
            if (!fc.levels_a.empty()) fc.label = level_set_label(cov, fc.levels_a);
            push(std::move(fc));
        } else {
            const auto& cov_a = schema.covariates[term.covariate_indices[0]];
            const auto& cov_b = schema.covariates[term.covariate_indices[1]];
            const int nf = cov_b.size();
            std::set<int> row_set, col_set;
            for (int v : c.vertices) {
                row_set.insert(v / nf);
                col_set.insert(v % nf);
            }
            std::vector<int> rows(row_set.begin(), row_set.end());
            std::vector<int> cols(col_set.begin(), col_set.end());
            const bool rect = rows.size() * cols.size() == c.vertices.size();

            BlockFeature f;
            f.term = c.term;
            f.vertices = c.vertices;
            f.rectangular = rect;
            f.provenance = FeatureProvenance::Cluster;
            if (rect) {
                f.levels_a = rows;
                f.levels_b = cols;
                f.label = level_set_label(cov_a, rows) + "&" + level_set_label(cov_b, cols);
            } else {
                f.label = term.label + ":cluster";
            }
            push(std::move(f));
            if (!rect) continue;  // complement of a non-block is not a block

            const std::vector<int> rows_c = complement_of(rows, cov_a.size());
            const std::vector<int> cols_c = complement_of(cols, nf);
            const std::vector<std::pair<std::vector<int>, std::vector<int>>> parts = {
                {rows_c, cols}, {rows, cols_c}, {rows_c, cols_c}};
            for (const auto& [ra, cb] : parts) {
                if (ra.empty() || cb.empty()) continue;
                BlockFeature fp;
                fp.term = c.term;
                fp.levels_a = ra;
                fp.levels_b = cb;
                fp.vertices = rect_vertices(ra, cb, nf);
                fp.provenance = FeatureProvenance::ComplementPart;
                fp.label = level_set_label(cov_a, ra) + "&" + level_set_label(cov_b, cb);
                push(std::move(fp));
            }
        }
    }
    return features;
}

double elastic_net_lambda_max(const std::vector<std::vector<Index>>& feature_cells,
                              const MeasurementTable& m) {
    double wsum = 0.0, wtau = 0.0;
    for (Index x = 0; x < m.size(); ++x)
        if (m.weight[x] > 0.0) {
            wsum += m.weight[x];
            wtau += m.weight[x] * m.value[x];
        }
    const double mean = wsum > 0.0 ? wtau / wsum : 0.0;
    double lmax = 0.0;
    for (const auto& cells : feature_cells) {
        double g = 0.0;
        for (Index x : cells) g += m.weight[x] * (m.value[x] - mean);
        lmax = std::max(lmax, std::abs(g));
    }
    return lmax;
}

std::vector<ElasticNetEntry> elastic_net_path(
    const std::vector<std::vector<Index>>& feature_cells, const MeasurementTable& m,
    const std::vector<double>& l1_grid, double l2_ratio, double tol, int max_pass) {
    const int p = static_cast<int>(feature_cells.size());
    std::vector<double> wsum_f(p, 0.0);
    for (int j = 0; j < p; ++j)
        for (Index x : feature_cells[j]) wsum_f[j] += m.weight[x];
    double wsum = 0.0;
    for (Index x = 0; x < m.size(); ++x)
        if (m.weight[x] > 0.0) wsum += m.weight[x];
    if (!(wsum > 0.0)) throw SolveError("elastic net: no usable cells");

    Vector r = m.value;  // residual on usable cells (unusable never touched)
    Vector beta = Vector::Zero(p);
    double b0 = 0.0;

    auto update_intercept = [&]() {
        double g = 0.0;
        for (Index x = 0; x < m.size(); ++x)
            if (m.weight[x] > 0.0) g += m.weight[x] * r[x];
        const double delta = g / wsum;
        if (delta != 0.0) {
            b0 += delta;
            for (Index x = 0; x < m.size(); ++x)
                if (m.weight[x] > 0.0) r[x] -= delta;
        }
        return std::abs(delta);
    };

    auto update_coord = [&](int j, double lambda1, double lambda2) {
        double g = 0.0;
        for (Index x : feature_cells[j]) g += m.weight[x] * r[x];
        g += wsum_f[j] * beta[j];
        const double denom = wsum_f[j] + lambda2;
        const double next = denom > 0.0 ? soft_threshold(g, lambda1) / denom : 0.0;
        const double delta = next - beta[j];
        if (delta != 0.0) {
            beta[j] = next;
            for (Index x : feature_cells[j]) r[x] -= delta;
        }
        return std::abs(delta);
    };

    std::vector<ElasticNetEntry> path;
    path.reserve(l1_grid.size());
    for (double lambda1 : l1_grid) {
        const double lambda2 = l2_ratio * lambda1;
        bool active_only = false;
        for (int pass = 0; pass < max_pass; ++pass) {
            double max_delta = update_intercept();
            bool any_active = false;
            for (int j = 0; j < p; ++j) {
                if (active_only && beta[j] == 0.0) continue;
                any_active = true;
                max_delta = std::max(max_delta, update_coord(j, lambda1, lambda2));
            }
            if (max_delta <= tol || !any_active) {
                if (active_only) {
                    active_only = false;  // full sweep to admit violators
                } else if (max_delta <= tol) {
                    break;
                }
            } else {
                active_only = true;
            }
        }
        ElasticNetEntry entry;
        entry.lambda1 = lambda1;
        entry.coef = beta;
        entry.intercept = b0;
        for (int j = 0; j < p; ++j)
            if (beta[j] != 0.0) entry.support.push_back(j);
        path.push_back(std::move(entry));
    }
    return path;
}

RefitModel finalize(const std::vector<int>& support,
                    const std::vector<std::vector<Index>>& feature_cells,
                    const MeasurementTable& m) {
    std::vector<std::vector<Index>> predictors;
    predictors.reserve(support.size());
    for (int j : support) predictors.push_back(feature_cells[j]);
    return wls_fit(predictors, m);
}

ReprocessResult reprocess(const ClusterSet& selected, const DesignOperator& design,
                          const CovariateSchema& schema, const MeasurementTable& m,
                          Criterion criterion, const ElasticNetOptions& opts) {
    ReprocessResult out;
    out.features = build_block_features(selected, design, schema);
    out.feature_cells.reserve(out.features.size());
    for (const auto& f : out.features) {
        std::vector<char> member(design.terms[f.term].vertex_count, 0);
        for (int v : f.vertices) member[v] = 1;
        std::vector<Index> cells;
        const auto& cols = design.term_cols[f.term];
        for (Index x = 0; x < design.n_cells; ++x)
            if (m.weight[x] > 0.0 && member[cols[x]]) cells.push_back(x);
        out.feature_cells.push_back(std::move(cells));
    }

    if (out.features.empty()) {
        out.model = finalize({}, out.feature_cells, m);
        out.support.clear();
        return out;
    }

    const double lmax = elastic_net_lambda_max(out.feature_cells, m);
    if (!(lmax > 0.0)) {
        out.model = finalize({}, out.feature_cells, m);
        return out;
    }
    const auto grid = lambda_grid(lmax, opts.grid_count, opts.min_ratio);
    out.path = elastic_net_path(out.feature_cells, m, grid, opts.l2_ratio, opts.tol,
                                opts.max_pass);

    double best = std::numeric_limits<double>::infinity();
    int best_i = 0;
    RefitModel best_model;
    for (std::size_t i = 0; i < out.path.size(); ++i) {
        const RefitModel fit = finalize(out.path[i].support, out.feature_cells, m);
        const auto [aic, bic] = information_criteria(fit.res, fit.dof, fit.n_t);
        const double score = criterion == Criterion::Bic ? bic : aic;
        if (score < best) {  // strict: ties keep the sparser (earlier) entry
            best = score;
            best_i = static_cast<int>(i);
            best_model = fit;
        }
    }
    out.selected_entry = best_i;
    out.support = out.path[best_i].support;
    out.model = best_model;

    std::vector<std::vector<Index>> predictors;
    for (int j : out.support) predictors.push_back(out.feature_cells[j]);
    out.importance = deletion_importance(predictors, out.model, m);
    return out;
}

}  // namespace tvreg
