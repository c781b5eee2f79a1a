#include "tvreg/operators.hpp"

#include <cmath>

namespace tvreg {

Vector DesignOperator::apply(const Vector& u) const {
    Vector out = Vector::Zero(n_cells);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& cols = term_cols[k];
        const Index off = term_offsets[k];
        for (Index x = 0; x < n_cells; ++x) out[x] += u[off + cols[x]];
    }
    return out;
}

Vector DesignOperator::apply_adjoint(const Vector& v) const {
    Vector out = Vector::Zero(n_params);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& cols = term_cols[k];
        const Index off = term_offsets[k];
        for (Index x = 0; x < n_cells; ++x) out[off + cols[x]] += v[x];
    }
    return out;
}

SpMat DesignOperator::to_sparse() const {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(n_cells) * terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k)
        for (Index x = 0; x < n_cells; ++x)
            trips.emplace_back(x, term_offsets[k] + term_cols[k][x], 1.0);
    SpMat a(n_cells, n_params);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

DesignOperator build_design(const CovariateSchema& schema, const std::vector<TermSpec>& terms) {
    DesignOperator a;
    a.terms = terms;
    a.dims = schema.grid_dims();
    a.n_cells = schema.grid_size();
    a.term_offsets.resize(terms.size());
    Index off = 0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        a.term_offsets[k] = off;
        off += terms[k].vertex_count;
    }
    a.n_params = off;
    a.term_cols.resize(terms.size());
    CellKey key(a.dims.size(), 0);
    for (std::size_t k = 0; k < terms.size(); ++k) a.term_cols[k].resize(a.n_cells);
    for (Index x = 0; x < a.n_cells; ++x) {
        for (std::size_t k = 0; k < terms.size(); ++k)
            a.term_cols[k][x] = terms[k].flat_of_cell(key, a.dims);
        // row-major odometer over the grid
        for (std::size_t d = key.size(); d-- > 0;) {
            if (++key[d] < a.dims[d]) break;
            key[d] = 0;
        }
    }
    return a;
}

Vector PenaltyOperator::apply(const Vector& u) const {
    Vector z(rows_);
    for (const auto& blk : blocks)
        z.segment(blk.row_offset, blk.d.rows()) =
            blk.weight * (blk.d * u.segment(blk.col_offset, blk.d.cols()));
    return z;
}

Vector PenaltyOperator::apply_adjoint(const Vector& z) const {
    Vector u = Vector::Zero(cols_);
    for (const auto& blk : blocks)
        u.segment(blk.col_offset, blk.d.cols()) =
            blk.weight * (blk.d.transpose() * z.segment(blk.row_offset, blk.d.rows()));
    return u;
}

double PenaltyOperator::l1(const Vector& u) const {
    double total = 0.0;
    for (const auto& blk : blocks)
        total += blk.weight *
                 (blk.d * u.segment(blk.col_offset, blk.d.cols())).cwiseAbs().sum();
    return total;
}

void PenaltyOperator::add_gram(Matrix& f, double scale) const {
    for (const auto& blk : blocks) {
        const Matrix g = Matrix(blk.d.transpose() * blk.d);
        f.block(blk.col_offset, blk.col_offset, blk.d.cols(), blk.d.cols()) +=
            (scale * blk.weight * blk.weight) * g;
    }
}

SpMat PenaltyOperator::gram_sparse(double scale) const {
    std::vector<Triplet> trips;
    for (const auto& blk : blocks) {
        const SpMat g = SpMat(blk.d.transpose() * blk.d);
        const double s = scale * blk.weight * blk.weight;
        for (int c = 0; c < g.outerSize(); ++c)
            for (SpMat::InnerIterator it(g, c); it; ++it)
                trips.emplace_back(blk.col_offset + it.row(), blk.col_offset + it.col(),
                                   s * it.value());
    }
    SpMat out(cols_, cols_);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

SpMat PenaltyOperator::to_sparse() const {
    std::vector<Triplet> trips;
    for (const auto& blk : blocks)
        for (int c = 0; c < blk.d.outerSize(); ++c)
            for (SpMat::InnerIterator it(blk.d, c); it; ++it)
                trips.emplace_back(blk.row_offset + it.row(), blk.col_offset + it.col(),
                                   blk.weight * it.value());
    SpMat out(rows_, cols_);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

PenaltyOperator build_penalty(const std::vector<TermSpec>& terms, double alpha,
                              const std::vector<double>& weights) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (weights.size() != terms.size())
        throw ConfigError("penalty weights count does not match term count");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("penalty weights must be positive");

    PenaltyOperator p;
    p.alpha = alpha;
    Index row_off = 0, col_off = 0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& term = terms[k];
        const bool edge_rows = alpha < 1.0;
        const bool vertex_rows = alpha > 0.0;
        const Index n_rows = (edge_rows ? term.graph.edge_count() : 0) +
                             (vertex_rows ? term.vertex_count : 0);
        std::vector<Triplet> trips;
        Index r = 0;
        if (edge_rows) {
            for (const auto& [i, j] : term.graph.edges) {
                trips.emplace_back(r, j, 1.0 - alpha);
                trips.emplace_back(r, i, -(1.0 - alpha));
                ++r;
            }
        }
        if (vertex_rows)
            for (int v = 0; v < term.vertex_count; ++v) trips.emplace_back(r++, v, alpha);
        PenaltyBlock blk;
        blk.d = SpMat(n_rows, term.vertex_count);
        blk.d.setFromTriplets(trips.begin(), trips.end());
        blk.d.makeCompressed();
        blk.weight = weights[k];
        blk.row_offset = row_off;
        blk.col_offset = col_off;
        row_off += n_rows;
        col_off += term.vertex_count;
        p.blocks.push_back(std::move(blk));
    }
    p.rows_ = row_off;
    p.cols_ = col_off;
    return p;
}

ReducedProblem reduce(const DesignOperator& design, const MeasurementTable& m,
                      Index dense_limit) {
    if (m.size() != design.n_cells)
        throw ConfigError("measurement table size does not match design grid");
    ReducedProblem p;
    p.n_params = design.n_params;
    p.n_usable = m.usable_count();
    p.weight_sum = m.weight_sum();
    if (!(p.weight_sum > 0.0)) throw SolveError("all measurement weights are zero");

    // With s = 1^T M 1 and q = A^T M 1:
    //   B = A^T M A - q q^T / s,  b = A^T M tau - q (1^T M tau) / s.
    const std::size_t n_terms = design.terms.size();
    p.atm1 = Vector::Zero(p.n_params);
    Vector atm_tau = Vector::Zero(p.n_params);
    double sum_m_tau = 0.0, sum_m_tau2 = 0.0;
    p.dense = p.n_params <= dense_limit;
    Matrix atma;
    std::vector<Triplet> trips;
    if (p.dense) atma = Matrix::Zero(p.n_params, p.n_params);

    std::vector<Index> cols(n_terms);
    for (Index x = 0; x < design.n_cells; ++x) {
        const double w = m.weight[x];
        if (!(w > 0.0)) continue;
        const double tau = m.value[x];
        for (std::size_t k = 0; k < n_terms; ++k)
            cols[k] = design.term_offsets[k] + design.term_cols[k][x];
        for (std::size_t k = 0; k < n_terms; ++k) {
            p.atm1[cols[k]] += w;
            atm_tau[cols[k]] += w * tau;
            if (p.dense) {
                for (std::size_t l = 0; l < n_terms; ++l) atma(cols[k], cols[l]) += w;
            } else {
                for (std::size_t l = 0; l < n_terms; ++l)
                    trips.emplace_back(cols[k], cols[l], w);
            }
        }
        sum_m_tau += w * tau;
        sum_m_tau2 += w * tau * tau;
    }
    p.sum_m_tau = sum_m_tau;
    p.b = atm_tau - p.atm1 * (sum_m_tau / p.weight_sum);
    p.c = sum_m_tau2 - sum_m_tau * sum_m_tau / p.weight_sum;
    if (p.dense) {
        p.b_mat = atma - (p.atm1 * p.atm1.transpose()) / p.weight_sum;
        // exact symmetry despite accumulation order
        p.b_mat = 0.5 * (p.b_mat + p.b_mat.transpose()).eval();
    } else {
        p.atma = SpMat(p.n_params, p.n_params);
        p.atma.setFromTriplets(trips.begin(), trips.end());
        p.atma.makeCompressed();
    }
    return p;
}

double recover_intercept(const ReducedProblem& problem, const Vector& u) {
    if (u.size() != problem.n_params)
        throw ConfigError("parameter vector length mismatch in intercept recovery");
    return (problem.sum_m_tau - problem.atm1.dot(u)) / problem.weight_sum;
}

}  // namespace tvreg
