#pragma once

#include <vector>

#include "tvreg/cells.hpp"
#include "tvreg/schema.hpp"
#include "tvreg/types.hpp"

namespace tvreg {

// Sparse 0/1 design mapping concatenated term parameters u = [u_1; ...; u_K]
// to cell values: tau(x) = u0 + (A u)(x). Each row holds exactly K ones.
// Stored as per-term column lookups rather than an assembled matrix.
struct DesignOperator {
    std::vector<TermSpec> terms;
    std::vector<int> dims;                    // grid dims, schema order
    Index n_cells = 0;                        // N_x
    Index n_params = 0;                       // |u|
    std::vector<Index> term_offsets;          // column offset per term
    std::vector<std::vector<int>> term_cols;  // per term: cell -> local column

    Index term_count() const { return static_cast<Index>(terms.size()); }
    // u-block of term k from a full parameter vector.
    Eigen::Ref<const Vector> block(const Vector& u, std::size_t k) const {
        return u.segment(term_offsets[k], terms[k].vertex_count);
    }
    Vector apply(const Vector& u) const;   // A u (length N_x)
    Vector apply_adjoint(const Vector& v) const;  // A^T v (length |u|)
    SpMat to_sparse() const;
};

DesignOperator build_design(const CovariateSchema& schema, const std::vector<TermSpec>& terms);

// One per-term penalty block: edge rows with entries +-(1-alpha) and vertex
// rows with entries alpha, in graph order; rows with a zero coefficient
// (alpha == 0 or 1) are not stored.
struct PenaltyBlock {
    SpMat d;             // rows x vertex_count, unit weight
    double weight = 1.0; // w_k
    Index row_offset = 0;
    Index col_offset = 0;
};

// Block-diagonal D with per-term multipliers w_k; never materialized
// monolithically outside of tests, all products run blockwise.
struct PenaltyOperator {
    double alpha = 0.5;
    std::vector<PenaltyBlock> blocks;
    Index rows_ = 0;
    Index cols_ = 0;

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Vector apply(const Vector& u) const;          // D u
    Vector apply_adjoint(const Vector& z) const;  // D^T z
    double l1(const Vector& u) const;             // ||D u||_1
    void add_gram(Matrix& f, double scale) const;     // f += scale * D^T D
    SpMat gram_sparse(double scale) const;
    SpMat to_sparse() const;
};

PenaltyOperator build_penalty(const std::vector<TermSpec>& terms, double alpha,
                              const std::vector<double>& weights);

// Reduced quadratic of the fit after eliminating the intercept:
//   1/2 (u^T B u - 2 b^T u + c),  B = A^T M (I - P1) A,
//   P1 = (1 1^T M) / (1^T M 1).
// B = A^T M A - q q^T / s with q = A^T M 1, s = 1^T M 1; the rank-one
// part makes B structurally dense, so the sparse representation keeps
// A^T M A and the rank-one term separate.
struct ReducedProblem {
    bool dense = true;
    Matrix b_mat;  // dense B (n_params <= dense_limit)
    SpMat atma;    // sparse A^T M A otherwise
    Vector b;
    double c = 0.0;
    Index n_params = 0;
    Index n_usable = 0;       // N_t
    double weight_sum = 0.0;  // s = 1^T M 1
    Vector atm1;              // q = A^T M 1
    double sum_m_tau = 0.0;   // 1^T M tau_hat

    Vector multiply(const Vector& u) const {  // B u
        if (dense) return b_mat.selfadjointView<Eigen::Lower>() * u;
        return atma.selfadjointView<Eigen::Lower>() * u - atm1 * (atm1.dot(u) / weight_sum);
    }
    // 1/2 (u^T B u - 2 b^T u + c)
    double quadratic(const Vector& u) const {
        return 0.5 * (u.dot(multiply(u)) - 2.0 * b.dot(u) + c);
    }
};

ReducedProblem reduce(const DesignOperator& design, const MeasurementTable& m,
                      Index dense_limit = 4000);

// u0 = 1^T M (tau_hat - A u) / (1^T M 1)
double recover_intercept(const ReducedProblem& problem, const Vector& u);

}  // namespace tvreg
