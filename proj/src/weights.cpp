#include "tvreg/weights.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "tvreg/mathutil.hpp"
#include "tvreg/rng.hpp"

namespace tvreg {

DualNormSolver::DualNormSolver(const SpMat& d_block, DualNormOptions opts)
    : d_(d_block), opts_(opts) {
    const Matrix gram = Matrix(d_.transpose() * d_);
    gram_.compute(gram);
}

DualNormResult DualNormSolver::solve(const Vector& b) const {
    DualNormResult out;
    const Index m = d_.rows();
    out.certificate = Vector::Zero(m);
    const double b_norm = b.norm();
    if (!(b_norm > 0.0)) {
        out.converged = true;
        return out;
    }
    const Vector bn = b / b_norm;

    // minimum-l2-norm feasible start; also detects inconsistent systems
    // (alpha == 0 with b not orthogonal to the constant direction)
    Vector v = d_ * gram_.solve(bn);
    if ((d_.transpose() * v - bn).cwiseAbs().maxCoeff() > 1e-8)
        throw ConfigError(
            "dual norm: D_k^T v = b_k has no solution; weight pre-tuning and lambda_max "
            "require alpha > 0");

    const double rho = 1.0 / std::max(v.cwiseAbs().maxCoeff(), 1e-12);
    Vector z = v, w = Vector::Zero(m), best = v, t(m), x(m);
    double best_norm = v.cwiseAbs().maxCoeff();
    for (int it = 1; it <= opts_.max_iter; ++it) {
        out.iterations = it;
        t = z - w;
        v = t - d_ * gram_.solve(d_.transpose() * t - bn);
        x = v + w;
        const Vector z_old = z;
        z = prox_max_norm(x, 1.0 / rho);
        w += v - z;
        const double vn = v.cwiseAbs().maxCoeff();
        if (vn < best_norm) {
            best_norm = vn;
            best = v;
        }
        const double tol = opts_.rel_tol * std::max(vn, 1e-12);
        if (it >= opts_.min_iter && (v - z).cwiseAbs().maxCoeff() <= tol &&
            rho * (z - z_old).cwiseAbs().maxCoeff() <= tol) {
            out.converged = true;
            break;
        }
    }
    out.gamma = best_norm * b_norm;
    out.certificate = best * b_norm;
    return out;
}

namespace {

std::vector<DualNormSolver> make_solvers(const PenaltyOperator& penalty,
                                         const DualNormOptions& opts) {
    std::vector<DualNormSolver> solvers;
    solvers.reserve(penalty.blocks.size());
    for (const auto& blk : penalty.blocks) solvers.emplace_back(blk.d, opts);
    return solvers;
}

}  // namespace

WeightEstimate estimate_weights(const DesignOperator& design,
                                const PenaltyOperator& penalty_unweighted,
                                const MeasurementTable& m, int mc_samples, std::uint64_t seed,
                                int n_threads, DualNormOptions opts) {
    if (mc_samples < 100) throw ConfigError("weight pre-tuning needs at least 100 samples");
    if (penalty_unweighted.alpha <= 0.0)
        throw ConfigError("weight pre-tuning requires alpha > 0");
    const std::size_t n_terms = design.terms.size();

    std::vector<Index> usable;
    for (Index x = 0; x < m.size(); ++x)
        if (m.weight[x] > 0.0) usable.push_back(x);
    if (usable.empty()) throw SolveError("weight pre-tuning: no usable cells");
    const double s = m.weight_sum();

    const auto solvers = make_solvers(penalty_unweighted, opts);

    Matrix gammas(mc_samples, static_cast<Index>(n_terms));
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto run_range = [&](int begin, int end) {
        try {
            Vector noise_w(usable.size());
            Vector b(design.n_params);
            for (int sample = begin; sample < end; ++sample) {
                Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(sample));
                // w_x = M_x n_x with n_x ~ N(0, 1/M_x), zero off-support
                double sw = 0.0;
                for (std::size_t i = 0; i < usable.size(); ++i) {
                    const double mx = m.weight[usable[i]];
                    noise_w[static_cast<Index>(i)] = std::sqrt(mx) * rng.normal();
                    sw += noise_w[static_cast<Index>(i)];
                }
                b.setZero();
                for (std::size_t i = 0; i < usable.size(); ++i) {
                    const Index x = usable[i];
                    const double adj =
                        noise_w[static_cast<Index>(i)] - m.weight[x] * (sw / s);
                    for (std::size_t k = 0; k < n_terms; ++k)
                        b[design.term_offsets[k] + design.term_cols[k][x]] += adj;
                }
                for (std::size_t k = 0; k < n_terms; ++k) {
                    const auto& blk = penalty_unweighted.blocks[k];
                    gammas(sample, static_cast<Index>(k)) =
                        solvers[k].solve(b.segment(blk.col_offset, blk.d.cols())).gamma;
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };

    int threads = n_threads > 0 ? n_threads
                                : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min({threads, 8, mc_samples}));
    if (threads == 1) {
        run_range(0, mc_samples);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (mc_samples + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(mc_samples, begin + chunk);
            if (begin < end) pool.emplace_back(run_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    WeightEstimate est;
    est.samples = mc_samples;
    est.seed = seed;
    est.mean_gamma.resize(n_terms);
    est.se_gamma.resize(n_terms);
    est.weights.resize(n_terms);
    for (std::size_t k = 0; k < n_terms; ++k) {
        const auto col = gammas.col(static_cast<Index>(k));
        const double mean = col.mean();
        est.mean_gamma[k] = mean;
        est.se_gamma[k] = std::sqrt((col.array() - mean).square().sum() /
                                    (static_cast<double>(mc_samples) - 1.0) /
                                    static_cast<double>(mc_samples));
        if (!(mean > 0.0) || !std::isfinite(mean))
            throw SolveError("weight pre-tuning produced a nonpositive weight for term " +
                             design.terms[k].label);
    }
    double log_sum = 0.0;
    for (std::size_t k = 0; k < n_terms; ++k) log_sum += std::log(est.mean_gamma[k]);
    const double geo = std::exp(log_sum / static_cast<double>(n_terms));
    for (std::size_t k = 0; k < n_terms; ++k) est.weights[k] = est.mean_gamma[k] / geo;
    return est;
}

double lambda_max(const ReducedProblem& problem, const PenaltyOperator& penalty_weighted,
                  DualNormOptions opts) {
    double lmax = 0.0;
    for (const auto& blk : penalty_weighted.blocks) {
        const Vector bk = problem.b.segment(blk.col_offset, blk.d.cols());
        if (!(bk.norm() > 0.0)) continue;
        DualNormSolver solver(blk.d, opts);
        lmax = std::max(lmax, solver.solve(bk).gamma / blk.weight);
    }
    return lmax;
}

}  // namespace tvreg
