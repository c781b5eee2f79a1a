#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tvreg/types.hpp"

namespace tvreg {

inline double soft_threshold(double x, double t) {
    const double a = std::abs(x) - t;
    return a > 0.0 ? (x > 0.0 ? a : -a) : 0.0;
}

// Elementwise S_t(x) = sign(x) * max(|x| - t, 0) on any Eigen array expression.
template <typename Derived>
auto soft_threshold(const Eigen::ArrayBase<Derived>& x, double t) {
    return x.sign() * (x.abs() - t).max(0.0);
}

// Euclidean projection onto the l1 ball of radius `radius` (in place).
// Duchi et al. style: sort |x| descending, locate the threshold.
inline void project_l1_ball(Vector& x, double radius) {
    if (radius <= 0.0) {
        x.setZero();
        return;
    }
    if (x.cwiseAbs().sum() <= radius) return;
    std::vector<double> a(x.size());
    for (Index i = 0; i < x.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(x[i]);
    std::sort(a.begin(), a.end(), std::greater<double>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        cum += a[j];
        const double cand = (cum - radius) / static_cast<double>(j + 1);
        if (cand >= a[j] && j > 0) break;
        theta = cand;
    }
    for (Index i = 0; i < x.size(); ++i) x[i] = soft_threshold(x[i], theta);
}

// prox_{t ||.||_inf}(x) = x - t * P_{l1 <= 1}(x / t)  (Moreau decomposition).
inline Vector prox_max_norm(const Vector& x, double t) {
    if (t <= 0.0) return x;
    Vector v = x / t;
    project_l1_ball(v, 1.0);
    return x - t * v;
}

// Regularized incomplete beta I_x(a, b), continued fraction (Lentz).
inline double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    // Use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) for fast convergence.
    if (x >= (a + 1.0) / (a + b + 2.0))
        return 1.0 - reg_incomplete_beta(b, a, 1.0 - x);
    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 400; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(ln_front) * h / a;
}

// Two-sided p-value of a Student-t statistic with df degrees of freedom:
// P(|T| >= |t|) = I_{df/(df + t^2)}(df/2, 1/2).
inline double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) return 1.0;
    if (!std::isfinite(t)) return 0.0;
    const double x = df / (df + t * t);
    const double p = reg_incomplete_beta(0.5 * df, 0.5, x);
    return std::min(1.0, std::max(0.0, p));
}

}  // namespace tvreg
