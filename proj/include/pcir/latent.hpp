#pragma once

#include <cmath>
#include <stdexcept>

#include "pcir/channel.hpp"
#include "pcir/grid.hpp"

namespace pcir {

// Lower bound on xi keeping beta = K tanh(xi)/xi away from its singular limit.
inline constexpr double kXiFloor = 1e-8;

namespace detail {

// tanh(x)/x with a series fallback near zero (limit is 1).
inline double tanh_over(double x) {
    const double a = std::fabs(x);
    if (a < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0;
    }
    return std::tanh(x) / x;
}

}  // namespace detail

/**
 * Quadratic upper bound on ln(2 cosh x), tight at |x| = xi:
 *   ln(2 cosh x) <= tanh(xi)/(2 xi) (x^2 - xi^2) + ln(2 cosh xi).
 * The bound holds because ln(2 cosh sqrt(u)) is concave in u = x^2.
 */
inline double log2cosh_bound(double x, double xi) {
    if (!(xi > 0.0))
        throw std::invalid_argument("log2cosh_bound: xi must be positive");
    return 0.5 * detail::tanh_over(xi) * (x * x - xi * xi) + log2cosh(xi);
}

// Precision of the Gaussian pseudo-observation induced by the bound at xi.
// Decreasing in xi with range (0, K]; equals K at xi -> 0.
inline double beta_param(double xi, int trials) {
    if (!(xi > 0.0))
        throw std::invalid_argument("beta_param: xi must be positive");
    if (trials < 1)
        throw std::invalid_argument("beta_param: trials must be >= 1");
    return trials * detail::tanh_over(xi);
}

/**
 * Per-pixel Gaussian surrogate for the count likelihood: precision beta_i and
 * pseudo-observation y_i = (2 z_i - K) / beta_i, so the bounded likelihood is
 * proportional to exp(-(beta_i/2)(y_i - x_i)^2) in x_i.
 */
struct LatentState {
    int trial_count = 0;
    Grid<double> xi;    // bound anchor points, all >= kXiFloor
    Grid<double> beta;  // pseudo-observation precisions, in (0, K]
    Grid<double> y;     // pseudo-observations
};

inline LatentState pseudo_obs(const CountImage& z, const Grid<double>& xi, int trials) {
    if (z.width() != xi.width() || z.height() != xi.height())
        throw std::invalid_argument("pseudo_obs: shape mismatch");
    LatentState s;
    s.trial_count = trials;
    s.xi = xi;
    s.beta = Grid<double>(z.width(), z.height());
    s.y = Grid<double>(z.width(), z.height());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] < 0 || z[i] > trials)
            throw std::invalid_argument("pseudo_obs: counts must satisfy 0 <= z <= K");
        const double b = beta_param(xi[i], trials);
        s.beta[i] = b;
        s.y[i] = (2.0 * z[i] - trials) / b;
    }
    return s;
}

// Bound-anchor update from posterior moments; the unique maximizer of the
// per-pixel bound term is xi = sqrt(m^2 + var), floored for safety.
inline double update_xi(double mean, double var) {
    if (var < 0.0)
        throw std::invalid_argument("update_xi: variance must be >= 0");
    return std::max(std::sqrt(mean * mean + var), kXiFloor);
}

// Count log-likelihood with ln(2 cosh x) replaced by its bound at xi.
// Never exceeds count_loglik(z, x, K); equal when xi = |x|.
inline double bounded_count_loglik(int count, double x, double xi, int trials) {
    const double lc = log_binomial_coefficient(trials, count);
    return lc + (2.0 * count - trials) * x - trials * log2cosh_bound(x, xi);
}

}  // namespace pcir
