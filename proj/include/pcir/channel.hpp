#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "pcir/grid.hpp"
#include "pcir/rng.hpp"

namespace pcir {

// ln(2 cosh x) = |x| + ln(1 + e^{-2|x|}), stable for any magnitude.
inline double log2cosh(double x) {
    const double a = std::fabs(x);
    return a + std::log1p(std::exp(-2.0 * a));
}

inline double log_binomial_coefficient(int trials, int successes) {
    if (successes < 0 || successes > trials)
        throw std::invalid_argument("log_binomial_coefficient: need 0 <= z <= K");
    return std::lgamma(trials + 1.0) - std::lgamma(successes + 1.0) -
           std::lgamma(trials - successes + 1.0);
}

inline double poisson_pmf(int count, double rate) {
    if (count < 0)
        throw std::invalid_argument("poisson_pmf: count must be >= 0");
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw std::invalid_argument("poisson_pmf: rate must be positive and finite");
    return std::exp(count * std::log(rate) - rate - std::lgamma(count + 1.0));
}

inline double binomial_pmf(int count, int trials, double prob) {
    if (trials < 1)
        throw std::invalid_argument("binomial_pmf: trials must be >= 1");
    if (count < 0 || count > trials)
        throw std::invalid_argument("binomial_pmf: need 0 <= z <= K");
    if (!(prob > 0.0) || !(prob < 1.0))
        throw std::invalid_argument("binomial_pmf: prob must be in (0,1)");
    return std::exp(log_binomial_coefficient(trials, count) + count * std::log(prob) +
                    (trials - count) * std::log1p(-prob));
}

// Half-logit parametrization: x = (1/2) ln(rho / (1 - rho)).
inline double logit(double rho) {
    if (!(rho > 0.0) || !(rho < 1.0))
        throw std::invalid_argument("logit: rho must be in (0,1)");
    return 0.5 * std::log(rho / (1.0 - rho));
}

// Inverse of the above: rho = e^x / (e^x + e^{-x}), i.e. a sigmoid of 2x.
// The result is pinned to the open interval (0,1) even where the closed-form
// value rounds to an endpoint in double precision.
inline double inv_logit(double x) {
    double r;
    if (x >= 0.0) {
        r = 1.0 / (1.0 + std::exp(-2.0 * x));
    } else {
        const double e = std::exp(2.0 * x);
        r = e / (1.0 + e);
    }
    const double top = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    if (r >= 1.0)
        r = top;
    if (r <= 0.0)
        r = std::numeric_limits<double>::denorm_min();
    return r;
}

// Log-likelihood of a count under the binomial channel, written in the
// logit domain: ln C(K,z) + (2z - K) x - K ln(2 cosh x).
inline double count_loglik(int count, double x, int trials) {
    const double lc = log_binomial_coefficient(trials, count);
    return lc + (2.0 * count - trials) * x - trials * log2cosh(x);
}

// Default number of Bernoulli trials used to emulate the Poisson channel:
// large enough that K >> z everywhere while staying proportionate to the data.
inline int default_trial_count(const CountImage& z) {
    int zmax = 0;
    for (std::size_t i = 0; i < z.size(); ++i)
        zmax = std::max(zmax, z[i]);
    return std::max(256, 2 * zmax);
}

namespace detail {

// Inversion by sequential search; fine for small rates.
inline int poisson_draw_inversion(double rate, SplitMix64& rng) {
    const double u = rng.next_double();
    double p = std::exp(-rate);
    double cum = p;
    int k = 0;
    while (u > cum) {
        ++k;
        p *= rate / k;
        cum += p;
        if (p < 1e-300)  // tail fully accumulated; u can no longer be reached
            break;
    }
    return k;
}

// Transformed rejection with squeeze (Hormann's PTRS), valid for rate >= 10.
// Constants follow the published fit; two uniforms per trial round.
inline int poisson_draw_ptrs(double rate, SplitMix64& rng) {
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        const double u = rng.next_double() - 0.5;
        const double v = rng.next_double();
        const double us = 0.5 - std::fabs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= v_r)
            return static_cast<int>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us))
            continue;
        const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
        const double rhs = kf * loglam - rate - std::lgamma(kf + 1.0);
        if (lhs <= rhs)
            return static_cast<int>(kf);
    }
}

}  // namespace detail

inline int poisson_draw(double rate, SplitMix64& rng) {
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw std::invalid_argument("poisson_draw: rate must be positive and finite");
    return rate < 30.0 ? detail::poisson_draw_inversion(rate, rng)
                       : detail::poisson_draw_ptrs(rate, rng);
}

/**
 * Draws one Poisson count per pixel. Each pixel gets its own generator
 * seeded from (seed, pixel index), so the output is independent of traversal
 * order and bit-identical across platforms and thread counts.
 */
inline CountImage poisson_sample(const SourceField& rates, std::uint64_t seed) {
    CountImage out(rates.width(), rates.height());
    for (std::size_t i = 0; i < rates.size(); ++i) {
        SplitMix64 rng(seed ^ splitmix64(static_cast<std::uint64_t>(i)));
        out[i] = poisson_draw(rates[i], rng);
    }
    return out;
}

}  // namespace pcir
