#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcir/grid.hpp"

namespace pcir {

inline double mse(const Grid<double>& a, const Grid<double>& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("mse: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

// Peak signal-to-noise ratio with the dynamic range taken from the REFERENCE
// field (not a fixed 255): 10 log10 (max ref - min ref)^2 / MSE.
// Identical inputs give +inf.
inline double psnr(const Grid<double>& test, const Grid<double>& ref) {
    const double range = max_value(ref) - min_value(ref);
    if (!(range > 0.0))
        throw std::invalid_argument("psnr: zero dynamic range");
    const double e = mse(test, ref);
    if (e == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(range * range / e);
}

// Improvement of B over A against the same reference:
// isnr = psnr(B) - psnr(A) = 10 log10 MSE(A)/MSE(B). Positive favors B.
inline double isnr(const Grid<double>& rest_a, const Grid<double>& rest_b,
                   const Grid<double>& ref) {
    const double ea = mse(rest_a, ref);
    const double eb = mse(rest_b, ref);
    if (ea == eb)
        return 0.0;
    if (eb == 0.0)
        return std::numeric_limits<double>::infinity();
    if (ea == 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(ea / eb);
}

struct Quantiles {
    double min, q1, median, q3, max;
};

// Five-number summary with linear interpolation between order statistics.
inline Quantiles quantiles(std::vector<double> values) {
    if (values.empty())
        throw std::invalid_argument("quantiles: empty sample");
    std::sort(values.begin(), values.end());
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

inline double median_of(const std::vector<double>& values) {
    return quantiles(values).median;
}

// One evaluated (image, patch, contrast, method) cell of an experiment.
struct EvalRecord {
    std::string image;
    int patch_id = 0;
    std::uint64_t seed = 0;
    double lambda_max = 0.0;
    std::string method;
    double psnr_db = 0.0;
    double isnr_vs_corrupted_db = 0.0;
};

}  // namespace pcir
