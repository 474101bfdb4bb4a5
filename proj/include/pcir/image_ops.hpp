#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcir/grid.hpp"

namespace pcir {

/**
 * Affine rescaling of an image onto a target Poisson-rate range.
 *
 * The darkest input pixel maps exactly to lambda_min and the brightest to
 * lambda_max, so the output dynamic range is [lambda_min, lambda_max] by
 * construction. Requires lambda_min > 0 (rates must stay positive) and a
 * non-constant input.
 */
inline SourceField scale_to_source(const IntensityImage& img, double lambda_min,
                                   double lambda_max) {
    if (!(lambda_min > 0.0) || !(lambda_max > lambda_min))
        throw std::invalid_argument("scale_to_source: need 0 < lambda_min < lambda_max");
    const double lo = min_value(img);
    const double hi = max_value(img);
    if (!(hi > lo))
        throw std::invalid_argument("degenerate contrast");

    SourceField out(img.width(), img.height());
    const double span = lambda_max - lambda_min;
    for (std::size_t i = 0; i < img.size(); ++i) {
        double t = (img[i] - lo) / (hi - lo);
        out[i] = lambda_min + t * span;
    }
    return out;
}

template <typename T>
Grid<T> extract_patch(const Grid<T>& img, int x0, int y0, int pw, int ph) {
    if (pw < 1 || ph < 1)
        throw std::invalid_argument("extract_patch: patch extents must be >= 1");
    if (x0 < 0 || y0 < 0 || x0 + pw > img.width() || y0 + ph > img.height())
        throw std::invalid_argument("extract_patch: window not contained in image");
    Grid<T> out(pw, ph);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            out.at(x, y) = img.at(x0 + x, y0 + y);
    return out;
}

// Symmetric boundary reflection: -1 -> 0, n -> n-1, n+1 -> n-2, ...
inline int reflect_index(int p, int n) {
    if (n == 1)
        return 0;
    const int period = 2 * n;
    p %= period;
    if (p < 0)
        p += period;
    return p < n ? p : period - 1 - p;
}

/**
 * Separable Gaussian blur with kernel truncated at 3*sigma and symmetric
 * (reflecting) boundaries. Kernel taps are normalized to sum to one, so a
 * constant image is a fixed point and total mass is preserved up to the
 * reflection. sigma <= 0 returns the input unchanged.
 */
inline IntensityImage gaussian_blur(const IntensityImage& img, double sigma) {
    if (!(sigma > 0.0))
        return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w(static_cast<std::size_t>(radius) + 1);
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k)
        norm += std::exp(-0.5 * (static_cast<double>(k) * k) / (sigma * sigma));
    for (int k = 0; k <= radius; ++k)
        w[static_cast<std::size_t>(k)] =
            std::exp(-0.5 * (static_cast<double>(k) * k) / (sigma * sigma)) / norm;

    const int width = img.width(), height = img.height();
    IntensityImage tmp(width, height), out(width, height);

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = w[0] * img.at(x, y);
            for (int k = 1; k <= radius; ++k)
                acc += w[static_cast<std::size_t>(k)] *
                       (img.at(reflect_index(x - k, width), y) +
                        img.at(reflect_index(x + k, width), y));
            tmp.at(x, y) = acc;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = w[0] * tmp.at(x, y);
            for (int k = 1; k <= radius; ++k)
                acc += w[static_cast<std::size_t>(k)] *
                       (tmp.at(x, reflect_index(y - k, height)) +
                        tmp.at(x, reflect_index(y + k, height)));
            out.at(x, y) = acc;
        }
    }
    return out;
}

/**
 * Halves each dimension: light Gaussian pre-blur, then 2x2 block averaging.
 * Odd extents are handled by replicating the last row/column, so the output
 * is ceil(n/2) per axis. A 1x1 input comes back unchanged.
 */
inline IntensityImage resample_half(const IntensityImage& img, double blur_sigma = 1.0) {
    const IntensityImage b = gaussian_blur(img, blur_sigma);
    const int width = img.width(), height = img.height();
    const int ow = (width + 1) / 2, oh = (height + 1) / 2;
    IntensityImage out(ow, oh);
    auto cx = [width](int x) { return x < width ? x : width - 1; };
    auto cy = [height](int y) { return y < height ? y : height - 1; };
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            out.at(x, y) = 0.25 * (b.at(cx(2 * x), cy(2 * y)) + b.at(cx(2 * x + 1), cy(2 * y)) +
                                   b.at(cx(2 * x), cy(2 * y + 1)) +
                                   b.at(cx(2 * x + 1), cy(2 * y + 1)));
        }
    }
    return out;
}

}  // namespace pcir
