#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "pcir/grid.hpp"
#include "pcir/rng.hpp"

namespace pcir {

// Synthetic test images in [0, 255], used by the test suite and shipped as
// CI stand-ins for licensed photographs.

inline IntensityImage gradient_image(int w, int h) {
    IntensityImage img(w, h);
    const double denom = std::max(1, w + h - 2);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = 255.0 * (x + y) / denom;
    return img;
}

inline IntensityImage checkerboard_image(int w, int h, int cell) {
    IntensityImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = ((x / cell + y / cell) % 2 == 0) ? 32.0 : 224.0;
    return img;
}

// Smooth "natural-like" content: a few random Gaussian bumps on a sloped
// background, normalized to the full range.
inline IntensityImage blob_image(int w, int h, std::uint64_t seed, int blobs = 6) {
    IntensityImage img(w, h, 0.0);
    SplitMix64 rng(seed);
    for (int b = 0; b < blobs; ++b) {
        const double cx = rng.next_double() * w;
        const double cy = rng.next_double() * h;
        const double sx = (0.08 + 0.22 * rng.next_double()) * w;
        const double sy = (0.08 + 0.22 * rng.next_double()) * h;
        const double amp = 0.3 + rng.next_double();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(x, y) += amp * std::exp(-0.5 * ((x - cx) * (x - cx) / (sx * sx) +
                                                       (y - cy) * (y - cy) / (sy * sy)));
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) += 0.3 * (static_cast<double>(x) + y) / std::max(1, w + h - 2);
    const double lo = min_value(img), hi = max_value(img);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = 255.0 * (img[i] - lo) / (hi - lo);
    return img;
}

// Photograph-like scene: a sloped, gently bumped background, a handful of
// sharp-edged rectangles and disks at distinct levels, and fine correlated
// texture everywhere. Flat-region/edge/texture statistics land close to a
// natural image patch, unlike the purely smooth fixtures above.
inline IntensityImage scene_image(int w, int h, std::uint64_t seed) {
    SplitMix64 rng(seed);
    IntensityImage img(w, h);

    const double gx = 0.5 + rng.next_double();
    const double gy = 0.5 + rng.next_double();
    const double cx = rng.next_double() * w;
    const double cy = rng.next_double() * h;
    const double cs = (0.3 + 0.3 * rng.next_double()) * std::max(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = 90.0 + 60.0 * (gx * x + gy * y) / (gx * w + gy * h) +
                           45.0 * std::exp(-0.5 * ((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                                           (cs * cs));

    for (int s = 0; s < 6; ++s) {
        const double level = 30.0 + 190.0 * rng.next_double();
        const int px = static_cast<int>(rng.next() % static_cast<std::uint64_t>(w));
        const int py = static_cast<int>(rng.next() % static_cast<std::uint64_t>(h));
        const int extent = 6 + static_cast<int>(rng.next() % 23ULL);
        if (rng.next() % 2 == 0) {
            const int ex = extent, ey = 6 + static_cast<int>(rng.next() % 23ULL);
            for (int y = std::max(0, py); y < std::min(h, py + ey); ++y)
                for (int x = std::max(0, px); x < std::min(w, px + ex); ++x)
                    img.at(x, y) = level;
        } else {
            const int r2 = extent * extent / 2;
            for (int y = std::max(0, py - extent); y < std::min(h, py + extent); ++y)
                for (int x = std::max(0, px - extent); x < std::min(w, px + extent); ++x)
                    if ((x - px) * (x - px) + (y - py) * (y - py) <= r2)
                        img.at(x, y) = level;
        }
    }

    // Correlated texture: box-blurred uniform noise (keeps every patch
    // non-degenerate and caps how much any smoother can gain).
    Grid<double> noise(w, h);
    for (std::size_t i = 0; i < noise.size(); ++i)
        noise[i] = rng.next_double() - 0.5;
    auto tap = [&](int x, int y) {
        return noise.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    acc += tap(x + dx, y + dy);
            img.at(x, y) = std::clamp(img.at(x, y) + 220.0 * (acc / 9.0), 0.0, 255.0);
        }
    }
    return img;
}

// Fingerprint-like oriented ridges: a sinusoid along a slowly rotating
// direction field, giving curved high-frequency stripes.
inline IntensityImage stripe_image(int w, int h, double period = 8.0, double angle = 0.6) {
    IntensityImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double bend = 0.35 * std::sin(2.0 * std::numbers::pi * y / std::max(1, h));
            const double theta = angle + bend;
            const double u = x * std::cos(theta) + y * std::sin(theta);
            img.at(x, y) = 127.5 + 127.5 * std::sin(2.0 * std::numbers::pi * u / period);
        }
    }
    return img;
}

}  // namespace pcir
