#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pcir/grid.hpp"

namespace pcir {

/**
 * 4-neighbor grid graph with free boundaries.
 *
 * Undirected edges are stored once as ordered pairs (a < b). Directed edges
 * get ids 2k (a -> b) and 2k+1 (b -> a), so the reverse of directed edge e is
 * e ^ 1. in_offset/in_edges is a CSR listing of directed edges pointing into
 * each node, which is the traversal message passing needs.
 */
struct GridTopology {
    int width = 0;
    int height = 0;
    std::vector<int> edge_a, edge_b;        // undirected edges, edge_a[k] < edge_b[k]
    std::vector<int> in_offset;             // size M+1
    std::vector<int> in_edges;              // directed edge ids, grouped by target node

    GridTopology() = default;

    GridTopology(int w, int h) : width(w), height(h) {
        if (w < 1 || h < 1)
            throw std::invalid_argument("GridTopology: extents must be >= 1");
        const int m = w * h;
        edge_a.reserve(static_cast<std::size_t>(2 * m));
        edge_b.reserve(static_cast<std::size_t>(2 * m));
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int i = y * w + x;
                if (x + 1 < w) {
                    edge_a.push_back(i);
                    edge_b.push_back(i + 1);
                }
                if (y + 1 < h) {
                    edge_a.push_back(i);
                    edge_b.push_back(i + w);
                }
            }
        }
        std::vector<int> degree(static_cast<std::size_t>(m), 0);
        for (std::size_t k = 0; k < edge_a.size(); ++k) {
            ++degree[static_cast<std::size_t>(edge_a[k])];
            ++degree[static_cast<std::size_t>(edge_b[k])];
        }
        in_offset.assign(static_cast<std::size_t>(m) + 1, 0);
        for (int i = 0; i < m; ++i)
            in_offset[static_cast<std::size_t>(i) + 1] =
                in_offset[static_cast<std::size_t>(i)] + degree[static_cast<std::size_t>(i)];
        in_edges.resize(edge_a.size() * 2);
        std::vector<int> fill(in_offset.begin(), in_offset.end() - 1);
        for (std::size_t k = 0; k < edge_a.size(); ++k) {
            // directed 2k: a -> b, directed 2k+1: b -> a
            in_edges[static_cast<std::size_t>(fill[static_cast<std::size_t>(edge_b[k])]++)] =
                static_cast<int>(2 * k);
            in_edges[static_cast<std::size_t>(fill[static_cast<std::size_t>(edge_a[k])]++)] =
                static_cast<int>(2 * k + 1);
        }
    }

    int nodes() const { return width * height; }
    int edges() const { return static_cast<int>(edge_a.size()); }

    // Source and target of a directed edge id.
    int source(int e) const { return (e & 1) ? edge_b[static_cast<std::size_t>(e >> 1)]
                                             : edge_a[static_cast<std::size_t>(e >> 1)]; }
    int target(int e) const { return (e & 1) ? edge_a[static_cast<std::size_t>(e >> 1)]
                                             : edge_b[static_cast<std::size_t>(e >> 1)]; }
    static int reverse(int e) { return e ^ 1; }
    int degree(int i) const { return in_offset[static_cast<std::size_t>(i) + 1] -
                                     in_offset[static_cast<std::size_t>(i)]; }
};

// Sum over edges of (x_a - x_b)^2, the quadratic form of the graph Laplacian.
inline double laplacian_quadform(const GridTopology& topo, const Grid<double>& x) {
    if (x.width() != topo.width || x.height() != topo.height)
        throw std::invalid_argument("laplacian_quadform: shape mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < topo.edge_a.size(); ++k) {
        const double d = x[static_cast<std::size_t>(topo.edge_a[k])] -
                         x[static_cast<std::size_t>(topo.edge_b[k])];
        acc += d * d;
    }
    return acc;
}

struct GmrfHyper {
    double alpha;  // smoothness weight on neighbor differences
    double h;      // ridge keeping the precision matrix positive definite
};

// Prior energy (alpha/2) sum_edges (x_i - x_j)^2 + (h/2) sum_i x_i^2.
inline double prior_energy(const GridTopology& topo, const Grid<double>& x,
                           const GmrfHyper& hyper) {
    if (!(hyper.alpha > 0.0) || !(hyper.h > 0.0))
        throw std::invalid_argument("prior_energy: alpha and h must be positive");
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        sq += x[i] * x[i];
    return 0.5 * hyper.alpha * laplacian_quadform(topo, x) + 0.5 * hyper.h * sq;
}

/**
 * Eigenvalues of the grid-graph Laplacian in closed form:
 *   eta_{p,q} = 2(1 - cos(pi p / Lx)) + 2(1 - cos(pi q / Ly)),
 * p = 0..Lx-1, q = 0..Ly-1 (cosine basis of the free-boundary grid).
 * Returned sorted ascending; exactly one zero (the constant mode).
 */
inline std::vector<double> laplacian_eigenvalues(int lx, int ly) {
    if (lx < 1 || ly < 1)
        throw std::invalid_argument("laplacian_eigenvalues: extents must be >= 1");
    std::vector<double> ex(static_cast<std::size_t>(lx)), ey(static_cast<std::size_t>(ly));
    for (int p = 0; p < lx; ++p)
        ex[static_cast<std::size_t>(p)] = 2.0 - 2.0 * std::cos(std::numbers::pi * p / lx);
    for (int q = 0; q < ly; ++q)
        ey[static_cast<std::size_t>(q)] = 2.0 - 2.0 * std::cos(std::numbers::pi * q / ly);
    std::vector<double> eta;
    eta.reserve(static_cast<std::size_t>(lx) * static_cast<std::size_t>(ly));
    for (double a : ex)
        for (double b : ey)
            eta.push_back(a + b);
    std::sort(eta.begin(), eta.end());
    eta[0] = 0.0;  // exact by construction; clear rounding residue
    return eta;
}

// ln det(alpha L + h I) via the eigenvalues above.
inline double prior_logdet(const std::vector<double>& eta, double alpha, double h) {
    double acc = 0.0;
    for (double e : eta) {
        const double v = alpha * e + h;
        if (!(v > 0.0))
            throw std::invalid_argument("prior_logdet: alpha*eta + h must be positive");
        acc += std::log(v);
    }
    return acc;
}

}  // namespace pcir
