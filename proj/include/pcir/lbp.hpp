#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcir/gmrf.hpp"
#include "pcir/grid.hpp"

namespace pcir {

// Gaussian message per directed edge j->i: mean mu and precision gamma.
// Vectors are indexed by directed edge id (see GridTopology).
struct MessageSet {
    std::vector<double> mu;
    std::vector<double> gamma;

    std::size_t size() const { return mu.size(); }
};

struct MarginalStats {
    std::vector<double> mean;      // per pixel
    std::vector<double> variance;  // per pixel, > 0
    std::vector<double> edge_cov;  // per undirected edge: pairwise covariance estimate
};

struct LbpOptions {
    double tol = 1e-8;
    int max_sweeps = 500;
    double damping = 0.0;          // new = (1-d)*computed + d*old, d in [0,1)
    std::ostream* trace = nullptr; // optional per-sweep CSV rows "sweep,max_delta"
};

struct LbpRun {
    int sweeps = 0;
    double final_delta = 0.0;
    bool converged = false;
};

// Fixed deterministic start: mu = 0, gamma = alpha0/2 (any value in (0, alpha)
// would do; this one is pinned so reruns are bit-identical).
inline MessageSet init_messages(const GridTopology& topo, double alpha0) {
    if (!(alpha0 > 0.0))
        throw std::invalid_argument("init_messages: alpha0 must be positive");
    MessageSet msgs;
    msgs.mu.assign(static_cast<std::size_t>(2 * topo.edges()), 0.0);
    msgs.gamma.assign(static_cast<std::size_t>(2 * topo.edges()), alpha0 / 2.0);
    return msgs;
}

/**
 * One synchronous (Jacobi) sweep: every directed message j->i is recomputed
 * from the previous message set,
 *
 *   denom      = beta_j + h + sum_{k in N(j)\i} gamma_{k->j}
 *   mu_{j->i}  = (beta_j y_j + sum_{k in N(j)\i} gamma_{k->j} mu_{k->j}) / denom
 *   1/gamma_{j->i} = 1/alpha + 1/denom.
 *
 * The exclusion sums are formed as per-node totals minus the reverse-edge
 * term, so a sweep is O(edges). Returns the max absolute change over both
 * mu and gamma. gamma stays in (0, alpha) for any beta > 0, h >= 0.
 */
inline double sweep(const GridTopology& topo, const MessageSet& prev, MessageSet& next,
                    const Grid<double>& beta, const Grid<double>& y, double alpha, double h,
                    double damping = 0.0) {
    if (!(alpha > 0.0) || h < 0.0)
        throw std::invalid_argument("sweep: need alpha > 0 and h >= 0");
    if (damping < 0.0 || damping >= 1.0)
        throw std::invalid_argument("sweep: damping must be in [0,1)");
    const int m = topo.nodes();
    const std::size_t ne = static_cast<std::size_t>(2 * topo.edges());
    if (prev.size() != ne)
        throw std::invalid_argument("sweep: message set does not match topology");
    next.mu.resize(ne);
    next.gamma.resize(ne);

    // Per-node totals over incoming messages.
    std::vector<double> tot_g(static_cast<std::size_t>(m), 0.0);
    std::vector<double> tot_gm(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        double g = 0.0, gm = 0.0;
        for (int t = topo.in_offset[static_cast<std::size_t>(i)];
             t < topo.in_offset[static_cast<std::size_t>(i) + 1]; ++t) {
            const int e = topo.in_edges[static_cast<std::size_t>(t)];
            g += prev.gamma[static_cast<std::size_t>(e)];
            gm += prev.gamma[static_cast<std::size_t>(e)] * prev.mu[static_cast<std::size_t>(e)];
        }
        tot_g[static_cast<std::size_t>(i)] = g;
        tot_gm[static_cast<std::size_t>(i)] = gm;
    }

    double max_delta = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
        const int j = topo.source(static_cast<int>(e));  // message travels j -> i
        const std::size_t rev = static_cast<std::size_t>(GridTopology::reverse(static_cast<int>(e)));
        const std::size_t ju = static_cast<std::size_t>(j);
        const double denom = beta[ju] + h + (tot_g[ju] - prev.gamma[rev]);
        const double num = beta[ju] * y[ju] + (tot_gm[ju] - prev.gamma[rev] * prev.mu[rev]);
        double mu_new = num / denom;
        double gamma_new = alpha * denom / (alpha + denom);
        if (damping > 0.0) {
            mu_new = (1.0 - damping) * mu_new + damping * prev.mu[e];
            gamma_new = (1.0 - damping) * gamma_new + damping * prev.gamma[e];
        }
        if (!std::isfinite(mu_new) || !std::isfinite(gamma_new))
            throw std::runtime_error("LBP diverged");
        max_delta = std::max({max_delta, std::fabs(mu_new - prev.mu[e]),
                              std::fabs(gamma_new - prev.gamma[e])});
        next.mu[e] = mu_new;
        next.gamma[e] = gamma_new;
    }
    return max_delta;
}

// Sweeps until max_delta < tol or max_sweeps is hit; msgs is updated in place.
inline LbpRun run_to_convergence(const GridTopology& topo, MessageSet& msgs,
                                 const Grid<double>& beta, const Grid<double>& y, double alpha,
                                 double h, const LbpOptions& opt = {}) {
    if (!(opt.tol > 0.0) || opt.max_sweeps < 1)
        throw std::invalid_argument("run_to_convergence: need tol > 0 and max_sweeps >= 1");
    MessageSet scratch = msgs;
    LbpRun run;
    for (int s = 0; s < opt.max_sweeps; ++s) {
        run.final_delta = sweep(topo, msgs, scratch, beta, y, alpha, h, opt.damping);
        std::swap(msgs, scratch);
        run.sweeps = s + 1;
        if (opt.trace)
            *opt.trace << run.sweeps << "," << run.final_delta << "\n";
        if (run.final_delta < opt.tol) {
            run.converged = true;
            break;
        }
    }
    return run;
}

/**
 * Posterior marginals from converged messages:
 *   m_i     = (beta_i y_i + sum_j gamma_{j->i} mu_{j->i}) / (beta_i + h + sum_j gamma_{j->i})
 *   sigma_i^2 = 1 / (beta_i + h + sum_j gamma_{j->i})
 * and per undirected edge the pairwise covariance estimate
 *   s_ij    = (alpha - gamma_{i->j})(alpha - gamma_{j->i}) / alpha^3.
 * Means are exact at convergence; variances and s_ij are the loopy
 * approximations and are consumed as such by the hyperparameter updates.
 */
inline MarginalStats marginal_stats(const GridTopology& topo, const MessageSet& msgs,
                                    const Grid<double>& beta, const Grid<double>& y, double alpha,
                                    double h) {
    if (!(alpha > 0.0))
        throw std::invalid_argument("marginal_stats: alpha must be positive");
    const int m = topo.nodes();
    MarginalStats stats;
    stats.mean.resize(static_cast<std::size_t>(m));
    stats.variance.resize(static_cast<std::size_t>(m));
    stats.edge_cov.resize(static_cast<std::size_t>(topo.edges()));
    for (int i = 0; i < m; ++i) {
        const std::size_t iu = static_cast<std::size_t>(i);
        double g = 0.0, gm = 0.0;
        for (int t = topo.in_offset[iu]; t < topo.in_offset[iu + 1]; ++t) {
            const int e = topo.in_edges[static_cast<std::size_t>(t)];
            g += msgs.gamma[static_cast<std::size_t>(e)];
            gm += msgs.gamma[static_cast<std::size_t>(e)] * msgs.mu[static_cast<std::size_t>(e)];
        }
        const double prec = beta[iu] + h + g;
        if (!(prec > 0.0) || !std::isfinite(prec))
            throw std::runtime_error("marginal_stats: non-positive marginal precision");
        stats.mean[iu] = (beta[iu] * y[iu] + gm) / prec;
        stats.variance[iu] = 1.0 / prec;
    }
    const double a3 = alpha * alpha * alpha;
    for (int k = 0; k < topo.edges(); ++k) {
        const std::size_t ku = static_cast<std::size_t>(k);
        const double g_ab = msgs.gamma[2 * ku];      // edge_a -> edge_b
        const double g_ba = msgs.gamma[2 * ku + 1];  // edge_b -> edge_a
        stats.edge_cov[ku] = (alpha - g_ab) * (alpha - g_ba) / a3;
    }
    return stats;
}

}  // namespace pcir
