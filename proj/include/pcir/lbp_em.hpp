#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcir/channel.hpp"
#include "pcir/gmrf.hpp"
#include "pcir/grid.hpp"
#include "pcir/latent.hpp"
#include "pcir/lbp.hpp"

namespace pcir {

inline constexpr double kAlphaMin = 1e-6;
inline constexpr double kAlphaMax = 1e6;

struct RestoreConfig {
    int trial_count = 0;     // 0 = derive from data: max(256, 2 max z)
    double h = 1e-4;
    double alpha0 = 1.0;
    double xi0 = 1.0;
    double lbp_tol = 1e-8;
    int lbp_max_sweeps = 500;
    double em_tol = 1e-5;
    int em_max_iter = 100;
    double damping = 0.0;
    bool mean_field = false;  // drop pairwise correlations (s_ij = 0) in the alpha update
};

struct RestoreDiagRow {
    int em_iter;
    double alpha;       // value used in this iteration's LBP run
    double xi_mean;     // mean bound anchor entering this iteration
    int lbp_sweeps;
    double m_delta;     // max-abs change of the posterior mean vs previous iteration
};

struct RestoreResult {
    SourceField lambda_hat;
    LogitField x_hat;
    std::vector<RestoreDiagRow> diagnostics;
    bool converged = false;
    double alpha_final = 0.0;
};

/**
 * Smoothness update from LBP statistics:
 *   1/alpha = sum_edges [ (m_i - m_j)^2 + sigma_i^2 + sigma_j^2 - 2 s_ij ] / (M - 1)
 * clamped to [1e-6, 1e6]. With mean_field set, s_ij is treated as 0, which
 * systematically underestimates alpha (the correlations it drops are positive
 * on a smoothness prior).
 */
inline double alpha_update_lbp(const GridTopology& topo, const MarginalStats& stats,
                               bool mean_field = false) {
    const int m = topo.nodes();
    if (m < 2)
        throw std::invalid_argument("alpha_update_lbp: need at least 2 pixels");
    double rhs = 0.0;
    for (int k = 0; k < topo.edges(); ++k) {
        const std::size_t a = static_cast<std::size_t>(topo.edge_a[static_cast<std::size_t>(k)]);
        const std::size_t b = static_cast<std::size_t>(topo.edge_b[static_cast<std::size_t>(k)]);
        const double d = stats.mean[a] - stats.mean[b];
        double term = d * d + stats.variance[a] + stats.variance[b];
        if (!mean_field)
            term -= 2.0 * stats.edge_cov[static_cast<std::size_t>(k)];
        rhs += term;
    }
    if (!std::isfinite(rhs))
        throw std::runtime_error("alpha_update_lbp: non-finite statistic");
    if (!(rhs > (m - 1) / kAlphaMax))
        return kAlphaMax;
    return std::clamp((m - 1) / rhs, kAlphaMin, kAlphaMax);
}

// Inverse half-logit rescaled by the trial count: lambda = K e^x/(e^x + e^-x).
// Output is strictly inside (0, K).
inline SourceField restore_lambda(const LogitField& x_hat, int trials) {
    if (trials < 1)
        throw std::invalid_argument("restore_lambda: trials must be >= 1");
    SourceField out(x_hat.width(), x_hat.height());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        if (!std::isfinite(x_hat[i]))
            throw std::invalid_argument("restore_lambda: non-finite logit value");
        out[i] = trials * inv_logit(x_hat[i]);
    }
    return out;
}

/**
 * Full restoration loop: from counts z, alternate
 *   1. pseudo-observations (beta, y) from the current xi,
 *   2. Gaussian LBP to convergence (messages warm-started across iterations),
 *   3. marginal statistics (m, sigma^2, s),
 *   4. xi_i <- sqrt(m_i^2 + sigma_i^2) and the alpha update above,
 * until the posterior mean m stops moving (max-abs change < em_tol), then map
 * m through the inverse logit. Fully deterministic for a given (z, cfg).
 */
inline RestoreResult restore(const CountImage& z, const RestoreConfig& cfg) {
    if (!(cfg.h > 0.0) || !(cfg.lbp_tol > 0.0) || !(cfg.em_tol > 0.0) || !(cfg.alpha0 > 0.0) ||
        !(cfg.xi0 > 0.0) || cfg.lbp_max_sweeps < 1 || cfg.em_max_iter < 1)
        throw std::invalid_argument("restore: bad configuration");
    if (cfg.damping < 0.0 || cfg.damping >= 1.0)
        throw std::invalid_argument("restore: damping must be in [0,1)");
    int zmax = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] < 0)
            throw std::invalid_argument("restore: counts must be >= 0");
        zmax = std::max(zmax, z[i]);
    }
    const int trials = cfg.trial_count > 0 ? cfg.trial_count : default_trial_count(z);
    if (trials < zmax)
        throw std::invalid_argument("restore: trial count K must be >= max count");

    const GridTopology topo(z.width(), z.height());
    const int m = topo.nodes();
    Grid<double> xi(z.width(), z.height(), cfg.xi0);
    double alpha = cfg.alpha0;
    MessageSet msgs = init_messages(topo, cfg.alpha0);
    LbpOptions lbp_opt{cfg.lbp_tol, cfg.lbp_max_sweeps, cfg.damping, nullptr};

    RestoreResult res;
    std::vector<double> prev_mean;
    MarginalStats stats;
    for (int it = 0; it < cfg.em_max_iter; ++it) {
        const LatentState latent = pseudo_obs(z, xi, trials);
        double xi_mean = 0.0;
        for (std::size_t i = 0; i < xi.size(); ++i)
            xi_mean += xi[i];
        xi_mean /= static_cast<double>(xi.size());

        LbpRun run;
        try {
            run = run_to_convergence(topo, msgs, latent.beta, latent.y, alpha, cfg.h, lbp_opt);
            stats = marginal_stats(topo, msgs, latent.beta, latent.y, alpha, cfg.h);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("restore: EM iteration " + std::to_string(it) + ": " +
                                     e.what());
        }

        double delta = std::numeric_limits<double>::infinity();
        if (it > 0) {
            delta = 0.0;
            for (int i = 0; i < m; ++i)
                delta = std::max(delta, std::fabs(stats.mean[static_cast<std::size_t>(i)] -
                                                  prev_mean[static_cast<std::size_t>(i)]));
        }
        res.diagnostics.push_back({it, alpha, xi_mean, run.sweeps, delta});
        if (delta < cfg.em_tol) {
            res.converged = true;
            break;
        }
        prev_mean = stats.mean;

        for (int i = 0; i < m; ++i)
            xi[static_cast<std::size_t>(i)] = update_xi(stats.mean[static_cast<std::size_t>(i)],
                                                        stats.variance[static_cast<std::size_t>(i)]);
        if (m >= 2)
            alpha = alpha_update_lbp(topo, stats, cfg.mean_field);
    }

    res.alpha_final = alpha;
    res.x_hat = LogitField(z.width(), z.height());
    for (int i = 0; i < m; ++i)
        res.x_hat[static_cast<std::size_t>(i)] = stats.mean[static_cast<std::size_t>(i)];
    res.lambda_hat = restore_lambda(res.x_hat, trials);
    return res;
}

}  // namespace pcir
