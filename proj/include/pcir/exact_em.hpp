#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pcir/channel.hpp"
#include "pcir/gmrf.hpp"
#include "pcir/grid.hpp"
#include "pcir/latent.hpp"

namespace pcir {

// Dense solves are the reference path, not the scalable one; cap the size.
inline constexpr int kDenseNodeLimit = 4096;

// Gaussian posterior of the bounded model: mean m = S^{-1} z' and full
// covariance S^{-1}, where S = alpha*L + h*I + diag(beta) and z' = 2z - K.
struct DensePosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// S assembled densely from the grid Laplacian, ridge, and per-pixel precisions.
inline Eigen::MatrixXd build_precision(const GridTopology& topo, const Grid<double>& beta,
                                       double alpha, double h) {
    const int m = topo.nodes();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
        s(i, i) = h + beta[static_cast<std::size_t>(i)] + alpha * topo.degree(i);
    for (int k = 0; k < topo.edges(); ++k) {
        const int a = topo.edge_a[static_cast<std::size_t>(k)];
        const int b = topo.edge_b[static_cast<std::size_t>(k)];
        s(a, b) -= alpha;
        s(b, a) -= alpha;
    }
    return s;
}

inline DensePosterior posterior_dense(const CountImage& z, const LatentState& latent,
                                      double alpha, double h, const GridTopology& topo) {
    if (alpha < 0.0)
        throw std::invalid_argument("posterior_dense: alpha must be >= 0");
    const int m = topo.nodes();
    if (m > kDenseNodeLimit)
        throw std::invalid_argument("posterior_dense: image too large for dense solve");
    if (z.width() != topo.width || z.height() != topo.height || !z.same_shape(latent.beta))
        throw std::invalid_argument("posterior_dense: shape mismatch");

    Eigen::MatrixXd s = build_precision(topo, latent.beta, alpha, h);
    Eigen::VectorXd zp(m);
    for (int i = 0; i < m; ++i)
        zp(i) = 2.0 * z[static_cast<std::size_t>(i)] - latent.trial_count;

    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("S not PD");
    DensePosterior post;
    post.mean = llt.solve(zp);
    post.cov = llt.solve(Eigen::MatrixXd::Identity(m, m));
    return post;
}

// m^T L m as a sum over edges (exact rearrangement of the quadratic form).
inline double laplacian_quadform(const GridTopology& topo, const Eigen::VectorXd& v) {
    double acc = 0.0;
    for (int k = 0; k < topo.edges(); ++k) {
        const double d = v(topo.edge_a[static_cast<std::size_t>(k)]) -
                         v(topo.edge_b[static_cast<std::size_t>(k)]);
        acc += d * d;
    }
    return acc;
}

// Tr(L C) = sum_i deg_i C_ii - 2 sum_edges C_ab; O(M + E) instead of a
// matrix product.
inline double laplacian_trace_form(const GridTopology& topo, const Eigen::MatrixXd& cov) {
    double acc = 0.0;
    for (int i = 0; i < topo.nodes(); ++i)
        acc += topo.degree(i) * cov(i, i);
    for (int k = 0; k < topo.edges(); ++k)
        acc -= 2.0 * cov(topo.edge_a[static_cast<std::size_t>(k)],
                         topo.edge_b[static_cast<std::size_t>(k)]);
    return acc;
}

/**
 * EM objective Q(theta | theta_t) up to theta-independent constants, with
 * posterior statistics (mean, cov) taken at theta_t:
 *
 *   Q = -1/2 (m^T S m + Tr(S C)) + 1/2 ln det(alpha L + h I)
 *       + 1/2 sum_i beta_i xi_i^2 - K sum_i ln 2cosh(xi_i)
 *
 * where S and beta are evaluated at the *argument* theta = (alpha, h, xi).
 * The ln-det is computed from the closed-form Laplacian eigenvalues. Its sign
 * is positive: the prior normalizer contributes +1/2 ln det of the precision,
 * which is what makes the alpha/h saddle equations below stationary.
 */
inline double qfunction(const GridTopology& topo, const std::vector<double>& eta,
                        const DensePosterior& post, const Grid<double>& xi, double alpha,
                        double h, int trials) {
    const int m = topo.nodes();
    if (post.mean.size() != m || xi.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("qfunction: shape mismatch");

    double quad = alpha * laplacian_quadform(topo, post.mean) +
                  h * post.mean.squaredNorm();
    double tr = alpha * laplacian_trace_form(topo, post.cov) + h * post.cov.trace();
    double bound_terms = 0.0;
    for (int i = 0; i < m; ++i) {
        const std::size_t iu = static_cast<std::size_t>(i);
        const double b = beta_param(xi[iu], trials);
        quad += b * post.mean(i) * post.mean(i);
        tr += b * post.cov(i, i);
        bound_terms += 0.5 * b * xi[iu] * xi[iu] - trials * log2cosh(xi[iu]);
    }
    return -0.5 * (quad + tr) + 0.5 * prior_logdet(eta, alpha, h) + bound_terms;
}

struct SaddleSolution {
    double alpha = 0.0;
    double h = 0.0;
    int iterations = 0;
};

/**
 * Joint stationary conditions for (alpha, h):
 *
 *   sum_i eta_i / (alpha eta_i + h) = m^T L m + Tr(L C)   (= rhs_smooth)
 *   sum_i 1 / (alpha eta_i + h)     = |m|^2 + Tr C        (= rhs_norm)
 *
 * solved by damped Newton on (ln alpha, ln h) so iterates stay positive.
 * Residual target 1e-8 (scaled by the RHS magnitudes). Throws if no positive
 * solution is found within the iteration budget; callers fall back to the
 * fixed-h update.
 */
inline SaddleSolution solve_saddle_joint(double rhs_smooth, double rhs_norm,
                                         const std::vector<double>& eta) {
    if (!(rhs_smooth > 0.0) || !(rhs_norm > 0.0))
        throw std::invalid_argument("solve_saddle_joint: right-hand sides must be positive");
    const std::size_t m = eta.size();
    if (m == 0)
        throw std::invalid_argument("solve_saddle_joint: empty spectrum");

    double eta_sum = 0.0;
    for (double e : eta)
        eta_sum += e;
    if (eta_sum == 0.0) {
        // All-zero spectrum (single pixel): first equation reads 0 = rhs_smooth,
        // so the system only determines h; alpha is reported as 1 by convention.
        if (rhs_smooth > 1e-12)
            throw std::runtime_error("solve_saddle_joint: infeasible (zero spectrum)");
        return {1.0, static_cast<double>(m) / rhs_norm, 0};
    }

    double a = std::log(std::clamp(static_cast<double>(m) / rhs_smooth, 1e-12, 1e12));
    double b = std::log(std::clamp(static_cast<double>(m) / rhs_norm, 1e-12, 1e12));

    auto residual = [&](double la, double lb, double& f1, double& f2) {
        const double av = std::exp(la), hv = std::exp(lb);
        f1 = -rhs_smooth;
        f2 = -rhs_norm;
        for (double e : eta) {
            const double d = av * e + hv;
            f1 += e / d;
            f2 += 1.0 / d;
        }
    };

    const double tol1 = 1e-8 * std::max(1.0, rhs_smooth);
    const double tol2 = 1e-8 * std::max(1.0, rhs_norm);
    double f1, f2;
    residual(a, b, f1, f2);
    for (int it = 0; it < 200; ++it) {
        if (std::fabs(f1) <= tol1 && std::fabs(f2) <= tol2)
            return {std::exp(a), std::exp(b), it};
        const double av = std::exp(a), hv = std::exp(b);
        // Jacobian in (ln alpha, ln h): rows are (f1, f2), columns the two logs.
        double j11 = 0.0, j12 = 0.0, j21 = 0.0, j22 = 0.0;
        for (double e : eta) {
            const double d = av * e + hv;
            const double d2 = d * d;
            j11 -= av * e * e / d2;
            j12 -= hv * e / d2;
            j21 -= av * e / d2;
            j22 -= hv / d2;
        }
        const double det = j11 * j22 - j12 * j21;
        if (!(std::fabs(det) > 1e-300))
            throw std::runtime_error("solve_saddle_joint: singular Jacobian");
        double da = (-f1 * j22 + f2 * j12) / det;
        double db = (-f2 * j11 + f1 * j21) / det;

        // Backtracking on the residual norm keeps the iteration in basin.
        const double base = f1 * f1 + f2 * f2;
        double step = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            double n1, n2;
            residual(a + step * da, b + step * db, n1, n2);
            if (std::isfinite(n1) && std::isfinite(n2) && n1 * n1 + n2 * n2 < base) {
                a += step * da;
                b += step * db;
                f1 = n1;
                f2 = n2;
                break;
            }
            step *= 0.5;
            if (bt == 59)
                throw std::runtime_error("solve_saddle_joint: line search failed");
        }
    }
    throw std::runtime_error("solve_saddle_joint: no convergence in iteration budget");
}

// Fixed-h smoothness update: 1/alpha = (m^T L m + Tr(L C)) / (M - 1), with the
// result capped at 1e6 when the statistic collapses (perfectly smooth field).
inline double alpha_update_exact(const GridTopology& topo, const DensePosterior& post) {
    const int m = topo.nodes();
    if (m < 2)
        throw std::invalid_argument("alpha_update_exact: need at least 2 pixels");
    constexpr double kAlphaMax = 1e6;
    const double rhs = laplacian_quadform(topo, post.mean) + laplacian_trace_form(topo, post.cov);
    if (!(rhs > (m - 1) / kAlphaMax))
        return kAlphaMax;
    return (m - 1) / rhs;
}

struct ExactEmConfig {
    double h = 1e-4;
    double alpha0 = 1.0;
    double xi0 = 1.0;
    double em_tol = 1e-5;
    int em_max_iter = 100;
};

struct ExactEmTraceRow {
    int iter;
    double alpha;    // value used in this iteration's E-step
    double delta;    // max-abs mean change vs previous iteration
    double q_value;  // Q(theta_new | theta_t) after the M-step
};

struct ExactEmResult {
    SourceField lambda_hat;
    LogitField x_hat;
    std::vector<ExactEmTraceRow> trace;
    bool converged = false;
    double alpha_final = 0.0;
};

/**
 * Reference EM loop at fixed h: dense posterior (E), then xi and alpha
 * updates (M), until the posterior mean stops moving. Final intensities are
 * lambda_i = K rho(m_i) with rho the inverse half-logit.
 */
inline ExactEmResult run_exact_em(const CountImage& z, int trials, const ExactEmConfig& cfg) {
    if (!(cfg.h > 0.0) || !(cfg.em_tol > 0.0) || cfg.em_max_iter < 1 || !(cfg.alpha0 > 0.0) ||
        !(cfg.xi0 > 0.0))
        throw std::invalid_argument("run_exact_em: bad configuration");
    const GridTopology topo(z.width(), z.height());
    const std::vector<double> eta = laplacian_eigenvalues(z.width(), z.height());
    const int m = topo.nodes();

    Grid<double> xi(z.width(), z.height(), cfg.xi0);
    double alpha = cfg.alpha0;
    Eigen::VectorXd prev_mean;
    DensePosterior post;

    ExactEmResult res;
    for (int it = 0; it < cfg.em_max_iter; ++it) {
        const LatentState latent = pseudo_obs(z, xi, trials);
        post = posterior_dense(z, latent, alpha, cfg.h, topo);

        double delta = std::numeric_limits<double>::infinity();
        if (it > 0)
            delta = (post.mean - prev_mean).cwiseAbs().maxCoeff();
        prev_mean = post.mean;

        // M-step candidates; discarded if the mean has already converged, so
        // the reported alpha is the one the final posterior was computed at
        // (same contract as the LBP path).
        Grid<double> xi_new = xi;
        for (int i = 0; i < m; ++i)
            xi_new[static_cast<std::size_t>(i)] = update_xi(post.mean(i), post.cov(i, i));
        const double alpha_new = m >= 2 ? alpha_update_exact(topo, post) : alpha;
        const double q = qfunction(topo, eta, post, xi_new, alpha_new, cfg.h, trials);
        res.trace.push_back({it, alpha, delta, q});
        if (delta < cfg.em_tol) {
            res.converged = true;
            break;
        }
        xi = xi_new;
        alpha = alpha_new;
    }

    res.alpha_final = alpha;
    res.x_hat = LogitField(z.width(), z.height());
    res.lambda_hat = SourceField(z.width(), z.height());
    for (int i = 0; i < m; ++i) {
        res.x_hat[static_cast<std::size_t>(i)] = post.mean(i);
        res.lambda_hat[static_cast<std::size_t>(i)] = trials * inv_logit(post.mean(i));
    }
    return res;
}

}  // namespace pcir
