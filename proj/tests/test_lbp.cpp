#include <gtest/gtest.h>

#include <cmath>

#include "pcir/latent.hpp"
#include "pcir/lbp.hpp"
#include "test_util.hpp"

using namespace pcir;

namespace {

// Random (beta, y) observation pair, entries away from degenerate values.
struct Obs {
    Grid<double> beta, y;
};

Obs random_obs(int w, int h, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Obs o{Grid<double>(w, h), Grid<double>(w, h)};
    for (std::size_t i = 0; i < o.beta.size(); ++i) {
        o.beta[i] = 0.5 + 20.0 * rng.next_double();
        o.y[i] = 4.0 * rng.next_double() - 2.0;
    }
    return o;
}

}  // namespace

TEST(InitMessages, CountsAndDeterminism) {
    const GridTopology t(3, 3);
    const MessageSet a = init_messages(t, 1.0);
    EXPECT_EQ(a.size(), 24u);  // 12 undirected edges
    const MessageSet b = init_messages(t, 1.0);
    EXPECT_EQ(a.mu, b.mu);
    EXPECT_EQ(a.gamma, b.gamma);
    for (double g : a.gamma)
        EXPECT_DOUBLE_EQ(g, 0.5);
    for (double m : a.mu)
        EXPECT_DOUBLE_EQ(m, 0.0);
}

TEST(Sweep, TwoNodeClosedFormAndImmediateFixedPoint) {
    const GridTopology t(2, 1);
    const double alpha = 2.0, h = 0.3;
    Grid<double> beta(2, 1), y(2, 1);
    beta[0] = 1.5;
    beta[1] = 4.0;
    y[0] = 0.7;
    y[1] = -1.2;

    MessageSet msgs = init_messages(t, alpha);
    MessageSet next = msgs;
    const double d1 = sweep(t, msgs, next, beta, y, alpha, h);
    EXPECT_GT(d1, 0.0);
    // Directed edge 0: node0 -> node1, no other neighbors of node 0.
    EXPECT_NEAR(next.mu[0], beta[0] * y[0] / (beta[0] + h), 1e-14);
    EXPECT_NEAR(next.gamma[0], 1.0 / (1.0 / alpha + 1.0 / (beta[0] + h)), 1e-14);
    EXPECT_NEAR(next.mu[1], beta[1] * y[1] / (beta[1] + h), 1e-14);
    EXPECT_NEAR(next.gamma[1], 1.0 / (1.0 / alpha + 1.0 / (beta[1] + h)), 1e-14);

    // Trees have no feedback: the second sweep changes nothing.
    MessageSet third = next;
    const double d2 = sweep(t, next, third, beta, y, alpha, h);
    EXPECT_NEAR(d2, 0.0, 1e-15);
}

TEST(Sweep, RejectsBadParameters) {
    const GridTopology t(2, 1);
    Grid<double> beta(2, 1, 1.0), y(2, 1, 0.0);
    MessageSet msgs = init_messages(t, 1.0);
    MessageSet next = msgs;
    EXPECT_THROW(sweep(t, msgs, next, beta, y, 0.0, 0.1), std::invalid_argument);
    EXPECT_THROW(sweep(t, msgs, next, beta, y, 1.0, -0.1), std::invalid_argument);
    EXPECT_THROW(sweep(t, msgs, next, beta, y, 1.0, 0.1, 1.0), std::invalid_argument);
}

TEST(Marginals, IsolatedPixelAndSaturatedEdge) {
    const GridTopology t1(1, 1);
    Grid<double> beta(1, 1, 3.0), y(1, 1, 2.0);
    const MessageSet empty = init_messages(t1, 1.0);
    const MarginalStats st = marginal_stats(t1, empty, beta, y, 1.0, 0.5);
    EXPECT_NEAR(st.mean[0], 3.0 * 2.0 / 3.5, 1e-14);
    EXPECT_NEAR(st.variance[0], 1.0 / 3.5, 1e-14);
    EXPECT_TRUE(st.edge_cov.empty());

    // gamma at its alpha ceiling zeroes the pairwise covariance.
    const GridTopology t2(2, 1);
    MessageSet msgs = init_messages(t2, 1.0);
    msgs.gamma[0] = 1.0;
    msgs.gamma[1] = 1.0;
    Grid<double> b2(2, 1, 1.0), y2(2, 1, 0.0);
    const MarginalStats st2 = marginal_stats(t2, msgs, b2, y2, 1.0, 0.5);
    EXPECT_DOUBLE_EQ(st2.edge_cov[0], 0.0);
}

TEST(Convergence, ChainIsExactIncludingVariances) {
    // Cycle-free graphs: Gaussian BP marginals equal the dense posterior.
    const int n = 17;
    const Obs o = random_obs(n, 1, 42);
    const GridTopology t(n, 1);
    const double alpha = 1.3, h = 1e-4;
    MessageSet msgs = init_messages(t, alpha);
    const LbpRun run = run_to_convergence(t, msgs, o.beta, o.y, alpha, h, {1e-13, 500, 0.0, nullptr});
    EXPECT_TRUE(run.converged);
    EXPECT_LE(run.sweeps, 2 * n);

    const MarginalStats st = marginal_stats(t, msgs, o.beta, o.y, alpha, h);
    const testutil::ReferenceSolve ref = testutil::reference_posterior(n, 1, o.beta, o.y, alpha, h);
    for (int i = 0; i < n; ++i) {
        ASSERT_NEAR(st.mean[static_cast<std::size_t>(i)], ref.mean(i), 1e-9);
        ASSERT_NEAR(st.variance[static_cast<std::size_t>(i)], ref.cov(i, i), 1e-9);
    }
}

TEST(Convergence, LoopyMeansMatchDenseAndGammaStaysBounded) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const int w = 8, h8 = 8;
        const Obs o = random_obs(w, h8, 100 + seed);
        const GridTopology t(w, h8);
        const double alpha = 0.6 + 0.4 * static_cast<double>(seed), h = 1e-4;
        MessageSet msgs = init_messages(t, alpha);
        const LbpRun run =
            run_to_convergence(t, msgs, o.beta, o.y, alpha, h, {1e-12, 2000, 0.0, nullptr});
        ASSERT_TRUE(run.converged);
        for (double g : msgs.gamma) {
            ASSERT_GT(g, 0.0);
            ASSERT_LT(g, alpha);
        }
        const MarginalStats st = marginal_stats(t, msgs, o.beta, o.y, alpha, h);
        const testutil::ReferenceSolve ref =
            testutil::reference_posterior(w, h8, o.beta, o.y, alpha, h);
        for (int i = 0; i < w * h8; ++i) {
            const double diff = std::fabs(st.mean[static_cast<std::size_t>(i)] - ref.mean(i));
            ASSERT_LE(diff, 1e-6 * (1.0 + std::fabs(ref.mean(i)))) << "seed " << seed;
            // Variances only add precision relative to the local factor.
            ASSERT_GT(st.variance[static_cast<std::size_t>(i)], 0.0);
            ASSERT_LE(st.variance[static_cast<std::size_t>(i)],
                      1.0 / (o.beta[static_cast<std::size_t>(i)] + h));
        }
        // The pairwise covariance estimate is a bounded approximation:
        // positive, and below 1/alpha since every gamma lies in (0, alpha).
        for (int k = 0; k < t.edges(); ++k) {
            const double est = st.edge_cov[static_cast<std::size_t>(k)];
            ASSERT_GT(est, 0.0) << "seed " << seed;
            ASSERT_LT(est, 1.0 / alpha) << "seed " << seed;
        }
    }
}

TEST(Convergence, EdgeCovarianceTracksDenseInTheHighPrecisionRegime) {
    // With strong per-pixel precision the neighbor covariance estimate
    // approaches the true posterior covariance; check a 10% relative band.
    const int w = 8, hh = 8;
    SplitMix64 rng(4242);
    Grid<double> beta(w, hh), y(w, hh);
    for (std::size_t i = 0; i < beta.size(); ++i) {
        beta[i] = 20.0 + 20.0 * rng.next_double();
        y[i] = 2.0 * rng.next_double() - 1.0;
    }
    const GridTopology t(w, hh);
    const double alpha = 0.8, h = 1e-4;
    MessageSet msgs = init_messages(t, alpha);
    const LbpRun run = run_to_convergence(t, msgs, beta, y, alpha, h, {1e-12, 2000, 0.0, nullptr});
    ASSERT_TRUE(run.converged);
    const MarginalStats st = marginal_stats(t, msgs, beta, y, alpha, h);
    const testutil::ReferenceSolve ref = testutil::reference_posterior(w, hh, beta, y, alpha, h);
    for (int k = 0; k < t.edges(); ++k) {
        const double truth = ref.cov(t.edge_a[static_cast<std::size_t>(k)],
                                     t.edge_b[static_cast<std::size_t>(k)]);
        const double est = st.edge_cov[static_cast<std::size_t>(k)];
        ASSERT_NEAR(est, truth, 0.10 * std::fabs(truth));
    }
}

TEST(Convergence, AlreadyConvergedStopsAfterOneSweep) {
    const Obs o = random_obs(6, 5, 7);
    const GridTopology t(6, 5);
    MessageSet msgs = init_messages(t, 1.0);
    run_to_convergence(t, msgs, o.beta, o.y, 1.0, 1e-4, {1e-10, 500, 0.0, nullptr});
    const LbpRun again = run_to_convergence(t, msgs, o.beta, o.y, 1.0, 1e-4);
    EXPECT_EQ(again.sweeps, 1);
    EXPECT_TRUE(again.converged);
}

TEST(Convergence, ReportsNonConvergenceAtBudget) {
    const Obs o = random_obs(8, 8, 9);
    const GridTopology t(8, 8);
    MessageSet msgs = init_messages(t, 1.0);
    const LbpRun run = run_to_convergence(t, msgs, o.beta, o.y, 1.0, 1e-4, {1e-14, 3, 0.0, nullptr});
    EXPECT_FALSE(run.converged);
    EXPECT_EQ(run.sweeps, 3);
}

TEST(Convergence, DampingReachesSameFixedPoint) {
    const Obs o = random_obs(8, 8, 21);
    const GridTopology t(8, 8);
    MessageSet plain = init_messages(t, 1.0);
    MessageSet damped = init_messages(t, 1.0);
    run_to_convergence(t, plain, o.beta, o.y, 1.0, 1e-4, {1e-12, 3000, 0.0, nullptr});
    run_to_convergence(t, damped, o.beta, o.y, 1.0, 1e-4, {1e-12, 3000, 0.5, nullptr});
    for (std::size_t e = 0; e < plain.size(); ++e) {
        ASSERT_NEAR(plain.mu[e], damped.mu[e], 1e-9);
        ASSERT_NEAR(plain.gamma[e], damped.gamma[e], 1e-9);
    }
}

TEST(Convergence, SynchronousScheduleIsBitReproducible) {
    const Obs o = random_obs(8, 8, 33);
    const GridTopology t(8, 8);
    MessageSet a = init_messages(t, 1.0);
    MessageSet b = init_messages(t, 1.0);
    run_to_convergence(t, a, o.beta, o.y, 1.0, 1e-4);
    run_to_convergence(t, b, o.beta, o.y, 1.0, 1e-4);
    EXPECT_EQ(a.mu, b.mu);
    EXPECT_EQ(a.gamma, b.gamma);
}
