#include <cmath>

#include <gtest/gtest.h>

#include "mkprice/bcd_engine.hpp"
#include "mkprice/canonical_solver.hpp"
#include "mkprice/errors.hpp"
#include "mkprice/market_sim.hpp"
#include "test_support.hpp"

using namespace mkprice;
using mkprice::testing::random_kernel;
using mkprice::testing::random_matrix;

namespace {

struct Problem {
    Eigen::MatrixXd z;
    std::vector<KernelPtr> node;
    std::vector<KernelPtr> time;
};

Problem random_problem(std::uint64_t seed, Eigen::Index n, Eigen::Index t, int l, int m) {
    std::mt19937_64 rng(seed);
    Problem p;
    p.z = random_matrix(rng, n, t);
    for (int i = 0; i < l; ++i) p.node.push_back(random_kernel(rng, n, "k" + std::to_string(i)));
    for (int i = 0; i < m; ++i) p.time.push_back(random_kernel(rng, t, "g" + std::to_string(i)));
    return p;
}

FitOptions options(int rank, double mu) {
    FitOptions o;
    o.rank = rank;
    o.mu = mu;
    o.eps_bcd = 1e-6;
    o.max_sweeps = 300;
    return o;
}

}  // namespace

TEST(BlockNorm, Examples) {
    const auto k4 = share(KernelMatrix::from_gram("four", Eigen::MatrixXd::Constant(1, 1, 4.0)));
    EXPECT_DOUBLE_EQ(block_norm(Eigen::MatrixXd::Constant(1, 1, 3.0), *k4), 6.0);
    EXPECT_EQ(block_norm(Eigen::MatrixXd::Zero(3, 2), *mkprice::testing::identity_kernel(3)), 0.0);
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd x = random_matrix(rng, 4, 3);
    EXPECT_NEAR(block_norm(x, *mkprice::testing::identity_kernel(4)), x.norm(), 1e-14);
}

TEST(Objective, ScalarAndEmptyModel) {
    auto one = share(KernelMatrix::from_gram("one", Eigen::MatrixXd::Ones(1, 1)));
    auto s = initialize_state({one}, {one}, 1, 1.0, 3);
    s.node_blocks[0].coeffs.setOnes();
    s.time_blocks[0].coeffs.setOnes();
    s.node_blocks[0].block_norm = s.time_blocks[0].block_norm = 1.0;
    s.recompute_aggregates();
    EXPECT_DOUBLE_EQ(objective(s, Eigen::MatrixXd::Ones(1, 1)), 2.0);

    s.node_blocks[0].coeffs.setZero();
    s.node_blocks[0].block_norm = 0.0;
    s.recompute_aggregates();
    EXPECT_DOUBLE_EQ(objective(s, Eigen::MatrixXd::Constant(1, 1, 3.0)), 9.0 + 1.0);

    s.mu = 0.0;
    s.node_blocks[0].coeffs.setConstant(3.0);
    s.recompute_aggregates();
    EXPECT_DOUBLE_EQ(objective(s, Eigen::MatrixXd::Constant(1, 1, 3.0)), 0.0);
}

TEST(Objective, RejectsShapeMismatch) {
    auto p = random_problem(2, 5, 4, 1, 1);
    const auto s = initialize_state(p.node, p.time, 2, 1.0, 1);
    EXPECT_THROW(objective(s, Eigen::MatrixXd::Zero(4, 5)), InputError);
}

TEST(Initialize, SeededAndScaled) {
    auto p = random_problem(3, 30, 20, 2, 1);
    const auto a = initialize_state(p.node, p.time, 4, 1.0, 9);
    const auto b = initialize_state(p.node, p.time, 4, 1.0, 9);
    const auto c = initialize_state(p.node, p.time, 4, 1.0, 10);
    EXPECT_EQ(a.node_blocks[1].coeffs, b.node_blocks[1].coeffs);
    EXPECT_NE(a.node_blocks[1].coeffs, c.node_blocks[1].coeffs);
    // Entries are N(0, 1 / (R max(N, T))).
    double ss = 0;
    Eigen::Index count = 0;
    for (const auto& blk : a.node_blocks) ss += blk.coeffs.squaredNorm(), count += blk.coeffs.size();
    EXPECT_NEAR(ss / static_cast<double>(count) * 4 * 30, 1.0, 0.25);
    EXPECT_THROW(initialize_state(p.node, p.time, 0, 1.0, 1), InputError);
}

TEST(UpdateBlock, ZeroDesignZeroesBlock) {
    auto p = random_problem(4, 6, 5, 2, 2);
    auto s = initialize_state(p.node, p.time, 3, 0.5, 1);
    for (auto& g : s.time_blocks) g.coeffs.setZero();
    s.recompute_aggregates();
    update_block_B(s, p.z, 0);
    EXPECT_TRUE(s.node_blocks[0].coeffs.isZero(0.0));
    EXPECT_FALSE(s.node_gate_open[0]);

    for (auto& b : s.node_blocks) b.coeffs.setZero();
    s.recompute_aggregates();
    update_block_Gamma(s, p.z, 1);
    EXPECT_TRUE(s.time_blocks[1].coeffs.isZero(0.0));
}

TEST(UpdateBlock, SolvesItsSubproblemAgainstOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto p = random_problem(10 + seed, 6, 5, 2, 2);
        auto s = initialize_state(p.node, p.time, 2, 0.3, seed);
        s = fit_from(s, p.z, [] {
            FitOptions o;
            o.max_sweeps = 2;
            return o;
        }());
        // Residual target for block 1 with everything else fixed.
        const Eigen::MatrixXd f_rest = s.F - p.node[1]->gram() * s.node_blocks[1].coeffs;
        const Eigen::MatrixXd a = p.z - f_rest * s.H.transpose();
        const auto ref = oracle_canonical_prox(a, p.node[1]->gram(), s.H, s.mu);
        update_block_B(s, p.z, 1);
        const double ours = canonical_objective(a, *p.node[1], s.H, s.mu, s.node_blocks[1].coeffs);
        EXPECT_LE(std::abs(ours - ref.objective), 1e-5 * std::max(1.0, ref.objective));
    }
}

TEST(UpdateBlock, TransposeSymmetry) {
    auto p = random_problem(5, 7, 6, 2, 2);
    auto s = initialize_state(p.node, p.time, 3, 0.4, 2);
    // Mirror: nodes become times and vice versa.
    ModelState m = s;
    std::swap(m.node_blocks, m.time_blocks);
    std::swap(m.node_kernels, m.time_kernels);
    std::swap(m.node_gate_open, m.time_gate_open);
    m.recompute_aggregates();
    const Eigen::MatrixXd zt = p.z.transpose();

    update_block_B(s, p.z, 1);
    update_block_Gamma(m, zt, 1);
    EXPECT_LE((s.node_blocks[1].coeffs - m.time_blocks[1].coeffs).norm(), 1e-8 * s.node_blocks[1].coeffs.norm());
}

TEST(UpdateBlock, HighMuRemovesBlockAndObjectiveAccountsForIt) {
    auto p = random_problem(6, 6, 5, 2, 1);
    auto s = initialize_state(p.node, p.time, 2, 1.0, 4);
    const Eigen::MatrixXd f_rest = s.F - p.node[0]->gram() * s.node_blocks[0].coeffs;
    const auto inst = CanonicalInstance(p.z - f_rest * s.H.transpose(), p.node[0], s.H, 1.0);
    s.mu = 2.0 * frob_gate(inst).value * 1.01;
    const double before_fit = (p.z - s.F * s.H.transpose()).squaredNorm();
    const double before = objective(s, p.z);
    const double removed = s.node_blocks[0].block_norm;
    update_block_B(s, p.z, 0);
    EXPECT_TRUE(s.node_blocks[0].coeffs.isZero(0.0));
    const double after_fit = (p.z - s.F * s.H.transpose()).squaredNorm();
    EXPECT_NEAR(objective(s, p.z), before - s.mu * removed + (after_fit - before_fit), 1e-10 * before);
    EXPECT_LE(objective(s, p.z), before);
}

TEST(Fit, MonotoneOverEveryBlockUpdate) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto p = random_problem(20 + seed, 15, 12, 3, 2);
        auto o = options(4, 0.5);
        o.record_block_trace = true;
        o.seed = seed;
        const auto s = fit(p.z, p.node, p.time, o);
        ASSERT_GT(s.block_trace.size(), 5u);
        for (std::size_t i = 1; i < s.block_trace.size(); ++i)
            EXPECT_LE(s.block_trace[i], s.block_trace[i - 1] * (1 + 1e-9));
        EXPECT_EQ(s.block_trace.size(), 2 + 5 * static_cast<std::size_t>(s.sweeps));
    }
}

TEST(Fit, AggregatesMatchBlocks) {
    auto p = random_problem(30, 12, 10, 3, 3);
    const auto s = fit(p.z, p.node, p.time, options(3, 0.2));
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(12, 3), h = Eigen::MatrixXd::Zero(10, 3);
    for (std::size_t l = 0; l < 3; ++l) f += p.node[l]->gram() * s.node_blocks[l].coeffs;
    for (std::size_t m = 0; m < 3; ++m) h += p.time[m]->gram() * s.time_blocks[m].coeffs;
    EXPECT_LE((s.F - f).norm(), 1e-9 * std::max(1.0, f.norm()));
    EXPECT_LE((s.H - h).norm(), 1e-9 * std::max(1.0, h.norm()));
}

TEST(Fit, RestartedAtConvergedStateStaysPut) {
    auto p = random_problem(31, 10, 8, 2, 2);
    auto o = options(3, 0.3);
    o.eps_bcd = 1e-10;
    o.max_sweeps = 5000;
    const auto s = fit(p.z, p.node, p.time, o);
    ASSERT_TRUE(s.converged);
    const auto again = fit_from(s, p.z, o);
    EXPECT_EQ(again.sweeps, 1);
    EXPECT_LE(std::abs(again.cost_trace.back() / s.cost_trace.back() - 1.0), 1e-9);
}

TEST(Fit, MuAboveMuMaxZeroesEverything) {
    auto p = random_problem(32, 9, 7, 2, 2);
    auto init = initialize_state(p.node, p.time, 3, 1.0, 5);
    const double top = mu_max(init, p.z);
    ASSERT_GT(top, 0.0);
    init.mu = top * 1.0001;
    const auto s = fit_from(init, p.z, options(3, init.mu));
    for (const auto& b : s.node_blocks) EXPECT_TRUE(b.coeffs.isZero(0.0));
    for (const auto& g : s.time_blocks) EXPECT_TRUE(g.coeffs.isZero(0.0));
    EXPECT_NEAR(objective(s, p.z), p.z.squaredNorm(), 1e-12 * p.z.squaredNorm());
    const auto sel = selected_kernels(s);
    EXPECT_TRUE(sel.node.empty());
    EXPECT_TRUE(sel.time.empty());
}

TEST(Fit, SelectionEqualsOpenGates) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto p = random_problem(40 + seed, 10, 8, 3, 3);
        auto init = initialize_state(p.node, p.time, 2, 1.0, seed);
        auto o = options(2, 0.25 * mu_max(init, p.z));
        o.seed = seed;
        const auto s = fit(p.z, p.node, p.time, o);
        const auto sel = selected_kernels(s);
        for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(sel.node_mask[l], s.node_gate_open[l]);
        for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(sel.time_mask[m], s.time_gate_open[m]);
    }
}

TEST(Fit, RankNeverExceedsR) {
    auto p = random_problem(50, 14, 12, 2, 2);
    const auto s = fit(p.z, p.node, p.time, options(3, 0.05));
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(s.reconstruction()).singularValues();
    for (Eigen::Index i = 3; i < sv.size(); ++i) EXPECT_LE(sv(i), 1e-10 * sv(0));
    EXPECT_LE(reconstruction_rank(s), 3);
}

TEST(Fit, SingleBlockNormsBalance) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto p = random_problem(60 + seed, 8, 6, 1, 1);
        auto o = options(2, 0.2);
        o.eps_bcd = 1e-8;
        o.max_sweeps = 100000;
        o.seed = seed;
        const auto s = fit(p.z, p.node, p.time, o);
        const double b = s.node_blocks[0].block_norm, g = s.time_blocks[0].block_norm;
        ASSERT_GT(b, 0.0);
        EXPECT_LE(std::abs(b - g), 1e-3 * std::max(b, g));
    }
}

TEST(Rebalance, KeepsReconstructionAndLowersPenalty) {
    auto p = random_problem(65, 8, 6, 2, 2);
    auto s = initialize_state(p.node, p.time, 2, 0.7, 1);
    for (auto& b : s.node_blocks) b.coeffs *= 5.0, b.block_norm *= 5.0;
    s.recompute_aggregates();
    const Eigen::MatrixXd before = s.reconstruction();
    const double cost = objective(s, p.z);
    rebalance_scale(s);
    EXPECT_LE((s.reconstruction() - before).norm(), 1e-12 * before.norm());
    EXPECT_LT(objective(s, p.z), cost);
    double nb = 0, tg = 0;
    for (const auto& b : s.node_blocks) nb += b.block_norm;
    for (const auto& g : s.time_blocks) tg += g.block_norm;
    EXPECT_NEAR(nb, tg, 1e-12 * nb);
}

TEST(Fit, RestartsKeepTheCheapestRun) {
    auto p = random_problem(70, 8, 8, 2, 2);
    auto o = options(2, 0.3);
    o.restarts = 3;
    const auto best = fit(p.z, p.node, p.time, o);
    for (int r = 0; r < 3; ++r) {
        auto single = o;
        single.restarts = 1;
        single.seed = o.seed + static_cast<std::uint64_t>(r);
        EXPECT_LE(best.cost_trace.back(), fit(p.z, p.node, p.time, single).cost_trace.back());
    }
}

TEST(Fit, SweepCapReportsNotConverged) {
    auto p = random_problem(71, 8, 8, 2, 2);
    auto o = options(2, 0.01);
    o.eps_bcd = 1e-15;
    o.max_sweeps = 2;
    const auto s = fit(p.z, p.node, p.time, o);
    EXPECT_FALSE(s.converged);
    EXPECT_EQ(s.sweeps, 2);
    EXPECT_EQ(s.cost_trace.size(), 3u);
}

TEST(Fit, RejectsBadOptions) {
    auto p = random_problem(72, 4, 4, 1, 1);
    EXPECT_THROW(fit(p.z, p.node, p.time, options(0, 1.0)), InputError);
    EXPECT_THROW(fit(p.z, p.node, p.time, options(1, 0.0)), InputError);
    EXPECT_THROW(fit(p.z, p.node, {}, options(1, 1.0)), InputError);
}

TEST(Fit, NoiselessPlantedMarketIsReproduced) {
    SyntheticSpec spec;
    spec.nodes = 24;
    spec.hours = 72;
    spec.rank_true = 2;
    spec.seed = 3;
    const auto market = generate_synthetic_market(spec);
    auto init = initialize_state(market.truth.node_kernels, market.truth.time_kernels, 4, 1.0, 1);
    auto o = options(4, 1e-4 * mu_max(init, market.panel.prices));
    o.eps_bcd = 1e-7;
    o.max_sweeps = 3000;
    const auto s = fit(market.panel.prices, market.truth.node_kernels, market.truth.time_kernels, o);
    const double rel = (market.panel.prices - s.reconstruction()).norm() / market.panel.prices.norm();
    EXPECT_LE(rel, 0.05);
}

TEST(Selection, EmptyStateSelectsNothing) {
    auto p = random_problem(80, 4, 3, 2, 2);
    auto s = initialize_state(p.node, p.time, 2, 1.0, 1);
    for (auto& b : s.node_blocks) b.coeffs.setZero(), b.block_norm = 0;
    for (auto& g : s.time_blocks) g.coeffs.setZero(), g.block_norm = 0;
    const auto sel = selected_kernels(s);
    EXPECT_TRUE(sel.node.empty());
    EXPECT_TRUE(sel.time.empty());
    s.recompute_aggregates();
    EXPECT_EQ(reconstruction_rank(s), 0);
}
