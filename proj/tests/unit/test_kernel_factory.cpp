#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "mkprice/errors.hpp"
#include "mkprice/kernel_factory.hpp"
#include "test_support.hpp"

using namespace mkprice;
using mkprice::testing::random_matrix;

namespace {

WeightedGraph pair_graph() {
    return WeightedGraph{{"a", "b"}, {{0, 1, 1.0}}};
}

WeightedGraph random_graph(std::mt19937_64& rng, std::size_t n, double density) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    WeightedGraph g;
    for (std::size_t i = 0; i < n; ++i) g.node_ids.push_back("v" + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (u(rng) < density) g.edges.push_back({i, j, 0.1 + u(rng)});
    return g;
}

FeatureTable numeric_table(const Eigen::MatrixXd& x) {
    FeatureTable f;
    for (Eigen::Index i = 0; i < x.rows(); ++i) f.entity_ids.push_back("e" + std::to_string(i));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        FeatureColumn col{"x" + std::to_string(c), false, {}, {}};
        for (Eigen::Index i = 0; i < x.rows(); ++i) col.numeric.push_back(x(i, c));
        f.columns.push_back(col);
    }
    return f;
}

void expect_valid_kernel(const KernelMatrix& k) {
    const auto& g = k.gram();
    EXPECT_LE((g - g.transpose()).norm(), 1e-10 * g.norm());
    EXPECT_GT(k.eigvals().minCoeff(), 0.0);
    for (Eigen::Index i = 1; i < k.eigvals().size(); ++i) EXPECT_GE(k.eigvals()(i - 1), k.eigvals()(i));
    const Eigen::MatrixXd rebuilt = k.eigvecs() * k.eigvals().asDiagonal() * k.eigvecs().transpose();
    EXPECT_LE((rebuilt - g).norm(), 1e-8 * g.norm());
}

}  // namespace

TEST(GraphLaplacian, TwoNodeEdge) {
    const Eigen::MatrixXd l = build_graph_laplacian(pair_graph());
    Eigen::Matrix2d expected;
    expected << 1, -1, -1, 1;
    EXPECT_LE((l - expected).norm(), 1e-15);
}

TEST(GraphLaplacian, IsolatedNodeDecouples) {
    WeightedGraph g{{"a", "b", "c"}, {{0, 1, 2.0}}};
    const Eigen::MatrixXd l = build_graph_laplacian(g);
    EXPECT_EQ(l.row(2), Eigen::RowVector3d(0, 0, 1));
    EXPECT_EQ(l.col(2), Eigen::Vector3d(0, 0, 1));
}

TEST(GraphLaplacian, MixedWeightsEnterAdjacency) {
    WeightedGraph g{{"a", "b", "c"}, {{0, 1, 1.0}, {1, 2, 0.5}}};
    const Eigen::MatrixXd a = g.adjacency();
    EXPECT_EQ(a(0, 1), 1.0);
    EXPECT_EQ(a(2, 1), 0.5);
    EXPECT_EQ(a(0, 2), 0.0);
}

TEST(GraphLaplacian, RejectsNegativeWeightAndSelfLoop) {
    EXPECT_THROW(build_graph_laplacian(WeightedGraph{{"a", "b"}, {{0, 1, -1.0}}}), InputError);
    EXPECT_THROW(build_graph_laplacian(WeightedGraph{{"a", "b"}, {{1, 1, 1.0}}}), InputError);
}

TEST(GraphLaplacian, SpectrumWithinZeroTwoOnRandomGraphs) {
    std::mt19937_64 rng(11);
    for (std::size_t n : {2u, 7u, 20u, 50u}) {
        for (double density : {0.05, 0.3, 1.0}) {
            const Eigen::MatrixXd l = build_graph_laplacian(random_graph(rng, n, density));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
            EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
            EXPECT_LE(es.eigenvalues().maxCoeff(), 2.0 + 1e-12);
        }
    }
}

TEST(RegularizedLaplacian, ZeroLaplacianGivesIdentity) {
    const auto k = regularized_laplacian_kernel(Eigen::MatrixXd::Zero(3, 3));
    EXPECT_LE((k.gram() - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-14);
}

TEST(RegularizedLaplacian, TwoNodeInverse) {
    const auto k = regularized_laplacian_kernel(build_graph_laplacian(pair_graph()));
    Eigen::Matrix2d expected;
    expected << 2, 1, 1, 2;
    expected /= 3.0;
    EXPECT_LE((k.gram() - expected).norm(), 1e-14);
    expect_valid_kernel(k);
}

TEST(RegularizedLaplacian, SmallestEigenvalueMatchesSpectralMap) {
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd l = build_graph_laplacian(random_graph(rng, 15, 0.3));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    const auto k = regularized_laplacian_kernel(l);
    EXPECT_NEAR(k.eigvals().minCoeff(), 1.0 / (1.0 + es.eigenvalues().maxCoeff()), 1e-12);
    EXPECT_LE(k.eigvals().maxCoeff(), 1.0 + 1e-12);
}

TEST(DiffusionKernel, TwoNodeClosedForm) {
    const auto k = diffusion_kernel(build_graph_laplacian(pair_graph()), 3.0);
    const double e = std::exp(-6.0);
    Eigen::Matrix2d expected;
    expected << (1 + e) / 2, (1 - e) / 2, (1 - e) / 2, (1 + e) / 2;
    EXPECT_LE((k.gram() - expected).norm(), 1e-14);
    EXPECT_EQ(k.jitter(), 0.0);
}

TEST(DiffusionKernel, ZeroLaplacianAndBadBeta) {
    const auto k = diffusion_kernel(Eigen::MatrixXd::Zero(4, 4), 0.7);
    EXPECT_LE((k.gram() - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-14);
    EXPECT_THROW(diffusion_kernel(Eigen::MatrixXd::Zero(2, 2), 0.0), InputError);
    EXPECT_THROW(diffusion_kernel(Eigen::MatrixXd::Zero(2, 2), -1.0), InputError);
}

TEST(GraphKernels, NonSymmetricLaplacianRejected) {
    Eigen::Matrix2d l;
    l << 1, -1, 0, 1;
    EXPECT_THROW(regularized_laplacian_kernel(l), InputError);
    EXPECT_THROW(diffusion_kernel(l, 3.0), InputError);
}

TEST(GraphKernels, CommuteWithNodeRelabeling) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const auto g = random_graph(rng, 12, 0.35);
        std::vector<std::size_t> perm(g.node_ids.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        // perm[i] is the new position of node i
        WeightedGraph h;
        h.node_ids.resize(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) h.node_ids[perm[i]] = g.node_ids[i];
        for (const auto& e : g.edges) h.edges.push_back({perm[e.src], perm[e.dst], e.weight});

        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(12, 12);
        for (std::size_t i = 0; i < perm.size(); ++i) p(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(i)) = 1;

        const auto lg = build_graph_laplacian(g);
        const auto lh = build_graph_laplacian(h);
        const Eigen::MatrixXd rg = p * regularized_laplacian_kernel(lg).gram() * p.transpose();
        const Eigen::MatrixXd dg = p * diffusion_kernel(lg).gram() * p.transpose();
        EXPECT_LE((rg - regularized_laplacian_kernel(lh).gram()).norm(), 1e-10);
        EXPECT_LE((dg - diffusion_kernel(lh).gram()).norm(), 1e-10);
    }
}

TEST(MedianBandwidth, SmallEnumerations) {
    Eigen::MatrixXd x(3, 1);
    x << 0, 1, 3;
    EXPECT_DOUBLE_EQ(median_sq_bandwidth(x), 4.0);
    x << 0, 0, 2;
    EXPECT_DOUBLE_EQ(median_sq_bandwidth(x), 4.0);
    Eigen::MatrixXd two(2, 2);
    two << 0, 0, 3, 4;
    EXPECT_DOUBLE_EQ(median_sq_bandwidth(two), 25.0);
}

TEST(MedianBandwidth, EvenCountAveragesCentralPair) {
    // Distances {1, 4, 9, 1, 4, 1}: sorted 1 1 1 4 4 9, median (1 + 4) / 2.
    Eigen::MatrixXd x(4, 1);
    x << 0, 1, 2, 3;
    EXPECT_DOUBLE_EQ(median_sq_bandwidth(x), 2.5);
}

TEST(MedianBandwidth, IdenticalPointsRejected) {
    EXPECT_THROW(median_sq_bandwidth(Eigen::MatrixXd::Ones(4, 2)), InputError);
    EXPECT_THROW(median_sq_bandwidth(Eigen::MatrixXd::Ones(1, 2)), InputError);
}

TEST(GaussianKernel, UnitDiagonalAndUnitRatio) {
    Eigen::MatrixXd x(3, 2);
    x << 0, 0, 1, 1, 0, 0;
    const auto k = gaussian_kernel(numeric_table(x), 2.0);
    EXPECT_NEAR(k.gram()(0, 0), 1.0 + k.jitter(), 1e-15);
    EXPECT_NEAR(k.gram()(0, 1), std::exp(-1.0), 1e-15);
    // Rows 0 and 2 coincide, so the Gram matrix is singular and gets jitter.
    EXPECT_GT(k.jitter(), 0.0);
    expect_valid_kernel(k);
}

TEST(GaussianKernel, AcceptsWideBandwidthRange) {
    std::mt19937_64 rng(2);
    const auto f = numeric_table(random_matrix(rng, 10, 3));
    for (double h : {1.0, 430.0, 1e4}) expect_valid_kernel(gaussian_kernel(f, h));
    EXPECT_THROW(gaussian_kernel(f, 0.0), InputError);
}

TEST(GaussianKernel, TranslationInvariant) {
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd x = random_matrix(rng, 12, 4);
    const Eigen::MatrixXd shifted = x.rowwise() + Eigen::RowVector4d(3.0, -7.0, 0.5, 100.0);
    const auto a = gaussian_kernel(numeric_table(x), 3.0);
    const auto b = gaussian_kernel(numeric_table(shifted), 3.0);
    EXPECT_LE((a.gram() - b.gram()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GaussianKernel, CategoricalColumnsAreOneHot) {
    FeatureTable f;
    f.entity_ids = {"a", "b", "c"};
    f.columns.push_back({"cat:zone", true, {}, {"n", "s", "n"}});
    const auto k = gaussian_kernel(f, 2.0);
    EXPECT_NEAR(k.gram()(0, 2), 1.0, 1e-6);
    EXPECT_NEAR(k.gram()(0, 1), std::exp(-1.0), 1e-6);
}

TEST(CovarianceKernel, IdenticalSeriesFullyCorrelated) {
    PricePanel p;
    p.prices.resize(2, 5);
    p.prices << 1, 4, 2, 8, 5, 1, 4, 2, 8, 5;
    p.node_ids = {"a", "b"};
    p.timestamps = hour_range(Timestamp{}, 5);
    const auto k = empirical_covariance_kernel(p);
    EXPECT_NEAR(k.gram()(0, 1), 1.0, 1e-6);
    EXPECT_NEAR(k.gram()(0, 0), 1.0, 1e-12);
    expect_valid_kernel(k);
}

TEST(CovarianceKernel, IndependentSeriesNearlyUncorrelated) {
    std::mt19937_64 rng(31);
    PricePanel p;
    const Eigen::Index t = 4000;
    p.prices = random_matrix(rng, 3, t);
    p.node_ids = {"a", "b", "c"};
    p.timestamps = hour_range(Timestamp{}, t);
    const auto k = empirical_covariance_kernel(p);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) EXPECT_LE(std::abs(k.gram()(i, j)), 3.0 / std::sqrt(static_cast<double>(t)));
}

TEST(CovarianceKernel, ConstantNodeHandledByJitter) {
    PricePanel p;
    p.prices.resize(2, 4);
    p.prices << 5, 5, 5, 5, 1, 2, 3, 4;
    p.node_ids = {"a", "b"};
    p.timestamps = hour_range(Timestamp{}, 4);
    const auto k = empirical_covariance_kernel(p);
    expect_valid_kernel(k);
    EXPECT_NEAR(k.gram()(1, 1), 1.0, 1e-12);
}

TEST(CovarianceKernel, SingleSampleRejected) {
    PricePanel p;
    p.prices = Eigen::MatrixXd::Ones(2, 1);
    p.node_ids = {"a", "b"};
    p.timestamps = hour_range(Timestamp{}, 1);
    EXPECT_THROW(empirical_covariance_kernel(p), InputError);
}

TEST(NormalizeUnitDiagonal, RankOneScaling) {
    Eigen::Matrix2d g;
    g << 4, 2, 2, 1;
    const auto k = normalize_unit_diagonal(KernelMatrix::from_gram("k", g));
    EXPECT_LE((k.gram() - Eigen::Matrix2d::Ones()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(k.gram().diagonal(), Eigen::Vector2d::Ones());
}

TEST(NormalizeUnitDiagonal, IdentityFixedPointAndIdempotent) {
    const auto id = normalize_unit_diagonal(KernelMatrix::from_gram("i", Eigen::MatrixXd::Identity(3, 3)));
    EXPECT_LE((id.gram() - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-15);

    std::mt19937_64 rng(4);
    const auto once = normalize_unit_diagonal(*mkprice::testing::random_kernel(rng, 9));
    const auto twice = normalize_unit_diagonal(once);
    EXPECT_LE((once.gram() - twice.gram()).norm(), 1e-13);
    EXPECT_LE((once.gram().diagonal().array() - 1.0).abs().maxCoeff(), 1e-12);
    expect_valid_kernel(once);
}

TEST(KernelMatrix, JitterLiftsSingularSpectrum) {
    const auto k = KernelMatrix::from_gram("ones", Eigen::MatrixXd::Ones(3, 3));
    const double lmax = 3.0 + k.jitter();
    EXPECT_NEAR(k.eigvals().minCoeff(), 1e-8 * 3.0 + 1e-12, 1e-15 * lmax);
    EXPECT_THROW(KernelMatrix::from_gram("ones", Eigen::MatrixXd::Ones(3, 3), false), InputError);
}

TEST(KernelMatrix, RejectsAsymmetricAndNonFinite) {
    Eigen::Matrix2d g;
    g << 1, 0.5, 0.4, 1;
    EXPECT_THROW(KernelMatrix::from_gram("k", g), InputError);
    g << 1, NAN, NAN, 1;
    EXPECT_THROW(KernelMatrix::from_gram("k", g), InputError);
}

TEST(KernelMatrix, SqrtTimesSquaresBack) {
    std::mt19937_64 rng(6);
    const auto k = mkprice::testing::random_kernel(rng, 7);
    const Eigen::MatrixXd x = random_matrix(rng, 7, 3);
    const Eigen::MatrixXd twice = k->sqrt_times(k->sqrt_times(x));
    EXPECT_LE((twice - k->gram() * x).norm(), 1e-12 * (k->gram() * x).norm());
}

TEST(Standardize, TwoPointColumn) {
    Eigen::MatrixXd x(2, 1);
    x << 1, 3;
    const auto s = standardize_features(numeric_table(x));
    ASSERT_EQ(s.columns.size(), 1u);
    EXPECT_DOUBLE_EQ(s.columns[0].numeric[0], -1.0);
    EXPECT_DOUBLE_EQ(s.columns[0].numeric[1], 1.0);
    EXPECT_TRUE(s.standardized);
}

TEST(Standardize, ConstantDroppedCategoricalKept) {
    FeatureTable f;
    f.entity_ids = {"a", "b", "c"};
    f.columns.push_back({"flat", false, {2, 2, 2}, {}});
    f.columns.push_back({"cat:hour", true, {}, {"h01", "h02", "h01"}});
    f.columns.push_back({"x", false, {0, 1, 2}, {}});
    const auto s = standardize_features(f);
    ASSERT_EQ(s.columns.size(), 2u);
    EXPECT_EQ(s.columns[0].name, "cat:hour");
    EXPECT_EQ(s.columns[0].levels, f.columns[1].levels);
    EXPECT_EQ(s.columns[1].name, "x");
    double mean = 0, var = 0;
    for (double v : s.columns[1].numeric) mean += v / 3;
    for (double v : s.columns[1].numeric) var += (v - mean) * (v - mean) / 3;
    EXPECT_NEAR(mean, 0.0, 1e-15);
    EXPECT_NEAR(var, 1.0, 1e-14);
}

TEST(FileFormats, GraphAndFeatureRoundTrip) {
    const auto dir = mkprice::testing::fresh_dir("io");
    WeightedGraph g{{"a", "b", "c"}, {{0, 1, 1.0}, {1, 2, 0.5}}};
    save_graph_csv(dir / "g.csv", g);
    const auto g2 = load_graph_csv(dir / "g.csv", g.node_ids);
    EXPECT_EQ(g2.adjacency(), g.adjacency());
    EXPECT_THROW(load_graph_csv(dir / "g.csv", {"a", "b"}), InputError);

    FeatureTable f;
    f.entity_ids = {"a", "b"};
    f.columns.push_back({"x", false, {0.1, -2.5}, {}});
    f.columns.push_back({"cat:k", true, {}, {"p", "q"}});
    save_feature_csv(dir / "f.csv", f);
    const auto f2 = load_feature_csv(dir / "f.csv");
    EXPECT_EQ(f2.entity_ids, f.entity_ids);
    EXPECT_EQ(f2.columns[0].numeric, f.columns[0].numeric);
    EXPECT_TRUE(f2.columns[1].categorical);
    EXPECT_EQ(f2.columns[1].levels, f.columns[1].levels);
}
