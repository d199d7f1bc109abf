#include <gtest/gtest.h>

#include "mkprice/csv_io.hpp"
#include "mkprice/errors.hpp"
#include "mkprice/forecaster.hpp"
#include "mkprice/model_bundle.hpp"
#include "mkprice/price_panel.hpp"
#include "test_support.hpp"

using namespace mkprice;
using mkprice::testing::random_kernel;
using mkprice::testing::random_matrix;

namespace {

ModelBundle fitted_bundle(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index n = 7, t = 48;
    PricePanel raw;
    raw.prices = random_matrix(rng, n, t).array() + 20.0;
    for (Eigen::Index i = 0; i < n; ++i) raw.node_ids.push_back("node" + std::to_string(i));
    raw.timestamps = hour_range(parse_timestamp("2024-05-01T00"), t);
    const auto centered = center_prices(raw);

    FitOptions o;
    o.rank = 3;
    o.mu = 0.5;
    ModelBundle b;
    b.state = fit(centered.prices, {random_kernel(rng, n, "a"), random_kernel(rng, n, "b")},
                  {random_kernel(rng, t, "g")}, o);
    b.node_ids = raw.node_ids;
    b.timestamps = raw.timestamps;
    b.hourly_means = *centered.hourly_means;
    b.training_data = centered.prices;
    b.training_prices = raw.prices;
    b.config = {{"note", "unit test"}};
    return b;
}

}  // namespace

TEST(ModelBundle, RoundTripPreservesEverything) {
    const auto b = fitted_bundle(1);
    const auto dir = mkprice::testing::fresh_dir("model");
    save_model_bundle(dir, b);
    const auto back = load_model_bundle(dir);

    const double before = objective(b.state, b.training_data);
    EXPECT_LE(std::abs(objective(back.state, back.training_data) - before), 1e-12 * before);
    for (std::size_t l = 0; l < b.state.node_blocks.size(); ++l) {
        EXPECT_EQ(back.state.node_blocks[l].coeffs, b.state.node_blocks[l].coeffs);
        EXPECT_EQ(back.state.node_kernels[l]->gram(), b.state.node_kernels[l]->gram());
        EXPECT_EQ(back.state.node_blocks[l].kernel_label, b.state.node_blocks[l].kernel_label);
    }
    EXPECT_EQ(back.state.time_blocks[0].coeffs, b.state.time_blocks[0].coeffs);
    EXPECT_EQ(back.state.cost_trace, b.state.cost_trace);
    EXPECT_EQ(back.state.mu, b.state.mu);
    EXPECT_EQ(back.state.converged, b.state.converged);
    EXPECT_EQ(back.node_ids, b.node_ids);
    EXPECT_EQ(back.timestamps, b.timestamps);
    EXPECT_EQ(back.hourly_means, b.hourly_means);
    EXPECT_EQ(back.training_prices, b.training_prices);
    EXPECT_EQ(back.config, b.config);

    const Eigen::MatrixXd p0 = predict(b.state, training_cross(b.state));
    const Eigen::MatrixXd p1 = predict(back.state, training_cross(back.state));
    EXPECT_LE((p0 - p1).norm(), 1e-12 * p0.norm());
}

TEST(ModelBundle, IdenticalFitsGiveIdenticalFiles) {
    const auto d1 = mkprice::testing::fresh_dir("one");
    const auto d2 = mkprice::testing::fresh_dir("two");
    save_model_bundle(d1, fitted_bundle(2));
    save_model_bundle(d2, fitted_bundle(2));
    for (const auto& entry : std::filesystem::directory_iterator(d1)) {
        EXPECT_EQ(read_text_file(entry.path()), read_text_file(d2 / entry.path().filename())) << entry.path();
    }
}

TEST(ModelBundle, MissingOrCorruptBundleRejected) {
    const auto dir = mkprice::testing::fresh_dir("bad");
    EXPECT_THROW(load_model_bundle(dir / "nothing_here"), InputError);
    save_model_bundle(dir, fitted_bundle(3));
    write_matrix_csv(dir / "node_block_0.csv", Eigen::MatrixXd::Zero(2, 2));
    EXPECT_THROW(load_model_bundle(dir), InputError);
}
