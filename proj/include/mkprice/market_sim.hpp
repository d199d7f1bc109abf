#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkprice/bcd_engine.hpp"
#include "mkprice/kernel_factory.hpp"
#include "mkprice/kernel_recipes.hpp"
#include "mkprice/price_panel.hpp"

namespace mkprice {

/// Planted multi-kernel market.
///
/// Node pool: graph (diffusion on a zonal network), feat_a, feat_b
/// (Gaussian on two random coordinates each), type (Gaussian on a
/// categorical), identity. Time pool: load, wind, temp (Gaussian on one
/// driver each), hour (Gaussian on hour-of-day), humidity (linear on two
/// columns).
struct SyntheticSpec {
    int nodes = 40;
    int hours = 168;
    int rank_true = 4;
    std::vector<std::string> active_node_kernels{"graph", "feat_a"};
    std::vector<std::string> active_time_kernels{"load", "wind"};
    /// Standard deviation of the additive noise as a multiple of the planted
    /// signal's RMS.
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
    /// Day-periodic market-wide mean added on top: level + amplitude * shape.
    double price_level = 0.0;
    double profile_amplitude = 0.0;
    /// Block norm given to every active block.
    double block_norm = 1.0;
    Timestamp start = Timestamp{} + std::chrono::hours(24 * 19723);  // 2024-01-01
    int period = 24;

    void validate() const;
};

struct SyntheticMarket {
    PricePanel panel;
    Eigen::MatrixXd signal;   // planted F H^T
    Eigen::VectorXd profile;  // per cycle slot
    double noise_std = 0.0;   // absolute
    WeightedGraph graph;
    FeatureTable node_features;
    FeatureTable time_features;  // ids are timestamps
    std::vector<KernelRecipe> node_recipes;
    std::vector<KernelRecipe> time_recipes;
    /// Planted model over the full pool; inactive blocks are zero.
    ModelState truth;
};

std::vector<std::string> node_pool_labels();
std::vector<std::string> time_pool_labels();

SyntheticMarket generate_synthetic_market(const SyntheticSpec& spec);

struct ProxResult {
    Eigen::MatrixXd x;
    double objective = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;
};

/// Independent reference solver for min ||A - B X C^T||^2 + mu ||X||_B.
/// Works on x' = vec(B^{1/2} X) and the group-penalized least squares
/// ||vec A - (C kron B^{1/2}) x'||^2 + mu ||x'||_2, solved by accelerated
/// proximal gradient (monotone, with restarts) at step 1/(2 lambda_max).
/// Stops when the relative objective change falls to `tol`.
ProxResult oracle_canonical_prox(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                                 double mu, double tol = 1e-14, int max_iterations = 2'000'000);

struct SqrtTraceNormCheck {
    double lhs = 0.0;  // sqrt(nuclear norm)
    double rhs = 0.0;  // (||U sqrt(S)||_F + ||V sqrt(S)||_F) / 2
    double gap = 0.0;
    double min_random = 0.0;  // best value over random feasible factorizations
    bool random_ok = true;    // every random value >= lhs - 1e-8
};

SqrtTraceNormCheck sqrt_trace_norm_identity_check(const Eigen::MatrixXd& p, std::uint64_t seed = 0, int trials = 50);

struct TrialOptions {
    /// μ grid as multiples of mu_max on the training slice, half a decade apart.
    std::vector<double> mu_factors{1.0, 0.31622776601683794, 0.1, 0.031622776601683794, 0.01, 0.0031622776601683794,
                                   0.001, 0.00031622776601683794, 1e-4, 3.1622776601683794e-5, 1e-5};
    /// Largest μ whose holdout RMSE is within (1 + slack) of the best. Favours
    /// sparse fits that predict nearly as well.
    double rmse_slack = 2.0;
    double holdout_fraction = 0.2;
    int rank = 0;  // 0 uses rank_true
    double eps_bcd = 1e-4;
    int max_sweeps = 500;
    std::optional<double> forced_mu;  // skips tuning
};

struct TrialReport {
    std::vector<std::string> planted_node;
    std::vector<std::string> planted_time;
    std::vector<std::string> selected_node;
    std::vector<std::string> selected_time;
    bool exact = false;
    double mu = 0.0;
    double mu_max = 0.0;
    std::vector<double> grid;
    std::vector<double> holdout_rmse;
    std::vector<bool> grid_exact;  // selection matched the planted sets at each grid point
    int fitted_rank = 0;
    double fit_relative_error = 0.0;
    double holdout_rmse_at_mu = 0.0;
    bool converged = false;
};

/// Generates a market, holds out a random subset of hours, picks μ on the
/// holdout, and compares the kernels selected by the fit with the planted
/// ones.
TrialReport plant_and_recover_trial(const SyntheticSpec& spec, const TrialOptions& options = {});

}  // namespace mkprice
