#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkprice/kernel_factory.hpp"

namespace mkprice {

/// Coefficient block B_l (N x R) or Gamma_m (T x R) tied to one kernel.
struct FactorBlock {
    Eigen::MatrixXd coeffs;
    std::string kernel_label;
    double block_norm = 0.0;  // sqrt(tr(coeffs^T K coeffs))
};

/// Everything the block-coordinate descent carries between updates.
///
/// F = sum_l K_l B_l (N x R) and H = sum_m G_m Gamma_m (T x R) are kept in
/// step with the blocks; the model's reconstruction is F H^T.
struct ModelState {
    std::vector<FactorBlock> node_blocks;
    std::vector<FactorBlock> time_blocks;
    std::vector<KernelPtr> node_kernels;
    std::vector<KernelPtr> time_kernels;
    int rank = 0;
    double mu = 0.0;
    Eigen::MatrixXd F;
    Eigen::MatrixXd H;

    /// Objective after each full sweep; entry 0 is the starting point.
    std::vector<double> cost_trace;
    /// Objective after every single block update (only when requested).
    std::vector<double> block_trace;
    /// Gate outcome of each block's most recent canonical solve.
    std::vector<bool> node_gate_open;
    std::vector<bool> time_gate_open;
    bool converged = false;
    int sweeps = 0;

    Eigen::Index nodes() const { return F.rows(); }
    Eigen::Index hours() const { return H.rows(); }

    /// Rebuilds F and H from the blocks.
    void recompute_aggregates();
    /// Reconstruction F H^T.
    Eigen::MatrixXd reconstruction() const { return F * H.transpose(); }
};

struct FitOptions {
    int rank = 20;
    double mu = 1.0;
    double eps_bcd = 1e-3;
    int max_sweeps = 500;
    std::uint64_t seed = 1;
    int restarts = 1;
    bool record_block_trace = false;
    /// Rescale node and time blocks against each other once the sweeps stop.
    bool rebalance = true;
};

/// sqrt(tr(X^T K X)) = ||K^{1/2} X||_F.
double block_norm(const Eigen::MatrixXd& x, const KernelMatrix& k);

/// Seeded random starting point: i.i.d. N(0, 1) entries scaled by
/// 1/sqrt(R max(N, T)).
ModelState initialize_state(std::vector<KernelPtr> node_kernels, std::vector<KernelPtr> time_kernels, int rank,
                            double mu, std::uint64_t seed);

/// ||Z - F H^T||_F^2 + mu sum_l ||B_l||_{K_l} + mu sum_m ||Gamma_m||_{G_m}.
double objective(const ModelState& state, const Eigen::MatrixXd& z);

/// Exact minimization over B_l with everything else fixed.
void update_block_B(ModelState& state, const Eigen::MatrixXd& z, std::size_t l);
/// Exact minimization over Gamma_m with everything else fixed.
void update_block_Gamma(ModelState& state, const Eigen::MatrixXd& z, std::size_t m);

/// Smallest mu that zeroes every block during the first sweep from `init`:
/// twice the largest gate value met along the all-zero path (node blocks in
/// order, each seeing the earlier ones already zeroed).
double mu_max(const ModelState& init, const Eigen::MatrixXd& z);

/// Exact minimization over the common scale c in (c B_l, Gamma_m / c), which
/// leaves F H^T unchanged and equalizes the summed node and time block norms.
void rebalance_scale(ModelState& state);

/// Cyclic sweeps B_1..B_L, Gamma_1..Gamma_M until the relative change of the
/// objective between consecutive sweeps drops below eps_bcd, then a final
/// rebalance_scale unless disabled. With several restarts (seeds seed,
/// seed+1, ...) the lowest-cost run is returned. A run that hits max_sweeps
/// comes back with converged = false.
ModelState fit(const Eigen::MatrixXd& z, std::vector<KernelPtr> node_kernels, std::vector<KernelPtr> time_kernels,
               const FitOptions& options);

/// Continues sweeping from an existing state (its mu and rank are kept).
ModelState fit_from(ModelState state, const Eigen::MatrixXd& z, const FitOptions& options);

struct KernelSelection {
    std::vector<std::string> node;
    std::vector<std::string> time;
    std::vector<bool> node_mask;
    std::vector<bool> time_mask;
};

/// A kernel is selected when its block norm exceeds 1e-10 of the largest
/// block norm across both families.
KernelSelection selected_kernels(const ModelState& state);

/// Numerical rank of F H^T: singular values above rel_tol * sigma_1.
int reconstruction_rank(const ModelState& state, double rel_tol = 1e-6);

}  // namespace mkprice
