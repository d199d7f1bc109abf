#include "mkprice/bcd_engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mkprice/canonical_solver.hpp"
#include "mkprice/errors.hpp"

namespace mkprice {

namespace {

void check_data(const ModelState& state, const Eigen::MatrixXd& z) {
    require(z.rows() == state.F.rows() && z.cols() == state.H.rows(),
            "data is " + std::to_string(z.rows()) + "x" + std::to_string(z.cols()) + " but the model expects " +
                std::to_string(state.F.rows()) + "x" + std::to_string(state.H.rows()));
}

Eigen::Index common_size(const std::vector<KernelPtr>& kernels, const char* family) {
    require(!kernels.empty(), std::string("at least one ") + family + " kernel is required");
    const auto n = kernels.front()->size();
    for (const auto& k : kernels) {
        require(k != nullptr, std::string("null ") + family + " kernel");
        require(k->size() == n, std::string(family) + " kernels have different sizes");
    }
    return n;
}

}  // namespace

void ModelState::recompute_aggregates() {
    F = Eigen::MatrixXd::Zero(node_kernels.front()->size(), rank);
    for (std::size_t l = 0; l < node_blocks.size(); ++l) {
        F.noalias() += node_kernels[l]->gram() * node_blocks[l].coeffs;
    }
    H = Eigen::MatrixXd::Zero(time_kernels.front()->size(), rank);
    for (std::size_t m = 0; m < time_blocks.size(); ++m) {
        H.noalias() += time_kernels[m]->gram() * time_blocks[m].coeffs;
    }
}

double block_norm(const Eigen::MatrixXd& x, const KernelMatrix& k) {
    require(x.rows() == k.size(), "block norm: dimension mismatch");
    const double quad = (x.transpose() * k.gram() * x).trace();
    return std::sqrt(std::max(quad, 0.0));
}

ModelState initialize_state(std::vector<KernelPtr> node_kernels, std::vector<KernelPtr> time_kernels, int rank,
                            double mu, std::uint64_t seed) {
    require(rank >= 1, "rank must be at least 1");
    require(mu >= 0.0, "mu must be nonnegative");
    const auto n = common_size(node_kernels, "node");
    const auto t = common_size(time_kernels, "time");

    ModelState s;
    s.node_kernels = std::move(node_kernels);
    s.time_kernels = std::move(time_kernels);
    s.rank = rank;
    s.mu = mu;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rank) * static_cast<double>(std::max(n, t)));
    auto draw = [&](Eigen::Index rows) {
        Eigen::MatrixXd m(rows, rank);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                m(i, j) = scale * normal(rng);
            }
        }
        return m;
    };
    for (const auto& k : s.node_kernels) {
        FactorBlock b{draw(n), k->label(), 0.0};
        b.block_norm = block_norm(b.coeffs, *k);
        s.node_blocks.push_back(std::move(b));
    }
    for (const auto& k : s.time_kernels) {
        FactorBlock b{draw(t), k->label(), 0.0};
        b.block_norm = block_norm(b.coeffs, *k);
        s.time_blocks.push_back(std::move(b));
    }
    s.node_gate_open.assign(s.node_blocks.size(), true);
    s.time_gate_open.assign(s.time_blocks.size(), true);
    s.recompute_aggregates();
    return s;
}

double objective(const ModelState& state, const Eigen::MatrixXd& z) {
    check_data(state, z);
    double penalty = 0.0;
    for (const auto& b : state.node_blocks) {
        penalty += b.block_norm;
    }
    for (const auto& g : state.time_blocks) {
        penalty += g.block_norm;
    }
    return (z - state.F * state.H.transpose()).squaredNorm() + state.mu * penalty;
}

void update_block_B(ModelState& state, const Eigen::MatrixXd& z, std::size_t l) {
    check_data(state, z);
    require(l < state.node_blocks.size(), "node block index out of range");
    const auto& kernel = state.node_kernels[l];
    auto& block = state.node_blocks[l];

    state.F.noalias() -= kernel->gram() * block.coeffs;
    // (Z - F H^T) H without forming the N x T residual.
    const Eigen::MatrixXd hth = state.H.transpose() * state.H;
    Eigen::MatrixXd ac = z * state.H;
    ac.noalias() -= state.F * hth;
    const auto sol = solve_canonical(CanonicalInstance::from_products(std::move(ac), kernel, hth, state.mu));

    block.coeffs = sol.x;
    block.block_norm = sol.is_zero ? 0.0 : mkprice::block_norm(block.coeffs, *kernel);
    state.node_gate_open[l] = !sol.is_zero;
    state.F.noalias() += kernel->gram() * block.coeffs;
}

void update_block_Gamma(ModelState& state, const Eigen::MatrixXd& z, std::size_t m) {
    check_data(state, z);
    require(m < state.time_blocks.size(), "time block index out of range");
    const auto& kernel = state.time_kernels[m];
    auto& block = state.time_blocks[m];

    state.H.noalias() -= kernel->gram() * block.coeffs;
    // (Z - F H^T)^T F, the transposed residual against F.
    const Eigen::MatrixXd ftf = state.F.transpose() * state.F;
    Eigen::MatrixXd ac = z.transpose() * state.F;
    ac.noalias() -= state.H * ftf;
    const auto sol = solve_canonical(CanonicalInstance::from_products(std::move(ac), kernel, ftf, state.mu));

    block.coeffs = sol.x;
    block.block_norm = sol.is_zero ? 0.0 : mkprice::block_norm(block.coeffs, *kernel);
    state.time_gate_open[m] = !sol.is_zero;
    state.H.noalias() += kernel->gram() * block.coeffs;
}

double mu_max(const ModelState& init, const Eigen::MatrixXd& z) {
    check_data(init, z);
    const Eigen::MatrixXd hth = init.H.transpose() * init.H;
    const Eigen::MatrixXd zh = z * init.H;
    Eigen::MatrixXd rest = init.F;
    double largest = 0.0;
    for (std::size_t l = 0; l < init.node_blocks.size(); ++l) {
        const auto& kernel = init.node_kernels[l];
        rest.noalias() -= kernel->gram() * init.node_blocks[l].coeffs;
        Eigen::MatrixXd ac = zh - rest * hth;
        // mu only enters the gate comparison, not the gate value.
        const auto gate = frob_gate(CanonicalInstance::from_products(std::move(ac), kernel, hth, 1.0));
        largest = std::max(largest, gate.value);
    }
    return 2.0 * largest;
}

void rebalance_scale(ModelState& state) {
    double node_sum = 0.0;
    double time_sum = 0.0;
    for (const auto& b : state.node_blocks) node_sum += b.block_norm;
    for (const auto& g : state.time_blocks) time_sum += g.block_norm;
    if (!(node_sum > 0.0) || !(time_sum > 0.0)) {
        return;
    }
    // (c B, Gamma / c) keeps F H^T; c = sqrt(time_sum / node_sum) minimizes
    // c node_sum + time_sum / c.
    const double c = std::sqrt(time_sum / node_sum);
    for (auto& b : state.node_blocks) {
        b.coeffs *= c;
        b.block_norm *= c;
    }
    for (auto& g : state.time_blocks) {
        g.coeffs /= c;
        g.block_norm /= c;
    }
    state.F *= c;
    state.H /= c;
}

ModelState fit_from(ModelState state, const Eigen::MatrixXd& z, const FitOptions& options) {
    check_data(state, z);
    require(options.eps_bcd > 0.0, "eps_bcd must be positive");
    require(options.max_sweeps >= 1, "max_sweeps must be at least 1");
    state.cost_trace.clear();
    state.block_trace.clear();
    state.converged = false;
    state.sweeps = 0;

    double cost = objective(state, z);
    state.cost_trace.push_back(cost);
    if (options.record_block_trace) {
        state.block_trace.push_back(cost);
    }
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        for (std::size_t l = 0; l < state.node_blocks.size(); ++l) {
            update_block_B(state, z, l);
            if (options.record_block_trace) {
                state.block_trace.push_back(objective(state, z));
            }
        }
        for (std::size_t m = 0; m < state.time_blocks.size(); ++m) {
            update_block_Gamma(state, z, m);
            if (options.record_block_trace) {
                state.block_trace.push_back(objective(state, z));
            }
        }
        // Drop the rounding drift accumulated by the incremental updates.
        state.recompute_aggregates();
        const double previous = cost;
        cost = objective(state, z);
        state.cost_trace.push_back(cost);
        state.sweeps = sweep;
        const bool settled = previous == 0.0 ? cost == 0.0 : std::abs(cost / previous - 1.0) < options.eps_bcd;
        if (settled) {
            state.converged = true;
            break;
        }
    }
    // Sweeps creep along the scale direction, so set it exactly at the end.
    // Rebalancing every sweep instead locks in the oversized first steps.
    if (options.rebalance) {
        rebalance_scale(state);
        state.recompute_aggregates();
        cost = objective(state, z);
        state.cost_trace.back() = cost;
        if (options.record_block_trace) {
            state.block_trace.push_back(cost);
        }
    }
    return state;
}

ModelState fit(const Eigen::MatrixXd& z, std::vector<KernelPtr> node_kernels, std::vector<KernelPtr> time_kernels,
               const FitOptions& options) {
    require(options.rank >= 1, "rank must be at least 1");
    require(options.mu > 0.0, "mu must be positive");
    require(options.restarts >= 1, "restarts must be at least 1");
    ModelState best;
    bool have_best = false;
    for (int r = 0; r < options.restarts; ++r) {
        auto init = initialize_state(node_kernels, time_kernels, options.rank, options.mu,
                                     options.seed + static_cast<std::uint64_t>(r));
        auto run = fit_from(std::move(init), z, options);
        if (!have_best || run.cost_trace.back() < best.cost_trace.back()) {
            best = std::move(run);
            have_best = true;
        }
    }
    return best;
}

KernelSelection selected_kernels(const ModelState& state) {
    double largest = 0.0;
    for (const auto& b : state.node_blocks) largest = std::max(largest, b.block_norm);
    for (const auto& g : state.time_blocks) largest = std::max(largest, g.block_norm);
    const double threshold = 1e-10 * largest;
    KernelSelection sel;
    for (const auto& b : state.node_blocks) {
        const bool on = largest > 0.0 && b.block_norm > threshold;
        sel.node_mask.push_back(on);
        if (on) sel.node.push_back(b.kernel_label);
    }
    for (const auto& g : state.time_blocks) {
        const bool on = largest > 0.0 && g.block_norm > threshold;
        sel.time_mask.push_back(on);
        if (on) sel.time.push_back(g.kernel_label);
    }
    return sel;
}

int reconstruction_rank(const ModelState& state, double rel_tol) {
    const Eigen::MatrixXd p = state.reconstruction();
    if (p.size() == 0) {
        return 0;
    }
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(p).singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) {
        return 0;
    }
    return static_cast<int>((sv.array() > rel_tol * sv(0)).count());
}

}  // namespace mkprice
