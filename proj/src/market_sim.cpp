#include "mkprice/market_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "mkprice/errors.hpp"
#include "mkprice/forecaster.hpp"

namespace mkprice {

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

void check_labels(const std::vector<std::string>& active, const std::vector<std::string>& pool, const char* family) {
    require(!active.empty(), std::string("no active ") + family + " kernels");
    for (std::size_t i = 0; i < active.size(); ++i) {
        require(contains(pool, active[i]), std::string("unknown ") + family + " kernel '" + active[i] + "'");
        for (std::size_t j = 0; j < i; ++j) {
            require(active[i] != active[j], "kernel '" + active[i] + "' listed twice");
        }
    }
}

std::string padded(const char* prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
    return buf;
}

FeatureColumn numeric_column(std::string name, std::vector<double> values) {
    FeatureColumn c;
    c.name = std::move(name);
    c.numeric = std::move(values);
    return c;
}

FeatureColumn categorical_column(std::string name, std::vector<std::string> levels) {
    FeatureColumn c;
    c.name = std::move(name);
    c.categorical = true;
    c.levels = std::move(levels);
    return c;
}

KernelRecipe recipe(std::string label, KernelType type, std::vector<std::string> columns = {}) {
    KernelRecipe r;
    r.label = std::move(label);
    r.type = type;
    r.columns = std::move(columns);
    return r;
}

// Nodes split into contiguous zones; each zone is a clique, neighbouring
// zones share one weaker tie.
WeightedGraph zonal_graph(const std::vector<std::string>& ids) {
    const int n = static_cast<int>(ids.size());
    const int zones = std::max(2, n / 8);
    auto zone_of = [&](int i) { return i * zones / n; };
    WeightedGraph g;
    g.node_ids = ids;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n && zone_of(j) == zone_of(i); ++j) {
            g.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), 1.0});
        }
        if (i + 1 < n && zone_of(i + 1) != zone_of(i)) {
            g.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), 0.5});
        }
    }
    return g;
}

double profile_shape(int slot, int period) {
    const double x = 2.0 * std::numbers::pi * slot / period;
    return std::sin(x - std::numbers::pi / 2.0) + 0.5 * std::sin(2.0 * x);
}

}  // namespace

void SyntheticSpec::validate() const {
    require(nodes >= 2 && hours >= 2, "synthetic market needs at least 2 nodes and 2 hours");
    require(rank_true >= 1 && rank_true <= std::min(nodes, hours), "rank_true must lie in [1, min(N, T)]");
    require(noise_sigma >= 0.0, "noise_sigma must be nonnegative");
    require(block_norm > 0.0, "block_norm must be positive");
    require(period >= 1, "period must be positive");
    check_labels(active_node_kernels, node_pool_labels(), "node");
    check_labels(active_time_kernels, time_pool_labels(), "time");
}

std::vector<std::string> node_pool_labels() { return {"graph", "feat_a", "feat_b", "type", "identity"}; }

std::vector<std::string> time_pool_labels() { return {"load", "wind", "temp", "hour", "humidity"}; }

SyntheticMarket generate_synthetic_market(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const int n = spec.nodes;
    const int t = spec.hours;

    SyntheticMarket m;
    std::vector<std::string> node_ids;
    for (int i = 0; i < n; ++i) {
        node_ids.push_back(padded("n", i + 1, 3));
    }
    m.graph = zonal_graph(node_ids);

    std::vector<double> a1(n), a2(n), b1(n), b2(n);
    std::vector<std::string> type(n);
    const char* types[] = {"gen", "load", "tie"};
    for (int i = 0; i < n; ++i) {
        a1[i] = uniform(rng);
        a2[i] = uniform(rng);
        b1[i] = uniform(rng);
        b2[i] = uniform(rng);
        type[i] = types[i % 3];
    }
    m.node_features.entity_ids = node_ids;
    m.node_features.columns = {numeric_column("a1", a1), numeric_column("a2", a2), numeric_column("b1", b1),
                               numeric_column("b2", b2), categorical_column("cat:type", type)};

    const auto stamps = hour_range(spec.start, t);
    std::vector<double> load(t), wind(t), temp(t), hum1(t), hum2(t);
    std::vector<std::string> hour(t);
    double day_load = 0.0, day_temp = 0.0, hourly_load = 0.0, w = 0.0;
    for (int k = 0; k < t; ++k) {
        const int slot = cycle_slot(stamps[static_cast<std::size_t>(k)], spec.period);
        if (k == 0 || slot == 0) {
            day_load = 0.6 * day_load + normal(rng);
            day_temp = 0.8 * day_temp + 0.5 * normal(rng);
        }
        hourly_load = 0.8 * hourly_load + 0.3 * normal(rng);
        w = 0.97 * w + 0.25 * normal(rng);
        load[k] = 1.0 + day_load + hourly_load;
        wind[k] = w;
        temp[k] = std::sin(2.0 * std::numbers::pi * slot / spec.period) + day_temp;
        hum1[k] = normal(rng);
        hum2[k] = normal(rng);
        hour[k] = padded("h", slot, 2);
    }
    for (auto s : stamps) {
        m.time_features.entity_ids.push_back(format_timestamp(s));
    }
    m.time_features.columns = {numeric_column("load", load), numeric_column("wind", wind), numeric_column("temp", temp),
                               numeric_column("hum1", hum1), numeric_column("hum2", hum2),
                               categorical_column("cat:hour", hour)};

    auto graph_recipe = recipe("graph", KernelType::diffusion);
    graph_recipe.beta = 3.0;
    m.node_recipes = {graph_recipe, recipe("feat_a", KernelType::gaussian, {"a1", "a2"}),
                      recipe("feat_b", KernelType::gaussian, {"b1", "b2"}),
                      recipe("type", KernelType::gaussian, {"cat:type"}), recipe("identity", KernelType::identity)};
    m.time_recipes = {recipe("load", KernelType::gaussian, {"load"}), recipe("wind", KernelType::gaussian, {"wind"}),
                      recipe("temp", KernelType::gaussian, {"temp"}), recipe("hour", KernelType::gaussian, {"cat:hour"}),
                      recipe("humidity", KernelType::linear, {"hum1", "hum2"})};

    NodeKernelInputs in;
    in.graph = &m.graph;
    in.features = &m.node_features;
    in.train_ids = node_ids;
    in.target_ids = node_ids;

    auto& truth = m.truth;
    truth.rank = spec.rank_true;
    truth.mu = 0.0;
    auto planted = [&](const KernelPtr& k, bool active) {
        FactorBlock b{Eigen::MatrixXd::Zero(k->size(), spec.rank_true), k->label(), 0.0};
        if (active) {
            for (Eigen::Index j = 0; j < b.coeffs.cols(); ++j) {
                for (Eigen::Index i = 0; i < b.coeffs.rows(); ++i) {
                    b.coeffs(i, j) = normal(rng);
                }
            }
            // Smooth planted functions: B = K xi puts the mass on the kernel's
            // leading eigendirections.
            b.coeffs = k->gram() * b.coeffs;
            // Keep K B free of a constant component: market-wide moves belong
            // to the hourly means, not to the planted structure.
            const Eigen::VectorXd u = k->gram().rowwise().sum();
            b.coeffs -= u * (u.transpose() * b.coeffs) / u.squaredNorm();
            b.coeffs *= spec.block_norm / block_norm(b.coeffs, *k);
            b.block_norm = spec.block_norm;
        }
        return b;
    };
    for (const auto& r : m.node_recipes) {
        auto k = build_node_kernel(r, in).kernel;
        truth.node_blocks.push_back(planted(k, contains(spec.active_node_kernels, r.label)));
        truth.node_gate_open.push_back(contains(spec.active_node_kernels, r.label));
        truth.node_kernels.push_back(std::move(k));
    }
    for (const auto& r : m.time_recipes) {
        auto k = build_time_kernel(r, m.time_features, m.time_features).kernel;
        truth.time_blocks.push_back(planted(k, contains(spec.active_time_kernels, r.label)));
        truth.time_gate_open.push_back(contains(spec.active_time_kernels, r.label));
        truth.time_kernels.push_back(std::move(k));
    }
    truth.recompute_aggregates();
    truth.converged = true;

    m.signal = truth.reconstruction();
    const double signal_rms = std::sqrt(m.signal.squaredNorm() / static_cast<double>(m.signal.size()));
    m.noise_std = spec.noise_sigma * signal_rms;
    m.profile.resize(spec.period);
    for (int s = 0; s < spec.period; ++s) {
        m.profile(s) = spec.price_level + spec.profile_amplitude * profile_shape(s, spec.period);
    }

    m.panel.node_ids = node_ids;
    m.panel.timestamps = stamps;
    m.panel.period = spec.period;
    m.panel.prices = m.signal;
    for (Eigen::Index k = 0; k < t; ++k) {
        const double level = m.profile(cycle_slot(stamps[static_cast<std::size_t>(k)], spec.period));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = m.noise_std > 0.0 ? m.noise_std * normal(rng) : 0.0;
            m.panel.prices(i, k) += level + e;
        }
    }
    return m;
}

ProxResult oracle_canonical_prox(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                                 double mu, double tol, int max_iterations) {
    require(b.rows() == b.cols() && a.rows() == b.rows() && a.cols() == c.rows(), "prox oracle: dimension mismatch");
    require(mu > 0.0, "prox oracle: mu must be positive");
    const auto d1 = b.rows();
    const auto d2 = c.cols();
    const auto d3 = c.rows();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(0.5 * (b + b.transpose()));
    require(eb.info() == Eigen::Success && eb.eigenvalues().minCoeff() > 0.0, "prox oracle: B must be positive definite");
    const Eigen::MatrixXd b_half = eb.operatorSqrt();

    // vec(B^{1/2} S C^T) = (C kron B^{1/2}) vec(S), column-major vec.
    Eigen::MatrixXd design(d1 * d3, d1 * d2);
    for (Eigen::Index q = 0; q < d3; ++q) {
        for (Eigen::Index j = 0; j < d2; ++j) {
            design.block(q * d1, j * d1, d1, d1) = c(q, j) * b_half;
        }
    }
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
    const Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd mt_a = design.transpose() * target;
    const double lipschitz = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
                                       .eigenvalues()
                                       .maxCoeff();

    auto value = [&](const Eigen::VectorXd& x) { return (target - design * x).squaredNorm() + mu * x.norm(); };
    auto prox_step = [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd v = y - (2.0 / lipschitz) * (gram * y - mt_a);
        const double nv = v.norm();
        const double shrink = mu / lipschitz;
        if (nv <= shrink) {
            return Eigen::VectorXd::Zero(v.size()).eval();
        }
        return ((1.0 - shrink / nv) * v).eval();
    };

    ProxResult r;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d1 * d2);
    double fx = value(x);
    r.objective_trace.push_back(fx);
    if (lipschitz == 0.0) {
        r.x = Eigen::MatrixXd::Zero(d1, d2);
        r.objective = fx;
        return r;
    }
    Eigen::VectorXd y = x;
    double momentum = 1.0;
    int quiet = 0;
    for (int it = 1; it <= max_iterations; ++it) {
        const Eigen::VectorXd z = prox_step(y);
        const double fz = value(z);
        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        const double previous = fx;
        if (fz <= fx) {
            y = z + ((momentum - 1.0) / next_momentum) * (z - x);
            x = z;
            fx = fz;
            momentum = next_momentum;
        } else {
            // Restart the momentum from the best point.
            y = x;
            momentum = 1.0;
        }
        r.objective_trace.push_back(fx);
        r.iterations = it;
        quiet = std::abs(previous - fx) <= tol * std::max(1.0, std::abs(fx)) ? quiet + 1 : 0;
        if (quiet >= 20) {
            break;
        }
        if (it == max_iterations) {
            throw ConvergenceError("prox oracle did not converge", fx);
        }
    }
    const Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(x.data(), d1, d2);
    r.x = eb.eigenvectors() * eb.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * eb.eigenvectors().transpose() * s;
    r.objective = fx;
    return r;
}

SqrtTraceNormCheck sqrt_trace_norm_identity_check(const Eigen::MatrixXd& p, std::uint64_t seed, int trials) {
    SqrtTraceNormCheck out;
    if (p.size() == 0) {
        return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    out.lhs = std::sqrt(sv.sum());
    const Eigen::MatrixXd root = sv.cwiseSqrt().asDiagonal();
    const Eigen::MatrixXd f_star = svd.matrixU() * root;
    const Eigen::MatrixXd g_star = svd.matrixV() * root;
    out.rhs = 0.5 * (f_star.norm() + g_star.norm());
    out.gap = std::abs(out.lhs - out.rhs);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto k = sv.size();
    out.min_random = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < trials; ++trial) {
        // F = F* M and G = G* M^{-T} keep F G^T = P; extra columns in G only
        // meet zero columns in F.
        Eigen::MatrixXd mix(k, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            for (Eigen::Index i = 0; i < k; ++i) {
                mix(i, j) = normal(rng);
            }
        }
        mix += static_cast<double>(k) * Eigen::MatrixXd::Identity(k, k) * (trial % 2 == 0 ? 0.0 : 1.0);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(mix);
        if (!lu.isInvertible()) {
            continue;
        }
        const Eigen::Index pad = trial % 3;
        Eigen::MatrixXd f = Eigen::MatrixXd::Zero(p.rows(), k + pad);
        Eigen::MatrixXd g(p.cols(), k + pad);
        f.leftCols(k) = f_star * mix;
        g.leftCols(k) = g_star * lu.inverse().transpose();
        for (Eigen::Index j = k; j < k + pad; ++j) {
            for (Eigen::Index i = 0; i < g.rows(); ++i) {
                g(i, j) = normal(rng);
            }
        }
        const double v = 0.5 * (f.norm() + g.norm());
        out.min_random = std::min(out.min_random, v);
        out.random_ok = out.random_ok && v >= out.lhs - 1e-8;
    }
    return out;
}

TrialReport plant_and_recover_trial(const SyntheticSpec& spec, const TrialOptions& options) {
    require(options.holdout_fraction > 0.0 && options.holdout_fraction < 1.0, "holdout_fraction must lie in (0, 1)");
    require(options.forced_mu || !options.mu_factors.empty(), "empty mu grid");
    const auto market = generate_synthetic_market(spec);
    const auto& z = market.panel.prices;
    const auto t = z.cols();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(t));
    for (Eigen::Index k = 0; k < t; ++k) order[static_cast<std::size_t>(k)] = k;
    std::mt19937_64 rng(spec.seed ^ 0x5bd1e995ULL);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_hold = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(options.holdout_fraction * t)));
    std::vector<Eigen::Index> hold(order.begin(), order.begin() + n_hold);
    std::vector<Eigen::Index> train(order.begin() + n_hold, order.end());
    std::sort(hold.begin(), hold.end());
    std::sort(train.begin(), train.end());

    std::vector<KernelPtr> time_kernels;
    CrossKernels cross;
    for (const auto& k : market.truth.node_kernels) {
        cross.node_labels.push_back(k->label());
        cross.node_cross.push_back(k->gram());
    }
    for (const auto& k : market.truth.time_kernels) {
        time_kernels.push_back(share(KernelMatrix::from_gram(k->label(), k->gram()(train, train))));
        cross.time_labels.push_back(k->label());
        cross.time_cross.push_back(k->gram()(train, hold));
    }
    const Eigen::MatrixXd z_train = z(Eigen::all, train);
    const Eigen::MatrixXd z_hold = z(Eigen::all, hold);

    FitOptions fo;
    fo.rank = options.rank > 0 ? options.rank : spec.rank_true;
    fo.eps_bcd = options.eps_bcd;
    fo.max_sweeps = options.max_sweeps;
    fo.seed = spec.seed;

    TrialReport rep;
    for (std::size_t i = 0; i < market.truth.node_blocks.size(); ++i) {
        if (market.truth.node_gate_open[i]) rep.planted_node.push_back(market.truth.node_blocks[i].kernel_label);
    }
    for (std::size_t i = 0; i < market.truth.time_blocks.size(); ++i) {
        if (market.truth.time_gate_open[i]) rep.planted_time.push_back(market.truth.time_blocks[i].kernel_label);
    }
    rep.mu_max = mu_max(initialize_state(market.truth.node_kernels, time_kernels, fo.rank, 1.0, fo.seed), z_train);
    if (options.forced_mu) {
        rep.grid = {*options.forced_mu};
    } else {
        for (double f : options.mu_factors) rep.grid.push_back(f * rep.mu_max);
    }

    auto same_set = [](std::vector<std::string> x, std::vector<std::string> y) {
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        return x == y;
    };
    auto matches = [&](const KernelSelection& sel) {
        return same_set(sel.node, rep.planted_node) && same_set(sel.time, rep.planted_time);
    };
    std::vector<ModelState> fits;
    for (double mu : rep.grid) {
        fo.mu = mu;
        fits.push_back(fit(z_train, market.truth.node_kernels, time_kernels, fo));
        rep.holdout_rmse.push_back(rmse(predict(fits.back(), cross), z_hold));
        rep.grid_exact.push_back(matches(selected_kernels(fits.back())));
    }
    const double best = *std::min_element(rep.holdout_rmse.begin(), rep.holdout_rmse.end());
    const double limit = (1.0 + options.rmse_slack) * best;
    std::size_t chosen = 0;
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
        if (rep.holdout_rmse[i] <= limit && (rep.holdout_rmse[chosen] > limit || rep.grid[i] > rep.grid[chosen])) {
            chosen = i;
        }
    }
    const auto& state = fits[chosen];
    rep.mu = rep.grid[chosen];
    rep.holdout_rmse_at_mu = rep.holdout_rmse[chosen];
    const auto sel = selected_kernels(state);
    rep.selected_node = sel.node;
    rep.selected_time = sel.time;
    rep.exact = rep.grid_exact[chosen];
    rep.fitted_rank = reconstruction_rank(state);
    rep.fit_relative_error = (z_train - state.reconstruction()).norm() / std::max(z_train.norm(), 1e-300);
    rep.converged = state.converged;
    return rep;
}

}  // namespace mkprice
