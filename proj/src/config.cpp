#include "mkprice/config.hpp"

#include <set>

#include "mkprice/csv_io.hpp"
#include "mkprice/errors.hpp"

namespace mkprice {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    require(j.is_object(), where + " must be an object");
    for (const auto& item : j.items()) {
        require(allowed.count(item.key()) > 0, "unknown key '" + item.key() + "' in " + where);
    }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("malformed value for '" + key + "' in " + where);
    }
}

template <typename T>
void maybe(const json& j, const std::string& key, T& out, const std::string& where) {
    if (j.contains(key)) {
        out = get<T>(j, key, where);
    }
}

std::optional<fs::path> path_key(const json& j, const std::string& key, const fs::path& base) {
    if (!j.contains(key)) {
        return std::nullopt;
    }
    fs::path p = get<std::string>(j, key, "config");
    return p.is_absolute() ? p : fs::absolute(base / p).lexically_normal();
}

std::vector<KernelRecipe> recipe_list(const json& j, const std::string& key) {
    std::vector<KernelRecipe> out;
    if (!j.contains(key)) {
        return out;
    }
    require(j.at(key).is_array(), "'" + key + "' must be a list");
    for (const auto& item : j.at(key)) {
        auto r = parse_recipe(item);
        for (const auto& seen : out) {
            require(seen.label != r.label, "duplicate kernel label '" + r.label + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

void positive(double v, const std::string& name) { require(v > 0.0, name + " must be positive"); }

SimulationConfig parse_simulation(const json& j) {
    const std::string where = "simulation";
    reject_unknown(j, {"nodes", "days", "rank_true", "noise_sigma", "seed", "active_node_kernels",
                       "active_time_kernels", "price_level", "profile_amplitude", "block_norm", "start", "period"},
                   where);
    SimulationConfig s;
    maybe(j, "nodes", s.spec.nodes, where);
    maybe(j, "days", s.days, where);
    maybe(j, "rank_true", s.spec.rank_true, where);
    maybe(j, "noise_sigma", s.spec.noise_sigma, where);
    maybe(j, "seed", s.spec.seed, where);
    maybe(j, "active_node_kernels", s.spec.active_node_kernels, where);
    maybe(j, "active_time_kernels", s.spec.active_time_kernels, where);
    maybe(j, "price_level", s.spec.price_level, where);
    maybe(j, "profile_amplitude", s.spec.profile_amplitude, where);
    maybe(j, "block_norm", s.spec.block_norm, where);
    maybe(j, "period", s.spec.period, where);
    if (j.contains("start")) {
        s.spec.start = parse_timestamp(get<std::string>(j, "start", where));
    }
    require(s.days >= 1, "simulation.days must be at least 1");
    s.spec.hours = s.days * s.spec.period;
    s.spec.validate();
    return s;
}

json simulation_to_json(const SimulationConfig& s) {
    return {{"nodes", s.spec.nodes},
            {"days", s.days},
            {"rank_true", s.spec.rank_true},
            {"noise_sigma", s.spec.noise_sigma},
            {"seed", s.spec.seed},
            {"active_node_kernels", s.spec.active_node_kernels},
            {"active_time_kernels", s.spec.active_time_kernels},
            {"price_level", s.spec.price_level},
            {"profile_amplitude", s.spec.profile_amplitude},
            {"block_norm", s.spec.block_norm},
            {"start", format_timestamp(s.spec.start)},
            {"period", s.spec.period}};
}

}  // namespace

KernelRecipe parse_recipe(const json& j) {
    reject_unknown(j, {"label", "type", "beta", "bandwidth", "columns"}, "kernel recipe");
    require(j.contains("label") && j.contains("type"), "kernel recipe needs 'label' and 'type'");
    KernelRecipe r;
    r.label = get<std::string>(j, "label", "kernel recipe");
    require(!r.label.empty(), "kernel label must not be empty");
    const std::string where = "kernel '" + r.label + "'";
    r.type = parse_kernel_type(get<std::string>(j, "type", where));
    maybe(j, "beta", r.beta, where);
    positive(r.beta, where + " beta");
    if (j.contains("bandwidth")) {
        const auto& bw = j.at("bandwidth");
        if (bw.is_string()) {
            require(bw.get<std::string>() == "median", where + ": bandwidth must be a number or \"median\"");
        } else {
            r.bandwidth = get<double>(j, "bandwidth", where);
            positive(*r.bandwidth, where + " bandwidth");
        }
    }
    maybe(j, "columns", r.columns, where);
    return r;
}

json recipe_to_json(const KernelRecipe& r) {
    json j = {{"label", r.label}, {"type", to_string(r.type)}};
    if (r.type == KernelType::diffusion) j["beta"] = r.beta;
    if (r.type == KernelType::gaussian) {
        j["bandwidth"] = r.bandwidth ? json(*r.bandwidth) : json("median");
    }
    if (!r.columns.empty()) j["columns"] = r.columns;
    return j;
}

RunConfig parse_config_json(const json& j, const fs::path& base_dir) {
    const std::string where = "config";
    reject_unknown(j,
                   {"prices", "node_features", "time_features", "graph", "output_dir", "node_kernels", "time_kernels",
                    "rank", "mu", "mu_grid", "eps_bcd", "max_sweeps", "window_days", "period", "seed", "restarts",
                    "train_end", "tune_days", "ridge_kernel", "ridge_mu_grid", "simulation"},
                   where);
    RunConfig c;
    c.prices = path_key(j, "prices", base_dir);
    c.node_features = path_key(j, "node_features", base_dir);
    c.time_features = path_key(j, "time_features", base_dir);
    c.graph = path_key(j, "graph", base_dir);
    require(j.contains("output_dir"), "config: missing required key 'output_dir'");
    c.output_dir = *path_key(j, "output_dir", base_dir);

    c.node_kernels = recipe_list(j, "node_kernels");
    c.time_kernels = recipe_list(j, "time_kernels");
    for (const auto& a : c.node_kernels) {
        for (const auto& b : c.time_kernels) {
            require(a.label != b.label, "duplicate kernel label '" + a.label + "'");
        }
    }

    maybe(j, "rank", c.rank, where);
    require(c.rank >= 1, "rank must be at least 1");
    if (j.contains("mu")) {
        c.mu = get<double>(j, "mu", where);
        positive(*c.mu, "mu");
    }
    maybe(j, "mu_grid", c.mu_grid, where);
    for (double v : c.mu_grid) positive(v, "mu_grid entries");
    maybe(j, "eps_bcd", c.eps_bcd, where);
    positive(c.eps_bcd, "eps_bcd");
    maybe(j, "max_sweeps", c.max_sweeps, where);
    require(c.max_sweeps >= 1, "max_sweeps must be at least 1");
    maybe(j, "window_days", c.window_days, where);
    require(c.window_days >= 1, "window_days must be at least 1");
    maybe(j, "period", c.period, where);
    require(c.period >= 1, "period must be positive");
    maybe(j, "seed", c.seed, where);
    maybe(j, "restarts", c.restarts, where);
    require(c.restarts >= 1, "restarts must be at least 1");
    if (j.contains("train_end")) {
        c.train_end = parse_timestamp(get<std::string>(j, "train_end", where));
    }
    maybe(j, "tune_days", c.tune_days, where);
    require(c.tune_days >= 1, "tune_days must be at least 1");
    maybe(j, "ridge_kernel", c.ridge_kernel, where);
    maybe(j, "ridge_mu_grid", c.ridge_mu_grid, where);
    require(!c.ridge_mu_grid.empty(), "ridge_mu_grid must not be empty");
    for (double v : c.ridge_mu_grid) positive(v, "ridge_mu_grid entries");
    if (j.contains("simulation")) {
        c.simulation = parse_simulation(j.at("simulation"));
    }
    return c;
}

RunConfig parse_config(const fs::path& path) {
    require(fs::is_regular_file(path), "config file not found: " + path.string());
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw InputError("config " + path.string() + ": " + e.what());
    }
    return parse_config_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
    json j;
    auto put = [&](const char* key, const std::optional<fs::path>& p) {
        if (p) j[key] = p->string();
    };
    put("prices", prices);
    put("node_features", node_features);
    put("time_features", time_features);
    put("graph", graph);
    j["output_dir"] = output_dir.string();
    j["node_kernels"] = json::array();
    for (const auto& r : node_kernels) j["node_kernels"].push_back(recipe_to_json(r));
    j["time_kernels"] = json::array();
    for (const auto& r : time_kernels) j["time_kernels"].push_back(recipe_to_json(r));
    j["rank"] = rank;
    if (mu) j["mu"] = *mu;
    if (!mu_grid.empty()) j["mu_grid"] = mu_grid;
    j["eps_bcd"] = eps_bcd;
    j["max_sweeps"] = max_sweeps;
    j["window_days"] = window_days;
    j["period"] = period;
    j["seed"] = seed;
    j["restarts"] = restarts;
    if (train_end) j["train_end"] = format_timestamp(*train_end);
    j["tune_days"] = tune_days;
    if (!ridge_kernel.empty()) j["ridge_kernel"] = ridge_kernel;
    j["ridge_mu_grid"] = ridge_mu_grid;
    if (simulation) j["simulation"] = simulation_to_json(*simulation);
    return j;
}

}  // namespace mkprice
