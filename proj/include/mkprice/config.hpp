#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mkprice/kernel_recipes.hpp"
#include "mkprice/market_sim.hpp"
#include "mkprice/timestamps.hpp"

namespace mkprice {

struct SimulationConfig {
    SyntheticSpec spec;
    int days = 7;
};

/// Validated run configuration. Relative paths are resolved against the
/// directory of the configuration file.
struct RunConfig {
    std::optional<std::filesystem::path> prices;
    std::optional<std::filesystem::path> node_features;
    std::optional<std::filesystem::path> time_features;
    std::optional<std::filesystem::path> graph;
    std::filesystem::path output_dir;

    std::vector<KernelRecipe> node_kernels;
    std::vector<KernelRecipe> time_kernels;

    int rank = 20;
    std::optional<double> mu;
    std::vector<double> mu_grid;
    double eps_bcd = 1e-3;
    int max_sweeps = 500;
    int window_days = 7;
    int period = 24;
    std::uint64_t seed = 1;
    int restarts = 1;

    std::optional<Timestamp> train_end;  // fit: training window ends here (exclusive)
    int tune_days = 1;
    std::string ridge_kernel;  // empty: first time kernel
    std::vector<double> ridge_mu_grid{0.01, 0.1, 1.0, 10.0};

    std::optional<SimulationConfig> simulation;

    /// The configuration as JSON with absolute paths, suitable for
    /// re-parsing with parse_config_json from any directory.
    nlohmann::json to_json() const;
};

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

KernelRecipe parse_recipe(const nlohmann::json& j);
nlohmann::json recipe_to_json(const KernelRecipe& r);

}  // namespace mkprice
