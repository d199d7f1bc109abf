#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkprice/bcd_engine.hpp"
#include "mkprice/forecaster.hpp"
#include "mkprice/kernel_recipes.hpp"
#include "mkprice/price_panel.hpp"

namespace mkprice {

/// Training kernels for one fold plus their cross-kernels to the target hours.
struct FoldKernels {
    std::vector<KernelPtr> node;
    std::vector<KernelPtr> time;
    CrossKernels cross;
};

/// Builds the kernels of one fold. Node targets are the training nodes; time
/// targets are the requested hours.
class KernelSource {
public:
    virtual ~KernelSource() = default;
    virtual FoldKernels build(const PricePanel& train_window, const std::vector<Timestamp>& target_hours) const = 0;
};

/// Kernel source driven by recipes and on-disk inputs. Time features are
/// keyed by timestamp.
class RecipeKernelSource : public KernelSource {
public:
    RecipeKernelSource(std::vector<KernelRecipe> node_recipes, std::vector<KernelRecipe> time_recipes,
                       std::optional<WeightedGraph> graph, std::optional<FeatureTable> node_features,
                       FeatureTable time_features);

    FoldKernels build(const PricePanel& train_window, const std::vector<Timestamp>& target_hours) const override;

    const std::vector<KernelRecipe>& node_recipes() const { return node_recipes_; }
    const std::vector<KernelRecipe>& time_recipes() const { return time_recipes_; }

private:
    std::vector<KernelRecipe> node_recipes_;
    std::vector<KernelRecipe> time_recipes_;
    std::optional<WeightedGraph> graph_;
    std::optional<FeatureTable> node_features_;
    FeatureTable time_features_;
};

struct RollingOptions {
    int window_days = 7;
    FitOptions fit;  // fit.mu is replaced by the μ under evaluation
};

/// Day `d` covers hours [d p, (d + 1) p) of the history, p = period.
Eigen::Index day_count(const PricePanel& history);

struct DayForecast {
    int day = 0;
    std::string date;
    Eigen::Index train_first = 0;
    Eigen::Index train_count = 0;
    Eigen::Index target_first = 0;
    Eigen::Index target_count = 0;
    double mu = 0.0;
    Eigen::MatrixXd forecast;  // prices, N x period
    Eigen::MatrixXd actual;
    double rmse = 0.0;
    std::vector<bool> node_selected;
    std::vector<bool> time_selected;
    bool converged = true;
    int sweeps = 0;
};

/// Multi-kernel forecasts for target days [first_day, last_day): each day is
/// predicted from the trailing window of window_days days only.
std::vector<DayForecast> rolling_forecasts(const PricePanel& history, const KernelSource& source, double mu,
                                           int first_day, int last_day, const RollingOptions& options);

/// Yesterday's prices repeated.
std::vector<DayForecast> rolling_persistence(const PricePanel& history, int first_day, int last_day,
                                             const RollingOptions& options);

/// Independent per-node kernel ridge on the time kernel labelled `label`.
std::vector<DayForecast> rolling_ridge(const PricePanel& history, const KernelSource& source, const std::string& label,
                                       double mu, int first_day, int last_day, const RollingOptions& options);

struct TuneResult {
    double best_mu = 0.0;
    std::vector<double> grid;
    std::vector<double> mean_rmse;
};

/// Causal grid search: mean rolling RMSE over target days
/// [first_day, last_day) for every μ, argmin returned (ties go to the
/// smaller μ).
TuneResult rolling_tune(const PricePanel& history, const KernelSource& source, const std::vector<double>& mu_grid,
                        int first_day, int last_day, const RollingOptions& options);
/// Same, over every day that has a full trailing window.
TuneResult rolling_tune(const PricePanel& history, const KernelSource& source, const std::vector<double>& mu_grid,
                        const RollingOptions& options);

/// Grid search for the ridge baseline's μ on the same causal folds.
TuneResult tune_ridge(const PricePanel& history, const KernelSource& source, const std::string& label,
                      const std::vector<double>& mu_grid, int first_day, int last_day, const RollingOptions& options);

double mean_rmse(const std::vector<DayForecast>& days);

}  // namespace mkprice
