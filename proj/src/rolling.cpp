#include "mkprice/rolling.hpp"

#include <algorithm>

#include "mkprice/errors.hpp"

namespace mkprice {

namespace {

std::vector<std::string> stamp_ids(const std::vector<Timestamp>& ts) {
    std::vector<std::string> ids;
    ids.reserve(ts.size());
    for (auto t : ts) {
        ids.push_back(format_timestamp(t));
    }
    return ids;
}

void check_recipes(const std::vector<KernelRecipe>& recipes, const char* family) {
    require(!recipes.empty(), std::string("no ") + family + " kernel recipes");
    for (std::size_t i = 0; i < recipes.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            require(recipes[i].label != recipes[j].label, "duplicate kernel label '" + recipes[i].label + "'");
        }
    }
}

// Everything one target day needs: the raw window, its centered version and
// the fold kernels.
struct Fold {
    DayForecast meta;
    PricePanel window;
    PricePanel centered;
    std::vector<Timestamp> target_hours;
};

Fold make_fold(const PricePanel& history, int day, const RollingOptions& options) {
    const Eigen::Index p = history.period;
    require(options.window_days >= 1, "window_days must be at least 1");
    require(day >= options.window_days, "day " + std::to_string(day) + " has no full training window");
    require(day < day_count(history), "day " + std::to_string(day) + " is beyond the history");
    Fold f;
    f.meta.day = day;
    f.meta.train_first = (day - options.window_days) * p;
    f.meta.train_count = options.window_days * p;
    f.meta.target_first = day * p;
    f.meta.target_count = p;
    f.meta.date = format_date(history.timestamps[static_cast<std::size_t>(f.meta.target_first)]);
    f.window = history.slice_hours(f.meta.train_first, f.meta.train_count);
    f.centered = center_prices(f.window);
    f.meta.actual = history.prices.middleCols(f.meta.target_first, p);
    f.target_hours.assign(history.timestamps.begin() + f.meta.target_first,
                          history.timestamps.begin() + f.meta.target_first + p);
    return f;
}

void check_days(const PricePanel& history, int first_day, int last_day, const RollingOptions& options) {
    history.validate();
    require(first_day >= options.window_days, "first evaluation day must follow a full training window");
    require(last_day > first_day, "empty evaluation range");
    require(last_day <= day_count(history), "evaluation range extends past the history");
}

Eigen::MatrixXd decenter_target(const Eigen::MatrixXd& centered, const Fold& f) {
    return decenter(centered, *f.centered.hourly_means, f.target_hours, f.window.period);
}

DayForecast multikernel_day(const Fold& f, const FoldKernels& k, double mu, const RollingOptions& options) {
    FitOptions fo = options.fit;
    fo.mu = mu;
    const auto state = fit(f.centered.prices, k.node, k.time, fo);
    DayForecast d = f.meta;
    d.mu = mu;
    d.forecast = decenter_target(predict(state, k.cross), f);
    d.rmse = rmse(d.forecast, d.actual);
    const auto sel = selected_kernels(state);
    d.node_selected = sel.node_mask;
    d.time_selected = sel.time_mask;
    d.converged = state.converged;
    d.sweeps = state.sweeps;
    return d;
}

std::size_t time_label_index(const FoldKernels& k, const std::string& label) {
    for (std::size_t i = 0; i < k.time.size(); ++i) {
        if (k.time[i]->label() == label) {
            return i;
        }
    }
    throw InputError("ridge baseline: no time kernel labelled '" + label + "'");
}

DayForecast ridge_day(const Fold& f, const FoldKernels& k, const std::string& label, double mu) {
    const auto i = time_label_index(k, label);
    DayForecast d = f.meta;
    d.mu = mu;
    d.forecast = decenter_target(kernel_ridge_forecast_rows(f.centered.prices, *k.time[i], k.cross.time_cross[i], mu), f);
    d.rmse = rmse(d.forecast, d.actual);
    return d;
}

std::size_t argmin_smallest_mu(const std::vector<double>& grid, const std::vector<double>& score) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (score[i] < score[best] || (score[i] == score[best] && grid[i] < grid[best])) {
            best = i;
        }
    }
    return best;
}

TuneResult grid_search(const PricePanel& history, const KernelSource& source, const std::vector<double>& mu_grid,
                       int first_day, int last_day, const RollingOptions& options, const std::string* ridge_label) {
    require(!mu_grid.empty(), "empty mu grid");
    for (double mu : mu_grid) {
        require(mu > 0.0, "mu grid values must be positive");
    }
    check_days(history, first_day, last_day, options);
    TuneResult r;
    r.grid = mu_grid;
    r.mean_rmse.assign(mu_grid.size(), 0.0);
    for (int day = first_day; day < last_day; ++day) {
        const auto f = make_fold(history, day, options);
        const auto k = source.build(f.window, f.target_hours);
        for (std::size_t g = 0; g < mu_grid.size(); ++g) {
            const auto d = ridge_label ? ridge_day(f, k, *ridge_label, mu_grid[g])
                                       : multikernel_day(f, k, mu_grid[g], options);
            r.mean_rmse[g] += d.rmse / static_cast<double>(last_day - first_day);
        }
    }
    r.best_mu = mu_grid[argmin_smallest_mu(mu_grid, r.mean_rmse)];
    return r;
}

}  // namespace

RecipeKernelSource::RecipeKernelSource(std::vector<KernelRecipe> node_recipes, std::vector<KernelRecipe> time_recipes,
                                       std::optional<WeightedGraph> graph, std::optional<FeatureTable> node_features,
                                       FeatureTable time_features)
    : node_recipes_(std::move(node_recipes)),
      time_recipes_(std::move(time_recipes)),
      graph_(std::move(graph)),
      node_features_(std::move(node_features)),
      time_features_(std::move(time_features)) {
    check_recipes(node_recipes_, "node");
    check_recipes(time_recipes_, "time");
    // Canonical spelling so lookups do not depend on how the file wrote them.
    for (auto& id : time_features_.entity_ids) {
        id = format_timestamp(parse_timestamp(id));
    }
    time_features_.validate();
}

FoldKernels RecipeKernelSource::build(const PricePanel& train_window, const std::vector<Timestamp>& target_hours) const {
    FoldKernels out;
    NodeKernelInputs in;
    in.graph = graph_ ? &*graph_ : nullptr;
    in.features = node_features_ ? &*node_features_ : nullptr;
    in.history = &train_window;
    in.train_ids = train_window.node_ids;
    in.target_ids = train_window.node_ids;
    for (const auto& r : node_recipes_) {
        auto built = build_node_kernel(r, in);
        out.cross.node_labels.push_back(r.label);
        out.cross.node_cross.push_back(std::move(built.cross));
        out.node.push_back(std::move(built.kernel));
    }
    const auto train_rows = time_features_.select_rows(stamp_ids(train_window.timestamps));
    const auto target_rows = time_features_.select_rows(stamp_ids(target_hours));
    for (const auto& r : time_recipes_) {
        auto built = build_time_kernel(r, train_rows, target_rows);
        out.cross.time_labels.push_back(r.label);
        out.cross.time_cross.push_back(std::move(built.cross));
        out.time.push_back(std::move(built.kernel));
    }
    return out;
}

Eigen::Index day_count(const PricePanel& history) {
    require(history.period > 0, "period must be positive");
    return history.hours() / history.period;
}

std::vector<DayForecast> rolling_forecasts(const PricePanel& history, const KernelSource& source, double mu,
                                           int first_day, int last_day, const RollingOptions& options) {
    check_days(history, first_day, last_day, options);
    std::vector<DayForecast> out;
    for (int day = first_day; day < last_day; ++day) {
        const auto f = make_fold(history, day, options);
        out.push_back(multikernel_day(f, source.build(f.window, f.target_hours), mu, options));
    }
    return out;
}

std::vector<DayForecast> rolling_persistence(const PricePanel& history, int first_day, int last_day,
                                             const RollingOptions& options) {
    check_days(history, first_day, last_day, options);
    std::vector<DayForecast> out;
    for (int day = first_day; day < last_day; ++day) {
        const auto f = make_fold(history, day, options);
        DayForecast d = f.meta;
        d.forecast = persistence_forecast(f.window, f.meta.target_count);
        d.rmse = rmse(d.forecast, d.actual);
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<DayForecast> rolling_ridge(const PricePanel& history, const KernelSource& source, const std::string& label,
                                       double mu, int first_day, int last_day, const RollingOptions& options) {
    check_days(history, first_day, last_day, options);
    std::vector<DayForecast> out;
    for (int day = first_day; day < last_day; ++day) {
        const auto f = make_fold(history, day, options);
        out.push_back(ridge_day(f, source.build(f.window, f.target_hours), label, mu));
    }
    return out;
}

TuneResult rolling_tune(const PricePanel& history, const KernelSource& source, const std::vector<double>& mu_grid,
                        int first_day, int last_day, const RollingOptions& options) {
    return grid_search(history, source, mu_grid, first_day, last_day, options, nullptr);
}

TuneResult rolling_tune(const PricePanel& history, const KernelSource& source, const std::vector<double>& mu_grid,
                        const RollingOptions& options) {
    require(day_count(history) > options.window_days,
            "history must cover the training window plus at least one evaluation day");
    return rolling_tune(history, source, mu_grid, options.window_days, static_cast<int>(day_count(history)), options);
}

TuneResult tune_ridge(const PricePanel& history, const KernelSource& source, const std::string& label,
                      const std::vector<double>& mu_grid, int first_day, int last_day, const RollingOptions& options) {
    return grid_search(history, source, mu_grid, first_day, last_day, options, &label);
}

double mean_rmse(const std::vector<DayForecast>& days) {
    require(!days.empty(), "mean rmse of no days");
    double s = 0.0;
    for (const auto& d : days) {
        s += d.rmse;
    }
    return s / static_cast<double>(days.size());
}

}  // namespace mkprice
