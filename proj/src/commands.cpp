#include "mkprice/commands.hpp"

#include <algorithm>
#include <cstdlib>

#include "CLI11.hpp"
#include "mkprice/csv_io.hpp"
#include "mkprice/errors.hpp"
#include "mkprice/forecaster.hpp"
#include "mkprice/rolling.hpp"

namespace mkprice {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kMethods[] = {"multikernel", "persistence", "ridge"};

PricePanel load_history(const RunConfig& cfg) {
    require(cfg.prices.has_value(), "config: 'prices' is required for this command");
    auto panel = load_price_csv(*cfg.prices, cfg.period);
    panel.validate();
    return panel;
}

RecipeKernelSource make_source(const RunConfig& cfg, const std::vector<std::string>& node_ids) {
    require(!cfg.node_kernels.empty() && !cfg.time_kernels.empty(),
            "config: at least one node kernel and one time kernel are required");
    require(cfg.time_features.has_value(), "config: 'time_features' is required");
    std::optional<WeightedGraph> graph;
    if (cfg.graph) graph = load_graph_csv(*cfg.graph, node_ids);
    std::optional<FeatureTable> node_features;
    if (cfg.node_features) node_features = load_feature_csv(*cfg.node_features);
    return RecipeKernelSource(cfg.node_kernels, cfg.time_kernels, std::move(graph), std::move(node_features),
                              load_feature_csv(*cfg.time_features));
}

FitOptions fit_options(const RunConfig& cfg) {
    FitOptions fo;
    fo.rank = cfg.rank;
    fo.eps_bcd = cfg.eps_bcd;
    fo.max_sweeps = cfg.max_sweeps;
    fo.seed = cfg.seed;
    fo.restarts = cfg.restarts;
    if (cfg.mu) fo.mu = *cfg.mu;
    return fo;
}

json bools(const std::vector<bool>& v) {
    json j = json::array();
    for (bool b : v) j.push_back(b);
    return j;
}

std::vector<std::string> labels_of(const std::vector<KernelRecipe>& recipes) {
    std::vector<std::string> out;
    for (const auto& r : recipes) out.push_back(r.label);
    return out;
}

// Subtracts every hour's cross-node mean.
Eigen::MatrixXd spatial_part(const Eigen::MatrixXd& m) {
    return m.rowwise() - m.colwise().mean();
}

void write_day(const fs::path& dir, const char* method, const DayForecast& d, const PricePanel& history) {
    const std::vector<Timestamp> hours(history.timestamps.begin() + d.target_first,
                                       history.timestamps.begin() + d.target_first + d.target_count);
    save_price_csv(dir / (std::string(method) + ".csv"), d.forecast, history.node_ids, hours);
}

json error_line(const char* kind, const std::string& message) {
    return json{{"error", kind}, {"message", message}};
}

}  // namespace

ModelBundle run_fit(const RunConfig& cfg) {
    require(cfg.mu.has_value(), "config: 'mu' is required for fit");
    const auto history = load_history(cfg);
    Eigen::Index end = history.hours();
    if (cfg.train_end) {
        const auto it = std::find(history.timestamps.begin(), history.timestamps.end(), *cfg.train_end);
        require(it != history.timestamps.end() || *cfg.train_end == history.timestamps.back() + std::chrono::hours(1),
                "train_end " + format_timestamp(*cfg.train_end) + " is outside the price history");
        end = it - history.timestamps.begin();
    }
    const Eigen::Index window = static_cast<Eigen::Index>(cfg.window_days) * cfg.period;
    require(end >= window, "price history is shorter than the " + std::to_string(cfg.window_days) + "-day window");
    const auto raw = history.slice_hours(end - window, window);
    const auto centered = center_prices(raw);
    const auto source = make_source(cfg, history.node_ids);
    const auto kernels = source.build(raw, {});

    ModelBundle b;
    b.state = fit(centered.prices, kernels.node, kernels.time, fit_options(cfg));
    b.node_ids = raw.node_ids;
    b.timestamps = raw.timestamps;
    b.period = raw.period;
    b.hourly_means = *centered.hourly_means;
    b.training_data = centered.prices;
    b.training_prices = raw.prices;
    b.config = cfg.to_json();
    save_model_bundle(cfg.output_dir / "model", b);
    return b;
}

json run_tune(const RunConfig& cfg) {
    const auto history = load_history(cfg);
    const auto source = make_source(cfg, history.node_ids);
    RollingOptions ro;
    ro.window_days = cfg.window_days;
    ro.fit = fit_options(cfg);

    const int days = static_cast<int>(day_count(history));
    const int tune_first = cfg.window_days;
    const int eval_first = tune_first + cfg.tune_days;
    require(eval_first < days, "history has " + std::to_string(days) + " days; need " +
                                   std::to_string(eval_first + 1) + " for the window, tuning and one evaluation day");
    std::vector<double> grid = cfg.mu_grid;
    if (grid.empty() && cfg.mu) grid = {*cfg.mu};
    require(!grid.empty(), "config: 'mu_grid' or 'mu' is required for tune");
    const std::string ridge_label = cfg.ridge_kernel.empty() ? cfg.time_kernels.front().label : cfg.ridge_kernel;

    const auto tuned = rolling_tune(history, source, grid, tune_first, eval_first, ro);
    const auto ridge_tuned = tune_ridge(history, source, ridge_label, cfg.ridge_mu_grid, tune_first, eval_first, ro);

    const auto mk = rolling_forecasts(history, source, tuned.best_mu, eval_first, days, ro);
    const auto pers = rolling_persistence(history, eval_first, days, ro);
    const auto ridge = rolling_ridge(history, source, ridge_label, ridge_tuned.best_mu, eval_first, days, ro);

    json day_list = json::array();
    for (std::size_t i = 0; i < mk.size(); ++i) {
        const auto dir = cfg.output_dir / "days" / mk[i].date;
        fs::create_directories(dir);
        const std::vector<Timestamp> hours(history.timestamps.begin() + mk[i].target_first,
                                           history.timestamps.begin() + mk[i].target_first + mk[i].target_count);
        save_price_csv(dir / "actual.csv", mk[i].actual, history.node_ids, hours);
        write_day(dir, "multikernel", mk[i], history);
        write_day(dir, "persistence", pers[i], history);
        write_day(dir, "ridge", ridge[i], history);
        day_list.push_back({{"day", mk[i].day},
                            {"date", mk[i].date},
                            {"train_first_hour", format_timestamp(history.timestamps[static_cast<std::size_t>(mk[i].train_first)])},
                            {"train_hours", mk[i].train_count},
                            {"target_first_hour", format_timestamp(hours.front())},
                            {"rmse", {{"multikernel", mk[i].rmse}, {"persistence", pers[i].rmse}, {"ridge", ridge[i].rmse}}},
                            {"selected", {{"node", bools(mk[i].node_selected)}, {"time", bools(mk[i].time_selected)}}},
                            {"converged", mk[i].converged},
                            {"sweeps", mk[i].sweeps}});
    }
    json ev = {{"mu_grid", tuned.grid},
               {"tune_rmse", tuned.mean_rmse},
               {"selected_mu", tuned.best_mu},
               {"ridge_kernel", ridge_label},
               {"ridge_mu_grid", ridge_tuned.grid},
               {"ridge_tune_rmse", ridge_tuned.mean_rmse},
               {"ridge_mu", ridge_tuned.best_mu},
               {"node_kernels", labels_of(cfg.node_kernels)},
               {"time_kernels", labels_of(cfg.time_kernels)},
               {"window_days", cfg.window_days},
               {"tune_days", cfg.tune_days},
               {"days", day_list},
               {"mean_rmse",
                {{"multikernel", mean_rmse(mk)}, {"persistence", mean_rmse(pers)}, {"ridge", mean_rmse(ridge)}}}};
    write_text_file(cfg.output_dir / "evaluation.json", ev.dump(2) + "\n");
    return ev;
}

json run_predict(const fs::path& model_dir, int horizon, const fs::path& out_dir) {
    require(horizon >= 1, "horizon must be at least 1");
    const auto b = load_model_bundle(model_dir);
    require(b.config.is_object(), "model at " + model_dir.string() + " has no stored configuration");
    const auto cfg = parse_config_json(b.config, model_dir);

    PricePanel window;
    window.prices = b.training_prices;
    window.node_ids = b.node_ids;
    window.timestamps = b.timestamps;
    window.period = b.period;
    window.validate();
    const auto target = hour_range(b.timestamps.back() + std::chrono::hours(1), horizon);
    const auto kernels = make_source(cfg, b.node_ids).build(window, target);

    const Eigen::MatrixXd centered = predict(b.state, kernels.cross);
    const Eigen::MatrixXd prices = decenter(centered, b.hourly_means, target, b.period);
    save_price_csv(out_dir / "forecast_centered.csv", centered, b.node_ids, target);
    save_price_csv(out_dir / "forecast.csv", prices, b.node_ids, target);
    return {{"forecast", (out_dir / "forecast.csv").string()},
            {"forecast_centered", (out_dir / "forecast_centered.csv").string()},
            {"first_hour", format_timestamp(target.front())},
            {"hours", horizon},
            {"nodes", b.node_ids.size()}};
}

json run_simulate(const RunConfig& cfg) {
    require(cfg.simulation.has_value(), "config: 'simulation' section is required for simulate");
    const auto& sim = *cfg.simulation;
    const auto m = generate_synthetic_market(sim.spec);
    const auto& dir = cfg.output_dir;
    fs::create_directories(dir);
    save_price_csv(dir / "prices.csv", m.panel.prices, m.panel.node_ids, m.panel.timestamps);
    save_feature_csv(dir / "node_features.csv", m.node_features);
    save_feature_csv(dir / "time_features.csv", m.time_features);
    save_graph_csv(dir / "graph.csv", m.graph);

    json planted_node = json::array(), planted_time = json::array();
    for (std::size_t i = 0; i < m.truth.node_blocks.size(); ++i) {
        if (m.truth.node_gate_open[i]) planted_node.push_back(m.truth.node_blocks[i].kernel_label);
    }
    for (std::size_t i = 0; i < m.truth.time_blocks.size(); ++i) {
        if (m.truth.time_gate_open[i]) planted_time.push_back(m.truth.time_blocks[i].kernel_label);
    }
    json truth = {{"simulation", cfg.to_json()["simulation"]},
                  {"planted_node_kernels", planted_node},
                  {"planted_time_kernels", planted_time},
                  {"noise_std", m.noise_std},
                  {"signal_rms", std::sqrt(m.signal.squaredNorm() / static_cast<double>(m.signal.size()))},
                  {"profile", std::vector<double>(m.profile.data(), m.profile.data() + m.profile.size())}};
    write_text_file(dir / "truth.json", truth.dump(2) + "\n");

    json run = {{"prices", "prices.csv"},
                {"node_features", "node_features.csv"},
                {"time_features", "time_features.csv"},
                {"graph", "graph.csv"},
                {"output_dir", "run"},
                {"node_kernels", json::array()},
                {"time_kernels", json::array()},
                {"rank", cfg.rank},
                {"mu_grid", cfg.mu_grid.empty() ? std::vector<double>{0.001, 0.01, 0.1, 1.0, 10.0} : cfg.mu_grid},
                {"eps_bcd", cfg.eps_bcd},
                {"max_sweeps", cfg.max_sweeps},
                {"window_days", cfg.window_days},
                {"period", sim.spec.period},
                {"seed", cfg.seed},
                {"restarts", cfg.restarts},
                {"tune_days", cfg.tune_days}};
    if (cfg.mu) run["mu"] = *cfg.mu;
    for (const auto& r : m.node_recipes) run["node_kernels"].push_back(recipe_to_json(r));
    for (const auto& r : m.time_recipes) run["time_kernels"].push_back(recipe_to_json(r));
    write_text_file(dir / "config.json", run.dump(2) + "\n");
    return {{"output_dir", dir.string()},
            {"nodes", m.panel.nodes()},
            {"hours", m.panel.hours()},
            {"planted_node_kernels", planted_node},
            {"planted_time_kernels", planted_time}};
}

json run_report(const fs::path& run_dir) {
    const auto ev_path = run_dir / "evaluation.json";
    require(fs::is_regular_file(ev_path), "no evaluation.json in " + run_dir.string());
    json ev;
    try {
        ev = json::parse(read_text_file(ev_path));
    } catch (const json::exception& e) {
        throw InputError("evaluation.json: " + std::string(e.what()));
    }
    require(ev.contains("days") && ev["days"].is_array() && !ev["days"].empty(), "evaluation.json lists no days");

    json days = json::array();
    json totals = json::object(), totals_c = json::object();
    std::vector<std::string> dates;
    std::vector<std::vector<bool>> node_grid, time_grid;
    for (const auto& d : ev["days"]) {
        const auto date = d.at("date").get<std::string>();
        const auto dir = run_dir / "days" / date;
        const auto actual = load_price_csv(dir / "actual.csv");
        json rm = json::object(), rc = json::object();
        for (const char* method : kMethods) {
            if (!fs::is_regular_file(dir / (std::string(method) + ".csv"))) continue;
            const auto f = load_price_csv(dir / (std::string(method) + ".csv"));
            require(f.node_ids == actual.node_ids && f.timestamps == actual.timestamps,
                    std::string(method) + " forecast for " + date + " does not align with the actuals");
            rm[method] = rmse(f.prices, actual.prices);
            rc[method] = rmse(spatial_part(f.prices), spatial_part(actual.prices));
            totals[method] = totals.value(method, 0.0) + rm[method].get<double>();
            totals_c[method] = totals_c.value(method, 0.0) + rc[method].get<double>();
        }
        days.push_back({{"date", date}, {"rmse", rm}, {"rmse_centered", rc}});
        dates.push_back(date);
        if (d.contains("selected")) {
            node_grid.push_back(d["selected"].value("node", std::vector<bool>{}));
            time_grid.push_back(d["selected"].value("time", std::vector<bool>{}));
        }
    }
    const double n = static_cast<double>(days.size());
    for (auto& item : totals.items()) item.value() = item.value().get<double>() / n;
    for (auto& item : totals_c.items()) item.value() = item.value().get<double>() / n;

    // Rows are kernels, columns are days.
    auto transpose = [&](const std::vector<std::vector<bool>>& by_day, std::size_t rows) {
        json grid = json::array();
        for (std::size_t k = 0; k < rows; ++k) {
            json row = json::array();
            for (const auto& day : by_day) row.push_back(k < day.size() && day[k]);
            grid.push_back(row);
        }
        return grid;
    };
    const auto node_labels = ev.value("node_kernels", std::vector<std::string>{});
    const auto time_labels = ev.value("time_kernels", std::vector<std::string>{});
    json report = {{"days", days},
                   {"mean_rmse", totals},
                   {"mean_rmse_centered", totals_c},
                   {"selected_mu", ev.value("selected_mu", 0.0)},
                   {"ridge_mu", ev.value("ridge_mu", 0.0)},
                   {"kernel_selection",
                    {{"dates", dates},
                     {"node_kernels", node_labels},
                     {"time_kernels", time_labels},
                     {"node", transpose(node_grid, node_labels.size())},
                     {"time", transpose(time_grid, time_labels.size())}}}};
    write_text_file(run_dir / "report.json", report.dump(2) + "\n");
    return report;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-kernel low-rank electricity price forecasting"};
    app.require_subcommand(1);
    std::string config_path, model_dir, out_dir, run_dir;
    int horizon = 24;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model on the trailing training window");
    fit_cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
    auto* tune_cmd = app.add_subcommand("tune", "Tune mu on rolling folds and evaluate against the baselines");
    tune_cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
    auto* predict_cmd = app.add_subcommand("predict", "Forecast the hours after a saved model's window");
    predict_cmd->add_option("--model", model_dir, "Model directory written by fit")->required();
    predict_cmd->add_option("--horizon", horizon, "Hours to forecast")->capture_default_str();
    predict_cmd->add_option("--out", out_dir, "Output directory (defaults to the model directory)");
    auto* sim_cmd = app.add_subcommand("simulate", "Write a synthetic market dataset");
    sim_cmd->add_option("--config", config_path, "Run configuration with a 'simulation' section")->required();
    auto* report_cmd = app.add_subcommand("report", "Summarize a tune run");
    report_cmd->add_option("--run", run_dir, "Directory written by tune")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << error_line("usage_error", e.what()).dump() << "\n";
        return 2;
    }

    if (const char* threads = std::getenv("MKPRICE_THREADS")) {
        const int n = std::atoi(threads);
        if (n > 0) Eigen::setNbThreads(n);
    }

    try {
        if (*fit_cmd) {
            const auto b = run_fit(parse_config(config_path));
            const auto sel = selected_kernels(b.state);
            out << json{{"model_dir", (parse_config(config_path).output_dir / "model").string()},
                        {"converged", b.state.converged},
                        {"sweeps", b.state.sweeps},
                        {"objective", b.state.cost_trace.back()},
                        {"cost_trace", b.state.cost_trace},
                        {"selected_node_kernels", sel.node},
                        {"selected_time_kernels", sel.time}}
                       .dump()
                << "\n";
            if (!b.state.converged) {
                err << error_line("convergence_error", "BCD stopped at the sweep cap without converging").dump() << "\n";
                return 1;
            }
        } else if (*tune_cmd) {
            const auto ev = run_tune(parse_config(config_path));
            out << json{{"selected_mu", ev["selected_mu"]}, {"ridge_mu", ev["ridge_mu"]}, {"mean_rmse", ev["mean_rmse"]}}
                       .dump()
                << "\n";
        } else if (*predict_cmd) {
            out << run_predict(model_dir, horizon, out_dir.empty() ? fs::path(model_dir) : fs::path(out_dir)).dump()
                << "\n";
        } else if (*sim_cmd) {
            out << run_simulate(parse_config(config_path)).dump() << "\n";
        } else if (*report_cmd) {
            const auto r = run_report(run_dir);
            out << json{{"mean_rmse", r["mean_rmse"]}, {"mean_rmse_centered", r["mean_rmse_centered"]}}.dump() << "\n";
        }
    } catch (const InputError& e) {
        err << error_line("input_error", e.what()).dump() << "\n";
        return 2;
    } catch (const ConvergenceError& e) {
        err << error_line("convergence_error", e.what()).dump() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << error_line("input_error", e.what()).dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << error_line("internal_error", e.what()).dump() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace mkprice
