#pragma once

#include <filesystem>
#include <ostream>

#include "json.hpp"
#include "mkprice/config.hpp"
#include "mkprice/model_bundle.hpp"

namespace mkprice {

/// Fits on the trailing window and writes the bundle to <output_dir>/model.
/// Returns a JSON summary. The bundle is written even when the fit hit the
/// sweep cap; check state.converged.
ModelBundle run_fit(const RunConfig& cfg);

/// Tunes μ on the first `tune_days` target days, evaluates the remaining
/// days with all three methods and writes <output_dir>/evaluation.json plus
/// one folder of forecast CSVs per day.
nlohmann::json run_tune(const RunConfig& cfg);

/// Forecasts `horizon` hours after the training window of a saved model.
/// Writes forecast.csv (prices) and forecast_centered.csv into `out_dir`.
nlohmann::json run_predict(const std::filesystem::path& model_dir, int horizon, const std::filesystem::path& out_dir);

/// Writes a synthetic dataset plus a ready-to-use config.json.
nlohmann::json run_simulate(const RunConfig& cfg);

/// Recomputes RMSE tables from a tune run directory and writes report.json.
nlohmann::json run_report(const std::filesystem::path& run_dir);

/// Command-line entry point. Errors go to `err` as one JSON line.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace mkprice
