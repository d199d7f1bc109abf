#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mkprice/bcd_engine.hpp"
#include "mkprice/timestamps.hpp"

namespace mkprice {

/// A fitted model plus what is needed to forecast from it later.
struct ModelBundle {
    ModelState state;
    std::vector<std::string> node_ids;
    std::vector<Timestamp> timestamps;  // training hours
    int period = 24;
    Eigen::VectorXd hourly_means;
    Eigen::MatrixXd training_data;    // centered
    Eigen::MatrixXd training_prices;  // as observed
    nlohmann::json config;            // resolved run configuration, may be null
};

/// Directory layout:
///   manifest.json
///   node_block_<l>.csv, time_block_<m>.csv, node_kernel_<l>.csv, time_kernel_<m>.csv
///   training_data.csv, training_prices.csv
/// No wall-clock data is written, so identical fits give identical files.
void save_model_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);

/// Inverse of save_model_bundle. Kernels are restored exactly as stored.
ModelBundle load_model_bundle(const std::filesystem::path& dir);

}  // namespace mkprice
