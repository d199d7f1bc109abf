#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkprice/bcd_engine.hpp"
#include "mkprice/price_panel.hpp"

namespace mkprice {

/// Kernel evaluations between training entities (rows) and forecast
/// entities (columns), one matrix per kernel label.
struct CrossKernels {
    std::vector<std::string> node_labels;
    std::vector<Eigen::MatrixXd> node_cross;  // N x N'
    std::vector<std::string> time_labels;
    std::vector<Eigen::MatrixXd> time_cross;  // T x T'
};

/// Cross kernels that point back at the training entities themselves.
CrossKernels training_cross(const ModelState& state);

/// P' = F' H'^T with F' = sum_l K'_l^T B_l and H' = sum_m G'_m^T Gamma_m.
/// The result is N' x T' and lives on the centered scale.
Eigen::MatrixXd predict(const ModelState& state, const CrossKernels& cross);

double rmse(const Eigen::MatrixXd& forecast, const Eigen::MatrixXd& actual);

/// Repeats the last `period` observed hours of every node across `horizon`
/// hours.
Eigen::MatrixXd persistence_forecast(const PricePanel& panel, Eigen::Index horizon = 24);

/// Kernel ridge coefficients a = (G + mu I)^{-1} z.
Eigen::VectorXd kernel_ridge_coefficients(const Eigen::VectorXd& z, const KernelMatrix& g, double mu);

/// (G')^T a with a from kernel_ridge_coefficients.
Eigen::VectorXd kernel_ridge_forecast(const Eigen::VectorXd& z, const KernelMatrix& g, const Eigen::MatrixXd& g_cross,
                                      double mu);

/// Row-wise kernel ridge: every row of `z` (one node's series) gets its own
/// independent predictor sharing the kernel G. Returns rows x T'.
Eigen::MatrixXd kernel_ridge_forecast_rows(const Eigen::MatrixXd& z, const KernelMatrix& g,
                                           const Eigen::MatrixXd& g_cross, double mu);

}  // namespace mkprice
