#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkprice/kernel_factory.hpp"

namespace mkprice {

enum class KernelType { regularized_laplacian, diffusion, gaussian, linear, identity, covariance };

KernelType parse_kernel_type(const std::string& name);
std::string to_string(KernelType type);

/// Declarative kernel specification, as read from a run configuration.
struct KernelRecipe {
    std::string label;
    KernelType type = KernelType::identity;
    double beta = 3.0;                    // diffusion only
    std::optional<double> bandwidth;      // gaussian only; empty means median heuristic
    std::vector<std::string> columns;     // gaussian / linear; empty means all columns
};

/// A finished training kernel plus its cross-kernel against the forecast
/// entities (training rows x target columns), normalized consistently.
struct BuiltKernel {
    KernelPtr kernel;
    Eigen::MatrixXd cross;
};

/// Data a node-kernel recipe may draw on. Pointers may be null when the
/// corresponding recipe types are not used.
struct NodeKernelInputs {
    const WeightedGraph* graph = nullptr;
    const FeatureTable* features = nullptr;
    /// Training-window prices, rows in `train_ids` order.
    const PricePanel* history = nullptr;
    std::vector<std::string> train_ids;
    std::vector<std::string> target_ids;
};

/// Builds a node kernel over `train_ids` and its cross-kernel to
/// `target_ids`. A target that is also a training node receives exactly the
/// training kernel's column.
BuiltKernel build_node_kernel(const KernelRecipe& recipe, const NodeKernelInputs& inputs);

/// Builds a time kernel from feature rows of the training hours and the
/// cross-kernel to the target hours. Standardization statistics come from
/// the training rows only.
BuiltKernel build_time_kernel(const KernelRecipe& recipe, const FeatureTable& train_rows,
                              const FeatureTable& target_rows);

}  // namespace mkprice
