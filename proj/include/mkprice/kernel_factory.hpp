#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mkprice/price_panel.hpp"

namespace mkprice {

/// Undirected weighted graph over an ordered node list. Each edge is stored
/// once and read symmetrically.
struct WeightedGraph {
    struct Edge {
        std::size_t src;
        std::size_t dst;
        double weight;
    };
    std::vector<std::string> node_ids;
    std::vector<Edge> edges;

    // No self-loops, nonnegative weights, indices in range.
    void validate() const;
    Eigen::MatrixXd adjacency() const;
};

/// One named feature column. Categorical columns hold string levels and are
/// one-hot encoded before any kernel evaluation.
struct FeatureColumn {
    std::string name;
    bool categorical = false;
    std::vector<double> numeric;
    std::vector<std::string> levels;

    std::size_t size() const { return categorical ? levels.size() : numeric.size(); }
};

struct FeatureTable {
    std::vector<std::string> entity_ids;
    std::vector<FeatureColumn> columns;
    bool standardized = false;

    void validate() const;
    std::size_t rows() const { return entity_ids.size(); }

    /// Rows for the given entity ids, in that order. Throws InputError on an
    /// unknown id.
    FeatureTable select_rows(const std::vector<std::string>& ids) const;
    /// Columns by name; an empty list keeps every column.
    FeatureTable select_columns(const std::vector<std::string>& names) const;
};

/// Numeric matrices for a pair of tables with identical column layout.
/// Categorical columns are one-hot encoded over the union of their levels so
/// that both outputs share one coordinate system.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_features(const FeatureTable& a, const FeatureTable& b);
Eigen::MatrixXd encode_features(const FeatureTable& f);

/// Symmetric positive-definite Gram matrix with its cached eigensystem.
///
/// Construction validates symmetry, eigendecomposes once, and (optionally)
/// lifts the spectrum when the matrix is numerically singular: if
/// lambda_min <= 1e-8 lambda_max, the diagonal is shifted by
/// 1e-8 lambda_max - lambda_min + 1e-12. Instances are immutable and are
/// shared through `KernelPtr`.
class KernelMatrix {
public:
    static KernelMatrix from_gram(std::string label, Eigen::MatrixXd gram, bool allow_jitter = true);

    const std::string& label() const { return label_; }
    const Eigen::MatrixXd& gram() const { return gram_; }
    /// Columns are eigenvectors matching `eigvals()`, which are nonincreasing.
    const Eigen::MatrixXd& eigvecs() const { return eigvecs_; }
    const Eigen::VectorXd& eigvals() const { return eigvals_; }
    double jitter() const { return jitter_; }
    Eigen::Index size() const { return gram_.rows(); }

    /// K^{1/2} X via the cached eigensystem.
    Eigen::MatrixXd sqrt_times(const Eigen::MatrixXd& x) const;

private:
    KernelMatrix() = default;

    std::string label_;
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd eigvecs_;
    Eigen::VectorXd eigvals_;
    double jitter_ = 0.0;
};

using KernelPtr = std::shared_ptr<const KernelMatrix>;

KernelPtr share(KernelMatrix k);

/// Normalized Laplacian I - D^{-1/2} A D^{-1/2}. Isolated nodes get L_ii = 1
/// and zero off-diagonals.
Eigen::MatrixXd build_graph_laplacian(const WeightedGraph& g);

/// (L + I)^{-1}.
KernelMatrix regularized_laplacian_kernel(const Eigen::MatrixXd& laplacian, std::string label = "regularized_laplacian");

/// exp(-beta L), evaluated in the eigenbasis of L.
KernelMatrix diffusion_kernel(const Eigen::MatrixXd& laplacian, double beta = 3.0, std::string label = "diffusion");

/// Median over all pairwise squared Euclidean distances between entities
/// (mean of the two central values for an even count).
double median_sq_bandwidth(const FeatureTable& f);
double median_sq_bandwidth(const Eigen::MatrixXd& points);

/// exp(-||x_i - x_j||^2 / bandwidth).
KernelMatrix gaussian_kernel(const FeatureTable& f, double bandwidth, std::string label = "gaussian");
Eigen::MatrixXd gaussian_gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth);

/// Sample covariance between nodes (rows) over the panel's hours, then
/// jitter and unit-diagonal normalization.
KernelMatrix empirical_covariance_kernel(const PricePanel& history, std::string label = "covariance");

/// K(i,j) / sqrt(K(i,i) K(j,j)). No jitter is applied to the result.
KernelMatrix normalize_unit_diagonal(const KernelMatrix& k);

/// Column-wise mean/variance scaling fitted on one table and applied to
/// others. Variance uses the 1/n normalization. Zero-variance numeric
/// columns are dropped; categorical columns pass through.
class FeatureScaler {
public:
    static FeatureScaler fit(const FeatureTable& f);
    FeatureTable transform(const FeatureTable& f) const;
    const std::vector<std::string>& dropped() const { return dropped_; }

private:
    struct ColumnStats {
        std::string name;
        double mean;
        double scale;
    };
    std::vector<ColumnStats> stats_;
    std::vector<std::string> dropped_;
};

FeatureTable standardize_features(const FeatureTable& f);

/// Edge list with header `src,dst,weight`; src/dst are node ids that must
/// appear in `node_ids`.
WeightedGraph load_graph_csv(const std::filesystem::path& path, const std::vector<std::string>& node_ids);
void save_graph_csv(const std::filesystem::path& path, const WeightedGraph& g);

/// First column entity id; remaining columns features. Columns whose header
/// starts with `cat:` are categorical (the prefix is kept in the name).
FeatureTable load_feature_csv(const std::filesystem::path& path);
void save_feature_csv(const std::filesystem::path& path, const FeatureTable& f);

}  // namespace mkprice
