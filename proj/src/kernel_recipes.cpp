#include "mkprice/kernel_recipes.hpp"

#include <cmath>
#include <unordered_map>

#include "mkprice/errors.hpp"

namespace mkprice {

namespace {

std::vector<std::ptrdiff_t> locate(const std::vector<std::string>& ids, const std::vector<std::string>& pool,
                                   bool required, const std::string& what) {
    std::unordered_map<std::string, std::ptrdiff_t> index;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        index.emplace(pool[i], static_cast<std::ptrdiff_t>(i));
    }
    std::vector<std::ptrdiff_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) {
            require(!required, what + ": unknown entity '" + id + "'");
            out.push_back(-1);
        } else {
            out.push_back(it->second);
        }
    }
    return out;
}

// Jitter, normalize to unit diagonal, and normalize the cross-kernel with the
// same per-entity scales. `self` holds k(y, y) for every target y.
BuiltKernel finalize(const std::string& label, Eigen::MatrixXd gram, const Eigen::MatrixXd& raw_cross,
                     const Eigen::VectorXd& self, const std::vector<std::ptrdiff_t>& target_in_train) {
    const KernelMatrix raw = KernelMatrix::from_gram(label, std::move(gram));
    const Eigen::VectorXd diag = raw.gram().diagonal();
    BuiltKernel out;
    out.kernel = share(normalize_unit_diagonal(raw));
    out.cross.resize(diag.size(), static_cast<Eigen::Index>(target_in_train.size()));
    for (std::size_t j = 0; j < target_in_train.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        if (target_in_train[j] >= 0) {
            out.cross.col(col) = out.kernel->gram().col(target_in_train[j]);
        } else if (self(col) > 0.0) {
            out.cross.col(col) = raw_cross.col(col).cwiseQuotient(diag.cwiseSqrt()) / std::sqrt(self(col));
        } else {
            out.cross.col(col).setZero();
        }
    }
    return out;
}

// Standardize with training statistics, keep the recipe's columns, encode.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> prepared_features(const KernelRecipe& recipe, const FeatureTable& train,
                                                             const FeatureTable& target) {
    const auto scaler = FeatureScaler::fit(train.select_columns(recipe.columns));
    const auto a = scaler.transform(train.select_columns(recipe.columns));
    const auto b = scaler.transform(target.select_columns(recipe.columns));
    require(!a.columns.empty(), "kernel '" + recipe.label + "': no usable feature columns");
    return encode_features(a, b);
}

BuiltKernel feature_kernel(const KernelRecipe& recipe, const FeatureTable& train, const FeatureTable& target,
                           const std::vector<std::ptrdiff_t>& target_in_train) {
    auto [x, y] = prepared_features(recipe, train, target);
    if (recipe.type == KernelType::gaussian) {
        const double h = recipe.bandwidth ? *recipe.bandwidth : median_sq_bandwidth(x);
        require(h > 0.0, "kernel '" + recipe.label + "': bandwidth must be positive");
        return finalize(recipe.label, gaussian_gram(x, x, h), gaussian_gram(x, y, h),
                        Eigen::VectorXd::Ones(y.rows()), target_in_train);
    }
    return finalize(recipe.label, x * x.transpose(), x * y.transpose(), y.rowwise().squaredNorm(), target_in_train);
}

}  // namespace

KernelType parse_kernel_type(const std::string& name) {
    if (name == "regularized_laplacian") return KernelType::regularized_laplacian;
    if (name == "diffusion") return KernelType::diffusion;
    if (name == "gaussian") return KernelType::gaussian;
    if (name == "linear") return KernelType::linear;
    if (name == "identity") return KernelType::identity;
    if (name == "covariance") return KernelType::covariance;
    throw InputError("unknown kernel type '" + name + "'");
}

std::string to_string(KernelType type) {
    switch (type) {
        case KernelType::regularized_laplacian: return "regularized_laplacian";
        case KernelType::diffusion: return "diffusion";
        case KernelType::gaussian: return "gaussian";
        case KernelType::linear: return "linear";
        case KernelType::identity: return "identity";
        case KernelType::covariance: return "covariance";
    }
    return "unknown";
}

BuiltKernel build_node_kernel(const KernelRecipe& recipe, const NodeKernelInputs& in) {
    require(!in.train_ids.empty(), "node kernel '" + recipe.label + "': no training nodes");
    const auto target_in_train = locate(in.target_ids, in.train_ids, false, recipe.label);
    const auto n = static_cast<Eigen::Index>(in.train_ids.size());
    const auto n_target = static_cast<Eigen::Index>(in.target_ids.size());

    switch (recipe.type) {
        case KernelType::regularized_laplacian:
        case KernelType::diffusion: {
            require(in.graph != nullptr, "node kernel '" + recipe.label + "' needs a graph");
            const auto train_idx = locate(in.train_ids, in.graph->node_ids, true, "graph for '" + recipe.label + "'");
            const auto target_idx = locate(in.target_ids, in.graph->node_ids, true, "graph for '" + recipe.label + "'");
            const Eigen::MatrixXd lap = build_graph_laplacian(*in.graph);
            const KernelMatrix full = recipe.type == KernelType::diffusion
                                          ? diffusion_kernel(lap, recipe.beta, recipe.label)
                                          : regularized_laplacian_kernel(lap, recipe.label);
            Eigen::MatrixXd gram(n, n), cross(n, n_target);
            Eigen::VectorXd self(n_target);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    gram(i, j) = full.gram()(train_idx[static_cast<std::size_t>(i)], train_idx[static_cast<std::size_t>(j)]);
                }
                for (Eigen::Index j = 0; j < n_target; ++j) {
                    cross(i, j) = full.gram()(train_idx[static_cast<std::size_t>(i)], target_idx[static_cast<std::size_t>(j)]);
                }
            }
            for (Eigen::Index j = 0; j < n_target; ++j) {
                const auto t = target_idx[static_cast<std::size_t>(j)];
                self(j) = full.gram()(t, t);
            }
            return finalize(recipe.label, std::move(gram), cross, self, target_in_train);
        }
        case KernelType::gaussian:
        case KernelType::linear: {
            require(in.features != nullptr, "node kernel '" + recipe.label + "' needs node features");
            return feature_kernel(recipe, in.features->select_rows(in.train_ids), in.features->select_rows(in.target_ids),
                                  target_in_train);
        }
        case KernelType::identity: {
            return finalize(recipe.label, Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, n_target),
                            Eigen::VectorXd::Ones(n_target), target_in_train);
        }
        case KernelType::covariance: {
            require(in.history != nullptr, "node kernel '" + recipe.label + "' needs price history");
            require(in.history->node_ids == in.train_ids, "covariance kernel: history rows differ from training nodes");
            for (auto idx : target_in_train) {
                require(idx >= 0, "covariance kernel '" + recipe.label + "' cannot extrapolate to nodes without history");
            }
            BuiltKernel out;
            out.kernel = share(empirical_covariance_kernel(*in.history, recipe.label));
            out.cross.resize(n, n_target);
            for (Eigen::Index j = 0; j < n_target; ++j) {
                out.cross.col(j) = out.kernel->gram().col(target_in_train[static_cast<std::size_t>(j)]);
            }
            return out;
        }
    }
    throw InputError("unsupported node kernel type");
}

BuiltKernel build_time_kernel(const KernelRecipe& recipe, const FeatureTable& train_rows,
                              const FeatureTable& target_rows) {
    require(recipe.type == KernelType::gaussian || recipe.type == KernelType::linear ||
                recipe.type == KernelType::identity,
            "time kernel '" + recipe.label + "': type " + to_string(recipe.type) + " is not available for time");
    const auto target_in_train = locate(target_rows.entity_ids, train_rows.entity_ids, false, recipe.label);
    if (recipe.type == KernelType::identity) {
        const auto n = static_cast<Eigen::Index>(train_rows.rows());
        const auto m = static_cast<Eigen::Index>(target_rows.rows());
        return finalize(recipe.label, Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, m),
                        Eigen::VectorXd::Ones(m), target_in_train);
    }
    return feature_kernel(recipe, train_rows, target_rows, target_in_train);
}

}  // namespace mkprice
