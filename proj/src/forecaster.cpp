#include "mkprice/forecaster.hpp"

#include <cmath>

#include "mkprice/errors.hpp"

namespace mkprice {

namespace {

const Eigen::MatrixXd& find_cross(const std::vector<std::string>& labels, const std::vector<Eigen::MatrixXd>& mats,
                                  const std::string& label) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) {
            return mats[i];
        }
    }
    throw InputError("no cross kernel for '" + label + "'");
}

void check_labels(const std::vector<std::string>& cross_labels, const std::vector<FactorBlock>& blocks,
                  const char* family) {
    for (const auto& label : cross_labels) {
        bool known = false;
        for (const auto& b : blocks) {
            known = known || b.kernel_label == label;
        }
        require(known, std::string("unknown ") + family + " kernel label '" + label + "'");
    }
}

}  // namespace

CrossKernels training_cross(const ModelState& state) {
    CrossKernels c;
    for (const auto& k : state.node_kernels) {
        c.node_labels.push_back(k->label());
        c.node_cross.push_back(k->gram());
    }
    for (const auto& k : state.time_kernels) {
        c.time_labels.push_back(k->label());
        c.time_cross.push_back(k->gram());
    }
    return c;
}

Eigen::MatrixXd predict(const ModelState& state, const CrossKernels& cross) {
    require(cross.node_labels.size() == cross.node_cross.size() && cross.time_labels.size() == cross.time_cross.size(),
            "cross kernels: label and matrix counts differ");
    require(!cross.node_cross.empty() && !cross.time_cross.empty(), "cross kernels: empty family");
    check_labels(cross.node_labels, state.node_blocks, "node");
    check_labels(cross.time_labels, state.time_blocks, "time");

    const auto n_out = cross.node_cross.front().cols();
    const auto t_out = cross.time_cross.front().cols();
    Eigen::MatrixXd f_out = Eigen::MatrixXd::Zero(n_out, state.rank);
    for (const auto& b : state.node_blocks) {
        const auto& k = find_cross(cross.node_labels, cross.node_cross, b.kernel_label);
        require(k.rows() == b.coeffs.rows() && k.cols() == n_out,
                "node cross kernel '" + b.kernel_label + "' has the wrong shape");
        f_out.noalias() += k.transpose() * b.coeffs;
    }
    Eigen::MatrixXd h_out = Eigen::MatrixXd::Zero(t_out, state.rank);
    for (const auto& g : state.time_blocks) {
        const auto& k = find_cross(cross.time_labels, cross.time_cross, g.kernel_label);
        require(k.rows() == g.coeffs.rows() && k.cols() == t_out,
                "time cross kernel '" + g.kernel_label + "' has the wrong shape");
        h_out.noalias() += k.transpose() * g.coeffs;
    }
    return f_out * h_out.transpose();
}

double rmse(const Eigen::MatrixXd& forecast, const Eigen::MatrixXd& actual) {
    require(forecast.rows() == actual.rows() && forecast.cols() == actual.cols(), "rmse: shape mismatch");
    require(forecast.size() > 0, "rmse: empty matrices");
    return std::sqrt((forecast - actual).squaredNorm() / static_cast<double>(forecast.size()));
}

Eigen::MatrixXd persistence_forecast(const PricePanel& panel, Eigen::Index horizon) {
    const Eigen::Index p = panel.period;
    require(horizon > 0, "persistence: horizon must be positive");
    require(panel.hours() >= p, "persistence: needs at least " + std::to_string(p) + " hours of history");
    Eigen::MatrixXd out(panel.nodes(), horizon);
    const Eigen::Index start = panel.hours() - p;
    for (Eigen::Index h = 0; h < horizon; ++h) {
        out.col(h) = panel.prices.col(start + h % p);
    }
    return out;
}

Eigen::VectorXd kernel_ridge_coefficients(const Eigen::VectorXd& z, const KernelMatrix& g, double mu) {
    require(mu > 0.0, "kernel ridge: mu must be positive");
    require(z.size() == g.size(), "kernel ridge: series length differs from kernel size");
    const Eigen::VectorXd scale = (g.eigvals().array() + mu).inverse();
    return g.eigvecs() * scale.asDiagonal() * (g.eigvecs().transpose() * z);
}

Eigen::VectorXd kernel_ridge_forecast(const Eigen::VectorXd& z, const KernelMatrix& g, const Eigen::MatrixXd& g_cross,
                                      double mu) {
    require(g_cross.rows() == g.size(), "kernel ridge: cross kernel rows differ from kernel size");
    return g_cross.transpose() * kernel_ridge_coefficients(z, g, mu);
}

Eigen::MatrixXd kernel_ridge_forecast_rows(const Eigen::MatrixXd& z, const KernelMatrix& g,
                                           const Eigen::MatrixXd& g_cross, double mu) {
    require(mu > 0.0, "kernel ridge: mu must be positive");
    require(z.cols() == g.size() && g_cross.rows() == g.size(), "kernel ridge: dimension mismatch");
    const Eigen::VectorXd scale = (g.eigvals().array() + mu).inverse();
    const Eigen::MatrixXd a = (z * g.eigvecs()) * scale.asDiagonal() * g.eigvecs().transpose();
    return a * g_cross;
}

}  // namespace mkprice
