#pragma once

#include <Eigen/Dense>

#include "mkprice/kernel_factory.hpp"

namespace mkprice {

/// The convex subproblem
///
///     min_X  ||A - B X C^T||_F^2 + mu ||X||_B,    ||X||_B = sqrt(tr(X^T B X)),
///
/// with A (d1 x d3), B (d1 x d1) positive definite, C (d3 x d2), mu > 0.
///
/// Only the products AC (d1 x d2) and C^T C (d2 x d2) enter the solution, so
/// the instance stores those. Spectral caches:
///   - B = U diag(lambda) U^T, taken from the shared KernelMatrix;
///   - C^T C = V diag(m) V^T, computed here;
///   - projected data P = U^T (AC) V.
/// In these coordinates P_ij = sqrt(m_j) W_ij where W = U^T A U_C is written
/// over the nonzero eigenpairs of C C^T, so the univariate dual only needs P.
class CanonicalInstance {
public:
    CanonicalInstance(const Eigen::MatrixXd& a, KernelPtr b, const Eigen::MatrixXd& c, double mu);

    /// Builds directly from AC and C^T C, skipping the d1 x d3 product.
    static CanonicalInstance from_products(Eigen::MatrixXd ac, KernelPtr b, Eigen::MatrixXd ctc, double mu);

    double mu() const { return mu_; }
    const KernelMatrix& kernel() const { return *b_; }
    const Eigen::MatrixXd& ac() const { return ac_; }
    const Eigen::MatrixXd& ctc() const { return ctc_; }
    /// Eigenvalues of C^T C, nonincreasing; values below 1e-12 of the largest
    /// are set to exactly zero and excluded from the univariate sums.
    const Eigen::VectorXd& ctc_eigvals() const { return m_; }
    const Eigen::MatrixXd& ctc_eigvecs() const { return v_; }
    const Eigen::MatrixXd& projected() const { return p_; }

    Eigen::Index rows() const { return ac_.rows(); }
    Eigen::Index cols() const { return ac_.cols(); }

private:
    CanonicalInstance() = default;
    void build_caches();

    KernelPtr b_;
    Eigen::MatrixXd ac_;
    Eigen::MatrixXd ctc_;
    double mu_ = 0.0;
    Eigen::VectorXd m_;
    Eigen::MatrixXd v_;
    Eigen::MatrixXd p_;
};

struct GateResult {
    double value = 0.0;  // ||B^{1/2} A C||_F
    bool is_zero = true; // value <= mu / 2
};

GateResult frob_gate(const CanonicalInstance& inst);

struct SValue {
    double value = 0.0;
    double derivative = 0.0;
};

/// s(w) = w - sum_ij W_ij^2 lambda_i m_j w / (lambda_i m_j w + mu^2/4) and
/// its derivative, summed over nonzero m_j.
SValue s_value_and_derivative(double w, const CanonicalInstance& inst);

struct UnivariateResult {
    double w = 0.0;
    int iterations = 0;
};

/// Minimizes s over w >= 0 by projected gradient w <- max(0, w - c s'(w))
/// starting from w = 0. Throws ConvergenceError after `max_iterations`.
UnivariateResult minimize_s(const CanonicalInstance& inst, int max_iterations = 1'000'000);

/// Solves B X C^T C + rho X = AC in the joint eigenbasis of B and C^T C.
Eigen::MatrixXd solve_shifted_sylvester(const CanonicalInstance& inst, double rho);

struct CanonicalSolution {
    Eigen::MatrixXd x;
    double w_hat = 0.0;
    bool is_zero = true;
    double gate_value = 0.0;
    int iterations = 0;
};

/// Gate test, then (if open) the univariate minimization and the shifted
/// Sylvester solve with rho = mu^2 / (4 w_hat).
CanonicalSolution solve_canonical(const CanonicalInstance& inst);
CanonicalSolution solve_canonical(const Eigen::MatrixXd& a, KernelPtr b, const Eigen::MatrixXd& c, double mu);

/// ||A - B X C^T||_F^2 + mu ||X||_B, evaluated directly.
double canonical_objective(const Eigen::MatrixXd& a, const KernelMatrix& b, const Eigen::MatrixXd& c, double mu,
                           const Eigen::MatrixXd& x);

}  // namespace mkprice
