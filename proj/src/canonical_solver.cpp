#include "mkprice/canonical_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mkprice/errors.hpp"

namespace mkprice {

namespace {

constexpr double kZeroEigRatio = 1e-12;
constexpr double kArmijo = 1e-4;
constexpr double kRelTermination = 1e-10;
constexpr double kStationarityTol = 1e-9;

struct SCurvature {
    double value;
    double derivative;
    double second;
};

// s, s' and s'' in one pass over the nonzero spectrum.
SCurvature evaluate_s(double w, const CanonicalInstance& inst) {
    const double q = 0.25 * inst.mu() * inst.mu();
    const Eigen::VectorXd& lambda = inst.kernel().eigvals();
    const Eigen::VectorXd& m = inst.ctc_eigvals();
    const Eigen::MatrixXd& p = inst.projected();
    double sum_value = 0.0;
    double sum_first = 0.0;
    double sum_second = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        if (m(j) == 0.0) {
            continue;
        }
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            // lambda_i m_j W_ij^2 with W_ij = P_ij / sqrt(m_j)
            const double a = lambda(i) * p(i, j) * p(i, j);
            const double b = lambda(i) * m(j);
            const double den = b * w + q;
            sum_value += a * w / den;
            sum_first += a * q / (den * den);
            sum_second += 2.0 * a * q * b / (den * den * den);
        }
    }
    return {w - sum_value, 1.0 - sum_first, sum_second};
}

}  // namespace

CanonicalInstance::CanonicalInstance(const Eigen::MatrixXd& a, KernelPtr b, const Eigen::MatrixXd& c, double mu) {
    require(b != nullptr, "canonical instance: missing kernel");
    require(a.rows() == b->size(), "canonical instance: A has " + std::to_string(a.rows()) + " rows but B is " +
                                       std::to_string(b->size()) + "x" + std::to_string(b->size()));
    require(a.cols() == c.rows(), "canonical instance: A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                      " but C has " + std::to_string(c.rows()) + " rows");
    require(mu > 0.0, "canonical instance: mu must be positive");
    b_ = std::move(b);
    ac_ = a * c;
    ctc_ = c.transpose() * c;
    mu_ = mu;
    build_caches();
}

CanonicalInstance CanonicalInstance::from_products(Eigen::MatrixXd ac, KernelPtr b, Eigen::MatrixXd ctc, double mu) {
    require(b != nullptr, "canonical instance: missing kernel");
    require(ac.rows() == b->size(), "canonical instance: AC row count differs from B");
    require(ctc.rows() == ctc.cols() && ctc.rows() == ac.cols(), "canonical instance: C^T C shape differs from AC");
    require(mu > 0.0, "canonical instance: mu must be positive");
    CanonicalInstance inst;
    inst.b_ = std::move(b);
    inst.ac_ = std::move(ac);
    inst.ctc_ = std::move(ctc);
    inst.mu_ = mu;
    inst.build_caches();
    return inst;
}

void CanonicalInstance::build_caches() {
    const auto d2 = ctc_.rows();
    if (d2 == 0) {
        m_.resize(0);
        v_.resize(0, 0);
        p_ = b_->eigvecs().transpose() * ac_;
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (ctc_ + ctc_.transpose()));
    if (es.info() != Eigen::Success) {
        throw InputError("canonical instance: eigendecomposition of C^T C failed");
    }
    m_ = es.eigenvalues().reverse();
    v_ = es.eigenvectors().rowwise().reverse();
    const double m_max = std::max(m_(0), 0.0);
    for (Eigen::Index j = 0; j < m_.size(); ++j) {
        if (m_(j) <= kZeroEigRatio * m_max) {
            m_(j) = 0.0;
        }
    }
    p_ = b_->eigvecs().transpose() * ac_ * v_;
}

GateResult frob_gate(const CanonicalInstance& inst) {
    const Eigen::VectorXd& lambda = inst.kernel().eigvals();
    const double sq = (lambda.asDiagonal() * inst.projected().cwiseAbs2()).sum();
    GateResult g;
    g.value = std::sqrt(std::max(sq, 0.0));
    g.is_zero = g.value <= 0.5 * inst.mu();
    return g;
}

SValue s_value_and_derivative(double w, const CanonicalInstance& inst) {
    const auto s = evaluate_s(w, inst);
    return {s.value, s.derivative};
}

UnivariateResult minimize_s(const CanonicalInstance& inst, int max_iterations) {
    double w = 0.0;
    SCurvature cur = evaluate_s(w, inst);
    for (int it = 1; it <= max_iterations; ++it) {
        if (w == 0.0 && cur.derivative >= 0.0) {
            return {0.0, it - 1};
        }
        // Newton-scaled trial step, halved until the Armijo condition holds.
        double c = cur.second > 0.0 ? 1.0 / cur.second : 1.0;
        double w_next = w;
        SCurvature next = cur;
        for (int halvings = 0; halvings < 200; ++halvings) {
            w_next = std::max(0.0, w - c * cur.derivative);
            next = evaluate_s(w_next, inst);
            if (next.value <= cur.value + kArmijo * cur.derivative * (w_next - w)) {
                break;
            }
            c *= 0.5;
            w_next = w;
            next = cur;
        }
        const double change = std::abs(next.value - cur.value);
        const bool stalled = w_next == w;
        w = w_next;
        cur = next;
        if (stalled) {
            return {w, it};
        }
        const double eps_c = kRelTermination * (1.0 + std::abs(cur.value));
        if (change < eps_c && (std::abs(cur.derivative) <= kStationarityTol || (w == 0.0 && cur.derivative > 0.0))) {
            return {w, it};
        }
    }
    throw ConvergenceError("univariate minimization did not converge in " + std::to_string(max_iterations) +
                               " iterations",
                           w);
}

Eigen::MatrixXd solve_shifted_sylvester(const CanonicalInstance& inst, double rho) {
    require(rho > 0.0 && std::isfinite(rho), "shifted Sylvester solve requires rho > 0");
    const Eigen::VectorXd& lambda = inst.kernel().eigvals();
    const Eigen::VectorXd& m = inst.ctc_eigvals();
    Eigen::MatrixXd y = inst.projected();
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            y(i, j) /= lambda(i) * m(j) + rho;
        }
    }
    return inst.kernel().eigvecs() * y * inst.ctc_eigvecs().transpose();
}

CanonicalSolution solve_canonical(const CanonicalInstance& inst) {
    CanonicalSolution sol;
    const auto gate = frob_gate(inst);
    sol.gate_value = gate.value;
    if (gate.is_zero) {
        sol.x = Eigen::MatrixXd::Zero(inst.rows(), inst.cols());
        return sol;
    }
    const auto uni = minimize_s(inst);
    sol.iterations = uni.iterations;
    if (!(uni.w > 0.0)) {
        // Open gate whose mass sits entirely on numerically-zero directions of C^T C.
        sol.x = Eigen::MatrixXd::Zero(inst.rows(), inst.cols());
        return sol;
    }
    sol.is_zero = false;
    sol.w_hat = uni.w;
    sol.x = solve_shifted_sylvester(inst, inst.mu() * inst.mu() / (4.0 * uni.w));
    return sol;
}

CanonicalSolution solve_canonical(const Eigen::MatrixXd& a, KernelPtr b, const Eigen::MatrixXd& c, double mu) {
    return solve_canonical(CanonicalInstance(a, std::move(b), c, mu));
}

double canonical_objective(const Eigen::MatrixXd& a, const KernelMatrix& b, const Eigen::MatrixXd& c, double mu,
                           const Eigen::MatrixXd& x) {
    require(x.rows() == b.size() && x.cols() == c.cols() && a.rows() == b.size() && a.cols() == c.rows(),
            "canonical objective: dimension mismatch");
    const double fit = (a - b.gram() * x * c.transpose()).squaredNorm();
    const double quad = (x.transpose() * b.gram() * x).trace();
    return fit + mu * std::sqrt(std::max(quad, 0.0));
}

}  // namespace mkprice
