#pragma once

#include <Eigen/Dense>
#include <functional>

namespace slowlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Eigendecomposition of a symmetric matrix with a rank cutoff.
/// Eigenvalues are sorted descending; |lambda| <= rank_threshold counts as zero.
struct SymEig {
    Vector eigenvalues;
    Matrix eigenvectors;   // columns, orthonormal
    double rank_threshold;

    bool is_zero(Eigen::Index i) const { return std::abs(eigenvalues[i]) <= rank_threshold; }

    int rank() const {
        int r = 0;
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
            if (!is_zero(i)) ++r;
        return r;
    }

    Matrix reconstruct() const {
        return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
    }
};

/// Decompose M (symmetrized internally; rejects asymmetry beyond 1e-10).
/// A negative rank_threshold selects the default 1e-8 * max(1, |lambda_max|).
SymEig sym_eig(const Matrix& M, double rank_threshold = -1.0);

/// psi(x) = (e^{-x} - 1 + x) / x for x > 0, psi(0) = 0. Series branch below 1e-3.
double psi(double x);

/// F(x) = integral of psi over [0, x], by adaptive Gauss-Kronrod quadrature.
double big_f(double x);

/// V diag(f(lambda_i)) V^T, with thresholded eigenvalues passed to f as 0.
Matrix matrix_fn(const SymEig& eig, const std::function<double(double)>& f);

using VectorField = std::function<Vector(const Vector&)>;

struct StopRule {
    enum class Kind { Horizon, FieldNorm };
    Kind kind;
    double horizon = 0.0;      // Horizon: integrate to t = horizon
    double field_eps = 0.0;    // FieldNorm: stop when ||field(x)|| < field_eps

    static StopRule at_time(double T) { return {Kind::Horizon, T, 0.0}; }
    static StopRule field_below(double eps) { return {Kind::FieldNorm, 0.0, eps}; }
};

struct OdeOptions {
    double tol = 1e-10;
    double initial_step = 1e-3;
    double safety = 0.9;
    long max_steps = 10'000'000;
};

struct OdeResult {
    Vector state;
    double time = 0.0;
    long steps = 0;
    bool converged = false;    // stop rule satisfied within max_steps
};

/// Adaptive Dormand-Prince 5(4) integration of dx/dt = field(x).
OdeResult integrate_ode(const VectorField& field, const Vector& x0,
                        const StopRule& stop, const OdeOptions& opts = {});

}  // namespace slowlab
