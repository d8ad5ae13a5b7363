#include "slowlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slowlab {

SymEig sym_eig(const Matrix& M, double rank_threshold) {
    if (M.rows() != M.cols())
        throw std::invalid_argument("sym_eig: matrix must be square");
    if (!M.allFinite())
        throw std::invalid_argument("sym_eig: non-finite entries");
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale)
        throw std::invalid_argument("sym_eig: matrix asymmetric beyond 1e-10 (max |M - M^T| = " +
                                    std::to_string(asym) + ")");
    const Matrix S = 0.5 * (M + M.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> solver(S);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("sym_eig: eigensolver failed to converge");

    // Eigen returns ascending order; flip to descending.
    const Eigen::Index n = S.rows();
    SymEig out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);

    if (rank_threshold < 0.0) {
        const double lmax = out.eigenvalues.size() > 0 ? out.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
        rank_threshold = 1e-8 * std::max(1.0, lmax);
    }
    out.rank_threshold = rank_threshold;
    return out;
}

double psi(double x) {
    if (x < 0.0)
        throw std::domain_error("psi: argument must be nonnegative");
    if (x == 0.0)
        return 0.0;
    if (x < 1e-3) {
        // (e^{-x} - 1 + x) cancels catastrophically near 0; 7-term series instead.
        // psi(x) = sum_{n>=1} (-1)^{n+1} x^n / (n+1)!
        double term = x / 2.0;
        double sum = term;
        double fac[] = {6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0};
        double xp = x;
        double sign = -1.0;
        for (double f : fac) {
            xp *= x;
            sum += sign * xp / f;
            sign = -sign;
        }
        return sum;
    }
    return (std::expm1(-x) + x) / x;
}

namespace {

// 15-point Gauss-Kronrod pair on [-1, 1].
constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct GkEstimate {
    double value;
    double error;
};

GkEstimate gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kKronrodNodes[i]);
        fv[14 - i] = f(c + h * kKronrodNodes[i]);
    }
    fv[7] = f(c);
    double kronrod = 0.0;
    for (int i = 0; i < 7; ++i)
        kronrod += kKronrodWeights[i] * (fv[i] + fv[14 - i]);
    kronrod += kKronrodWeights[7] * fv[7];
    kronrod *= h;
    // Gauss nodes are the odd Kronrod nodes.
    double gauss = 0.0;
    for (int i = 0; i < 3; ++i)
        gauss += kGaussWeights[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    gauss += kGaussWeights[3] * fv[7];
    gauss *= h;
    return {kronrod, std::abs(kronrod - gauss)};
}

double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                     double abstol, int depth) {
    const GkEstimate e = gk15(f, a, b);
    if (e.error <= abstol || depth >= 30)
        return e.value;
    const double c = 0.5 * (a + b);
    return adaptive_quad(f, a, c, 0.5 * abstol, depth + 1) +
           adaptive_quad(f, c, b, 0.5 * abstol, depth + 1);
}

}  // namespace

double big_f(double x) {
    if (x < 0.0)
        throw std::domain_error("big_f: argument must be nonnegative");
    if (x == 0.0)
        return 0.0;
    return adaptive_quad([](double y) { return psi(y); }, 0.0, x, 1e-10, 0);
}

Matrix matrix_fn(const SymEig& eig, const std::function<double(double)>& f) {
    const Eigen::Index n = eig.eigenvalues.size();
    Vector fvals(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lam = eig.is_zero(i) ? 0.0 : eig.eigenvalues[i];
        const double v = f(lam);
        if (!std::isfinite(v))
            throw std::domain_error("matrix_fn: function undefined at eigenvalue " +
                                    std::to_string(lam));
        fvals[i] = v;
    }
    return eig.eigenvectors * fvals.asDiagonal() * eig.eigenvectors.transpose();
}

OdeResult integrate_ode(const VectorField& field, const Vector& x0,
                        const StopRule& stop, const OdeOptions& opts) {
    // Dormand-Prince 5(4) coefficients.
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (!x0.allFinite())
        throw std::invalid_argument("integrate_ode: non-finite initial state");

    OdeResult res;
    res.state = x0;
    double t = 0.0;
    double h = opts.initial_step;
    Vector k1 = field(res.state);

    for (long step = 0; step < opts.max_steps; ++step) {
        if (stop.kind == StopRule::Kind::FieldNorm && k1.norm() < stop.field_eps) {
            res.time = t;
            res.steps = step;
            res.converged = true;
            return res;
        }
        if (stop.kind == StopRule::Kind::Horizon) {
            if (t >= stop.horizon) {
                res.time = t;
                res.steps = step;
                res.converged = true;
                return res;
            }
            h = std::min(h, stop.horizon - t);
        }

        const Vector& y = res.state;
        Vector k2 = field(y + h * (a21 * k1));
        Vector k3 = field(y + h * (a31 * k1 + a32 * k2));
        Vector k4 = field(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        Vector k5 = field(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Vector k6 = field(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Vector y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        Vector k7 = field(y5);
        Vector errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const double sc = opts.tol * (1.0 + y.cwiseAbs().maxCoeff());
        const double err = errv.cwiseAbs().maxCoeff() / sc;
        if (err <= 1.0) {
            if (!y5.allFinite())
                throw std::runtime_error("integrate_ode: state became non-finite");
            t += h;
            res.state = y5;
            k1 = k7;  // FSAL
        }
        const double factor = err > 0.0 ? opts.safety * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
        (void)c2; (void)c3; (void)c4; (void)c5;
    }
    res.time = t;
    res.steps = opts.max_steps;
    res.converged = false;
    return res;
}

}  // namespace slowlab
