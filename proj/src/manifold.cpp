#include "slowlab/manifold.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace slowlab {

std::optional<Vector> gf_project(const LossModel& model, const Vector& theta, double tol,
                                 const OdeOptions& opts) {
    if (theta.size() != model.dim() || !theta.allFinite())
        return std::nullopt;
    const VectorField field = [&model](const Vector& x) { return Vector(-model.eval_grad(x)); };
    // The error floor tol*(1+|y|) must sit below the gradient-norm stop, or the
    // fast coordinates hover just above it and the flow never terminates.
    OdeOptions local = opts;
    local.tol = std::min(opts.tol, 1e-12);
    OdeResult res = integrate_ode(field, theta, StopRule::field_below(kGradEps), local);
    if (!res.converged || !res.state.allFinite())
        return std::nullopt;
    if (auto lmin = model.manifold_min_loss()) {
        if (std::abs(model.eval_loss(res.state) - *lmin) > tol)
            return std::nullopt;
    }
    return res.state;
}

ManifoldFrame make_frame(const LossModel& model, const Vector& zeta, double grad_eps) {
    const double gnorm = model.eval_grad(zeta).norm();
    if (gnorm > grad_eps)
        throw std::invalid_argument("make_frame: point off manifold, ||grad|| = " +
                                    std::to_string(gnorm));
    ManifoldFrame f;
    f.zeta = zeta;
    f.eig = sym_eig(model.eval_hessian(zeta));
    for (Eigen::Index i = 0; i < f.eig.eigenvalues.size(); ++i) {
        const double a = std::abs(f.eig.eigenvalues[i]);
        if (a > f.eig.rank_threshold && a <= 10.0 * f.eig.rank_threshold)
            throw std::invalid_argument(
                "make_frame: Hessian eigenvalue " + std::to_string(f.eig.eigenvalues[i]) +
                " inside the rank-ambiguity band; adjust the rank threshold");
    }
    f.m = f.eig.rank();
    const Eigen::Index d = zeta.size();
    f.p_par = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        if (f.eig.is_zero(i))
            f.p_par += f.eig.eigenvectors.col(i) * f.eig.eigenvectors.col(i).transpose();
    f.p_perp = Matrix::Identity(d, d) - f.p_par;
    f.sigma = model.noise_covariance(zeta);
    f.sigma_par = f.p_par * f.sigma * f.p_par;
    f.sigma_par = 0.5 * (f.sigma_par + f.sigma_par.transpose());
    f.sigma_diamond = f.sigma - f.sigma_par;
    return f;
}

namespace {

// Apply weight(li, lj) to M entrywise in the eigenbasis; thresholded
// eigenvalues enter as exact zeros.
Matrix eigenbasis_rescale(const ManifoldFrame& frame, const Matrix& M,
                          const std::function<double(double, double)>& weight) {
    const Matrix& V = frame.eig.eigenvectors;
    Matrix B = V.transpose() * M * V;
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
        const double li = frame.eig.is_zero(i) ? 0.0 : frame.eig.eigenvalues[i];
        for (Eigen::Index j = 0; j < B.cols(); ++j) {
            const double lj = frame.eig.is_zero(j) ? 0.0 : frame.eig.eigenvalues[j];
            B(i, j) *= weight(li, lj);
        }
    }
    return V * B * V.transpose();
}

Matrix pseudo_inverse(const ManifoldFrame& frame) {
    Matrix h_pinv = Matrix::Zero(frame.zeta.size(), frame.zeta.size());
    for (Eigen::Index i = 0; i < frame.eig.eigenvalues.size(); ++i)
        if (!frame.eig.is_zero(i))
            h_pinv += frame.eig.eigenvectors.col(i) * frame.eig.eigenvectors.col(i).transpose() /
                      frame.eig.eigenvalues[i];
    return h_pinv;
}

}  // namespace

Matrix v_h(const ManifoldFrame& frame, const Matrix& M) {
    return eigenbasis_rescale(frame, M, [](double li, double lj) {
        return (li == 0.0 && lj == 0.0) ? 0.0 : 1.0 / (li + lj);
    });
}

Matrix hat_sigma_diamond(const ManifoldFrame& frame) { return v_h(frame, frame.sigma_diamond); }

Matrix hat_psi(const ManifoldFrame& frame, double eta_h) {
    if (eta_h < 0.0)
        throw std::invalid_argument("hat_psi: etaH must be nonnegative");
    return eigenbasis_rescale(frame, frame.sigma_diamond, [eta_h](double li, double lj) {
        return (li == 0.0 && lj == 0.0) ? 0.0 : psi(eta_h * (li + lj)) / (li + lj);
    });
}

Matrix psi_matrix(const ManifoldFrame& frame, double eta_h) {
    if (eta_h < 0.0)
        throw std::invalid_argument("psi_matrix: etaH must be nonnegative");
    return eigenbasis_rescale(frame, frame.sigma,
                              [eta_h](double li, double lj) { return psi(eta_h * (li + lj)); });
}

Vector second_diff_phi(const LossModel& model, const ManifoldFrame& frame, const Matrix& M) {
    const Matrix& P = frame.p_par;
    const Matrix& Q = frame.p_perp;
    const Matrix Ms = 0.5 * (M + M.transpose());
    const Matrix h_pinv = pseudo_inverse(frame);

    // tangent-tangent: the tangential projection of d3L vanishes on the
    // manifold, leaving the pseudo-inverse curvature term.
    const Matrix mtt = P * Ms * P;
    Vector out = -(h_pinv * model.third_contract(frame.zeta, mtt));

    // mixed tangent-normal, symmetrized before the contraction
    const Matrix mix = P * Ms * Q * h_pinv;
    const Matrix mix_s = 0.5 * (mix + mix.transpose());
    out -= 2.0 * (P * model.third_contract(frame.zeta, mix_s));

    // normal-normal via the eigenbasis-weighted inverse
    const Matrix mnn = Q * Ms * Q;
    out -= P * model.third_contract(frame.zeta, v_h(frame, mnn));
    return out;
}

Sharpness sharpness_values(const ManifoldFrame& frame, double eta_h) {
    if (eta_h < 0.0)
        throw std::invalid_argument("sharpness_values: etaH must be nonnegative");
    Sharpness s;
    for (Eigen::Index i = 0; i < frame.eig.eigenvalues.size(); ++i) {
        if (frame.eig.is_zero(i)) continue;
        const double lam = frame.eig.eigenvalues[i];
        s.tr_hess += lam;
        if (eta_h > 0.0)
            s.tr_f_term += big_f(2.0 * eta_h * lam) / (2.0 * eta_h);
    }
    return s;
}

}  // namespace slowlab
