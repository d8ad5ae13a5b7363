#pragma once

#include <optional>

#include "slowlab/models.hpp"
#include "slowlab/numerics.hpp"

namespace slowlab {

/// Manifold tolerance: a point is "on" the minimizer set when the gradient
/// norm is below this.
constexpr double kGradEps = 1e-10;

/// Terminal point of the gradient flow started at theta, or nullopt when the
/// flow fails to converge or lands away from the declared minimum loss.
std::optional<Vector> gf_project(const LossModel& model, const Vector& theta, double tol = 1e-8,
                                 const OdeOptions& opts = {});

/// Geometry bundle at a manifold point: Hessian eigenstructure, tangent and
/// normal projectors, and the noise covariance split.
struct ManifoldFrame {
    Vector zeta;
    SymEig eig;          // of the Hessian at zeta, descending
    int m = 0;           // Hessian rank
    Matrix p_par;        // tangent projector (Hessian null space)
    Matrix p_perp;
    Matrix sigma;        // noise covariance at zeta
    Matrix sigma_par;    // p_par * sigma * p_par
    Matrix sigma_diamond;
};

/// Builds the frame; rejects points with ||grad|| > grad_eps and Hessian
/// eigenvalues inside the rank-ambiguity band (threshold, 10*threshold].
ManifoldFrame make_frame(const LossModel& model, const Vector& zeta, double grad_eps = kGradEps);

/// Eigenbasis-weighted inverse: entries of M in the Hessian eigenbasis divided
/// by lambda_i + lambda_j, the doubly-null block zeroed.
Matrix v_h(const ManifoldFrame& frame, const Matrix& M);

/// v_h applied to the normal part of the noise covariance.
Matrix hat_sigma_diamond(const ManifoldFrame& frame);

/// Like hat_sigma_diamond with weight psi(etaH*(li+lj))/(li+lj).
Matrix hat_psi(const ManifoldFrame& frame, double eta_h);

/// Full covariance rescaled entrywise in the eigenbasis by psi(etaH*(li+lj)).
Matrix psi_matrix(const ManifoldFrame& frame, double eta_h);

/// Second derivative of the gradient flow projection applied to a symmetric
/// matrix, assembled blockwise from third-derivative contractions.
Vector second_diff_phi(const LossModel& model, const ManifoldFrame& frame, const Matrix& M);

struct Sharpness {
    double tr_hess = 0.0;
    double tr_f_term = 0.0;  // sum of F(2*etaH*lambda)/(2*etaH) over nonzero lambda
};

Sharpness sharpness_values(const ManifoldFrame& frame, double eta_h);

}  // namespace slowlab
