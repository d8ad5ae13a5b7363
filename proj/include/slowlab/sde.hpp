#pragma once

#include <cstdint>

#include "slowlab/manifold.hpp"
#include "slowlab/models.hpp"
#include "slowlab/trajectory.hpp"

namespace slowlab {

/// The slow-SDE family on the minimizer manifold. B is the global batch size,
/// K the worker count, etaH the averaging-interval product, kappa the linear
/// scaling factor; Kappa is the two-parameter normal form with diffusion scale
/// kappa1 and drift scale kappa2. LabelNoise* kinds are deterministic
/// sharpness-reduction flows.
struct SdeKind {
    enum class Tag {
        Sgd,
        Local,
        Kappa,
        LocalLsr,
        LocalInf,
        LabelNoiseSgd,
        LabelNoiseLocal,
        LabelNoiseLocalInf,
    };

    Tag tag = Tag::Sgd;
    double B = 1.0;
    double K = 1.0;
    double eta_h = 0.0;
    double kappa = 1.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;

    static SdeKind sgd(double B);
    static SdeKind local(double B, double K, double eta_h);
    static SdeKind kappa_form(double kappa1, double kappa2);
    static SdeKind local_lsr(double B, double K, double kappa, double eta_h);
    static SdeKind local_inf(double B, double K);
    static SdeKind label_noise_sgd(double B);
    static SdeKind label_noise_local(double B, double K, double eta_h);
    static SdeKind label_noise_local_inf(double B, double K);
};

struct DriftDiffusion {
    Vector b;  // pre-projection drift
    Matrix A;  // diffusion factor
};

DriftDiffusion drift_and_diffusion(const LossModel& model, const ManifoldFrame& frame,
                                   const SdeKind& kind);

struct SdeState {
    Vector zeta;
    double t = 0.0;
    long step = 0;
    std::uint64_t seed = 0;
};

/// One projected Euler-Maruyama step followed by a gradient-flow retraction.
/// Throws when the retraction leaves the manifold basin.
SdeState step_projected(const LossModel& model, const SdeState& state, const SdeKind& kind,
                        double dt);

TrajectoryRecord integrate_slow_sde(const LossModel& model, const SdeKind& kind,
                                    const Vector& zeta0, double T, double dt, std::uint64_t seed,
                                    long record_every = 1);

}  // namespace slowlab
