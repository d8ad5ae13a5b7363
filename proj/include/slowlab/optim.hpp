#pragma once

#include <cstdint>
#include <functional>

#include "slowlab/models.hpp"
#include "slowlab/samplers.hpp"
#include "slowlab/trajectory.hpp"

namespace slowlab {

struct RunConfig {
    double eta = 0.01;
    int K = 1;
    int B_loc = 1;
    int H = 1;
    long rounds = 1;
    long t0 = 0;                // post-local switch step
    SamplerKind sampler = SamplerKind::WithReplacement;
    std::uint64_t seed = 0;
    long record_every = 1;

    double alpha() const { return eta * static_cast<double>(H); }
    int B() const { return K * B_loc; }
    long total_steps() const { return rounds * static_cast<long>(H); }
};

/// Optional manifold projector for trajectory capture; absent means the
/// phi/dist/tr_hess columns stay at their defaults.
struct TrajectoryProbe {
    std::function<std::optional<Vector>(const Vector&)> project;
    std::function<double(const Vector&)> tr_hess;
};

/// K workers, H-step local chains per round, iterate averaging. Worker k in
/// round s draws noise from the stream (seed, optim, s, k); H=1 therefore
/// reproduces parallel SGD bit-for-bit.
TrajectoryRecord run_local_sgd(const LossModel& model, const RunConfig& cfg, const Vector& theta0,
                               const TrajectoryProbe& probe = {});

/// Single-step rounds; cfg.rounds * cfg.H steps total, recorded every
/// record_every * H steps so records align with the local-SGD round grid.
TrajectoryRecord run_parallel_sgd(const LossModel& model, const RunConfig& cfg,
                                  const Vector& theta0, const TrajectoryProbe& probe = {});

/// Parallel SGD for t0 steps, then local SGD on the remaining steps.
/// Requires (total_steps - t0) divisible by H.
TrajectoryRecord run_post_local_sgd(const LossModel& model, const RunConfig& cfg,
                                    const Vector& theta0, const TrajectoryProbe& probe = {});

/// Linear scaling rule: eta -> kappa*eta, K -> kappa*K, H -> H/kappa.
/// Rejects kappa unless kappa*K and H/kappa are integral, suggesting the
/// nearest admissible value.
RunConfig apply_lsr(const RunConfig& cfg, double kappa);

}  // namespace slowlab
