#include "slowlab/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace slowlab {

namespace {

constexpr double kDivergenceNorm = 1e6;

void check_config(const RunConfig& cfg) {
    if (!(cfg.eta > 0.0))
        throw std::invalid_argument("RunConfig: eta must be positive");
    if (cfg.K < 1 || cfg.B_loc < 1 || cfg.H < 1)
        throw std::invalid_argument("RunConfig: K, B_loc and H must be at least 1");
    if (cfg.rounds < 0 || cfg.record_every < 1)
        throw std::invalid_argument("RunConfig: rounds >= 0 and record_every >= 1 required");
}

// Sum in worker-index order by pairwise tree so the reduction is deterministic
// and exact for identical chains when K is a power of two.
Vector pairwise_mean(std::vector<Vector>& v) {
    std::size_t n = v.size();
    const double k = static_cast<double>(n);
    while (n > 1) {
        std::size_t w = 0;
        for (std::size_t i = 0; i + 1 < n; i += 2) v[w++] = v[i] + v[i + 1];
        if (n % 2 == 1) v[w++] = v[n - 1];
        n = w;
    }
    return v[0] / k;
}

// One averaging round: K chains of H steps from theta, then iterate averaging.
// Worker k draws from the stream (seed, optim, round_index, k). Steps are
// interleaved across workers so a shared without-replacement sampler sees the
// workers in lockstep.
Vector round_update(const LossModel& model, const RunConfig& cfg, const Vector& theta,
                    long round_index, int H, SamplerState* sampler) {
    std::vector<Vector> th(static_cast<std::size_t>(cfg.K), theta);
    std::vector<StreamRng> rngs;
    rngs.reserve(static_cast<std::size_t>(cfg.K));
    for (int k = 0; k < cfg.K; ++k)
        rngs.emplace_back(cfg.seed, StreamRng::kTagOptim,
                          static_cast<std::uint64_t>(round_index), static_cast<std::uint64_t>(k));
    for (int step = 0; step < H; ++step) {
        for (int k = 0; k < cfg.K; ++k) {
            auto& chain = th[static_cast<std::size_t>(k)];
            Vector g;
            if (sampler != nullptr) {
                const auto batch = sampler->sample(k, rngs[static_cast<std::size_t>(k)]);
                g = Vector::Zero(model.dim());
                for (std::size_t idx : batch)
                    g += model.stoch_grad_at(chain, idx, rngs[static_cast<std::size_t>(k)]);
                g /= static_cast<double>(batch.size());
            } else {
                g = sample_stoch_grad(model, chain, cfg.B_loc, rngs[static_cast<std::size_t>(k)]);
            }
            chain -= cfg.eta * g;
        }
    }
    return pairwise_mean(th);
}

struct Recorder {
    const LossModel& model;
    const RunConfig& cfg;
    const TrajectoryProbe& probe;
    TrajectoryRecord out;

    void capture(long s, long global_step, const Vector& theta) {
        TrajectoryPoint p;
        p.s = s;
        p.t = static_cast<double>(global_step) * cfg.eta * cfg.eta;
        p.theta = theta;
        p.loss = model.eval_loss(theta);
        if (probe.project) {
            p.phi = probe.project(theta);
            if (p.phi) {
                p.dist_manifold = (theta - *p.phi).norm();
                p.tr_hess = probe.tr_hess ? probe.tr_hess(*p.phi)
                                          : model.eval_hessian(*p.phi).trace();
            }
        } else {
            p.tr_hess = model.eval_hessian(theta).trace();
        }
        out.points.push_back(std::move(p));
    }
};

// Shared driver: `phases` is a list of (round stream offset, H, round count).
struct Phase {
    long offset;
    int H;
    long rounds;
};

TrajectoryRecord run_phases(const LossModel& model, const RunConfig& cfg, const Vector& theta0,
                            const TrajectoryProbe& probe, const std::vector<Phase>& phases,
                            long switch_round) {
    check_config(cfg);
    if (theta0.size() != model.dim())
        throw std::invalid_argument("run: initial point dimension mismatch");

    SamplerState sampler_state(SamplerKind::WithReplacement, 1, 1, 1, 0);
    SamplerState* sampler = nullptr;
    if (cfg.sampler == SamplerKind::WithoutReplacement) {
        sampler_state = SamplerState(SamplerKind::WithoutReplacement, model.dataset_size(),
                                     cfg.K, cfg.B_loc, cfg.seed);
        sampler = &sampler_state;
    }

    Recorder rec{model, cfg, probe, {}};
    rec.out.switch_round = switch_round;
    Vector theta = theta0;
    long s = 0;             // averaging rounds completed
    long global_step = 0;
    // Records land on the coarsest phase round grid: stride record_every in
    // rounds of cfg.H steps, converted per phase.
    const long rec_steps = cfg.record_every * static_cast<long>(cfg.H);
    long total_rounds = 0;
    for (const Phase& ph : phases) total_rounds += ph.rounds;
    rec.capture(0, 0, theta);
    for (const Phase& ph : phases) {
        for (long r = 0; r < ph.rounds; ++r) {
            theta = round_update(model, cfg, theta, ph.offset + r, ph.H, sampler);
            ++s;
            global_step += ph.H;
            const bool diverged = !(theta.norm() <= kDivergenceNorm);
            const bool last = s == total_rounds;
            if (diverged || last || global_step % rec_steps == 0)
                rec.capture(s, global_step, theta);
            if (diverged) {
                rec.out.diverged = true;
                return rec.out;
            }
        }
    }
    return rec.out;
}

}  // namespace

TrajectoryRecord run_local_sgd(const LossModel& model, const RunConfig& cfg, const Vector& theta0,
                               const TrajectoryProbe& probe) {
    return run_phases(model, cfg, theta0, probe, {{0, cfg.H, cfg.rounds}}, -1);
}

TrajectoryRecord run_parallel_sgd(const LossModel& model, const RunConfig& cfg,
                                  const Vector& theta0, const TrajectoryProbe& probe) {
    return run_phases(model, cfg, theta0, probe, {{0, 1, cfg.total_steps()}}, -1);
}

TrajectoryRecord run_post_local_sgd(const LossModel& model, const RunConfig& cfg,
                                    const Vector& theta0, const TrajectoryProbe& probe) {
    check_config(cfg);
    const long total = cfg.total_steps();
    if (cfg.t0 < 0 || cfg.t0 > total)
        throw std::invalid_argument("post-local: t0 must lie in [0, total_steps]");
    if ((total - cfg.t0) % cfg.H != 0)
        throw std::invalid_argument("post-local: total_steps - t0 must be a multiple of H");
    const long local_rounds = (total - cfg.t0) / cfg.H;
    return run_phases(model, cfg, theta0, probe,
                      {{0, 1, cfg.t0}, {cfg.t0, cfg.H, local_rounds}}, cfg.t0);
}

RunConfig apply_lsr(const RunConfig& cfg, double kappa) {
    if (!(kappa > 0.0))
        throw std::invalid_argument("apply_lsr: kappa must be positive");
    const double kd = kappa * cfg.K;
    const double hd = cfg.H / kappa;
    const bool k_ok = std::abs(kd - std::round(kd)) < 1e-9 && std::round(kd) >= 1.0;
    const bool h_ok = std::abs(hd - std::round(hd)) < 1e-9 && std::round(hd) >= 1.0;
    if (!k_ok || !h_ok) {
        // admissible kappa = K'/K with K' dividing H*K
        double best = 1.0;
        double best_gap = std::abs(kappa - 1.0);
        const long hk = static_cast<long>(cfg.H) * cfg.K;
        for (long kp = 1; kp <= hk; ++kp) {
            if (hk % kp != 0) continue;
            const double cand = static_cast<double>(kp) / cfg.K;
            const double gap = std::abs(cand - kappa);
            if (gap < best_gap) {
                best = cand;
                best_gap = gap;
            }
        }
        throw std::invalid_argument("apply_lsr: kappa=" + std::to_string(kappa) +
                                    " gives non-integral K or H; nearest admissible kappa is " +
                                    std::to_string(best));
    }
    RunConfig out = cfg;
    out.eta = kappa * cfg.eta;
    out.K = static_cast<int>(std::llround(kd));
    out.H = static_cast<int>(std::llround(hd));
    return out;
}

}  // namespace slowlab
