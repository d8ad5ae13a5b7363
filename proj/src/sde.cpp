#include "slowlab/sde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace slowlab {

SdeKind SdeKind::sgd(double B) {
    SdeKind k;
    k.tag = Tag::Sgd;
    k.B = B;
    return k;
}

SdeKind SdeKind::local(double B, double K, double eta_h) {
    SdeKind k;
    k.tag = Tag::Local;
    k.B = B;
    k.K = K;
    k.eta_h = eta_h;
    return k;
}

SdeKind SdeKind::kappa_form(double kappa1, double kappa2) {
    SdeKind k;
    k.tag = Tag::Kappa;
    k.kappa1 = kappa1;
    k.kappa2 = kappa2;
    return k;
}

SdeKind SdeKind::local_lsr(double B, double K, double kappa, double eta_h) {
    SdeKind k;
    k.tag = Tag::LocalLsr;
    k.B = B;
    k.K = K;
    k.kappa = kappa;
    k.eta_h = eta_h;
    return k;
}

SdeKind SdeKind::local_inf(double B, double K) {
    SdeKind k;
    k.tag = Tag::LocalInf;
    k.B = B;
    k.K = K;
    return k;
}

SdeKind SdeKind::label_noise_sgd(double B) {
    SdeKind k;
    k.tag = Tag::LabelNoiseSgd;
    k.B = B;
    return k;
}

SdeKind SdeKind::label_noise_local(double B, double K, double eta_h) {
    SdeKind k;
    k.tag = Tag::LabelNoiseLocal;
    k.B = B;
    k.K = K;
    k.eta_h = eta_h;
    return k;
}

SdeKind SdeKind::label_noise_local_inf(double B, double K) {
    SdeKind k;
    k.tag = Tag::LabelNoiseLocalInf;
    k.B = B;
    k.K = K;
    return k;
}

namespace {

void check_kind(const SdeKind& kind) {
    if (kind.tag == SdeKind::Tag::Kappa) {
        if (kind.kappa1 < 0.0 || kind.kappa2 < 0.0)
            throw std::invalid_argument("SdeKind: kappa1 and kappa2 must be nonnegative");
        return;
    }
    if (!(kind.B > 0.0) || !(kind.K > 0.0) || !(kind.kappa > 0.0) || kind.eta_h < 0.0)
        throw std::invalid_argument("SdeKind: scale parameters must be positive");
}

Matrix tangent_sqrt(const ManifoldFrame& frame) {
    SymEig eig = sym_eig(frame.sigma_par);
    return matrix_fn(eig, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

}  // namespace

DriftDiffusion drift_and_diffusion(const LossModel& model, const ManifoldFrame& frame,
                                   const SdeKind& kind) {
    check_kind(kind);
    const Eigen::Index d = frame.zeta.size();
    DriftDiffusion out;
    out.A = Matrix::Zero(d, d);
    out.b = Vector::Zero(d);

    const auto tc = [&](const Matrix& M) { return model.third_contract(frame.zeta, M); };

    switch (kind.tag) {
        case SdeKind::Tag::Sgd:
            out.A = tangent_sqrt(frame) / std::sqrt(kind.B);
            out.b = -tc(hat_sigma_diamond(frame)) / (2.0 * kind.B);
            break;
        case SdeKind::Tag::Local:
            out.A = tangent_sqrt(frame) / std::sqrt(kind.B);
            out.b = -tc(hat_sigma_diamond(frame)) / (2.0 * kind.B) -
                    (kind.K - 1.0) / (2.0 * kind.B) * tc(hat_psi(frame, kind.eta_h));
            break;
        case SdeKind::Tag::Kappa:
            out.A = std::sqrt(kind.kappa1) * tangent_sqrt(frame);
            out.b = -kind.kappa2 * tc(hat_sigma_diamond(frame));
            break;
        case SdeKind::Tag::LocalLsr:
            out.A = tangent_sqrt(frame) / std::sqrt(kind.B);
            out.b = -tc(hat_sigma_diamond(frame)) / (2.0 * kind.B) -
                    (kind.kappa * kind.K - 1.0) / (2.0 * kind.B) * tc(hat_psi(frame, kind.eta_h));
            break;
        case SdeKind::Tag::LocalInf:
            out.A = tangent_sqrt(frame) / std::sqrt(kind.B);
            out.b = -kind.K / (2.0 * kind.B) * tc(hat_sigma_diamond(frame));
            break;
        case SdeKind::Tag::LabelNoiseSgd:
            // gradient of tr Hessian along the manifold
            out.b = -tc(Matrix::Identity(d, d)) / (4.0 * kind.B);
            break;
        case SdeKind::Tag::LabelNoiseLocal: {
            const double eh = kind.eta_h;
            const Matrix weight =
                Matrix::Identity(d, d) +
                (kind.K - 1.0) * matrix_fn(frame.eig, [eh](double l) { return psi(2.0 * eh * l); });
            out.b = -tc(weight) / (4.0 * kind.B);
            break;
        }
        case SdeKind::Tag::LabelNoiseLocalInf:
            out.b = -kind.K / (4.0 * kind.B) * tc(Matrix::Identity(d, d));
            break;
    }
    return out;
}

SdeState step_projected(const LossModel& model, const SdeState& state, const SdeKind& kind,
                        double dt) {
    if (!(dt > 0.0))
        throw std::invalid_argument("step_projected: dt must be positive");
    const ManifoldFrame frame = make_frame(model, state.zeta);
    const DriftDiffusion dd = drift_and_diffusion(model, frame, kind);

    StreamRng rng(state.seed, StreamRng::kTagSde, static_cast<std::uint64_t>(state.step));
    Vector dw(state.zeta.size());
    for (Eigen::Index i = 0; i < dw.size(); ++i) dw[i] = rng.next_gaussian() * std::sqrt(dt);

    const Matrix aat = dd.A * dd.A.transpose();
    const Vector step = frame.p_par * (dd.A * dw) +
                        (frame.p_par * dd.b + 0.5 * second_diff_phi(model, frame, aat)) * dt;

    const auto retracted = gf_project(model, state.zeta + step);
    if (!retracted)
        throw std::runtime_error("step_projected: left manifold basin at t = " +
                                 std::to_string(state.t));

    SdeState next;
    next.zeta = *retracted;
    next.t = state.t + dt;
    next.step = state.step + 1;
    next.seed = state.seed;
    return next;
}

TrajectoryRecord integrate_slow_sde(const LossModel& model, const SdeKind& kind,
                                    const Vector& zeta0, double T, double dt, std::uint64_t seed,
                                    long record_every) {
    if (!(T > 0.0) || !(dt > 0.0) || record_every < 1)
        throw std::invalid_argument("integrate_slow_sde: need T > 0, dt > 0, record_every >= 1");
    const long n_steps = static_cast<long>(std::llround(T / dt));
    if (n_steps < 1)
        throw std::invalid_argument("integrate_slow_sde: horizon shorter than one step");

    SdeState state;
    state.zeta = zeta0;
    state.seed = seed;

    TrajectoryRecord rec;
    const auto capture = [&](const SdeState& s) {
        TrajectoryPoint p;
        p.s = s.step;
        p.t = s.t;
        p.theta = s.zeta;
        p.phi = s.zeta;
        p.dist_manifold = 0.0;
        p.loss = model.eval_loss(s.zeta);
        p.tr_hess = model.eval_hessian(s.zeta).trace();
        rec.points.push_back(std::move(p));
    };
    capture(state);
    for (long i = 0; i < n_steps; ++i) {
        state = step_projected(model, state, kind, dt);
        if (state.step % record_every == 0 || i == n_steps - 1) capture(state);
    }
    return rec;
}

}  // namespace slowlab
