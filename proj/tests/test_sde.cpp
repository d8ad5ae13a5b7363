#include <doctest.h>

#include <cmath>

#include "slowlab/sde.hpp"

using namespace slowlab;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("drift components on the aligned-noise valley") {
    // Sigma = Hessian at zeta=(0,1): the sharp-direction variance is 2
    const QuadraticValley m = QuadraticValley::hessian_aligned(1.0);
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    const double B = 3.0, K = 4.0, eh = 0.7;

    const DriftDiffusion sgd = drift_and_diffusion(m, f, SdeKind::sgd(B));
    CHECK(sgd.A.norm() == 0.0);  // no tangent noise in the aligned model
    CHECK(sgd.b[0] == doctest::Approx(0.0));
    CHECK(sgd.b[1] == doctest::Approx(-1.0 / (2.0 * B)).epsilon(1e-12));

    const DriftDiffusion loc = drift_and_diffusion(m, f, SdeKind::local(B, K, eh));
    const double psi4eh = (std::exp(-4.0 * eh) - 1.0 + 4.0 * eh) / (4.0 * eh);
    CHECK(loc.b[1] ==
          doctest::Approx(-(1.0 + (K - 1.0) * psi4eh) / (2.0 * B)).epsilon(1e-12));
}

TEST_CASE("family algebra at a fixed frame") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    const double B = 2.0, K = 4.0, kappa = 2.0, eh = 1.0;

    const auto dd = [&](const SdeKind& k) { return drift_and_diffusion(m, f, k); };
    const DriftDiffusion sgd = dd(SdeKind::sgd(B));

    // the two-parameter normal form reproduces both endpoints of the family
    const DriftDiffusion as_sgd = dd(SdeKind::kappa_form(1.0 / B, 1.0 / (2.0 * B)));
    CHECK((as_sgd.b - sgd.b).norm() < 1e-12);
    CHECK((as_sgd.A - sgd.A).norm() < 1e-12);
    const DriftDiffusion inf = dd(SdeKind::local_inf(B, K));
    const DriftDiffusion as_inf = dd(SdeKind::kappa_form(1.0 / B, K / (2.0 * B)));
    CHECK((as_inf.b - inf.b).norm() < 1e-12);
    CHECK((inf.b - K * sgd.b).norm() < 1e-12);

    // a single worker has no extra drift
    const DriftDiffusion k1 = dd(SdeKind::local(B, 1.0, eh));
    CHECK((k1.b - sgd.b).norm() < 1e-12);
    CHECK((k1.A - sgd.A).norm() < 1e-12);

    // scaled-batch drift and diffusion shrink exactly as the rule predicts
    const DriftDiffusion scaled = dd(SdeKind::sgd(kappa * B));
    CHECK((kappa * scaled.b - sgd.b).norm() < 1e-12);
    CHECK((std::sqrt(kappa) * scaled.A - sgd.A).norm() < 1e-12);

    // scaled local form: same base drift plus the (kappa K - 1) interaction
    const DriftDiffusion lsr = dd(SdeKind::local_lsr(B, K, kappa, eh));
    const Vector extra = m.third_contract(f.zeta, hat_psi(f, eh));
    CHECK((lsr.b - (sgd.b - (kappa * K - 1.0) / (2.0 * B) * extra)).norm() < 1e-12);

    CHECK_THROWS_AS(dd(SdeKind::sgd(0.0)), std::invalid_argument);
}

TEST_CASE("the projected step direction is tangent") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.4));
    const DriftDiffusion dd = drift_and_diffusion(m, f, SdeKind::local(2.0, 4.0, 0.5));
    const Matrix aat = dd.A * dd.A.transpose();
    const Vector drift = f.p_par * dd.b + 0.5 * second_diff_phi(m, f, aat);
    CHECK((f.p_perp * drift).norm() < 1e-10);
    CHECK((f.p_perp * (f.p_par * dd.A)).norm() < 1e-10);
}

TEST_CASE("label-noise flow decays the manifold coordinate exponentially") {
    const QuadraticValley m = QuadraticValley::hessian_aligned(1.0);
    const double B = 1.0, T = 1.0, dt = 1e-3, y0 = 1.0;

    const auto rec = integrate_slow_sde(m, SdeKind::label_noise_sgd(B), vec2(0.0, y0), T, dt, 5);
    const double y_sgd = rec.points.back().theta[1];
    CHECK(y_sgd == doctest::Approx(y0 * std::exp(-T / (2.0 * B))).epsilon(2.0 * dt));

    const double K = 6.0;
    const auto inf =
        integrate_slow_sde(m, SdeKind::label_noise_local_inf(B, K), vec2(0.0, y0), T, dt, 5);
    CHECK(inf.points.back().theta[1] ==
          doctest::Approx(y0 * std::exp(-K * T / (2.0 * B))).epsilon(2.0 * dt));

    // sharpness decreases monotonically along the flow
    double prev = 1e300;
    for (const auto& p : rec.points) {
        CHECK(p.tr_hess < prev + 1e-12);
        prev = p.tr_hess;
    }
}

TEST_CASE("finite-etaH label-noise flow matches its reduced scalar dynamics") {
    const QuadraticValley m = QuadraticValley::hessian_aligned(1.0);
    const double B = 2.0, K = 4.0, eh = 0.8, T = 2.0, dt = 1e-3;

    const auto rec =
        integrate_slow_sde(m, SdeKind::label_noise_local(B, K, eh), vec2(0.0, 1.0), T, dt, 100);

    // reduced flow: dy/dt = -(y/2B) (1 + (K-1) psi(2 etaH (1+y^2)))
    const VectorField field = [&](const Vector& y) {
        Vector out(1);
        out[0] = -y[0] / (2.0 * B) * (1.0 + (K - 1.0) * psi(2.0 * eh * (1.0 + y[0] * y[0])));
        return out;
    };
    Vector y0(1);
    y0 << 1.0;
    OdeOptions opts;
    opts.tol = 1e-12;
    const OdeResult oracle = integrate_ode(field, y0, StopRule::at_time(T), opts);
    REQUIRE(oracle.converged);
    CHECK(rec.points.back().theta[1] == doctest::Approx(oracle.state[0]).epsilon(4.0 * dt));
}

TEST_CASE("diffusion-only steps accumulate the tangent variance") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const double B = 2.0, dt = 1e-3;
    const int n_steps = 5, n_seeds = 2000;
    const SdeKind kind = SdeKind::kappa_form(1.0 / B, 0.0);
    double sum = 0.0, sum2 = 0.0;
    for (int seed = 0; seed < n_seeds; ++seed) {
        SdeState st;
        st.zeta = vec2(0.0, 1.0);
        st.seed = static_cast<std::uint64_t>(seed);
        for (int i = 0; i < n_steps; ++i) st = step_projected(m, st, kind, dt);
        const double d = st.zeta[1] - 1.0;
        sum += d;
        sum2 += d * d;
    }
    const double mean = sum / n_seeds;
    const double var = sum2 / n_seeds - mean * mean;
    CHECK(var == doctest::Approx(n_steps * dt / B).epsilon(0.10));
    CHECK(std::abs(mean) < 4.0 * std::sqrt(n_steps * dt / B / n_seeds));
}

TEST_CASE("integration is seed-deterministic and validates its arguments") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const SdeKind kind = SdeKind::local(2.0, 4.0, 0.5);
    const auto a = integrate_slow_sde(m, kind, vec2(0.0, 1.0), 0.05, 1e-3, 7, 10);
    const auto b = integrate_slow_sde(m, kind, vec2(0.0, 1.0), 0.05, 1e-3, 7, 10);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i)
        CHECK((a.points[i].theta - b.points[i].theta).norm() == 0.0);
    // records at steps 0, 10, 20, 30, 40, 50
    CHECK(a.points.size() == 6);
    CHECK(a.points.back().s == 50);
    CHECK(a.points.back().t == doctest::Approx(0.05));

    CHECK_THROWS_AS(integrate_slow_sde(m, kind, vec2(0.0, 1.0), -1.0, 1e-3, 7),
                    std::invalid_argument);
    CHECK_THROWS_AS(integrate_slow_sde(m, kind, vec2(0.0, 1.0), 1.0, 0.0, 7),
                    std::invalid_argument);
    SdeState st;
    st.zeta = vec2(0.0, 1.0);
    CHECK_THROWS_AS(step_projected(m, st, kind, 0.0), std::invalid_argument);
}
