#include <doctest.h>

#include <cmath>

#include "slowlab/manifold.hpp"

using namespace slowlab;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

// For the valley flow, x^2 - ln(y^2) - y^2 is conserved, so the landing
// ordinate solves ln(u) + u = ln(u0) + u0 - x0^2 with u = y^2.
double valley_landing_y(double x0, double y0) {
    const double rhs = std::log(y0 * y0) + y0 * y0 - x0 * x0;
    double lo = 1e-12, hi = y0 * y0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::log(mid) + mid < rhs ? lo : hi) = mid;
    }
    return std::copysign(std::sqrt(0.5 * (lo + hi)), y0);
}

}  // namespace

TEST_CASE("gradient flow projection on the linear model is a coordinate kill") {
    Vector h0(2);
    h0 << 2.0, 0.0;
    const BlockQuadratic m(h0, Matrix::Zero(2, 2));
    const auto phi = gf_project(m, vec2(3.0, 5.0));
    REQUIRE(phi.has_value());
    CHECK(std::abs((*phi)[0]) < 1e-8);
    CHECK((*phi)[1] == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("valley projection matches the conserved-quantity oracle") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    for (const auto& [x0, y0] : {std::pair{0.1, 1.0}, {0.6, 1.2}, {-0.3, 0.8}, {0.2, -1.5}}) {
        const auto phi = gf_project(m, vec2(x0, y0));
        REQUIRE(phi.has_value());
        CHECK(std::abs((*phi)[0]) < 1e-7);
        CHECK((*phi)[1] == doctest::Approx(valley_landing_y(x0, y0)).epsilon(1e-6));
    }
    // points on the manifold are fixed, and the map is idempotent
    const auto fixed = gf_project(m, vec2(0.0, 0.7));
    REQUIRE(fixed.has_value());
    CHECK((*fixed - vec2(0.0, 0.7)).norm() < 1e-9);
    const auto once = gf_project(m, vec2(0.4, 1.1));
    const auto twice = gf_project(m, *once);
    CHECK((*once - *twice).norm() < 1e-8);
    // non-finite input maps to the null marker
    CHECK_FALSE(gf_project(m, vec2(std::nan(""), 1.0)).has_value());
}

TEST_CASE("frame assembly at a valley point") {
    const QuadraticValley m = QuadraticValley::custom(mat2(1.0, 0.5, 0.5, 3.0));
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    CHECK(f.m == 1);
    CHECK(f.eig.eigenvalues[0] == doctest::Approx(2.0));
    CHECK((f.p_par - mat2(0, 0, 0, 1)).norm() < 1e-12);
    CHECK((f.p_par * f.p_par - f.p_par).norm() < 1e-8);
    CHECK((m.eval_hessian(f.zeta) * f.p_par).norm() < 1e-8);
    CHECK((f.sigma_par - mat2(0, 0, 0, 3)).norm() < 1e-12);
    CHECK((f.sigma_diamond - mat2(1, 0.5, 0.5, 0)).norm() < 1e-12);

    CHECK_THROWS_AS(make_frame(m, vec2(0.5, 1.0)), std::invalid_argument);
}

TEST_CASE("frame assembly on the rank-2 block model") {
    Vector h0(4);
    h0 << 3.0, 1.0, 0.0, 0.0;
    const BlockQuadratic m(h0, Matrix::Identity(4, 4));
    const ManifoldFrame f = make_frame(m, Vector::Zero(4));
    CHECK(f.m == 2);
    Matrix p_expect = Matrix::Zero(4, 4);
    p_expect(2, 2) = p_expect(3, 3) = 1.0;
    CHECK((f.p_par - p_expect).norm() < 1e-12);
}

TEST_CASE("frame rejects rank-ambiguous spectra") {
    Vector h0(2);
    h0 << 1.0, 5e-8;  // inside (threshold, 10*threshold] for the default 1e-8
    const BlockQuadratic m(h0, Matrix::Identity(2, 2));
    CHECK_THROWS_AS(make_frame(m, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("eigenbasis-weighted inverse") {
    const QuadraticValley m = QuadraticValley::custom(mat2(1.0, 0.5, 0.5, 3.0));
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    // weights 1/(2+2) and 1/(2+0) on the normal row/column
    CHECK((v_h(f, mat2(1, 0.5, 0.5, 0)) - mat2(0.25, 0.25, 0.25, 0)).norm() < 1e-12);
    CHECK(v_h(f, mat2(0, 0, 0, 7)).norm() == 0.0);
    CHECK((hat_sigma_diamond(f) - mat2(0.25, 0.25, 0.25, 0)).norm() < 1e-12);
}

TEST_CASE("v_h on a three-eigenvalue spectrum") {
    Vector h0(3);
    h0 << 3.0, 1.0, 0.0;
    const BlockQuadratic m(h0, Matrix::Identity(3, 3));
    const ManifoldFrame f = make_frame(m, Vector::Zero(3));
    Matrix M = Matrix::Zero(3, 3);
    M(0, 1) = M(1, 0) = 1.0;
    const Matrix out = v_h(f, M);
    CHECK(out(0, 1) == doctest::Approx(0.25));
    CHECK(out(1, 0) == doctest::Approx(0.25));
    CHECK(std::abs(out(0, 0)) + std::abs(out(2, 2)) < 1e-12);
}

TEST_CASE("psi-rescaled covariances") {
    const QuadraticValley m = QuadraticValley::custom(mat2(1.0, 0.5, 0.5, 3.0));
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    const double psi4 = (std::exp(-4.0) - 1.0 + 4.0) / 4.0;
    const double psi2 = (std::exp(-2.0) - 1.0 + 2.0) / 2.0;

    const Matrix hp = hat_psi(f, 1.0);
    CHECK(hp(0, 0) == doctest::Approx(psi4 / 4.0).epsilon(1e-10));      // 0.188645
    CHECK(hp(0, 1) == doctest::Approx(psi2 / 2.0 * 0.5).epsilon(1e-10));  // 0.141917
    CHECK(hp(1, 1) == doctest::Approx(0.0));
    CHECK(hat_psi(f, 0.0).norm() == 0.0);
    // large etaH limit recovers the unweighted inverse
    CHECK((hat_psi(f, 1e4) - hat_sigma_diamond(f)).norm() < 1e-3);
    // entrywise monotone toward the limit
    CHECK(hat_psi(f, 0.5)(0, 0) < hat_psi(f, 2.0)(0, 0));

    const Matrix pm = psi_matrix(f, 1.0);
    CHECK(pm(0, 0) == doctest::Approx(psi4 * 1.0).epsilon(1e-10));   // 0.754579
    CHECK(pm(0, 1) == doctest::Approx(psi2 * 0.5).epsilon(1e-10));   // 0.283834
    CHECK(pm(1, 1) == doctest::Approx(0.0));  // psi(0) kills the tangent block
    CHECK(psi_matrix(f, 0.0).norm() == 0.0);
    CHECK_THROWS_AS(psi_matrix(f, -1.0), std::invalid_argument);
}

TEST_CASE("second derivative of the projection, closed forms") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    const Vector v = second_diff_phi(m, f, mat2(1, 0, 0, 0));
    CHECK(v[0] == doctest::Approx(0.0));
    CHECK(v[1] == doctest::Approx(-0.5).epsilon(1e-10));

    Vector h0(3);
    h0 << 3.0, 1.0, 0.0;
    const BlockQuadratic lin(h0, Matrix::Identity(3, 3));
    const ManifoldFrame lf = make_frame(lin, Vector::Zero(3));
    CHECK(second_diff_phi(lin, lf, Matrix::Identity(3, 3)).norm() == 0.0);
}

TEST_CASE("second derivative matches a finite-difference oracle of the projection") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    OdeOptions opts;
    opts.tol = 1e-12;
    opts.initial_step = 1e-4;
    const double eps = 1e-3;
    const auto phi = [&](const Vector& th) {
        const auto p = gf_project(m, th, 1e-8, opts);
        REQUIRE(p.has_value());
        return *p;
    };
    const Vector dirs[] = {vec2(1, 0), vec2(0, 1), vec2(std::sqrt(0.5), std::sqrt(0.5))};
    for (const Vector& u : dirs) {
        const Vector fd =
            (phi(f.zeta + eps * u) - 2.0 * f.zeta + phi(f.zeta - eps * u)) / (eps * eps);
        const Vector exact = second_diff_phi(m, f, Matrix(u * u.transpose()));
        CHECK((fd - exact).norm() <= 1e-3 * (1.0 + exact.norm()));
    }
}

TEST_CASE("first derivative of the projection is the tangent projector") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.0));
    const double eps = 1e-4;
    const auto phi = [&](const Vector& th) { return *gf_project(m, th); };
    // tangent direction passes through, normal direction is annihilated
    CHECK(((phi(f.zeta + eps * vec2(0, 1)) - f.zeta) / eps - vec2(0, 1)).norm() < 1e-3);
    CHECK(((phi(f.zeta + eps * vec2(1, 0)) - f.zeta) / eps).norm() < 1e-3);
}

TEST_CASE("hessian-aligned drift equals the sharpness-reduction flow") {
    // with Sigma = Hessian, -(1/2B) P tc(hat_sigma_diamond) is exactly
    // -(1/4B) times the tangent gradient of tr Hessian
    const QuadraticValley m = QuadraticValley::hessian_aligned(1.0);
    for (double y : {0.5, 1.0, 2.0}) {
        const ManifoldFrame f = make_frame(m, vec2(0.0, y));
        CHECK((hat_sigma_diamond(f) - 0.5 * f.p_perp).norm() < 1e-10);
        const Vector lhs = -(0.5) * (f.p_par * m.third_contract(f.zeta, hat_sigma_diamond(f)));
        const Vector rhs = -(0.25) * vec2(0.0, 2.0 * y);
        CHECK((lhs - rhs).norm() < 1e-8);
    }
}

TEST_CASE("sharpness summaries") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const ManifoldFrame f = make_frame(m, vec2(0.0, 1.3));
    const Sharpness s = sharpness_values(f, 1.0);
    CHECK(s.tr_hess == doctest::Approx(1.0 + 1.69));
    CHECK(s.tr_f_term == doctest::Approx(big_f(2.0 * s.tr_hess) / 2.0).epsilon(1e-10));
    // etaH -> infinity recovers the trace
    const Sharpness big = sharpness_values(f, 1e5);
    CHECK(big.tr_f_term == doctest::Approx(s.tr_hess).epsilon(1e-3));
    CHECK(sharpness_values(f, 0.0).tr_f_term == 0.0);
}
