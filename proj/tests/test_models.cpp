#include <doctest.h>

#include <cmath>

#include "slowlab/models.hpp"

using namespace slowlab;

namespace {

Vector fd_grad(const LossModel& m, const Vector& theta) {
    const double h = 1e-6 * (1.0 + theta.norm());
    Vector g(m.dim());
    for (int i = 0; i < m.dim(); ++i) {
        Vector p = theta, q = theta;
        p[i] += h;
        q[i] -= h;
        g[i] = (m.eval_loss(p) - m.eval_loss(q)) / (2 * h);
    }
    return g;
}

Matrix fd_hessian(const LossModel& m, const Vector& theta) {
    const double h = 1e-6 * (1.0 + theta.norm());
    Matrix H(m.dim(), m.dim());
    for (int i = 0; i < m.dim(); ++i) {
        Vector p = theta, q = theta;
        p[i] += h;
        q[i] -= h;
        H.col(i) = (m.eval_grad(p) - m.eval_grad(q)) / (2 * h);
    }
    return 0.5 * (H + H.transpose());
}

Vector fd_third_contract(const LossModel& m, const Vector& theta, const Matrix& M) {
    const double h = 1e-5 * (1.0 + theta.norm());
    Vector out(m.dim());
    for (int i = 0; i < m.dim(); ++i) {
        Vector p = theta, q = theta;
        p[i] += h;
        q[i] -= h;
        const Matrix dH = (m.eval_hessian(p) - m.eval_hessian(q)) / (2 * h);
        out[i] = (dH.array() * M.array()).sum();
    }
    return out;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("valley closed forms") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    CHECK(m.eval_loss(vec2(2.0, 1.0)) == doctest::Approx(4.0));
    const Matrix H = m.eval_hessian(vec2(0.0, 2.0));
    CHECK(H(0, 0) == doctest::Approx(5.0));
    CHECK(H(0, 1) == doctest::Approx(0.0));
    CHECK(H(1, 1) == doctest::Approx(0.0));
    const Matrix H2 = m.eval_hessian(vec2(1.0, 1.0));
    CHECK(H2(0, 0) == doctest::Approx(2.0));
    CHECK(H2(0, 1) == doctest::Approx(2.0));
    CHECK(H2(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("valley third derivative contraction examples") {
    const QuadraticValley m = QuadraticValley::isotropic(1.0);
    const Vector a = m.third_contract(vec2(0.0, 1.0), Matrix::Identity(2, 2));
    CHECK(a[0] == doctest::Approx(0.0));
    CHECK(a[1] == doctest::Approx(2.0));
    Matrix M(2, 2);
    M << 0, 1, 1, 0;
    const Vector b = m.third_contract(vec2(0.0, 1.0), M);
    CHECK(b[0] == doctest::Approx(4.0));
    CHECK(b[1] == doctest::Approx(0.0));
    Matrix bad(2, 2);
    bad << 0, 1, 0, 0;
    CHECK_THROWS_AS(m.third_contract(vec2(0.0, 1.0), bad), std::invalid_argument);
}

TEST_CASE("derivative consistency by finite differences") {
    const QuadraticValley valley = QuadraticValley::isotropic(1.0);
    Vector h0(4);
    h0 << 3.0, 1.0, 0.0, 0.0;
    const BlockQuadratic block(h0, Matrix::Identity(4, 4));
    const SoftmaxLabelNoise softmax = SoftmaxLabelNoise::standard();
    const LossModel* models[] = {&valley, &block, &softmax};
    StreamRng rng(7, StreamRng::kTagNoise, 1, 2);
    for (const LossModel* m : models) {
        for (int rep = 0; rep < 20; ++rep) {
            Vector theta(m->dim());
            for (int i = 0; i < m->dim(); ++i) theta[i] = 2.0 * rng.next_uniform() - 1.0;
            CHECK((m->eval_grad(theta) - fd_grad(*m, theta)).norm() <
                  1e-5 * (1.0 + m->eval_grad(theta).norm()));
            CHECK((m->eval_hessian(theta) - fd_hessian(*m, theta)).norm() <
                  1e-5 * (1.0 + m->eval_hessian(theta).norm()));
        }
        Vector theta = Vector::Constant(m->dim(), 0.3);
        Matrix M = Matrix::Identity(m->dim(), m->dim());
        M(0, m->dim() - 1) = M(m->dim() - 1, 0) = 0.5;
        CHECK((m->third_contract(theta, M) - fd_third_contract(*m, theta, M)).norm() <
              1e-4 * (1.0 + m->third_contract(theta, M).norm()));
    }
}

TEST_CASE("noise sampling is unbiased with the declared covariance") {
    const int n = 40000;
    const auto check_cov = [&](const LossModel& m, const Vector& theta, double rel) {
        StreamRng rng(11, StreamRng::kTagNoise, 3, 0);
        Vector mean = Vector::Zero(m.dim());
        Matrix second = Matrix::Zero(m.dim(), m.dim());
        for (int i = 0; i < n; ++i) {
            const Vector z = m.sample_noise(theta, rng);
            mean += z;
            second += z * z.transpose();
        }
        mean /= n;
        second /= n;
        CHECK(mean.norm() <= 4.0 * m.sigma_max() / std::sqrt(static_cast<double>(n)));
        const Matrix cov = second - mean * mean.transpose();
        const Matrix target = m.noise_covariance(theta);
        CHECK((cov - target).norm() <= rel * std::max(1.0, target.norm()));
    };
    check_cov(QuadraticValley::isotropic(1.0), vec2(0.1, 1.0), 0.05);
    check_cov(QuadraticValley::hessian_aligned(0.5), vec2(0.0, 0.7), 0.05);
    Vector h0(4);
    h0 << 3.0, 1.0, 0.0, 0.0;
    Matrix sig0 = 0.5 * Matrix::Identity(4, 4);
    sig0(0, 1) = sig0(1, 0) = 0.2;
    check_cov(BlockQuadratic(h0, sig0), Vector::Zero(4), 0.05);
    const SoftmaxLabelNoise sm = SoftmaxLabelNoise::standard();
    check_cov(sm, Vector::Constant(sm.dim(), 0.1), 0.08);
}

TEST_CASE("hessian-aligned covariance at a manifold point") {
    const QuadraticValley m = QuadraticValley::hessian_aligned(0.5);
    const Matrix cov = m.noise_covariance(vec2(0.0, 2.0));
    CHECK(cov(0, 0) == doctest::Approx(2.5));
    CHECK(cov(0, 1) == doctest::Approx(0.0));
    CHECK(cov(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("stochastic gradients") {
    const QuadraticValley noiseless = QuadraticValley::isotropic(0.0);
    StreamRng rng(5, StreamRng::kTagNoise, 0, 0);
    const Vector theta = vec2(0.4, -0.3);
    CHECK((sample_stoch_grad(noiseless, theta, 8, rng) - noiseless.eval_grad(theta)).norm() ==
          0.0);
    // batch averaging shrinks covariance by 1/B
    const QuadraticValley noisy = QuadraticValley::isotropic(1.0);
    const int n = 20000, B = 4;
    Matrix second = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const Vector g = sample_stoch_grad(noisy, theta, B, rng) - noisy.eval_grad(theta);
        second += g * g.transpose();
    }
    second /= n;
    CHECK((second - noisy.noise_covariance(theta) / B).norm() < 0.05);
}

TEST_CASE("block quadratic basics") {
    Vector h0(2);
    h0 << 1.0, 0.0;
    const BlockQuadratic m(h0, Matrix::Zero(2, 2));
    CHECK(m.eval_loss(vec2(1.0, 1.0)) == doctest::Approx(0.5));
    CHECK((m.eval_grad(vec2(1.0, 1.0)) - vec2(1.0, 0.0)).norm() == 0.0);
    CHECK(m.third_contract(vec2(0.3, 0.4), Matrix::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("softmax interpolation and targets") {
    const SoftmaxLabelNoise m = SoftmaxLabelNoise::standard();
    const Vector theta = m.find_interpolating_point(Vector::Zero(m.dim()));
    CHECK(m.eval_grad(theta).norm() < 1e-7);
    CHECK(m.manifold_min_loss().has_value());
    CHECK(m.eval_loss(theta) == doctest::Approx(*m.manifold_min_loss()).epsilon(1e-6));
    // covariance equals Hessian at interpolation (moderate sample size here;
    // the acceptance suite uses the full budget)
    StreamRng rng(3, StreamRng::kTagNoise, 9, 0);
    const int n = 30000;
    Matrix second = Matrix::Zero(m.dim(), m.dim());
    for (int i = 0; i < n; ++i) {
        const Vector z = m.sample_noise(theta, rng);
        second += z * z.transpose();
    }
    second /= n;
    const Matrix hess = m.eval_hessian(theta);
    CHECK((second - hess).norm() / hess.norm() < 0.15);
}

TEST_CASE("model factory") {
    CHECK(make_model("valley", NoiseKind::Isotropic, 1.0)->name() == "valley");
    CHECK(make_model("block", NoiseKind::Isotropic, 1.0)->dim() == 4);
    CHECK(make_model("softmax", NoiseKind::Isotropic, 0.0)->name() == "softmax");
    CHECK_THROWS_AS(make_model("resnet", NoiseKind::Isotropic, 1.0), std::invalid_argument);
}
