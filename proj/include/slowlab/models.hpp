#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slowlab/numerics.hpp"
#include "slowlab/rng.hpp"

namespace slowlab {

/// Oracle bundle for a toy loss landscape: loss, derivatives up to third
/// order, gradient-noise covariance and a bounded noise sampler.
class LossModel {
public:
    virtual ~LossModel() = default;

    virtual int dim() const = 0;
    virtual double eval_loss(const Vector& theta) const = 0;
    virtual Vector eval_grad(const Vector& theta) const = 0;
    virtual Matrix eval_hessian(const Vector& theta) const = 0;

    /// Vector with component i = sum_{jk} d3L/dtheta_i dtheta_j dtheta_k * M_jk.
    /// M must be symmetric within 1e-10.
    virtual Vector third_contract(const Vector& theta, const Matrix& M) const = 0;

    virtual Matrix noise_covariance(const Vector& theta) const = 0;

    /// One zero-mean draw z with Cov z = noise_covariance(theta), ||z|| bounded.
    virtual Vector sample_noise(const Vector& theta, StreamRng& rng) const = 0;

    /// Declared bound on ||z|| within the design envelope.
    virtual double sigma_max() const = 0;

    /// Loss value attained on the minimizer manifold, when known analytically.
    virtual std::optional<double> manifold_min_loss() const { return std::nullopt; }

    /// Number of data points for dataset-backed models; 0 for noise oracles.
    virtual std::size_t dataset_size() const { return 0; }

    /// Per-sample stochastic gradient at a dataset index (dataset-backed only).
    virtual Vector stoch_grad_at(const Vector& theta, std::size_t index, StreamRng& rng) const;

    virtual std::string name() const = 0;

protected:
    void check_theta(const Vector& theta) const;
    void check_symmetric(const Matrix& M) const;
};

enum class NoiseKind { Isotropic, HessianAligned, Custom };

/// L(x, y) = x^2 (1 + y^2) / 2 on R^2; minimizer manifold is the line x = 0
/// with Hessian diag(1 + y^2, 0) of rank 1.
class QuadraticValley final : public LossModel {
public:
    static QuadraticValley isotropic(double sigma2);
    static QuadraticValley hessian_aligned(double c);
    static QuadraticValley custom(const Matrix& sigma0);

    int dim() const override { return 2; }
    double eval_loss(const Vector& theta) const override;
    Vector eval_grad(const Vector& theta) const override;
    Matrix eval_hessian(const Vector& theta) const override;
    Vector third_contract(const Vector& theta, const Matrix& M) const override;
    Matrix noise_covariance(const Vector& theta) const override;
    Vector sample_noise(const Vector& theta, StreamRng& rng) const override;
    double sigma_max() const override;
    std::optional<double> manifold_min_loss() const override { return 0.0; }
    std::string name() const override { return "valley"; }

private:
    QuadraticValley() = default;
    NoiseKind kind_ = NoiseKind::Isotropic;
    double sigma2_ = 1.0;
    double aligned_c_ = 1.0;
    Matrix sigma0_;
    Matrix sigma0_sqrt_;
};

/// L(theta) = theta^T H0 theta / 2 with H0 = diag(lambda_1..lambda_m, 0..0)
/// and a constant PSD noise covariance. The manifold is the null space of H0,
/// the third derivative vanishes identically and Phi is a linear projector.
class BlockQuadratic final : public LossModel {
public:
    BlockQuadratic(Vector hessian_diagonal, Matrix sigma0);

    int dim() const override { return static_cast<int>(h0_diag_.size()); }
    double eval_loss(const Vector& theta) const override;
    Vector eval_grad(const Vector& theta) const override;
    Matrix eval_hessian(const Vector& theta) const override;
    Vector third_contract(const Vector& theta, const Matrix& M) const override;
    Matrix noise_covariance(const Vector& theta) const override;
    Vector sample_noise(const Vector& theta, StreamRng& rng) const override;
    double sigma_max() const override;
    std::optional<double> manifold_min_loss() const override { return 0.0; }
    std::string name() const override { return "block"; }

    const Vector& hessian_diagonal() const { return h0_diag_; }

private:
    Vector h0_diag_;
    Matrix sigma0_;
    Matrix sigma0_sqrt_;
};

/// Tiny C-class softmax classifier trained with per-access label corruption:
/// each stochastic gradient replaces the true label with a fresh noisy one
/// (kept with probability 1-p, any other label with probability p/(C-1)).
/// At interpolating parameters the noise covariance equals the Hessian.
class SoftmaxLabelNoise final : public LossModel {
public:
    struct Sample {
        Vector x;
        int label;
    };

    SoftmaxLabelNoise(int num_classes, std::vector<Sample> dataset, double corruption_p);

    /// Orthonormal-input dataset where an interpolating point always exists.
    static SoftmaxLabelNoise standard(int num_classes = 3, int input_dim = 4,
                                      double corruption_p = 0.2);

    int dim() const override { return num_classes_ * input_dim_; }
    double eval_loss(const Vector& theta) const override;
    Vector eval_grad(const Vector& theta) const override;
    Matrix eval_hessian(const Vector& theta) const override;
    Vector third_contract(const Vector& theta, const Matrix& M) const override;
    Matrix noise_covariance(const Vector& theta) const override;
    Vector sample_noise(const Vector& theta, StreamRng& rng) const override;
    double sigma_max() const override;
    std::optional<double> manifold_min_loss() const override { return min_loss_; }
    std::size_t dataset_size() const override { return dataset_.size(); }
    Vector stoch_grad_at(const Vector& theta, std::size_t index, StreamRng& rng) const override;
    std::string name() const override { return "softmax"; }

    int num_classes() const { return num_classes_; }
    int input_dim() const { return input_dim_; }

    /// Plain gradient descent until ||grad L|| < tol; throws if it stalls.
    Vector find_interpolating_point(const Vector& theta0, double tol = 1e-8) const;

private:
    Vector softmax_probs(const Vector& theta, const Vector& x) const;
    Vector target_probs(int label) const;

    int num_classes_;
    int input_dim_;
    std::vector<Sample> dataset_;
    double corruption_p_;
    double min_loss_;
};

/// grad L(theta) + mean of B independent noise draws; covariance Sigma(theta)/B.
Vector sample_stoch_grad(const LossModel& model, const Vector& theta, int B, StreamRng& rng);

/// Factory used by the CLI: "valley", "block", "softmax".
std::unique_ptr<LossModel> make_model(const std::string& name, NoiseKind noise,
                                      double noise_param);

}  // namespace slowlab
