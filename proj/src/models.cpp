#include "slowlab/models.hpp"

#include <cmath>
#include <stdexcept>

namespace slowlab {

namespace {

constexpr double kTruncation = 6.0;  // per-coordinate Gaussian truncation

Matrix psd_sqrt(const Matrix& S) {
    SymEig eig = sym_eig(S);
    return matrix_fn(eig, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

Vector truncated_gaussian_vector(Eigen::Index n, StreamRng& rng) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i)
        g[i] = rng.next_gaussian_truncated(kTruncation);
    return g;
}

}  // namespace

Vector LossModel::stoch_grad_at(const Vector&, std::size_t, StreamRng&) const {
    throw std::logic_error(name() + ": not a dataset-backed model");
}

void LossModel::check_theta(const Vector& theta) const {
    if (theta.size() != dim())
        throw std::invalid_argument(name() + ": parameter dimension mismatch");
    if (!theta.allFinite())
        throw std::invalid_argument(name() + ": non-finite parameter vector");
}

void LossModel::check_symmetric(const Matrix& M) const {
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument(name() + ": contraction argument asymmetric beyond 1e-10");
}

// ---------------------------------------------------------------------------
// QuadraticValley

QuadraticValley QuadraticValley::isotropic(double sigma2) {
    QuadraticValley m;
    m.kind_ = NoiseKind::Isotropic;
    m.sigma2_ = sigma2;
    return m;
}

QuadraticValley QuadraticValley::hessian_aligned(double c) {
    QuadraticValley m;
    m.kind_ = NoiseKind::HessianAligned;
    m.aligned_c_ = c;
    return m;
}

QuadraticValley QuadraticValley::custom(const Matrix& sigma0) {
    QuadraticValley m;
    m.kind_ = NoiseKind::Custom;
    m.sigma0_ = sigma0;
    m.sigma0_sqrt_ = psd_sqrt(sigma0);
    return m;
}

double QuadraticValley::eval_loss(const Vector& theta) const {
    check_theta(theta);
    const double x = theta[0], y = theta[1];
    return 0.5 * x * x * (1.0 + y * y);
}

Vector QuadraticValley::eval_grad(const Vector& theta) const {
    check_theta(theta);
    const double x = theta[0], y = theta[1];
    Vector g(2);
    g[0] = x * (1.0 + y * y);
    g[1] = x * x * y;
    return g;
}

Matrix QuadraticValley::eval_hessian(const Vector& theta) const {
    check_theta(theta);
    const double x = theta[0], y = theta[1];
    Matrix h(2, 2);
    h(0, 0) = 1.0 + y * y;
    h(0, 1) = h(1, 0) = 2.0 * x * y;
    h(1, 1) = x * x;
    return h;
}

Vector QuadraticValley::third_contract(const Vector& theta, const Matrix& M) const {
    check_theta(theta);
    check_symmetric(M);
    const double x = theta[0], y = theta[1];
    // Nonzero entries: L_xxy = 2y (and permutations), L_xyy = 2x (and permutations).
    Vector out(2);
    out[0] = 2.0 * y * (M(0, 1) + M(1, 0)) + 2.0 * x * M(1, 1);
    out[1] = 2.0 * y * M(0, 0) + 2.0 * x * (M(0, 1) + M(1, 0));
    return out;
}

Matrix QuadraticValley::noise_covariance(const Vector& theta) const {
    check_theta(theta);
    switch (kind_) {
        case NoiseKind::Isotropic:
            return sigma2_ * Matrix::Identity(2, 2);
        case NoiseKind::HessianAligned: {
            // Hessian can be indefinite off the manifold; clamp to its PSD part
            // so the sampled covariance stays well defined.
            SymEig eig = sym_eig(eval_hessian(theta));
            return aligned_c_ * matrix_fn(eig, [](double l) { return std::max(l, 0.0); });
        }
        case NoiseKind::Custom:
            return sigma0_;
    }
    throw std::logic_error("unreachable");
}

Vector QuadraticValley::sample_noise(const Vector& theta, StreamRng& rng) const {
    check_theta(theta);
    Vector g = truncated_gaussian_vector(2, rng);
    switch (kind_) {
        case NoiseKind::Isotropic:
            return std::sqrt(sigma2_) * g;
        case NoiseKind::HessianAligned: {
            SymEig eig = sym_eig(eval_hessian(theta));
            Matrix root = matrix_fn(eig, [](double l) { return std::sqrt(std::max(l, 0.0)); });
            return std::sqrt(aligned_c_) * (root * g);
        }
        case NoiseKind::Custom:
            return sigma0_sqrt_ * g;
    }
    throw std::logic_error("unreachable");
}

double QuadraticValley::sigma_max() const {
    // Design envelope |y| <= 10, |x| <= 10: largest Hessian eigenvalue <= 303.
    switch (kind_) {
        case NoiseKind::Isotropic:
            return kTruncation * std::sqrt(2.0 * sigma2_);
        case NoiseKind::HessianAligned:
            return kTruncation * std::sqrt(2.0 * aligned_c_ * 303.0);
        case NoiseKind::Custom:
            return kTruncation * std::sqrt(2.0) * sigma0_sqrt_.norm();
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// BlockQuadratic

BlockQuadratic::BlockQuadratic(Vector hessian_diagonal, Matrix sigma0)
    : h0_diag_(std::move(hessian_diagonal)), sigma0_(std::move(sigma0)) {
    if (sigma0_.rows() != h0_diag_.size() || sigma0_.cols() != h0_diag_.size())
        throw std::invalid_argument("block: covariance dimension mismatch");
    for (Eigen::Index i = 0; i < h0_diag_.size(); ++i)
        if (h0_diag_[i] < 0.0)
            throw std::invalid_argument("block: Hessian diagonal must be nonnegative");
    sigma0_sqrt_ = psd_sqrt(sigma0_);
}

double BlockQuadratic::eval_loss(const Vector& theta) const {
    check_theta(theta);
    return 0.5 * theta.dot(h0_diag_.cwiseProduct(theta));
}

Vector BlockQuadratic::eval_grad(const Vector& theta) const {
    check_theta(theta);
    return h0_diag_.cwiseProduct(theta);
}

Matrix BlockQuadratic::eval_hessian(const Vector& theta) const {
    check_theta(theta);
    return h0_diag_.asDiagonal();
}

Vector BlockQuadratic::third_contract(const Vector& theta, const Matrix& M) const {
    check_theta(theta);
    check_symmetric(M);
    return Vector::Zero(dim());
}

Matrix BlockQuadratic::noise_covariance(const Vector& theta) const {
    check_theta(theta);
    return sigma0_;
}

Vector BlockQuadratic::sample_noise(const Vector& theta, StreamRng& rng) const {
    check_theta(theta);
    return sigma0_sqrt_ * truncated_gaussian_vector(dim(), rng);
}

double BlockQuadratic::sigma_max() const {
    return kTruncation * std::sqrt(static_cast<double>(dim())) * sigma0_sqrt_.norm();
}

// ---------------------------------------------------------------------------
// SoftmaxLabelNoise

SoftmaxLabelNoise::SoftmaxLabelNoise(int num_classes, std::vector<Sample> dataset,
                                     double corruption_p)
    : num_classes_(num_classes),
      input_dim_(dataset.empty() ? 0 : static_cast<int>(dataset.front().x.size())),
      dataset_(std::move(dataset)),
      corruption_p_(corruption_p) {
    if (num_classes_ < 2 || dataset_.empty())
        throw std::invalid_argument("softmax: need >= 2 classes and a nonempty dataset");
    if (corruption_p_ <= 0.0 || corruption_p_ >= 1.0)
        throw std::invalid_argument("softmax: corruption probability must be in (0, 1)");
    for (const auto& s : dataset_) {
        if (s.x.size() != input_dim_ || s.label < 0 || s.label >= num_classes_)
            throw std::invalid_argument("softmax: malformed dataset");
    }
    // Entropy of the soft targets is the attainable minimum of the expected loss.
    double h = 0.0;
    const double a1 = 1.0 - corruption_p_;
    const double a2 = corruption_p_ / (num_classes_ - 1);
    h -= a1 * std::log(a1);
    h -= (num_classes_ - 1) * a2 * std::log(a2);
    min_loss_ = h;
}

SoftmaxLabelNoise SoftmaxLabelNoise::standard(int num_classes, int input_dim,
                                              double corruption_p) {
    std::vector<Sample> data;
    for (int i = 0; i < input_dim; ++i) {
        Sample s;
        s.x = Vector::Zero(input_dim);
        s.x[i] = 1.0;
        s.label = i % num_classes;
        data.push_back(std::move(s));
    }
    return SoftmaxLabelNoise(num_classes, std::move(data), corruption_p);
}

Vector SoftmaxLabelNoise::softmax_probs(const Vector& theta, const Vector& x) const {
    Vector z(num_classes_);
    for (int a = 0; a < num_classes_; ++a)
        z[a] = theta.segment(a * input_dim_, input_dim_).dot(x);
    const double zmax = z.maxCoeff();
    Vector e = (z.array() - zmax).exp();
    return e / e.sum();
}

Vector SoftmaxLabelNoise::target_probs(int label) const {
    Vector q = Vector::Constant(num_classes_, corruption_p_ / (num_classes_ - 1));
    q[label] = 1.0 - corruption_p_;
    return q;
}

double SoftmaxLabelNoise::eval_loss(const Vector& theta) const {
    check_theta(theta);
    double loss = 0.0;
    for (const auto& s : dataset_) {
        const Vector f = softmax_probs(theta, s.x);
        const Vector q = target_probs(s.label);
        for (int j = 0; j < num_classes_; ++j)
            loss -= q[j] * std::log(f[j]);
    }
    return loss / dataset_.size();
}

Vector SoftmaxLabelNoise::eval_grad(const Vector& theta) const {
    check_theta(theta);
    Vector g = Vector::Zero(dim());
    for (const auto& s : dataset_) {
        const Vector f = softmax_probs(theta, s.x);
        const Vector q = target_probs(s.label);
        for (int a = 0; a < num_classes_; ++a)
            g.segment(a * input_dim_, input_dim_) += (f[a] - q[a]) * s.x;
    }
    return g / dataset_.size();
}

Matrix SoftmaxLabelNoise::eval_hessian(const Vector& theta) const {
    check_theta(theta);
    Matrix h = Matrix::Zero(dim(), dim());
    for (const auto& s : dataset_) {
        const Vector f = softmax_probs(theta, s.x);
        const Matrix xx = s.x * s.x.transpose();
        for (int a = 0; a < num_classes_; ++a)
            for (int b = 0; b < num_classes_; ++b) {
                const double coef = (a == b ? f[a] : 0.0) - f[a] * f[b];
                if (coef != 0.0)
                    h.block(a * input_dim_, b * input_dim_, input_dim_, input_dim_) += coef * xx;
            }
    }
    return h / dataset_.size();
}

Vector SoftmaxLabelNoise::third_contract(const Vector& theta, const Matrix& M) const {
    check_theta(theta);
    check_symmetric(M);
    Vector out = Vector::Zero(dim());
    for (const auto& s : dataset_) {
        const Vector f = softmax_probs(theta, s.x);
        // Contract M with x in both logit blocks: m(b, c) = x^T M_(b,c) x.
        Matrix m(num_classes_, num_classes_);
        for (int b = 0; b < num_classes_; ++b)
            for (int c = 0; c < num_classes_; ++c)
                m(b, c) = s.x.dot(
                    M.block(b * input_dim_, c * input_dim_, input_dim_, input_dim_) * s.x);
        for (int a = 0; a < num_classes_; ++a) {
            double acc = 0.0;
            for (int b = 0; b < num_classes_; ++b)
                for (int c = 0; c < num_classes_; ++c) {
                    // Third derivative of cross-entropy in the logits.
                    double t = 0.0;
                    if (a == b && a == c) t += f[a];
                    if (a == b) t -= f[a] * f[c];
                    if (a == c) t -= f[a] * f[b];
                    if (b == c) t -= f[a] * f[b];
                    t += 2.0 * f[a] * f[b] * f[c];
                    acc += t * m(b, c);
                }
            out.segment(a * input_dim_, input_dim_) += acc * s.x;
        }
    }
    return out / dataset_.size();
}

Matrix SoftmaxLabelNoise::noise_covariance(const Vector& theta) const {
    check_theta(theta);
    // Exact enumeration over data points and noisy labels.
    const Vector mean = eval_grad(theta);
    Matrix second = Matrix::Zero(dim(), dim());
    for (const auto& s : dataset_) {
        const Vector f = softmax_probs(theta, s.x);
        const Vector q = target_probs(s.label);
        for (int lab = 0; lab < num_classes_; ++lab) {
            Vector g = Vector::Zero(dim());
            for (int a = 0; a < num_classes_; ++a)
                g.segment(a * input_dim_, input_dim_) += (f[a] - (a == lab ? 1.0 : 0.0)) * s.x;
            second += (q[lab] / dataset_.size()) * (g * g.transpose());
        }
    }
    return second - mean * mean.transpose();
}

Vector SoftmaxLabelNoise::sample_noise(const Vector& theta, StreamRng& rng) const {
    check_theta(theta);
    const auto& s = dataset_[rng.next_below(dataset_.size())];
    // fresh noisy label for this access
    int lab = s.label;
    if (rng.next_uniform() < corruption_p_) {
        int other = static_cast<int>(rng.next_below(num_classes_ - 1));
        lab = other >= s.label ? other + 1 : other;
    }
    const Vector f = softmax_probs(theta, s.x);
    Vector g = Vector::Zero(dim());
    for (int a = 0; a < num_classes_; ++a)
        g.segment(a * input_dim_, input_dim_) += (f[a] - (a == lab ? 1.0 : 0.0)) * s.x;
    return g - eval_grad(theta);
}

Vector SoftmaxLabelNoise::stoch_grad_at(const Vector& theta, std::size_t index,
                                        StreamRng& rng) const {
    check_theta(theta);
    if (index >= dataset_.size())
        throw std::invalid_argument("softmax: dataset index out of range");
    const auto& s = dataset_[index];
    int lab = s.label;
    if (rng.next_uniform() < corruption_p_) {
        int other = static_cast<int>(rng.next_below(num_classes_ - 1));
        lab = other >= s.label ? other + 1 : other;
    }
    const Vector f = softmax_probs(theta, s.x);
    Vector g = Vector::Zero(dim());
    for (int a = 0; a < num_classes_; ++a)
        g.segment(a * input_dim_, input_dim_) += (f[a] - (a == lab ? 1.0 : 0.0)) * s.x;
    return g;
}

double SoftmaxLabelNoise::sigma_max() const {
    double xmax = 0.0;
    for (const auto& s : dataset_) xmax = std::max(xmax, s.x.norm());
    return 4.0 * xmax;
}

Vector SoftmaxLabelNoise::find_interpolating_point(const Vector& theta0, double tol) const {
    check_theta(theta0);
    Vector theta = theta0;
    const double lr = 1.0;
    for (long it = 0; it < 2'000'000; ++it) {
        const Vector g = eval_grad(theta);
        if (g.norm() < tol)
            return theta;
        theta -= lr * g;
    }
    throw std::runtime_error("softmax: gradient descent did not reach an interpolating point");
}

// ---------------------------------------------------------------------------

Vector sample_stoch_grad(const LossModel& model, const Vector& theta, int B, StreamRng& rng) {
    if (B < 1)
        throw std::invalid_argument("sample_stoch_grad: batch size must be positive");
    Vector z = Vector::Zero(model.dim());
    for (int i = 0; i < B; ++i) z += model.sample_noise(theta, rng);
    return model.eval_grad(theta) + z / static_cast<double>(B);
}

std::unique_ptr<LossModel> make_model(const std::string& name, NoiseKind noise,
                                      double noise_param) {
    if (name == "valley") {
        switch (noise) {
            case NoiseKind::Isotropic:
                return std::make_unique<QuadraticValley>(QuadraticValley::isotropic(noise_param));
            case NoiseKind::HessianAligned:
                return std::make_unique<QuadraticValley>(
                    QuadraticValley::hessian_aligned(noise_param));
            case NoiseKind::Custom:
                throw std::invalid_argument("valley: custom covariance needs explicit entries");
        }
    }
    if (name == "block") {
        // default 4-d instance: rank-2 Hessian, identity noise
        Vector h(4);
        h << 3.0, 1.0, 0.0, 0.0;
        return std::make_unique<BlockQuadratic>(h, noise_param * Matrix::Identity(4, 4));
    }
    if (name == "softmax")
        return std::make_unique<SoftmaxLabelNoise>(SoftmaxLabelNoise::standard());
    throw std::invalid_argument("unknown model: " + name);
}

}  // namespace slowlab
