#pragma once

#include <memory>
#include <optional>
#include <string>

#include "sgld/rng.hpp"
#include "sgld/types.hpp"

namespace sgld {

/// Stochastic gradient oracle H(θ, x) with x drawn i.i.d. from a data law on
/// R^m, together with the constants of the local Lipschitz / dissipativity
/// conditions it claims to satisfy:
///
///   |H(θ,x) − H(θ',x)| ≤ L1 η(x) |θ − θ'|
///   |H(θ,x) − H(θ,x')| ≤ L2 (η(x) + η(x')) (1 + |θ|) |x − x'|
///   ⟨H(θ,x), θ⟩ ≥ ⟨θ, A(x) θ⟩ − b(x)
///
/// Implementations are immutable after construction and safe to share
/// between threads.
class GradientModel {
public:
    virtual ~GradientModel() = default;

    virtual std::string id() const = 0;
    virtual Eigen::Index dim_theta() const = 0;
    virtual Eigen::Index dim_data() const = 0;

    virtual Vector stoch_grad(const Vector& theta, const Vector& x) const = 0;
    virtual Vector sample_data(Rng& rng) const = 0;

    virtual bool has_exact_full_gradient() const { return false; }
    virtual Vector full_grad(const Vector& theta) const;

    virtual bool has_exact_target_sampler() const { return false; }
    /// One draw from π_β ∝ exp(−βU).
    virtual Vector sample_target(Rng& rng, double beta) const;

    /// U with ∇U = h, and its infimum; used for excess-risk checks.
    virtual bool has_objective() const { return false; }
    virtual double objective(const Vector& theta) const;
    virtual double objective_infimum() const;

    virtual const AssumptionConstants& constants() const = 0;
    virtual double eta(const Vector& x) const = 0;
    /// ⟨θ, A(x) θ⟩
    virtual double dissipativity_quadform(const Vector& x, const Vector& theta) const = 0;
    /// b(x)
    virtual double dissipativity_offset(const Vector& x) const = 0;

    /// Closed-form data moments when the data law allows it.
    virtual std::optional<ModelMoments> exact_moments() const { return std::nullopt; }

    /// True when eta(x) had to be clamped to the largest finite double.
    virtual bool eta_saturated(const Vector& /*x*/) const { return false; }

    /// Radius to which the assumption checks truncate data draws, if any.
    virtual std::optional<double> data_clip_radius() const { return std::nullopt; }

    /// η̄(x) = (η(x) + η(0)) |x|, built from the same η as the Lipschitz checks.
    double eta_bar(const Vector& x) const;
};

using ModelPtr = std::shared_ptr<const GradientModel>;

// -- Closed-form gradients -------------------------------------------------

/// Minibatch gradient of the negative log-posterior (mixture prior + logistic
/// likelihood), scaled by 1/β.
Vector logreg_stoch_grad(const Vector& theta, const MiniBatch& batch, const Vector& a_hat,
                         std::size_t n, std::size_t K, double beta);

Vector logreg_full_grad(const Vector& theta, const Dataset& dataset, const Vector& a_hat,
                        double beta);

/// Reparameterised variational gradient with C = I/4, q = 7/8 and the
/// Bernoulli component already marginalised.
Vector vi_stoch_grad(const Vector& theta, const Vector& u, const Vector& a_hat,
                     const Dataset& dataset);

Vector linear_mse_stoch_grad(const Vector& theta, const Vector& y, double z);

/// Gradient of the mixture prior potential |θ−â|²/2 − log(1 + e^{−2âᵀθ}).
Vector mixture_prior_grad(const Vector& theta, const Vector& a_hat);

// -- Models ----------------------------------------------------------------

/// Bayesian logistic regression with minibatches of size K drawn uniformly
/// with replacement. A data point x ∈ R^{K(d+1)} is the flattened batch
/// [z_1, y_1, ..., z_K, y_K].
class LogRegModel final : public GradientModel {
public:
    LogRegModel(Dataset dataset, Vector a_hat, std::size_t batch_size, double beta);

    std::string id() const override { return "logreg"; }
    Eigen::Index dim_theta() const override { return a_hat_.size(); }
    Eigen::Index dim_data() const override {
        return static_cast<Eigen::Index>(batch_size_) * (a_hat_.size() + 1);
    }

    Vector stoch_grad(const Vector& theta, const Vector& x) const override;
    Vector sample_data(Rng& rng) const override;
    MiniBatch sample_batch(Rng& rng) const;

    bool has_exact_full_gradient() const override { return true; }
    Vector full_grad(const Vector& theta) const override;

    bool has_objective() const override { return true; }
    double objective(const Vector& theta) const override;

    const AssumptionConstants& constants() const override { return constants_; }
    double eta(const Vector& x) const override;
    double dissipativity_quadform(const Vector& x, const Vector& theta) const override;
    double dissipativity_offset(const Vector& x) const override;

    const Dataset& dataset() const noexcept { return dataset_; }
    const Vector& a_hat() const noexcept { return a_hat_; }
    std::size_t batch_size() const noexcept { return batch_size_; }
    double beta() const noexcept { return beta_; }

    static Vector flatten(const MiniBatch& batch);
    MiniBatch unflatten(const Vector& x) const;

private:
    Dataset dataset_;
    Vector a_hat_;
    std::size_t batch_size_;
    double beta_;
    AssumptionConstants constants_;
};

/// Variational-inference gradient; the data law is u ~ N(0, I_d).
class VariationalModel final : public GradientModel {
public:
    VariationalModel(Dataset dataset, Vector a_hat);

    std::string id() const override { return "vi"; }
    Eigen::Index dim_theta() const override { return a_hat_.size(); }
    Eigen::Index dim_data() const override { return a_hat_.size(); }

    Vector stoch_grad(const Vector& theta, const Vector& u) const override;
    Vector sample_data(Rng& rng) const override;

    const AssumptionConstants& constants() const override { return constants_; }
    double eta(const Vector& u) const override;
    bool eta_saturated(const Vector& u) const override;
    std::optional<double> data_clip_radius() const override { return 12.0; }
    double dissipativity_quadform(const Vector& u, const Vector& theta) const override;
    double dissipativity_offset(const Vector& u) const override;

    const Dataset& dataset() const noexcept { return dataset_; }
    const Vector& a_hat() const noexcept { return a_hat_; }

private:
    Dataset dataset_;
    Vector a_hat_;
    double sum_z_sq_ = 0.0;
    AssumptionConstants constants_;
};

/// Least-squares linear estimator: x = (y, z) with y ~ N(0, I_d) and
/// z = ⟨y, w⟩ + σ ε. H(θ, x) = −2yz + 2y⟨y, θ⟩.
class LinearMseModel final : public GradientModel {
public:
    LinearMseModel(Vector w_true, double noise_sigma);

    std::string id() const override { return "linear_mse"; }
    Eigen::Index dim_theta() const override { return w_.size(); }
    Eigen::Index dim_data() const override { return w_.size() + 1; }

    Vector stoch_grad(const Vector& theta, const Vector& x) const override;
    Vector sample_data(Rng& rng) const override;

    bool has_exact_full_gradient() const override { return true; }
    Vector full_grad(const Vector& theta) const override;
    bool has_exact_target_sampler() const override { return true; }
    Vector sample_target(Rng& rng, double beta) const override;
    bool has_objective() const override { return true; }
    double objective(const Vector& theta) const override;
    double objective_infimum() const override;

    const AssumptionConstants& constants() const override { return constants_; }
    double eta(const Vector& x) const override;
    double dissipativity_quadform(const Vector& x, const Vector& theta) const override;
    double dissipativity_offset(const Vector& x) const override;

private:
    Vector w_;
    double noise_sigma_;
    AssumptionConstants constants_;
};

/// H(θ, x) = θ − x with x ~ N(0, σ² I_d); target N(0, β⁻¹ I_d).
class GaussianModel final : public GradientModel {
public:
    GaussianModel(Eigen::Index d, double sigma_data);

    std::string id() const override { return "gaussian"; }
    Eigen::Index dim_theta() const override { return d_; }
    Eigen::Index dim_data() const override { return d_; }

    Vector stoch_grad(const Vector& theta, const Vector& x) const override;
    Vector sample_data(Rng& rng) const override;

    bool has_exact_full_gradient() const override { return true; }
    Vector full_grad(const Vector& theta) const override { return theta; }
    bool has_exact_target_sampler() const override { return true; }
    Vector sample_target(Rng& rng, double beta) const override;
    bool has_objective() const override { return true; }
    double objective(const Vector& theta) const override { return 0.5 * theta.squaredNorm(); }
    double objective_infimum() const override { return 0.0; }

    const AssumptionConstants& constants() const override { return constants_; }
    double eta(const Vector&) const override { return 1.0; }
    double dissipativity_quadform(const Vector&, const Vector& theta) const override {
        return 0.5 * theta.squaredNorm();
    }
    double dissipativity_offset(const Vector& x) const override { return 0.5 * x.squaredNorm(); }
    std::optional<ModelMoments> exact_moments() const override;

    double sigma_data() const noexcept { return sigma_; }

    /// Stationary per-coordinate variance of θ ← (1−λ)θ + λx + √(2λ/β) ξ.
    static double stationary_variance(double lambda, double beta, double sigma);

private:
    Eigen::Index d_;
    double sigma_;
    AssumptionConstants constants_;
};

/// Data-free mixture-prior potential; at β = 1 the target is the equal-weight
/// mixture of N(â, I) and N(−â, I). The data law is a point mass at 0 ∈ R.
class MixturePriorModel final : public GradientModel {
public:
    explicit MixturePriorModel(Vector a_hat);

    std::string id() const override { return "mixture"; }
    Eigen::Index dim_theta() const override { return a_hat_.size(); }
    Eigen::Index dim_data() const override { return 1; }

    Vector stoch_grad(const Vector& theta, const Vector& x) const override;
    Vector sample_data(Rng& rng) const override;

    bool has_exact_full_gradient() const override { return true; }
    Vector full_grad(const Vector& theta) const override;
    bool has_exact_target_sampler() const override { return true; }
    Vector sample_target(Rng& rng, double beta) const override;
    bool has_objective() const override { return true; }
    double objective(const Vector& theta) const override;
    double objective_infimum() const override { return infimum_; }

    const AssumptionConstants& constants() const override { return constants_; }
    double eta(const Vector&) const override { return 1.0; }
    double dissipativity_quadform(const Vector&, const Vector& theta) const override {
        return 0.5 * theta.squaredNorm();
    }
    double dissipativity_offset(const Vector&) const override { return 0.5 * a_hat_.squaredNorm(); }
    std::optional<ModelMoments> exact_moments() const override;

    const Vector& a_hat() const noexcept { return a_hat_; }

private:
    Vector a_hat_;
    double infimum_ = 0.0;
    AssumptionConstants constants_;
};

std::shared_ptr<GaussianModel> gaussian_calibration_model(double sigma_data, Eigen::Index d = 1);
std::shared_ptr<MixturePriorModel> mixture_prior_model(const Vector& a_hat);

}  // namespace sgld
