#include "sgld/gradient_models.hpp"

#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include "sgld/logistic.hpp"

namespace sgld {

namespace {

// E|X|^k for X ~ chi with d degrees of freedom.
double chi_moment(Eigen::Index d, int k) {
    const double half_d = 0.5 * static_cast<double>(d);
    return std::pow(2.0, 0.5 * k) *
           std::exp(std::lgamma(half_d + 0.5 * k) - std::lgamma(half_d));
}

Estimate exact(double v) { return Estimate{v, 0.0}; }

void check_labels(const Dataset& data, Eigen::Index d, const char* who) {
    for (const auto& p : data) {
        if (p.features.size() != d) {
            throw ValidationError(std::string(who) + ": feature dimension does not match a_hat");
        }
        require(p.label == 0 || p.label == 1, std::string(who) + ": labels must be 0 or 1");
        require_finite(p.features, who);
    }
}

}  // namespace

// -- GradientModel defaults ------------------------------------------------

Vector GradientModel::full_grad(const Vector&) const {
    throw ValidationError(id() + ": no exact full gradient");
}

Vector GradientModel::sample_target(Rng&, double) const {
    throw ValidationError(id() + ": no exact target sampler");
}

double GradientModel::objective(const Vector&) const {
    throw ValidationError(id() + ": no objective");
}

double GradientModel::objective_infimum() const {
    throw ValidationError(id() + ": objective infimum unknown");
}

double GradientModel::eta_bar(const Vector& x) const {
    return (eta(x) + eta(Vector::Zero(x.size()))) * x.norm();
}

// -- Closed forms ----------------------------------------------------------

Vector mixture_prior_grad(const Vector& theta, const Vector& a_hat) {
    require_same_dim(theta, a_hat, "mixture_prior_grad");
    return theta - a_hat + 2.0 * inv_one_plus_exp(2.0 * a_hat.dot(theta)) * a_hat;
}

Vector logreg_stoch_grad(const Vector& theta, const MiniBatch& batch, const Vector& a_hat,
                         std::size_t n, std::size_t K, double beta) {
    require_same_dim(theta, a_hat, "logreg_stoch_grad");
    require(K >= 1 && batch.points.size() == K, "logreg_stoch_grad: batch length must equal K");
    require(beta > 0.0, "logreg_stoch_grad: beta must be positive");
    Vector lik = Vector::Zero(theta.size());
    for (const auto& p : batch.points) {
        require_same_dim(theta, p.features, "logreg_stoch_grad");
        lik += (logistic(p.features.dot(theta)) - p.label) * p.features;
    }
    const double scale = static_cast<double>(n) / static_cast<double>(K);
    return (mixture_prior_grad(theta, a_hat) + scale * lik) / beta;
}

Vector logreg_full_grad(const Vector& theta, const Dataset& dataset, const Vector& a_hat,
                        double beta) {
    require(!dataset.empty(), "logreg_full_grad: empty dataset");
    require_same_dim(theta, a_hat, "logreg_full_grad");
    require(beta > 0.0, "logreg_full_grad: beta must be positive");
    Vector lik = Vector::Zero(theta.size());
    for (const auto& p : dataset) {
        require_same_dim(theta, p.features, "logreg_full_grad");
        lik += (logistic(p.features.dot(theta)) - p.label) * p.features;
    }
    return (mixture_prior_grad(theta, a_hat) + lik) / beta;
}

Vector vi_stoch_grad(const Vector& theta, const Vector& u, const Vector& a_hat,
                     const Dataset& dataset) {
    require_same_dim(theta, u, "vi_stoch_grad");
    require_same_dim(theta, a_hat, "vi_stoch_grad");
    const Vector plus = 0.25 * u + theta;
    const Vector minus = 0.25 * u - theta;

    Vector g = 0.5 * theta + 0.25 * u - 0.75 * a_hat;
    g += 0.25 *
         (7.0 * inv_one_plus_exp(2.0 * a_hat.dot(plus)) -
          inv_one_plus_exp(2.0 * a_hat.dot(minus))) *
         a_hat;

    Vector data = Vector::Zero(theta.size());
    for (const auto& p : dataset) {
        require_same_dim(theta, p.features, "vi_stoch_grad");
        const Vector& z = p.features;
        data += (-6.0 * p.label + 7.0 * logistic(z.dot(plus)) - logistic(z.dot(minus))) * z;
    }
    g += 0.125 * data;

    const double tu = 0.25 * theta.dot(u);
    const double tt = theta.squaredNorm();
    g -= 7.0 * inv_one_plus_exp(2.0 * (tu + tt)) / 16.0 * (u + 8.0 * theta);
    g -= inv_one_plus_exp(2.0 * (tu - tt)) / 16.0 * (u - 8.0 * theta);
    return g;
}

Vector linear_mse_stoch_grad(const Vector& theta, const Vector& y, double z) {
    require_same_dim(theta, y, "linear_mse_stoch_grad");
    return 2.0 * (y.dot(theta) - z) * y;
}

// -- LogRegModel -----------------------------------------------------------

LogRegModel::LogRegModel(Dataset dataset, Vector a_hat, std::size_t batch_size, double beta)
    : dataset_(std::move(dataset)), a_hat_(std::move(a_hat)), batch_size_(batch_size),
      beta_(beta) {
    require(!dataset_.empty(), "logreg: empty dataset");
    require(batch_size_ >= 1, "logreg: batch size must be >= 1");
    require(beta_ > 0.0, "logreg: beta must be positive");
    require(a_hat_.squaredNorm() > 1.0, "logreg: |a_hat|^2 must exceed 1");
    check_labels(dataset_, a_hat_.size(), "logreg");

    const double n = static_cast<double>(dataset_.size());
    constants_.L1 = (1.0 + 4.0 * a_hat_.squaredNorm()) * n / beta_;
    constants_.L2 = 2.0 * n / beta_;
    constants_.a = 0.25 / beta_;
    constants_.H_star = 0.0;
}

Vector LogRegModel::flatten(const MiniBatch& batch) {
    require(!batch.points.empty(), "flatten: empty batch");
    const Eigen::Index d = batch.points.front().features.size();
    Vector x(static_cast<Eigen::Index>(batch.points.size()) * (d + 1));
    Eigen::Index k = 0;
    for (const auto& p : batch.points) {
        x.segment(k, d) = p.features;
        x[k + d] = p.label;
        k += d + 1;
    }
    return x;
}

MiniBatch LogRegModel::unflatten(const Vector& x) const {
    require(x.size() == dim_data(), "logreg: data vector has wrong length");
    const Eigen::Index d = a_hat_.size();
    MiniBatch batch;
    for (std::size_t l = 0; l < batch_size_; ++l) {
        const Eigen::Index k = static_cast<Eigen::Index>(l) * (d + 1);
        DataPoint p;
        p.features = x.segment(k, d);
        p.label = static_cast<int>(std::lround(x[k + d]));
        batch.points.push_back(std::move(p));
    }
    return batch;
}

Vector LogRegModel::stoch_grad(const Vector& theta, const Vector& x) const {
    require_same_dim(theta, a_hat_, "logreg");
    require(x.size() == dim_data(), "logreg: data vector has wrong length");
    // Labels are read as reals so the Lipschitz-in-x check sees a continuous map.
    const Eigen::Index d = a_hat_.size();
    Vector lik = Vector::Zero(d);
    for (std::size_t l = 0; l < batch_size_; ++l) {
        const Eigen::Index k = static_cast<Eigen::Index>(l) * (d + 1);
        const auto z = x.segment(k, d);
        lik += (logistic(z.dot(theta)) - x[k + d]) * z;
    }
    const double scale = static_cast<double>(dataset_.size()) / static_cast<double>(batch_size_);
    return (mixture_prior_grad(theta, a_hat_) + scale * lik) / beta_;
}

MiniBatch LogRegModel::sample_batch(Rng& rng) const {
    MiniBatch batch;
    batch.points.reserve(batch_size_);
    batch.source_indices.reserve(batch_size_);
    for (std::size_t l = 0; l < batch_size_; ++l) {
        const std::size_t i = rng.index(dataset_.size());
        batch.points.push_back(dataset_[i]);
        batch.source_indices.push_back(i + 1);
    }
    return batch;
}

Vector LogRegModel::sample_data(Rng& rng) const {
    const Eigen::Index d = a_hat_.size();
    Vector x(dim_data());
    for (std::size_t l = 0; l < batch_size_; ++l) {
        const auto& p = dataset_[rng.index(dataset_.size())];
        const Eigen::Index k = static_cast<Eigen::Index>(l) * (d + 1);
        x.segment(k, d) = p.features;
        x[k + d] = p.label;
    }
    return x;
}

Vector LogRegModel::full_grad(const Vector& theta) const {
    return logreg_full_grad(theta, dataset_, a_hat_, beta_);
}

double LogRegModel::objective(const Vector& theta) const {
    const Vector d = theta - a_hat_;
    double u = 0.5 * d.squaredNorm() - log1p_exp(-2.0 * a_hat_.dot(theta));
    for (const auto& p : dataset_) {
        const double t = p.features.dot(theta);
        u += p.label == 1 ? log1p_exp(-t) : log1p_exp(t);
    }
    return u / beta_;
}

double LogRegModel::eta(const Vector& x) const {
    const double r = 1.0 + x.norm() / std::sqrt(static_cast<double>(batch_size_));
    return r * r;
}

double LogRegModel::dissipativity_quadform(const Vector&, const Vector& theta) const {
    return 0.25 * theta.squaredNorm() / beta_;
}

double LogRegModel::dissipativity_offset(const Vector& x) const {
    const double n = static_cast<double>(dataset_.size());
    const double x2 = x.squaredNorm();
    return 0.5 * a_hat_.squaredNorm() / beta_ +
           2.0 * n * n * (x2 + x2 * x2) / (static_cast<double>(batch_size_) * beta_);
}

// -- VariationalModel ------------------------------------------------------

VariationalModel::VariationalModel(Dataset dataset, Vector a_hat)
    : dataset_(std::move(dataset)), a_hat_(std::move(a_hat)) {
    require(a_hat_.size() >= 1, "vi: a_hat must be nonempty");
    check_labels(dataset_, a_hat_.size(), "vi");
    Vector h0 = Vector::Zero(a_hat_.size());
    for (const auto& p : dataset_) {
        sum_z_sq_ += p.features.squaredNorm();
        h0 += (1.0 - 2.0 * p.label) * p.features;
    }
    constants_.L1 = 1.0;
    constants_.L2 = 0.25;
    constants_.a = 0.25;
    constants_.H_star = 0.375 * h0.norm();
    const double n = static_cast<double>(dataset_.size());
    constants_.b = 2.25 * static_cast<double>(a_hat_.size()) + 30.25 * a_hat_.squaredNorm() +
                   49.0 * n * sum_z_sq_ / 8.0 + 1.75 * n;
}

Vector VariationalModel::stoch_grad(const Vector& theta, const Vector& u) const {
    return vi_stoch_grad(theta, u, a_hat_, dataset_);
}

Vector VariationalModel::sample_data(Rng& rng) const { return rng.gaussian(a_hat_.size()); }

bool VariationalModel::eta_saturated(const Vector& u) const {
    static const double log_max = std::log(std::numeric_limits<double>::max());
    return u.squaredNorm() / 32.0 + std::log(8.0) >= log_max;
}

double VariationalModel::eta(const Vector& u) const {
    if (eta_saturated(u)) return std::numeric_limits<double>::max();
    const double u2 = u.squaredNorm();
    const double v = 4.5 + 8.0 * std::exp(u2 / 32.0) + sum_z_sq_ + 4.0 * a_hat_.squaredNorm() +
                     0.375 * u2;
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}

double VariationalModel::dissipativity_quadform(const Vector&, const Vector& theta) const {
    return 0.25 * theta.squaredNorm();
}

double VariationalModel::dissipativity_offset(const Vector& u) const {
    const double n = static_cast<double>(dataset_.size());
    return 2.25 * u.squaredNorm() + 30.25 * a_hat_.squaredNorm() +
           49.0 * n * sum_z_sq_ / 8.0 + 1.75 * n;
}

// -- LinearMseModel --------------------------------------------------------

LinearMseModel::LinearMseModel(Vector w_true, double noise_sigma)
    : w_(std::move(w_true)), noise_sigma_(noise_sigma) {
    require(w_.size() >= 1, "linear_mse: dimension must be >= 1");
    require(noise_sigma_ > 0.0, "linear_mse: noise sigma must be positive");
    require_finite(w_, "linear_mse");
    constants_.L1 = 2.0;
    constants_.L2 = 2.0;
    constants_.a = 1.0;
    constants_.H_star = 0.0;
    constants_.b = w_.squaredNorm() + noise_sigma_ * noise_sigma_;
}

Vector LinearMseModel::stoch_grad(const Vector& theta, const Vector& x) const {
    require(x.size() == dim_data(), "linear_mse: data vector has wrong length");
    return linear_mse_stoch_grad(theta, x.head(w_.size()), x[w_.size()]);
}

Vector LinearMseModel::sample_data(Rng& rng) const {
    Vector x(dim_data());
    x.head(w_.size()) = rng.gaussian(w_.size());
    x[w_.size()] = x.head(w_.size()).dot(w_) + noise_sigma_ * rng.normal();
    return x;
}

Vector LinearMseModel::full_grad(const Vector& theta) const { return 2.0 * (theta - w_); }

Vector LinearMseModel::sample_target(Rng& rng, double beta) const {
    require(beta > 0.0, "linear_mse: beta must be positive");
    return w_ + rng.gaussian(w_.size()) / std::sqrt(2.0 * beta);
}

double LinearMseModel::objective(const Vector& theta) const {
    return (theta - w_).squaredNorm() + noise_sigma_ * noise_sigma_;
}

double LinearMseModel::objective_infimum() const { return noise_sigma_ * noise_sigma_; }

double LinearMseModel::eta(const Vector& x) const {
    const double r = 1.0 + x.norm();
    return r * r;
}

double LinearMseModel::dissipativity_quadform(const Vector& x, const Vector& theta) const {
    const double t = x.head(w_.size()).dot(theta);
    return t * t;
}

double LinearMseModel::dissipativity_offset(const Vector& x) const {
    const double z = x[w_.size()];
    return z * z;
}

// -- GaussianModel ---------------------------------------------------------

GaussianModel::GaussianModel(Eigen::Index d, double sigma_data) : d_(d), sigma_(sigma_data) {
    require(d_ >= 1, "gaussian: dimension must be >= 1");
    require(sigma_ > 0.0, "gaussian: sigma_data must be positive");
    constants_.L1 = 1.0;
    constants_.L2 = 1.0;
    constants_.a = 0.5;
    constants_.H_star = 0.0;
    constants_.b = 0.5 * static_cast<double>(d_) * sigma_ * sigma_;
}

Vector GaussianModel::stoch_grad(const Vector& theta, const Vector& x) const {
    require_same_dim(theta, x, "gaussian");
    return theta - x;
}

Vector GaussianModel::sample_data(Rng& rng) const { return sigma_ * rng.gaussian(d_); }

Vector GaussianModel::sample_target(Rng& rng, double beta) const {
    require(beta > 0.0, "gaussian: beta must be positive");
    return rng.gaussian(d_) / std::sqrt(beta);
}

double GaussianModel::stationary_variance(double lambda, double beta, double sigma) {
    require(lambda > 0.0 && lambda < 2.0, "stationary_variance: need 0 < lambda < 2");
    return (lambda * sigma * sigma + 2.0 / beta) / (2.0 - lambda);
}

std::optional<ModelMoments> GaussianModel::exact_moments() const {
    // η ≡ 1 so η̄(x) = 2|x| and |x|/σ is chi-distributed.
    ModelMoments m;
    m.E_eta = exact(1.0);
    m.E_eta_sq = exact(1.0);
    m.E_one_plus_eta_4 = exact(16.0);
    const double s = sigma_;
    auto etabar_k = [&](int k) { return std::pow(2.0 * s, k) * chi_moment(d_, k); };
    m.E_etabar = exact(etabar_k(1));
    m.E_etabar_sq = exact(etabar_k(2));
    m.E_etabar_3 = exact(etabar_k(3));
    m.E_etabar_4 = exact(etabar_k(4));
    m.E_one_plus_etabar_4 =
        exact(1.0 + 4.0 * etabar_k(1) + 6.0 * etabar_k(2) + 4.0 * etabar_k(3) + etabar_k(4));
    m.sigma_hat = exact(4.0 * static_cast<double>(d_) * s * s);
    m.E_b = exact(0.5 * static_cast<double>(d_) * s * s);
    return m;
}

// -- MixturePriorModel -----------------------------------------------------

MixturePriorModel::MixturePriorModel(Vector a_hat) : a_hat_(std::move(a_hat)) {
    require(a_hat_.squaredNorm() > 1.0, "mixture: |a_hat|^2 must exceed 1");
    require_finite(a_hat_, "mixture");
    const double r2 = a_hat_.squaredNorm();
    // Hessian eigenvalues lie in [1 - |a|^2, 1], so |a|^2 bounds the Lipschitz constant.
    constants_.L1 = r2;
    constants_.L2 = 1.0;
    constants_.a = 0.5;
    constants_.H_star = 0.0;
    constants_.b = 0.5 * r2;

    // U is symmetric and minimised on the line through a_hat.
    const double r = std::sqrt(r2);
    auto g = [r](double s) { return 0.5 * (s - r) * (s - r) - log1p_exp(-2.0 * r * s); };
    const auto best = boost::math::tools::brent_find_minima(g, 0.0, 2.0 * r + 1.0,
                                                             std::numeric_limits<double>::digits);
    infimum_ = best.second;
}

Vector MixturePriorModel::stoch_grad(const Vector& theta, const Vector&) const {
    return mixture_prior_grad(theta, a_hat_);
}

Vector MixturePriorModel::sample_data(Rng&) const { return Vector::Zero(1); }

Vector MixturePriorModel::full_grad(const Vector& theta) const {
    return mixture_prior_grad(theta, a_hat_);
}

Vector MixturePriorModel::sample_target(Rng& rng, double beta) const {
    require(beta == 1.0, "mixture: exact target sampler only exists at beta = 1");
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    return sign * a_hat_ + rng.gaussian(a_hat_.size());
}

double MixturePriorModel::objective(const Vector& theta) const {
    return 0.5 * (theta - a_hat_).squaredNorm() - log1p_exp(-2.0 * a_hat_.dot(theta));
}

std::optional<ModelMoments> MixturePriorModel::exact_moments() const {
    // Point-mass data: η ≡ 1 and η̄ ≡ 0.
    ModelMoments m;
    m.E_eta = exact(1.0);
    m.E_eta_sq = exact(1.0);
    m.E_one_plus_eta_4 = exact(16.0);
    m.E_etabar = exact(0.0);
    m.E_etabar_sq = exact(0.0);
    m.E_etabar_3 = exact(0.0);
    m.E_etabar_4 = exact(0.0);
    m.E_one_plus_etabar_4 = exact(1.0);
    m.sigma_hat = exact(0.0);
    m.E_b = exact(0.5 * a_hat_.squaredNorm());
    return m;
}

std::shared_ptr<GaussianModel> gaussian_calibration_model(double sigma_data, Eigen::Index d) {
    return std::make_shared<GaussianModel>(d, sigma_data);
}

std::shared_ptr<MixturePriorModel> mixture_prior_model(const Vector& a_hat) {
    return std::make_shared<MixturePriorModel>(a_hat);
}

}  // namespace sgld
