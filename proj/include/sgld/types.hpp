#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sgld {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Parameter θ ∈ R^d. Kept as a plain Eigen vector; finiteness is checked at
/// module boundaries with require_finite().
using ParameterVector = Vector;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: dimension mismatch, invalid config, missing constants.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A chain left the finite region (non-finite coordinate or |θ| > 1e12).
class DivergenceError : public Error {
public:
    DivergenceError(std::int64_t step, Vector last_finite, const std::string& what)
        : Error(what), step_(step), last_finite_(std::move(last_finite)) {}

    std::int64_t step() const noexcept { return step_; }
    const Vector& last_finite_theta() const noexcept { return last_finite_; }

private:
    std::int64_t step_;
    Vector last_finite_;
};

/// Raised by the ε-budget when the required iteration count does not fit in
/// 64 bits. Carries the unrounded value of λn·C and the real-valued n.
class BudgetOverflowError : public ValidationError {
public:
    BudgetOverflowError(double log_value, double n_real, const std::string& what)
        : ValidationError(what), log_value_(log_value), n_real_(n_real) {}

    double log_value() const noexcept { return log_value_; }
    double n_real() const noexcept { return n_real_; }

private:
    double log_value_;
    double n_real_;
};

struct DataPoint {
    Vector features;
    int label = -1;  // -1 when the model has no class label
};

using Dataset = std::vector<DataPoint>;

struct MiniBatch {
    std::vector<DataPoint> points;
    std::vector<std::size_t> source_indices;  // 1-based, in [1, n]
};

/// Constants declared by a model for the local Lipschitz and local
/// dissipativity conditions. `b` is E[b(X0)] when known in closed form.
struct AssumptionConstants {
    double L1 = 0.0;
    double L2 = 0.0;
    double a = 0.0;          // smallest eigenvalue of E[A(X0)]
    double H_star = 0.0;     // |H(0, 0)|
    std::optional<double> b;
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Data moments consumed by the constants calculator.
struct ModelMoments {
    Estimate E_eta;
    Estimate E_eta_sq;
    Estimate E_one_plus_eta_4;
    Estimate E_etabar;
    Estimate E_etabar_sq;
    Estimate E_etabar_3;
    Estimate E_etabar_4;
    Estimate E_one_plus_etabar_4;
    Estimate sigma_hat;  // E[(η(X0)+η(E X0))² |X0 − E X0|²]
    Estimate E_b;
    std::int64_t n_mc = 0;  // 0 for closed-form moments
    std::int64_t saturated_draws = 0;
    std::vector<std::string> warnings;
};

void require(bool condition, const std::string& message);
void require_finite(const Vector& v, const std::string& what);
void require_same_dim(const Vector& a, const Vector& b, const std::string& what);

}  // namespace sgld
