#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgld/json_util.hpp"
#include "sgld/types.hpp"

namespace sgld {

class GradientModel;

/// Everything the explicit constants depend on.
struct ConstantsInputs {
    AssumptionConstants assumptions;  // L1, L2, a, H★
    double b = 0.0;                   // E[b(X₀)]
    ModelMoments moments;
    double d = 1.0;
    double beta = 1.0;
    double c_hat = 1.0;                 // contraction prefactor, user-supplied
    std::optional<double> int_V2_pi;    // ∫V₂ dπ_β; default 1 + b/a + d/(aβ)
    double E_theta0_2 = 0.0;            // E|θ₀|²
    double E_theta0_4 = 0.0;            // E|θ₀|⁴

    void validate() const;
    double int_V2_pi_or_default() const;
};

/// Inputs assembled from a model: its declared constants, b from the model
/// (or E_b of the moments), and θ₀ = 0.
ConstantsInputs inputs_for_model(const GradientModel& model, const ModelMoments& moments,
                                 double beta, double c_hat = 1.0);

/// v_p(w) = (1 + w²)^{p/2}
double v_p(double p, double w);

/// M̄_p = (1/3 + 4b/(3a) + 4d/(3aβ) + 4(p−2)/(3aβ))^{1/2}
double Mbar_p(double p, double a, double b, double d, double beta);

double compute_lambda_max(double a, double L1, double E_one_plus_eta_4);

struct MomentConstants {
    double c0 = 0, c1 = 0, M = 0, c2 = 0, c3 = 0;
};
MomentConstants compute_moment_constants(const ConstantsInputs& in, double lambda_max);

struct DiscretizationConstants {
    double sigmaY_bar = 0, sigmaY_tilde = 0;
    double sigma_hat = 0, sigmaZ_bar = 0, sigmaZ_tilde = 0;
    double C21 = 0, C22 = 0;
    bool overflow = false;  // the e^{4 L1² E[η²]} factor left double range
};
DiscretizationConstants compute_discretization_constants(const ConstantsInputs& in,
                                                         double lambda_max, double c1);

/// Contraction rate of the Langevin diffusion in w₁,₂ with p = 2. Values that
/// underflow are also kept as natural logs.
struct ContractionRate {
    double cbar = 0, ctilde = 0, Mbar = 0;
    double K1 = 0, b_tilde = 0, b_bar = 0;
    double phi_bar = 0, log_phi_bar = 0;
    double log_integral = 0;  // log ∫₀^{b̃} exp((s√K1/2 + 2/√K1)²) ds
    double epsilon = 0, log_epsilon = 0;
    double c_dot = 0, log_c_dot = 0;
    bool underflow = false;  // ċ is below the smallest positive double
};
ContractionRate compute_contraction_rate(double a, double b, double d, double beta, double K1);

/// log ∫_c^u e^{t²} dt for 0 ≤ c ≤ u, by adaptive Gauss–Kronrod after
/// factoring out e^{u²}.
double log_int_exp_square(double c, double u);

struct TheoremConstants {
    double C23 = 0, C24 = 0, C23_star = 0, C24_star = 0;
    double Cbar2 = 0, Cbar3 = 0;
    double C0 = 0, C1 = 0, C2 = 0, C3 = 0;
    double C4 = 0, C5 = 0, C6 = 0, C7 = 0;
    double G = 0;  // L1 E[η](E|θ₀|² + c1(λmax + 1/a)) + L2 E[η̄] + H★
    double Csharp0 = 0, Csharp1 = 0, Csharp2 = 0, Csharp3 = 0;
};
TheoremConstants compute_theorem_constants(const ConstantsInputs& in, double lambda_max,
                                           const MomentConstants& mc,
                                           const DiscretizationConstants& dc,
                                           const ContractionRate& cr);

struct ConstantEntry {
    std::string name;
    double value = 0.0;
    std::string formula;
};

struct ConstantsReport {
    ConstantsInputs inputs;
    double lambda_max = 0;
    MomentConstants moment;
    DiscretizationConstants discretization;
    double vbar_M2 = 0, vbar_M4 = 0;
    double cbar2 = 0, ctilde2 = 0, cbar4 = 0, ctilde4 = 0;
    double Mbar2 = 0, Mbar4 = 0;
    ContractionRate contraction;
    TheoremConstants theorem;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;

    /// One row per named constant with its formula.
    std::vector<ConstantEntry> entries() const;
    /// Names of constants that are +inf, so any bound using them is vacuous.
    std::vector<std::string> vacuous() const;

    Json to_json() const;
    static ConstantsReport from_json(const Json& j);
    std::string table() const;
};

ConstantsReport compute_constants(const ConstantsInputs& in);

enum class Metric { W1, W2 };

struct Budget {
    double lambda_star = 0.0;
    std::int64_t n_star = 0;
    double log_argument = 0.0;  // ln(2 C (1 + E|θ₀|⁴)/ε)
    double n_real = 0.0;
};

/// Step size and iteration count that make the bound at most ε. Throws
/// BudgetOverflowError when n* does not fit in a signed 64-bit integer.
Budget budget(double epsilon_target, const ConstantsReport& report, Metric metric,
              double E_theta0_4);

/// Right-hand sides of the W1, W2 and excess-risk bounds at (λ, n).
double w1_bound(const ConstantsReport& r, double lambda, double n, double E_theta0_4);
double w2_bound(const ConstantsReport& r, double lambda, double n, double E_theta0_4);
double excess_risk_bound(const ConstantsReport& r, double lambda, double n);

/// sup_n E|θ_n|² ≤ E|θ₀|² + c1(λmax + 1/a) and the fourth-moment analogue.
double second_moment_bound(const ConstantsReport& r, double E_theta0_2);
double fourth_moment_bound(const ConstantsReport& r, double E_theta0_4);

}  // namespace sgld
