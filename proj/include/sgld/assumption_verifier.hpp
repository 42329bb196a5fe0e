#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgld/gradient_models.hpp"
#include "sgld/json_util.hpp"

namespace sgld {

/// Relative floating-point slack allowed on every pointwise inequality.
inline constexpr double kVerifySlack = 1e-9;

struct Witness {
    Vector theta;
    std::optional<Vector> theta_prime;
    Vector x;
    std::optional<Vector> x_prime;
    double lhs = 0.0;
    double rhs = 0.0;
};

/// One pointwise inequality checked over random tuples. For the Lipschitz
/// checks `worst` is the largest observed ratio, to compare with `declared`;
/// for dissipativity it is the smallest margin (≥ 0 means satisfied); for the
/// growth check it is the largest lhs/rhs ratio (≤ 1 means satisfied).
struct CheckResult {
    std::string name;
    bool pass = true;
    double worst = 0.0;
    double declared = 0.0;
    std::int64_t trials = 0;
    std::int64_t skipped = 0;  // degenerate tuples, e.g. x = x'
    std::int64_t violations = 0;
    std::optional<Witness> witness;  // first violation, or the worst tuple if none
};

struct UnbiasednessResult {
    bool pass = true;
    bool exact = false;  // H is deterministic, compared without MC error
    double max_abs_z = 0.0;
    std::vector<std::vector<double>> z_scores;  // per θ, per coordinate
    std::vector<Vector> thetas;
    std::int64_t n_mc = 0;
};

struct VerificationReport {
    std::string model;
    std::uint64_t seed = 0;
    std::int64_t trials = 0;
    double region_radius_theta = 0.0;
    double region_radius_x = 0.0;  // +inf when the data law is not truncated
    AssumptionConstants constants;
    CheckResult lipschitz_theta;
    CheckResult lipschitz_x;
    CheckResult dissipativity;
    CheckResult growth_bound;
    std::optional<UnbiasednessResult> unbiasedness;

    bool all_pass() const;
    Json to_json() const;
};

struct VerifyOptions {
    double region_radius_theta = 10.0;
    /// Unset: the model's own clip radius if it has one, otherwise no truncation.
    std::optional<double> region_radius_x;
    std::int64_t trials = 10000;
    std::uint64_t seed = 0;
    /// When > 0 and the model has an exact full gradient, also run the
    /// unbiasedness test at `unbiased_thetas` random θ in the region.
    std::int64_t unbiased_n_mc = 0;
    int unbiased_thetas = 5;
};

/// Radius the verifier clips data draws to when the caller gives none.
std::optional<double> default_data_clip(const GradientModel& model);

VerificationReport verify_assumptions(const GradientModel& model, const VerifyOptions& opts);

VerificationReport verify_assumptions(const GradientModel& model, double region_radius_theta,
                                      double region_radius_x, std::int64_t trials,
                                      std::uint64_t seed);

/// Plain Monte-Carlo estimates of every ModelMoments field. The mean E[X₀]
/// is estimated first; σ̂ then uses a fresh stream.
ModelMoments estimate_moments(const GradientModel& model, std::int64_t n_mc, std::uint64_t seed);

/// Closed-form moments when the model has them, Monte Carlo otherwise.
ModelMoments model_moments(const GradientModel& model, std::int64_t n_mc, std::uint64_t seed);

/// Per-coordinate z-scores of the MC mean of H(θ, X) against h(θ); pass iff
/// max |z| ≤ 4.
UnbiasednessResult unbiasedness_test(const GradientModel& model, const std::vector<Vector>& thetas,
                                     std::int64_t n_mc, std::uint64_t seed);

Json moments_to_json(const ModelMoments& m);
ModelMoments moments_from_json(const Json& j);

}  // namespace sgld
