#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgld/gradient_models.hpp"

namespace sgld {

/// Chains whose |θ| exceeds this are treated as diverged.
inline constexpr double kDivergenceNorm = 1e12;

struct ChainConfig {
    double lambda = 0.01;
    double beta = 1.0;
    std::int64_t n_steps = 1000;
    std::int64_t burn_in = 0;
    std::int64_t thinning = 1;
    std::optional<Vector> theta0;  // default: the origin
    double init_sigma = 0.0;       // > 0 adds N(0, init_sigma² I) to theta0
    std::uint64_t seed = 0;
    std::optional<double> lambda_max;  // when set, λ > λ_max is recorded as a warning
    bool record_trail = true;

    void validate() const;
};

/// Running means of |θ_k|² and |θ_k|⁴ over k = 1..n for one chain, or
/// ensemble means at step n for run_ensemble.
struct MomentRecord {
    double second = 0.0;
    double fourth = 0.0;
};

struct ChainOutput {
    std::vector<Vector> samples;
    std::vector<std::int64_t> sample_steps;
    std::vector<MomentRecord> moment_trail;
    ChainConfig accepted_config;
    std::vector<std::string> warnings;
    Vector final_state;
    bool diverged = false;
    std::int64_t divergence_step = -1;
};

struct EnsembleOutput {
    std::vector<ChainOutput> chains;       // ordered by chain index
    std::vector<MomentRecord> trail;       // ensemble means over non-diverged chains, per step
    std::vector<std::string> warnings;

    /// Final states of the non-diverged chains, the empirical law of θ_n.
    std::vector<Vector> terminal_states() const;
    std::size_t diverged_count() const;
};

/// θ − λH(θ, x) + √(2λ/β) ξ. Throws DivergenceError when the result is not
/// finite or leaves the ball of radius kDivergenceNorm.
Vector sgld_step(const Vector& theta, const GradientModel& model, const Vector& x, double lambda,
                 double beta, const Vector& xi, std::int64_t step = -1);

Vector initial_state(const ChainConfig& config, const GradientModel& model,
                     std::uint64_t chain_index);

/// Runs one chain as chain index 0 of the seed's stream family.
ChainOutput run_chain(const ChainConfig& config, const GradientModel& model);

/// Same recursion for an arbitrary chain index; streams are derived from
/// (seed, chain_index).
ChainOutput run_chain_indexed(const ChainConfig& config, const GradientModel& model,
                              std::uint64_t chain_index);

/// Independent chains 0..n_chains−1. Per-chain moment trails are not kept;
/// the ensemble trail is reduced in a fixed order so the result does not
/// depend on the thread count. threads = 0 picks the hardware concurrency.
EnsembleOutput run_ensemble(const ChainConfig& config, const GradientModel& model,
                            std::size_t n_chains, unsigned threads = 0);

/// One chain that can be advanced in pieces. Advancing by n1 and then n2
/// steps visits the same states as a single run of n1 + n2 steps with the
/// same config and chain index.
class ChainState {
public:
    ChainState(const ChainConfig& config, const GradientModel& model, std::uint64_t chain_index);

    /// Runs `steps` more iterations. After a divergence the chain stays
    /// frozen at its last finite state and further calls do nothing.
    void advance(const GradientModel& model, std::int64_t steps);

    const Vector& theta() const noexcept { return theta_; }
    std::int64_t step() const noexcept { return step_; }
    bool diverged() const noexcept { return diverged_; }
    std::int64_t divergence_step() const noexcept { return divergence_step_; }

private:
    Rng noise_;
    Rng data_;
    Vector theta_;
    double lambda_;
    double beta_;
    std::int64_t step_ = 0;
    bool diverged_ = false;
    std::int64_t divergence_step_ = -1;
};

/// Chains 0..n_chains−1 of the config's seed, at step 0.
std::vector<ChainState> make_chains(const ChainConfig& config, const GradientModel& model,
                                    std::size_t n_chains);

/// Advances every chain by `steps`; chains are independent, so the result
/// does not depend on the thread count.
void advance_chains(std::vector<ChainState>& chains, const GradientModel& model,
                    std::int64_t steps, unsigned threads = 0);

/// Current states of the chains that have not diverged.
std::vector<Vector> live_states(const std::vector<ChainState>& chains);

/// CSV with header `step,theta_0,...,theta_{d-1}` and 17 significant digits.
void write_samples_csv(std::ostream& os, const std::vector<Vector>& samples,
                       const std::vector<std::int64_t>& steps);
void write_chain_csv(const std::string& path, const ChainOutput& out);

}  // namespace sgld
