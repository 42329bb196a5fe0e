#include "sgld/sgld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "sgld/parallel.hpp"

namespace sgld {

namespace {

constexpr std::size_t kBlock = 64;

std::optional<std::string> step_size_warning(const ChainConfig& config) {
    if (!config.lambda_max || config.lambda <= *config.lambda_max) return std::nullopt;
    std::ostringstream msg;
    msg << std::setprecision(6) << "lambda " << config.lambda << " exceeds lambda_max "
        << *config.lambda_max << "; moment and convergence bounds do not apply";
    return msg.str();
}

template <typename OnStep>
ChainOutput run_impl(const ChainConfig& config, const GradientModel& model,
                     std::uint64_t chain_index, bool keep_trail, OnStep&& on_step) {
    config.validate();
    ChainOutput out;
    out.accepted_config = config;
    if (auto w = step_size_warning(config)) out.warnings.push_back(*w);

    Rng noise(derive_seed(config.seed, chain_index, Stream::Noise));
    Rng data(derive_seed(config.seed, chain_index, Stream::Data));
    Vector theta = initial_state(config, model, chain_index);
    const Eigen::Index d = theta.size();

    if (keep_trail) out.moment_trail.reserve(static_cast<std::size_t>(config.n_steps));
    double run2 = 0.0, run4 = 0.0;
    for (std::int64_t n = 1; n <= config.n_steps; ++n) {
        const Vector x = model.sample_data(data);
        const Vector xi = noise.gaussian(d);
        theta = sgld_step(theta, model, x, config.lambda, config.beta, xi, n);
        const double s2 = theta.squaredNorm();
        on_step(n, s2);
        if (keep_trail) {
            const double w = 1.0 / static_cast<double>(n);
            run2 += (s2 - run2) * w;
            run4 += (s2 * s2 - run4) * w;
            out.moment_trail.push_back({run2, run4});
        }
        if (n > config.burn_in && (n - config.burn_in) % config.thinning == 0) {
            out.samples.push_back(theta);
            out.sample_steps.push_back(n);
        }
    }
    out.final_state = theta;
    return out;
}

}  // namespace

void ChainConfig::validate() const {
    require(std::isfinite(lambda) && lambda > 0.0, "chain: lambda must be positive");
    require(std::isfinite(beta) && beta > 0.0, "chain: beta must be positive");
    require(n_steps >= 1, "chain: n_steps must be >= 1");
    require(burn_in >= 0 && burn_in < n_steps, "chain: need 0 <= burn_in < n_steps");
    require(thinning >= 1, "chain: thinning must be >= 1");
    require(init_sigma >= 0.0, "chain: init_sigma must be >= 0");
    if (theta0) require_finite(*theta0, "chain: theta0");
}

Vector sgld_step(const Vector& theta, const GradientModel& model, const Vector& x, double lambda,
                 double beta, const Vector& xi, std::int64_t step) {
    Vector next = theta - lambda * model.stoch_grad(theta, x) + std::sqrt(2.0 * lambda / beta) * xi;
    if (!next.allFinite() || next.norm() > kDivergenceNorm) {
        throw DivergenceError(step, theta,
                              "chain diverged at step " + std::to_string(step) +
                                  " (|theta| left the finite region)");
    }
    return next;
}

Vector initial_state(const ChainConfig& config, const GradientModel& model,
                     std::uint64_t chain_index) {
    Vector theta = config.theta0 ? *config.theta0 : Vector::Zero(model.dim_theta());
    require(theta.size() == model.dim_theta(), "chain: theta0 has the wrong dimension");
    if (config.init_sigma > 0.0) {
        Rng init(derive_seed(config.seed, chain_index, Stream::Init));
        theta += config.init_sigma * init.gaussian(theta.size());
    }
    return theta;
}

ChainOutput run_chain(const ChainConfig& config, const GradientModel& model) {
    return run_chain_indexed(config, model, 0);
}

ChainOutput run_chain_indexed(const ChainConfig& config, const GradientModel& model,
                              std::uint64_t chain_index) {
    return run_impl(config, model, chain_index, config.record_trail,
                    [](std::int64_t, double) {});
}

std::vector<Vector> EnsembleOutput::terminal_states() const {
    std::vector<Vector> out;
    out.reserve(chains.size());
    for (const auto& c : chains) {
        if (!c.diverged) out.push_back(c.final_state);
    }
    return out;
}

std::size_t EnsembleOutput::diverged_count() const {
    return static_cast<std::size_t>(
        std::count_if(chains.begin(), chains.end(), [](const auto& c) { return c.diverged; }));
}

EnsembleOutput run_ensemble(const ChainConfig& config, const GradientModel& model,
                            std::size_t n_chains, unsigned threads) {
    require(n_chains >= 1, "ensemble: n_chains must be >= 1");
    config.validate();
    const auto steps = static_cast<std::size_t>(config.n_steps);
    const std::size_t n_blocks = (n_chains + kBlock - 1) / kBlock;

    struct BlockSums {
        std::vector<double> s2, s4;
        std::vector<std::uint32_t> count;
    };
    std::vector<BlockSums> blocks(n_blocks);
    EnsembleOutput ens;
    ens.chains.resize(n_chains);

    auto run_block = [&](std::size_t b) {
        BlockSums& sums = blocks[b];
        sums.s2.assign(steps, 0.0);
        sums.s4.assign(steps, 0.0);
        sums.count.assign(steps, 0);
        const std::size_t end = std::min(n_chains, (b + 1) * kBlock);
        for (std::size_t c = b * kBlock; c < end; ++c) {
            // Contributions are staged per chain so a diverged chain leaves no trace.
            std::vector<double> local(steps, 0.0);
            try {
                ens.chains[c] = run_impl(config, model, c, false, [&](std::int64_t n, double s2) {
                    local[static_cast<std::size_t>(n - 1)] = s2;
                });
            } catch (const DivergenceError& e) {
                ChainOutput failed;
                failed.accepted_config = config;
                failed.diverged = true;
                failed.divergence_step = e.step();
                failed.final_state = e.last_finite_theta();
                failed.warnings.push_back("chain " + std::to_string(c) + ": " + e.what());
                ens.chains[c] = std::move(failed);
                continue;
            }
            for (std::size_t k = 0; k < steps; ++k) {
                sums.s2[k] += local[k];
                sums.s4[k] += local[k] * local[k];
                sums.count[k] += 1;
            }
        }
    };

    parallel_for(n_blocks, threads, run_block);

    if (config.record_trail) {
        ens.trail.assign(steps, MomentRecord{});
        for (std::size_t k = 0; k < steps; ++k) {
            double s2 = 0.0, s4 = 0.0;
            std::uint64_t count = 0;
            for (const auto& b : blocks) {
                s2 += b.s2[k];
                s4 += b.s4[k];
                count += b.count[k];
            }
            if (count > 0) ens.trail[k] = {s2 / count, s4 / count};
        }
    }
    if (auto w = step_size_warning(config)) ens.warnings.push_back(*w);
    for (const auto& c : ens.chains) {
        if (c.diverged) ens.warnings.insert(ens.warnings.end(), c.warnings.begin(), c.warnings.end());
    }
    return ens;
}

ChainState::ChainState(const ChainConfig& config, const GradientModel& model,
                       std::uint64_t chain_index)
    : noise_(derive_seed(config.seed, chain_index, Stream::Noise)),
      data_(derive_seed(config.seed, chain_index, Stream::Data)),
      theta_(initial_state(config, model, chain_index)),
      lambda_(config.lambda),
      beta_(config.beta) {
    config.validate();
}

void ChainState::advance(const GradientModel& model, std::int64_t steps) {
    const Eigen::Index d = theta_.size();
    for (std::int64_t k = 0; k < steps && !diverged_; ++k) {
        const Vector x = model.sample_data(data_);
        const Vector xi = noise_.gaussian(d);
        try {
            theta_ = sgld_step(theta_, model, x, lambda_, beta_, xi, step_ + 1);
            ++step_;
        } catch (const DivergenceError& e) {
            diverged_ = true;
            divergence_step_ = e.step();
        }
    }
}

std::vector<ChainState> make_chains(const ChainConfig& config, const GradientModel& model,
                                    std::size_t n_chains) {
    require(n_chains >= 1, "ensemble: n_chains must be >= 1");
    std::vector<ChainState> chains;
    chains.reserve(n_chains);
    for (std::size_t c = 0; c < n_chains; ++c) chains.emplace_back(config, model, c);
    return chains;
}

void advance_chains(std::vector<ChainState>& chains, const GradientModel& model,
                    std::int64_t steps, unsigned threads) {
    const std::size_t n_blocks = (chains.size() + kBlock - 1) / kBlock;
    parallel_for(n_blocks, threads, [&](std::size_t b) {
        const std::size_t end = std::min(chains.size(), (b + 1) * kBlock);
        for (std::size_t c = b * kBlock; c < end; ++c) chains[c].advance(model, steps);
    });
}

std::vector<Vector> live_states(const std::vector<ChainState>& chains) {
    std::vector<Vector> out;
    out.reserve(chains.size());
    for (const auto& c : chains) {
        if (!c.diverged()) out.push_back(c.theta());
    }
    return out;
}

void write_samples_csv(std::ostream& os, const std::vector<Vector>& samples,
                       const std::vector<std::int64_t>& steps) {
    require(samples.size() == steps.size(), "csv: samples and steps differ in length");
    const Eigen::Index d = samples.empty() ? 0 : samples.front().size();
    os << "step";
    for (Eigen::Index i = 0; i < d; ++i) os << ",theta_" << i;
    os << '\n';
    os << std::setprecision(17);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        os << steps[r];
        for (Eigen::Index i = 0; i < d; ++i) os << ',' << samples[r][i];
        os << '\n';
    }
}

void write_chain_csv(const std::string& path, const ChainOutput& out) {
    std::ofstream f(path);
    require(static_cast<bool>(f), "cannot open " + path + " for writing");
    write_samples_csv(f, out.samples, out.sample_steps);
}

}  // namespace sgld
