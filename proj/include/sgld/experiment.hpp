#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgld/constants.hpp"
#include "sgld/gradient_models.hpp"
#include "sgld/json_util.hpp"
#include "sgld/sgld.hpp"
#include "sgld/wasserstein.hpp"

namespace sgld {

/// Which model to build and its parameters. Unused fields are ignored.
struct ModelSpec {
    std::string id = "gaussian";  // gaussian | mixture | logreg | vi | linear_mse
    Eigen::Index d = 1;
    double sigma = 1.0;           // gaussian data scale, linear_mse noise scale
    std::vector<double> a_hat;    // mixture, logreg, vi; default (3, −3) in 2-D, else 2·1
    std::vector<double> w;        // linear_mse weights; default zero
    std::string dataset;          // logreg, vi: CSV `z0,...,y`; empty generates figure data
    std::size_t batch_size = 10;  // logreg minibatch size K
    std::uint64_t data_seed = 0;  // for generated datasets

    Json to_json() const;
    static ModelSpec from_json(const Json& j);
};

ModelPtr make_model(const ModelSpec& spec, double beta);

enum class Reference { ExactSampler, LongRunChain };
enum class MetricKind { W1, W2, Sliced };

std::string reference_name(Reference r);
std::string metric_name(MetricKind m);

/// Every CLI flag has a key here. JSON layout:
///   {"model": {...}, "chain": {lambda, beta, n_steps, burn_in, thinning,
///    seed, theta0, init_sigma}, "experiment": {lambda_grid, n_chains,
///    repetitions, reference, metric, n_projections, max_steps, threads,
///    output_dir}, "constants": {c_hat, moments_mc}}
struct ExperimentConfig {
    ModelSpec model;
    double lambda = 0.01;
    double beta = 1.0;
    std::int64_t n_steps = 1000;  // run, sweep; first n of the plateau search
    std::int64_t burn_in = 0;
    std::int64_t thinning = 1;
    std::uint64_t seed = 0;
    std::vector<double> theta0;  // empty: the origin
    double init_sigma = 0.0;

    std::vector<double> lambda_grid;
    std::size_t n_chains = 1024;
    int repetitions = 3;
    Reference reference = Reference::ExactSampler;
    MetricKind metric = MetricKind::W1;
    int n_projections = kDefaultProjections;
    std::int64_t max_steps = 1 << 18;  // cap on any simulated n
    unsigned threads = 0;
    std::string output_dir = ".";

    double c_hat = 1.0;
    std::int64_t moments_mc = 200000;

    void validate() const;
    /// Grid checks on top of validate(): nonempty, positive, ascending.
    void validate_grid() const;
    ChainConfig chain_config(double lambda, std::uint64_t seed) const;
    Json to_json() const;
    static ExperimentConfig from_json(const Json& j);
};

ExperimentConfig load_config(const std::string& path);

// -- Data files ----------------------------------------------------------

void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);
/// Reads the `step,theta_0,...` sample format; the step column is dropped.
std::vector<Vector> read_samples_csv(const std::string& path);

// -- Figure data ---------------------------------------------------------

struct Figure1Data {
    Dataset dataset;
    Vector w_star;  // generating weight, drawn once from the mixture prior
};

/// n points z ~ N(0, 0.1 I_2) with y ~ Bernoulli(1/(1 + e^{−zᵀw★})).
Figure1Data gen_figure1_data(std::uint64_t seed, std::size_t n = 1000,
                             const Vector& a_hat = Vector());

struct Kde2D {
    std::vector<double> xs, ys;  // grid coordinates
    Matrix density;              // density(i, j) at (xs[i], ys[j])
    double hx = 0, hy = 0;       // bandwidths
    double integral = 0;         // Riemann sum over the grid
};

/// Product Gaussian kernel, Scott's rule per axis (σ_k n^{−1/6}), evaluated
/// on a grid×grid lattice over the bounding box padded by `pad` per side.
Kde2D kde_2d(const std::vector<Vector>& samples, int grid = 128, double pad = 0.1);

struct Figure1Options {
    std::size_t K = 10;
    double lambda = 0.1;
    double beta = 1.0;
    std::int64_t n_samples = 25000;
    std::int64_t burn_in = 1000;
    Vector a_hat;  // default (3, −3)
    int grid = 128;
};

struct Figure1Result {
    ChainOutput chain;
    Kde2D kde;
    double max_trail_second = 0.0;
    double trail_bound = 0.0;  // E|θ₀|² + c1(λmax + 1/a) for the model
    std::vector<std::string> warnings;
};

Figure1Result run_figure1(const Dataset& data, std::uint64_t seed,
                          const Figure1Options& opts = Figure1Options());

void write_kde_csv(const std::string& path, const Kde2D& kde);

// -- Distances and references --------------------------------------------

/// Reference draws for the target: the exact sampler, or a long chain at
/// λ_ref = λ/10 with 10× burn-in when asked for (or no sampler exists).
std::vector<Vector> reference_cloud(const GradientModel& model, const ExperimentConfig& cfg,
                                    std::size_t n, std::uint64_t seed, double lambda_hint);

/// W1 or W2 per `metric`: sorted in 1-D, exact matching for equal sizes up to
/// kMaxExactN, sliced otherwise. MetricKind::Sliced is sliced W2.
DistanceEstimate distance_between(const std::vector<Vector>& a, const std::vector<Vector>& b,
                                  MetricKind metric, int n_projections, std::uint64_t seed);

// -- Sweeps and rates ----------------------------------------------------

struct SweepRow {
    double lambda = 0;
    std::int64_t n_steps = 0;
    int repetition = 0;
    DistanceEstimate distance;
    std::size_t live_chains = 0;
    double mean_sq_norm = 0;
};

/// Fixed n_steps for each λ of the grid; distance of the terminal cloud to
/// the reference per repetition.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

struct PlateauStep {
    std::int64_t n = 0;
    double distance = 0;
    double std_error = 0;
};

struct RateCell {
    double lambda = 0;
    std::int64_t n = 0;               // n at which the plateau was declared
    bool plateaued = false;
    double distance = 0;              // mean over repetitions at n
    double std_error = 0;             // sd / √R
    std::vector<double> per_rep;
    std::vector<PlateauStep> history;
    std::string method;
};

struct RateFit {
    std::vector<RateCell> cells;
    std::size_t used = 0;        // cells in the fit
    double alpha = 0;            // distance ≈ C λ^α
    double log_C = 0;
    double half_width = 0;       // 95% t-interval on α
    std::vector<double> residuals;
    std::string metric;
    std::string plateau_rule;
    std::vector<std::string> warnings;

    Json to_json() const;
};

/// For each λ: run R independent ensembles, doubling n from cfg.n_steps
/// until the mean distance at n and 2n agree within their combined standard
/// error (or max_steps is hit, which flags the cell and drops it from the
/// fit). Then fits log distance on log λ.
RateFit rate_experiment(const ExperimentConfig& cfg);

/// Least squares of log y on log x with a 95% interval on the slope.
void fit_power_law(const std::vector<double>& x, const std::vector<double>& y, RateFit& out);

// -- Bound check ---------------------------------------------------------

/// Constants for the configured model: closed-form moments when available,
/// Monte Carlo otherwise; ∫V₂dπ by Monte Carlo when the target can be
/// sampled; θ₀ moments from the chain's initial law.
ConstantsReport constants_for(const ExperimentConfig& cfg, const GradientModel& model);

struct BoundRow {
    std::string bound;  // W1, W2, excess_risk
    double lambda = 0;
    std::int64_t n = 0;
    std::string n_source;  // budget, cap, initial
    double empirical = 0;
    double std_error = 0;
    double rhs = 0;
    std::string status;  // consistent | vacuous - consistent | violated | not covered
};

struct BoundCheckReport {
    std::vector<BoundRow> rows;
    std::vector<std::string> notes;
    bool violated() const;
    Json to_json() const;
};

BoundCheckReport bound_check(const ExperimentConfig& cfg, const ConstantsReport& constants);
void write_bound_csv(const std::string& path, const BoundCheckReport& rep);

// -- Manifest ------------------------------------------------------------

struct Manifest {
    std::string command;
    Json config;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    Json extra = Json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    /// Writes manifest.json into `dir` with versions and wall-clock time.
    void write(const std::string& dir) const;
};

}  // namespace sgld
