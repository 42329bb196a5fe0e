#include "sgld/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "sgld/assumption_verifier.hpp"
#include "sgld/logistic.hpp"
#include "sgld/parallel.hpp"

namespace sgld {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector default_a_hat(Eigen::Index d) {
    if (d == 2) {
        Vector a(2);
        a << 3.0, -3.0;
        return a;
    }
    return Vector::Constant(d, 2.0);
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& section) {
    require(j.is_object(), "config section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        require(allowed.count(it.key()) > 0,
                "unknown key '" + it.key() + "' in config section '" + section + "'");
    }
}

template <class T>
void read_if(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_number_if(const Json& j, const char* key, double& out) {
    if (j.contains(key)) out = number_from_json(j.at(key));
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe r;
    if (v.empty()) return r;
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return r;
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    return r;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    require(static_cast<bool>(f), "cannot open " + path + " for writing");
    f << std::setprecision(17);
    return f;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        out.push_back(cell);
    }
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError("not a number '" + s + "' in " + where);
}

// Ensemble seed for repetition r. It does not depend on λ, so every step size
// reuses the same initial points and noise (common random numbers), which
// keeps differences between grid points well below the per-cell MC error.
std::uint64_t cell_seed(std::uint64_t seed, std::size_t /*lambda_index*/, int rep) {
    return derive_seed(seed, static_cast<std::uint64_t>(rep), Stream::Generator);
}

std::uint64_t reference_seed(std::uint64_t seed, int rep) {
    return derive_seed(seed, static_cast<std::uint64_t>(rep), Stream::Reference);
}

std::vector<Vector> head(const std::vector<Vector>& v, std::size_t n) {
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

double excess_risk(const GradientModel& model, const std::vector<Vector>& states) {
    double acc = 0.0;
    for (const auto& s : states) acc += model.objective(s);
    return acc / static_cast<double>(states.size()) - model.objective_infimum();
}

// E|θ₀|² and E|θ₀|⁴ for θ₀ = m + σZ, Z ~ N(0, I_d).
std::pair<double, double> initial_moments(const ExperimentConfig& cfg, Eigen::Index d) {
    const double m2 = cfg.theta0.empty() ? 0.0 : to_vector(cfg.theta0).squaredNorm();
    const double s2 = cfg.init_sigma * cfg.init_sigma;
    const double dd = static_cast<double>(d);
    const double e2 = m2 + dd * s2;
    const double e4 = e2 * e2 + 4.0 * s2 * m2 + 2.0 * dd * s2 * s2;
    return {e2, e4};
}

}  // namespace

// -- Model spec ----------------------------------------------------------

Json ModelSpec::to_json() const {
    Json j{{"id", id}, {"d", d}, {"sigma", sigma}, {"batch_size", batch_size},
           {"data_seed", data_seed}};
    if (!a_hat.empty()) j["a_hat"] = a_hat;
    if (!w.empty()) j["w"] = w;
    if (!dataset.empty()) j["dataset"] = dataset;
    return j;
}

ModelSpec ModelSpec::from_json(const Json& j) {
    check_keys(j, {"id", "d", "sigma", "a_hat", "w", "dataset", "batch_size", "data_seed"}, "model");
    ModelSpec s;
    read_if(j, "id", s.id);
    read_if(j, "d", s.d);
    read_number_if(j, "sigma", s.sigma);
    read_if(j, "a_hat", s.a_hat);
    read_if(j, "w", s.w);
    read_if(j, "dataset", s.dataset);
    read_if(j, "batch_size", s.batch_size);
    read_if(j, "data_seed", s.data_seed);
    return s;
}

ModelPtr make_model(const ModelSpec& spec, double beta) {
    require(spec.d >= 1, "model: d must be >= 1");
    const Vector a_hat = spec.a_hat.empty() ? default_a_hat(spec.d) : to_vector(spec.a_hat);
    if (spec.id == "gaussian") return std::make_shared<GaussianModel>(spec.d, spec.sigma);
    if (spec.id == "mixture") return std::make_shared<MixturePriorModel>(a_hat);
    if (spec.id == "linear_mse") {
        const Vector w = spec.w.empty() ? Vector::Zero(spec.d) : to_vector(spec.w);
        return std::make_shared<LinearMseModel>(w, spec.sigma);
    }
    if (spec.id == "logreg" || spec.id == "vi") {
        Dataset data = spec.dataset.empty() ? gen_figure1_data(spec.data_seed, 1000, a_hat).dataset
                                            : read_dataset_csv(spec.dataset);
        require(!data.empty(), "model: empty dataset");
        if (spec.id == "logreg") return std::make_shared<LogRegModel>(std::move(data), a_hat, spec.batch_size, beta);
        return std::make_shared<VariationalModel>(std::move(data), a_hat);
    }
    throw ValidationError("unknown model '" + spec.id +
                          "' (gaussian, mixture, logreg, vi, linear_mse)");
}

// -- Config --------------------------------------------------------------

std::string reference_name(Reference r) {
    return r == Reference::ExactSampler ? "exact_sampler" : "long_run_chain";
}

std::string metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::W1: return "W1";
        case MetricKind::W2: return "W2";
        case MetricKind::Sliced: return "sliced";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    require(std::isfinite(lambda) && lambda > 0.0, "config: lambda must be positive");
    require(std::isfinite(beta) && beta > 0.0, "config: beta must be positive");
    require(n_steps >= 1, "config: n_steps must be >= 1");
    require(burn_in >= 0 && burn_in < n_steps, "config: need 0 <= burn_in < n_steps");
    require(thinning >= 1, "config: thinning must be >= 1");
    require(init_sigma >= 0.0, "config: init_sigma must be >= 0");
    require(n_chains >= 1, "config: n_chains must be >= 1");
    require(repetitions >= 1, "config: repetitions must be >= 1");
    require(n_projections >= 16, "config: n_projections must be >= 16");
    require(max_steps >= 1, "config: max_steps must be >= 1");
    require(std::isfinite(c_hat) && c_hat > 0.0, "config: c_hat must be positive");
    require(moments_mc >= 1000, "config: moments_mc must be >= 1000");
    require(theta0.empty() || static_cast<Eigen::Index>(theta0.size()) == model.d ||
                model.id == "logreg" || model.id == "vi",
            "config: theta0 has the wrong dimension");
}

void ExperimentConfig::validate_grid() const {
    require(!lambda_grid.empty(), "config: lambda_grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        require(std::isfinite(lambda_grid[i]) && lambda_grid[i] > 0.0,
                "config: lambda_grid entries must be positive");
        if (i > 0) require(lambda_grid[i] > lambda_grid[i - 1], "config: lambda_grid must be strictly ascending");
    }
}

ChainConfig ExperimentConfig::chain_config(double lam, std::uint64_t chain_seed) const {
    ChainConfig c;
    c.lambda = lam;
    c.beta = beta;
    c.n_steps = n_steps;
    c.burn_in = burn_in;
    c.thinning = thinning;
    if (!theta0.empty()) c.theta0 = to_vector(theta0);
    c.init_sigma = init_sigma;
    c.seed = chain_seed;
    return c;
}

Json ExperimentConfig::to_json() const {
    Json j;
    j["model"] = model.to_json();
    j["chain"] = {{"lambda", lambda}, {"beta", beta}, {"n_steps", n_steps}, {"burn_in", burn_in},
                  {"thinning", thinning}, {"seed", seed}, {"theta0", theta0},
                  {"init_sigma", init_sigma}};
    j["experiment"] = {{"lambda_grid", lambda_grid},
                       {"n_chains", n_chains},
                       {"repetitions", repetitions},
                       {"reference", reference_name(reference)},
                       {"metric", metric_name(metric)},
                       {"n_projections", n_projections},
                       {"max_steps", max_steps},
                       {"threads", threads},
                       {"output_dir", output_dir}};
    j["constants"] = {{"c_hat", c_hat}, {"moments_mc", moments_mc}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    check_keys(j, {"model", "chain", "experiment", "constants"}, "top level");
    ExperimentConfig c;
    if (j.contains("model")) c.model = ModelSpec::from_json(j["model"]);
    if (j.contains("chain")) {
        const Json& s = j["chain"];
        check_keys(s, {"lambda", "beta", "n_steps", "burn_in", "thinning", "seed", "theta0", "init_sigma"},
                   "chain");
        read_number_if(s, "lambda", c.lambda);
        read_number_if(s, "beta", c.beta);
        read_if(s, "n_steps", c.n_steps);
        read_if(s, "burn_in", c.burn_in);
        read_if(s, "thinning", c.thinning);
        read_if(s, "seed", c.seed);
        read_if(s, "theta0", c.theta0);
        read_number_if(s, "init_sigma", c.init_sigma);
    }
    if (j.contains("experiment")) {
        const Json& s = j["experiment"];
        check_keys(s, {"lambda_grid", "n_chains", "repetitions", "reference", "metric", "n_projections",
                       "max_steps", "threads", "output_dir"},
                   "experiment");
        read_if(s, "lambda_grid", c.lambda_grid);
        read_if(s, "n_chains", c.n_chains);
        read_if(s, "repetitions", c.repetitions);
        if (s.contains("reference")) {
            const auto r = s["reference"].get<std::string>();
            require(r == "exact_sampler" || r == "long_run_chain",
                    "reference must be exact_sampler or long_run_chain");
            c.reference = r == "exact_sampler" ? Reference::ExactSampler : Reference::LongRunChain;
        }
        if (s.contains("metric")) {
            const auto m = s["metric"].get<std::string>();
            if (m == "W1") c.metric = MetricKind::W1;
            else if (m == "W2") c.metric = MetricKind::W2;
            else if (m == "sliced") c.metric = MetricKind::Sliced;
            else throw ValidationError("metric must be W1, W2 or sliced");
        }
        read_if(s, "n_projections", c.n_projections);
        read_if(s, "max_steps", c.max_steps);
        read_if(s, "threads", c.threads);
        read_if(s, "output_dir", c.output_dir);
    }
    if (j.contains("constants")) {
        const Json& s = j["constants"];
        check_keys(s, {"c_hat", "moments_mc"}, "constants");
        read_number_if(s, "c_hat", c.c_hat);
        read_if(s, "moments_mc", c.moments_mc);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), "cannot open config " + path);
    Json j;
    try {
        j = Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    try {
        return ExperimentConfig::from_json(j);
    } catch (const Json::exception& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
}

// -- Data files ----------------------------------------------------------

void write_dataset_csv(const std::string& path, const Dataset& data) {
    require(!data.empty(), "dataset is empty");
    auto f = open_out(path);
    const Eigen::Index d = data.front().features.size();
    for (Eigen::Index i = 0; i < d; ++i) f << 'z' << i << ',';
    f << "y\n";
    for (const auto& p : data) {
        for (Eigen::Index i = 0; i < d; ++i) f << p.features[i] << ',';
        f << p.label << '\n';
    }
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), "cannot open dataset " + path);
    std::string line;
    require(static_cast<bool>(std::getline(f, line)), "dataset " + path + " is empty");
    const auto header = split_csv(line);
    require(header.size() >= 2 && header.back() == "y", "dataset header must be z0,...,y");
    const std::size_t d = header.size() - 1;
    Dataset data;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = path + " row " + std::to_string(row);
        require(cells.size() == d + 1, "wrong column count in " + where);
        DataPoint p;
        p.features.resize(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) p.features[static_cast<Eigen::Index>(i)] = parse_double(cells[i], where);
        const double y = parse_double(cells[d], where);
        require(y == 0.0 || y == 1.0, "label must be 0 or 1 in " + where);
        p.label = static_cast<int>(y);
        data.push_back(std::move(p));
    }
    return data;
}

std::vector<Vector> read_samples_csv(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), "cannot open samples " + path);
    std::string line;
    require(static_cast<bool>(std::getline(f, line)), "samples file " + path + " is empty");
    const auto header = split_csv(line);
    const std::size_t skip = !header.empty() && header.front() == "step" ? 1 : 0;
    require(header.size() > skip, "samples file " + path + " has no coordinate columns");
    const std::size_t d = header.size() - skip;
    std::vector<Vector> out;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = path + " row " + std::to_string(row);
        require(cells.size() == header.size(), "wrong column count in " + where);
        Vector v(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) v[static_cast<Eigen::Index>(i)] = parse_double(cells[i + skip], where);
        out.push_back(std::move(v));
    }
    return out;
}

// -- Figure data ---------------------------------------------------------

Figure1Data gen_figure1_data(std::uint64_t seed, std::size_t n, const Vector& a_hat_in) {
    require(n >= 1, "gen-data: n must be >= 1");
    const Vector a_hat = a_hat_in.size() ? a_hat_in : default_a_hat(2);
    const Eigen::Index d = a_hat.size();
    Figure1Data out;
    Rng prior(derive_seed(seed, 0, Stream::Generator));
    out.w_star = MixturePriorModel(a_hat).sample_target(prior, 1.0);
    Rng rng(derive_seed(seed, 1, Stream::Generator));
    const double sd = std::sqrt(0.1);
    out.dataset.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DataPoint p;
        p.features = sd * rng.gaussian(d);
        p.label = rng.bernoulli(logistic(p.features.dot(out.w_star))) ? 1 : 0;
        out.dataset.push_back(std::move(p));
    }
    return out;
}

Kde2D kde_2d(const std::vector<Vector>& samples, int grid, double pad) {
    require(samples.size() >= 2, "kde: need at least two samples");
    require(grid >= 2, "kde: grid must be >= 2");
    const auto n = static_cast<Eigen::Index>(samples.size());
    Matrix S(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        require(samples[static_cast<std::size_t>(i)].size() == 2, "kde: samples must be 2-D");
        S.row(i) = samples[static_cast<std::size_t>(i)].transpose();
    }
    Kde2D k;
    const double scott = std::pow(static_cast<double>(n), -1.0 / 6.0);
    double h[2];
    std::vector<double>* axes[2] = {&k.xs, &k.ys};
    Matrix W[2];
    for (int a = 0; a < 2; ++a) {
        const auto col = S.col(a);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
        require(sd > 0.0, "kde: samples are constant along an axis");
        h[a] = sd * scott;
        const double lo = col.minCoeff(), hi = col.maxCoeff();
        const double span = hi - lo;
        const double g0 = lo - pad * span, g1 = hi + pad * span;
        axes[a]->resize(static_cast<std::size_t>(grid));
        for (int g = 0; g < grid; ++g) (*axes[a])[static_cast<std::size_t>(g)] = g0 + (g1 - g0) * g / (grid - 1);
        // W(g, i) = φ((grid_g − s_i)/h)/h
        W[a].resize(grid, n);
        for (int g = 0; g < grid; ++g) {
            const double x = (*axes[a])[static_cast<std::size_t>(g)];
            W[a].row(g) = ((x - col.array().transpose()) / h[a]).square().unaryExpr(
                              [](double t) { return std::exp(-0.5 * t); }) /
                          (h[a] * std::sqrt(2.0 * kPi));
        }
    }
    k.hx = h[0];
    k.hy = h[1];
    k.density = W[0] * W[1].transpose() / static_cast<double>(n);
    const double dx = k.xs[1] - k.xs[0], dy = k.ys[1] - k.ys[0];
    k.integral = k.density.sum() * dx * dy;
    return k;
}

Figure1Result run_figure1(const Dataset& data, std::uint64_t seed, const Figure1Options& o) {
    require(!data.empty(), "figure1: empty dataset");
    require(o.n_samples >= 2, "figure1: need at least two samples");
    const Vector a_hat = o.a_hat.size() ? o.a_hat : default_a_hat(2);
    LogRegModel model(data, a_hat, o.K, o.beta);

    const auto moments = estimate_moments(model, 100000, derive_seed(seed, 0, Stream::Moments));
    const auto constants = compute_constants(inputs_for_model(model, moments, o.beta));

    ChainConfig cfg;
    cfg.lambda = o.lambda;
    cfg.beta = o.beta;
    cfg.burn_in = o.burn_in;
    cfg.n_steps = o.burn_in + o.n_samples;
    cfg.seed = seed;
    cfg.lambda_max = constants.lambda_max;

    Figure1Result r;
    r.chain = run_chain(cfg, model);
    r.kde = kde_2d(r.chain.samples, o.grid);
    for (const auto& m : r.chain.moment_trail) r.max_trail_second = std::max(r.max_trail_second, m.second);
    r.trail_bound = second_moment_bound(constants, 0.0);
    r.warnings = r.chain.warnings;
    return r;
}

void write_kde_csv(const std::string& path, const Kde2D& kde) {
    auto f = open_out(path);
    f << "x,y,density\n";
    for (std::size_t i = 0; i < kde.xs.size(); ++i)
        for (std::size_t j = 0; j < kde.ys.size(); ++j)
            f << kde.xs[i] << ',' << kde.ys[j] << ','
              << kde.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << '\n';
}

// -- Distances and references --------------------------------------------

std::vector<Vector> reference_cloud(const GradientModel& model, const ExperimentConfig& cfg,
                                    std::size_t n, std::uint64_t seed, double lambda_hint) {
    if (cfg.reference == Reference::ExactSampler) {
        require(model.has_exact_target_sampler(),
                "model '" + model.id() + "' has no exact target sampler; use reference long_run_chain");
        Rng rng(seed);
        std::vector<Vector> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(model.sample_target(rng, cfg.beta));
        return out;
    }
    // Surrogate: one long chain at λ/10, 10× burn-in, one time unit between draws.
    ChainConfig c = cfg.chain_config(lambda_hint / 10.0, seed);
    const auto thin = static_cast<std::int64_t>(std::ceil(1.0 / c.lambda));
    c.burn_in = 10 * cfg.n_steps;
    c.thinning = thin;
    c.n_steps = c.burn_in + thin * static_cast<std::int64_t>(n);
    c.record_trail = false;
    auto out = run_chain(c, model);
    return std::move(out.samples);
}

DistanceEstimate distance_between(const std::vector<Vector>& a, const std::vector<Vector>& b,
                                  MetricKind metric, int n_projections, std::uint64_t seed) {
    const EmpiricalMeasure mu(a, "chain"), nu(b, "reference");
    if (metric == MetricKind::Sliced) return sliced_wasserstein(mu, nu, 2, n_projections, seed);
    const int p = metric == MetricKind::W1 ? 1 : 2;
    if (mu.dim == 1) return wasserstein_1d(mu, nu, p);
    if (a.size() == b.size() && a.size() <= kMaxExactN) return wasserstein_exact(mu, nu, p);
    auto e = sliced_wasserstein(mu, nu, p, n_projections, seed);
    e.note = "sliced fallback: clouds too large or unequal for the exact solver";
    return e;
}

// -- Sweeps and rates ----------------------------------------------------

std::vector<SweepRow> sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    cfg.validate_grid();
    const auto model = make_model(cfg.model, cfg.beta);
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
        const double lam = cfg.lambda_grid[i];
        for (int r = 0; r < cfg.repetitions; ++r) {
            auto chains = make_chains(cfg.chain_config(lam, cell_seed(cfg.seed, i, r)), *model, cfg.n_chains);
            advance_chains(chains, *model, cfg.n_steps, cfg.threads);
            const auto live = live_states(chains);
            SweepRow row;
            row.lambda = lam;
            row.n_steps = cfg.n_steps;
            row.repetition = r;
            row.live_chains = live.size();
            for (const auto& s : live) row.mean_sq_norm += s.squaredNorm() / static_cast<double>(live.size());
            if (!live.empty()) {
                const auto ref = reference_cloud(*model, cfg, live.size(), reference_seed(cfg.seed, r), lam);
                row.distance = distance_between(live, ref, cfg.metric, cfg.n_projections,
                                                derive_seed(cfg.seed, i, Stream::Projections));
            } else {
                row.distance.value = std::numeric_limits<double>::quiet_NaN();
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    auto f = open_out(path);
    f << "lambda,n_steps,repetition,distance,method,std_error,n_chains_live,mean_sq_norm\n";
    for (const auto& r : rows)
        f << r.lambda << ',' << r.n_steps << ',' << r.repetition << ',' << r.distance.value << ','
          << method_name(r.distance.method) << ',' << r.distance.std_error << ',' << r.live_chains
          << ',' << r.mean_sq_norm << '\n';
}

void fit_power_law(const std::vector<double>& x, const std::vector<double>& y, RateFit& out) {
    const std::size_t k = x.size();
    out.used = k;
    out.residuals.clear();
    if (k < 3) {
        out.alpha = out.log_C = out.half_width = std::numeric_limits<double>::quiet_NaN();
        out.warnings.push_back("fewer than 3 plateaued grid points; no exponent fitted");
        return;
    }
    std::vector<double> lx(k), ly(k);
    for (std::size_t i = 0; i < k; ++i) {
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(k);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    out.alpha = sxy / sxx;
    out.log_C = my - out.alpha * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double r = ly[i] - (out.log_C + out.alpha * lx[i]);
        out.residuals.push_back(r);
        sse += r * r;
    }
    const double dof = static_cast<double>(k - 2);
    const double se = std::sqrt(sse / dof / sxx);
    const boost::math::students_t t(dof);
    out.half_width = boost::math::quantile(boost::math::complement(t, 0.025)) * se;
}

RateFit rate_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    cfg.validate_grid();
    require(cfg.repetitions >= 2, "rate: need at least 2 repetitions for a standard error");
    const auto model = make_model(cfg.model, cfg.beta);
    const int R = cfg.repetitions;

    std::vector<std::vector<Vector>> refs(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r)
        refs[static_cast<std::size_t>(r)] =
            reference_cloud(*model, cfg, cfg.n_chains, reference_seed(cfg.seed, r), cfg.lambda_grid.front());

    RateFit fit;
    fit.metric = metric_name(cfg.metric);
    fit.plateau_rule =
        "n doubles from n_steps until the mean distance over repetitions at n and 2n differ by at "
        "most sqrt(se_n^2 + se_2n^2); cells reaching max_steps first are flagged and not fitted";

    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
        const double lam = cfg.lambda_grid[i];
        std::vector<std::vector<ChainState>> ens;
        for (int r = 0; r < R; ++r)
            ens.push_back(make_chains(cfg.chain_config(lam, cell_seed(cfg.seed, i, r)), *model, cfg.n_chains));

        RateCell cell;
        cell.lambda = lam;
        auto measure = [&](std::int64_t n) {
            std::vector<double> d(static_cast<std::size_t>(R));
            for (int r = 0; r < R; ++r) {
                const auto live = live_states(ens[static_cast<std::size_t>(r)]);
                require(!live.empty(), "rate: every chain diverged at lambda " + std::to_string(lam));
                const auto e = distance_between(live, head(refs[static_cast<std::size_t>(r)], live.size()),
                                                cfg.metric, cfg.n_projections,
                                                derive_seed(cfg.seed, i, Stream::Projections));
                d[static_cast<std::size_t>(r)] = e.value;
                cell.method = method_name(e.method);
            }
            const auto ms = mean_se(d);
            cell.history.push_back({n, ms.mean, ms.se});
            return std::make_pair(d, ms);
        };

        std::int64_t n = std::min(cfg.n_steps, cfg.max_steps);
        for (auto& e : ens) advance_chains(e, *model, n, cfg.threads);
        auto prev = measure(n);
        while (true) {
            if (2 * n > cfg.max_steps) {
                cell.n = n;
                cell.per_rep = prev.first;
                cell.distance = prev.second.mean;
                cell.std_error = prev.second.se;
                fit.warnings.push_back("lambda " + std::to_string(lam) + ": no plateau by max_steps " +
                                       std::to_string(cfg.max_steps) + "; excluded from the fit");
                break;
            }
            for (auto& e : ens) advance_chains(e, *model, n, cfg.threads);
            n *= 2;
            auto cur = measure(n);
            const double tol = std::hypot(prev.second.se, cur.second.se);
            if (std::abs(cur.second.mean - prev.second.mean) <= tol) {
                cell.n = n;
                cell.plateaued = true;
                cell.per_rep = cur.first;
                cell.distance = cur.second.mean;
                cell.std_error = cur.second.se;
                break;
            }
            prev = std::move(cur);
        }
        std::size_t diverged = 0;
        for (const auto& e : ens) diverged += e.size() - live_states(e).size();
        if (diverged > 0)
            fit.warnings.push_back("lambda " + std::to_string(lam) + ": " + std::to_string(diverged) +
                                   " chains diverged and were dropped");
        fit.cells.push_back(std::move(cell));
    }

    std::vector<double> xs, ys;
    for (const auto& c : fit.cells) {
        if (c.plateaued && c.distance > 0.0) {
            xs.push_back(c.lambda);
            ys.push_back(c.distance);
        }
    }
    fit_power_law(xs, ys, fit);
    return fit;
}

Json RateFit::to_json() const {
    Json cj = Json::array();
    for (const auto& c : cells) {
        Json h = Json::array();
        for (const auto& s : c.history)
            h.push_back({{"n", s.n}, {"distance", json_number(s.distance)}, {"std_error", json_number(s.std_error)}});
        cj.push_back({{"lambda", c.lambda},
                      {"n", c.n},
                      {"plateaued", c.plateaued},
                      {"distance", json_number(c.distance)},
                      {"std_error", json_number(c.std_error)},
                      {"per_repetition", c.per_rep},
                      {"method", c.method},
                      {"history", h}});
    }
    Json res = Json::array();
    for (double r : residuals) res.push_back(json_number(r));
    return {{"metric", metric},
            {"cells", cj},
            {"points_fitted", used},
            {"alpha", json_number(alpha)},
            {"log_C", json_number(log_C)},
            {"alpha_half_width_95", json_number(half_width)},
            {"residuals", res},
            {"plateau_rule", plateau_rule},
            {"warnings", warnings}};
}

// -- Bound check ---------------------------------------------------------

ConstantsReport constants_for(const ExperimentConfig& cfg, const GradientModel& model) {
    const auto moments = model_moments(model, cfg.moments_mc, derive_seed(cfg.seed, 0, Stream::Moments));
    auto in = inputs_for_model(model, moments, cfg.beta, cfg.c_hat);
    const auto [e2, e4] = initial_moments(cfg, model.dim_theta());
    in.E_theta0_2 = e2;
    in.E_theta0_4 = e4;
    std::string note;
    if (model.has_exact_target_sampler()) {
        try {
            Rng rng(derive_seed(cfg.seed, 1, Stream::Moments));
            double acc = 0.0;
            for (std::int64_t k = 0; k < cfg.moments_mc; ++k)
                acc += 1.0 + model.sample_target(rng, cfg.beta).squaredNorm();
            in.int_V2_pi = acc / static_cast<double>(cfg.moments_mc);
            note = "int V2 dpi estimated from " + std::to_string(cfg.moments_mc) + " exact target draws";
        } catch (const ValidationError& e) {
            note = std::string("exact target sampler unavailable (") + e.what() +
                   "); int V2 dpi uses the dissipativity bound";
        }
    }
    auto rep = compute_constants(in);
    if (!note.empty()) rep.notes.push_back(note);
    return rep;
}

bool BoundCheckReport::violated() const {
    return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.status == "violated"; });
}

Json BoundCheckReport::to_json() const {
    Json rj = Json::array();
    for (const auto& r : rows)
        rj.push_back({{"bound", r.bound},
                      {"lambda", r.lambda},
                      {"n", r.n},
                      {"n_source", r.n_source},
                      {"empirical", json_number(r.empirical)},
                      {"std_error", json_number(r.std_error)},
                      {"rhs", json_number(r.rhs)},
                      {"status", r.status}});
    return {{"rows", rj}, {"notes", notes}, {"violated", violated()}};
}

void write_bound_csv(const std::string& path, const BoundCheckReport& rep) {
    auto f = open_out(path);
    f << "bound,lambda,n,n_source,empirical,std_error,rhs,status\n";
    for (const auto& r : rep.rows)
        f << r.bound << ',' << r.lambda << ',' << r.n << ',' << r.n_source << ',' << r.empirical << ','
          << r.std_error << ',' << r.rhs << ',' << r.status << '\n';
}

BoundCheckReport bound_check(const ExperimentConfig& cfg, const ConstantsReport& k) {
    cfg.validate();
    cfg.validate_grid();
    require(cfg.repetitions >= 2, "bound-check: need at least 2 repetitions for a standard error");
    const auto model = make_model(cfg.model, cfg.beta);
    const int R = cfg.repetitions;
    const double E4 = k.inputs.E_theta0_4;
    BoundCheckReport rep;
    const auto vac = k.vacuous();
    if (!vac.empty()) rep.notes.push_back("report has non-finite constants; affected bounds are vacuous");

    std::vector<std::vector<Vector>> refs(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r)
        refs[static_cast<std::size_t>(r)] =
            reference_cloud(*model, cfg, cfg.n_chains, reference_seed(cfg.seed, r), cfg.lambda_grid.front());

    auto classify = [](double emp, double se, double rhs) -> std::string {
        if (std::isnan(rhs)) return "vacuous - consistent";
        if (std::isinf(rhs)) return "vacuous - consistent";
        return emp - 3.0 * se <= rhs ? "consistent" : "violated";
    };

    // Evaluates every bound on the clouds of R ensembles at (λ, n).
    auto evaluate = [&](std::vector<std::vector<ChainState>>& ens, double lam, std::int64_t n,
                        const std::string& source, std::size_t li) {
        std::vector<double> w1(static_cast<std::size_t>(R)), w2(static_cast<std::size_t>(R)),
            er(static_cast<std::size_t>(R));
        for (int r = 0; r < R; ++r) {
            const auto live = live_states(ens[static_cast<std::size_t>(r)]);
            require(!live.empty(), "bound-check: every chain diverged");
            const auto ref = head(refs[static_cast<std::size_t>(r)], live.size());
            const auto ps = derive_seed(cfg.seed, li, Stream::Projections);
            w1[static_cast<std::size_t>(r)] = distance_between(live, ref, MetricKind::W1, cfg.n_projections, ps).value;
            w2[static_cast<std::size_t>(r)] = distance_between(live, ref, MetricKind::W2, cfg.n_projections, ps).value;
            if (model->has_objective()) er[static_cast<std::size_t>(r)] = excess_risk(*model, live);
        }
        const double nd = static_cast<double>(n);
        auto push = [&](const char* name, const std::vector<double>& v, double rhs) {
            const auto ms = mean_se(v);
            rep.rows.push_back({name, lam, n, source, ms.mean, ms.se, rhs, classify(ms.mean, ms.se, rhs)});
        };
        push("W1", w1, w1_bound(k, lam, nd, E4));
        push("W2", w2, w2_bound(k, lam, nd, E4));
        if (model->has_objective()) push("excess_risk", er, excess_risk_bound(k, lam, nd));
    };

    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
        const double lam = cfg.lambda_grid[i];
        if (lam > k.lambda_max) {
            for (const char* b : {"W1", "W2", "excess_risk"})
                rep.rows.push_back({b, lam, 0, "none", 0.0, 0.0, std::numeric_limits<double>::infinity(),
                                    "not covered"});
            rep.notes.push_back("lambda " + std::to_string(lam) + " exceeds lambda_max " +
                                std::to_string(k.lambda_max) + "; the bounds do not apply");
            continue;
        }
        // The budget for the ε at which this λ is the admissible step: ε = 2(C2+C3)√λ.
        std::int64_t n = cfg.max_steps;
        std::string source = "cap";
        const double eps = 2.0 * (k.theorem.C2 + k.theorem.C3) * std::sqrt(lam);
        if (std::isfinite(eps)) {
            try {
                const auto b = budget(eps, k, Metric::W1, E4);
                if (b.n_star <= cfg.max_steps) {
                    n = std::max<std::int64_t>(1, b.n_star);
                    source = "budget";
                } else {
                    rep.notes.push_back("lambda " + std::to_string(lam) + ": budget n* = " +
                                        std::to_string(b.n_star) + " exceeds max_steps; bounds evaluated at n = " +
                                        std::to_string(n));
                }
            } catch (const BudgetOverflowError& e) {
                std::ostringstream msg;
                msg << "lambda " << lam << ": budget n* overflows 64 bits (n* ~ " << e.n_real()
                    << "); bounds evaluated at n = " << n;
                rep.notes.push_back(msg.str());
            }
        } else {
            rep.notes.push_back("lambda " + std::to_string(lam) + ": C2 + C3 is infinite; no budget");
        }

        std::vector<std::vector<ChainState>> ens;
        for (int r = 0; r < R; ++r)
            ens.push_back(make_chains(cfg.chain_config(lam, cell_seed(cfg.seed, i, r)), *model, cfg.n_chains));
        if (i == 0) evaluate(ens, lam, 0, "initial", i);
        for (auto& e : ens) advance_chains(e, *model, n, cfg.threads);
        evaluate(ens, lam, n, source, i);
    }
    return rep;
}

// -- Manifest ------------------------------------------------------------

void Manifest::write(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ts;
    ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json j{{"command", command},
           {"config", config},
           {"seed", seed},
           {"version", library_version()},
           {"build_id", build_id()},
           {"finished_utc", ts.str()},
           {"wall_clock_seconds", wall},
           {"outputs", outputs},
           {"extra", extra}};
    std::ofstream f(std::filesystem::path(dir) / "manifest.json");
    require(static_cast<bool>(f), "cannot write manifest.json in " + dir);
    f << j.dump(2) << '\n';
}

}  // namespace sgld
