#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgld/experiment.hpp"

using namespace sgld;

namespace {

std::string temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("sgld_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ExperimentConfig gaussian_config() {
    ExperimentConfig c;
    c.model.id = "gaussian";
    c.model.d = 1;
    c.n_chains = 2048;
    c.repetitions = 4;
    c.seed = 3;
    c.metric = MetricKind::W2;
    c.moments_mc = 20000;
    return c;
}

}  // namespace

TEST_CASE("figure data: moments, labels and determinism") {
    const auto a = gen_figure1_data(11);
    const auto b = gen_figure1_data(11);
    REQUIRE(a.dataset.size() == 1000);
    REQUIRE(a.w_star.size() == 2);
    Vector mean = Vector::Zero(2);
    double var0 = 0.0;
    for (const auto& p : a.dataset) {
        CHECK((p.label == 0 || p.label == 1));
        mean += p.features / 1000.0;
        var0 += p.features[0] * p.features[0] / 1000.0;
    }
    // sd of the mean is √(0.1/1000) = 0.01.
    CHECK(std::abs(mean[0]) < 0.04);
    CHECK(std::abs(mean[1]) < 0.04);
    CHECK(std::abs(var0 - 0.1) < 0.02);
    CHECK(a.w_star == b.w_star);
    for (std::size_t i = 0; i < 1000; ++i) {
        CHECK(a.dataset[i].features == b.dataset[i].features);
        CHECK(a.dataset[i].label == b.dataset[i].label);
    }
    CHECK(gen_figure1_data(12).w_star != a.w_star);

    const auto dir = temp_dir("data");
    write_dataset_csv(dir + "/a.csv", a.dataset);
    write_dataset_csv(dir + "/b.csv", b.dataset);
    CHECK(slurp(dir + "/a.csv") == slurp(dir + "/b.csv"));
    const auto back = read_dataset_csv(dir + "/a.csv");
    REQUIRE(back.size() == 1000);
    for (std::size_t i = 0; i < 1000; ++i) {
        CHECK(back[i].features == a.dataset[i].features);
        CHECK(back[i].label == a.dataset[i].label);
    }
}

TEST_CASE("dataset reader rejects malformed files") {
    const auto dir = temp_dir("bad");
    std::ofstream(dir + "/label.csv") << "z0,z1,y\n0.1,0.2,2\n";
    std::ofstream(dir + "/cols.csv") << "z0,z1,y\n0.1,0.2\n";
    std::ofstream(dir + "/num.csv") << "z0,z1,y\n0.1,abc,1\n";
    CHECK_THROWS_AS(read_dataset_csv(dir + "/label.csv"), ValidationError);
    CHECK_THROWS_AS(read_dataset_csv(dir + "/cols.csv"), ValidationError);
    CHECK_THROWS_AS(read_dataset_csv(dir + "/num.csv"), ValidationError);
    CHECK_THROWS_AS(read_dataset_csv(dir + "/missing.csv"), ValidationError);
}

TEST_CASE("KDE of a standard normal cloud integrates to one") {
    Rng rng(derive_seed(1, 0, Stream::Verify));
    std::vector<Vector> s;
    for (int i = 0; i < 25000; ++i) s.push_back(rng.gaussian(2));
    const auto k = kde_2d(s);
    CHECK(k.xs.size() == 128);
    CHECK(k.density.rows() == 128);
    CHECK(std::abs(k.integral - 1.0) <= 0.02);
    CHECK(k.hx == doctest::Approx(std::pow(25000.0, -1.0 / 6.0)).epsilon(0.03));
    // Density near the origin, smoothed: 1/(2π(1 + h²)).
    double best = 0.0;
    for (Eigen::Index i = 0; i < 128; ++i)
        for (Eigen::Index j = 0; j < 128; ++j)
            if (std::hypot(k.xs[i], k.ys[j]) < 0.1) best = std::max(best, k.density(i, j));
    const double expect = 1.0 / (2.0 * M_PI * (1.0 + k.hx * k.hx));
    CHECK(std::abs(best / expect - 1.0) < 0.08);
    CHECK_THROWS_AS(kde_2d({Vector::Zero(2)}), ValidationError);
}

TEST_CASE("figure run: sample count, finite output, KDE mass") {
    const auto data = gen_figure1_data(1);
    Figure1Options o;
    o.n_samples = 3000;
    o.burn_in = 200;
    o.grid = 64;
    const auto r = run_figure1(data.dataset, 5, o);
    CHECK(r.chain.samples.size() == 3000);
    CHECK_FALSE(r.chain.diverged);
    for (const auto& s : r.chain.samples) CHECK(s.allFinite());
    CHECK(std::abs(r.kde.integral - 1.0) <= 0.02);
    CHECK(r.max_trail_second > 0.0);
    CHECK(r.trail_bound > 0.0);

    const auto dir = temp_dir("kde");
    write_kde_csv(dir + "/kde.csv", r.kde);
    std::ifstream f(dir + "/kde.csv");
    std::string line;
    int rows = 0;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 64 * 64 + 1);
}

TEST_CASE("distance of a cloud to itself is zero for every metric") {
    Rng rng(derive_seed(2, 0, Stream::Verify));
    std::vector<Vector> a;
    for (int i = 0; i < 200; ++i) a.push_back(rng.gaussian(2));
    for (auto m : {MetricKind::W1, MetricKind::W2, MetricKind::Sliced})
        CHECK(distance_between(a, a, m, 64, 1).value == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<Vector> big;
    for (std::size_t i = 0; i < kMaxExactN + 1; ++i) big.push_back(rng.gaussian(2));
    const auto e = distance_between(big, big, MetricKind::W1, 32, 1);
    CHECK(e.method == DistanceMethod::Sliced);
    CHECK_FALSE(e.note.empty());
}

TEST_CASE("gaussian sweep matches exact draws from the discretised stationary law") {
    // At stationarity the chain is N(0, v(λ)) per coordinate. Draws from that
    // law, compared with the same references, give the expected distance.
    auto cfg = gaussian_config();
    cfg.lambda_grid = {0.4};
    cfg.n_steps = 400;
    const auto rows = sweep(cfg);
    REQUIRE(rows.size() == 4);
    const auto model = make_model(cfg.model, cfg.beta);
    const double v = GaussianModel::stationary_variance(0.4, 1.0, 1.0);
    double chain = 0.0, oracle = 0.0;
    std::vector<double> cd, od;
    for (int r = 0; r < cfg.repetitions; ++r) {
        CHECK(rows[static_cast<std::size_t>(r)].live_chains == cfg.n_chains);
        const auto ref = reference_cloud(*model, cfg, cfg.n_chains,
                                         derive_seed(cfg.seed, static_cast<std::uint64_t>(r), Stream::Reference), 0.4);
        Rng rng(derive_seed(99, static_cast<std::uint64_t>(r), Stream::Verify));
        std::vector<Vector> exact;
        for (std::size_t i = 0; i < cfg.n_chains; ++i) exact.push_back(std::sqrt(v) * rng.gaussian(1));
        cd.push_back(rows[static_cast<std::size_t>(r)].distance.value);
        od.push_back(distance_between(exact, ref, MetricKind::W2, 64, 0).value);
        chain += cd.back() / cfg.repetitions;
        oracle += od.back() / cfg.repetitions;
    }
    auto se = [](const std::vector<double>& x, double m) {
        double s = 0.0;
        for (double y : x) s += (y - m) * (y - m);
        return std::sqrt(s / (x.size() - 1) / x.size());
    };
    const double tol = 3.0 * std::hypot(se(cd, chain), se(od, oracle));
    CHECK(std::abs(chain - oracle) <= tol);
    // Population value: |√v − 1| between centred normals.
    CHECK(std::abs(oracle - std::abs(std::sqrt(v) - 1.0)) < 0.05);
}

TEST_CASE("gaussian sweep: distance grows with the step size") {
    auto cfg = gaussian_config();
    cfg.repetitions = 2;
    cfg.lambda_grid = {0.05, 0.3, 0.8};
    cfg.n_steps = 600;
    const auto rows = sweep(cfg);
    REQUIRE(rows.size() == 6);
    const double d0 = rows[0].distance.value + rows[1].distance.value;
    const double d1 = rows[2].distance.value + rows[3].distance.value;
    const double d2 = rows[4].distance.value + rows[5].distance.value;
    CHECK(d0 < d1);
    CHECK(d1 < d2);
    const auto dir = temp_dir("sweep");
    write_sweep_csv(dir + "/sweep.csv", rows);
    CHECK(slurp(dir + "/sweep.csv").rfind("lambda,n_steps,repetition,distance", 0) == 0);
}

TEST_CASE("power-law fit recovers an exact exponent") {
    RateFit f;
    fit_power_law({0.1, 0.2, 0.4, 0.8}, {2 * std::sqrt(0.1), 2 * std::sqrt(0.2), 2 * std::sqrt(0.4), 2 * std::sqrt(0.8)}, f);
    CHECK(f.alpha == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::exp(f.log_C) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.half_width < 1e-10);
    CHECK(f.used == 4);

    // Noisy points: the half width is the 97.5% t quantile (2 dof) times the slope SE.
    RateFit g;
    fit_power_law({1.0, 2.0, 4.0, 8.0}, {1.0, 2.2, 3.9, 8.4}, g);
    CHECK(g.half_width > 0.0);
    CHECK(std::abs(g.alpha - 1.0) < g.half_width);

    RateFit h;
    fit_power_law({0.1, 0.2}, {1.0, 2.0}, h);
    CHECK(std::isnan(h.alpha));
    CHECK_FALSE(h.warnings.empty());
}

TEST_CASE("rate experiment: gaussian cells plateau and carry their history") {
    auto cfg = gaussian_config();
    cfg.n_chains = 1024;
    cfg.repetitions = 3;
    cfg.lambda_grid = {0.1, 0.2, 0.4};
    cfg.n_steps = 64;
    cfg.max_steps = 1 << 12;
    const auto fit = rate_experiment(cfg);
    REQUIRE(fit.cells.size() == 3);
    for (const auto& c : fit.cells) {
        CHECK(c.plateaued);
        CHECK(c.history.size() >= 2);
        CHECK(c.per_rep.size() == 3);
        CHECK(c.n == c.history.back().n);
    }
    const auto j = fit.to_json();
    CHECK(j["cells"].size() == 3);
    CHECK(j.contains("plateau_rule"));

    cfg.max_steps = 64;
    const auto capped = rate_experiment(cfg);
    for (const auto& c : capped.cells) CHECK_FALSE(c.plateaued);
    CHECK(capped.used == 0);

    cfg.repetitions = 1;
    CHECK_THROWS_AS(rate_experiment(cfg), ValidationError);
}

TEST_CASE("bound check: gaussian rows are consistent, initial row present") {
    auto cfg = gaussian_config();
    cfg.n_chains = 256;
    cfg.repetitions = 2;
    cfg.max_steps = 2000;
    cfg.theta0 = {2.0};
    const auto model = make_model(cfg.model, cfg.beta);
    const auto k = constants_for(cfg, *model);
    CHECK(k.inputs.E_theta0_2 == 4.0);
    CHECK(k.inputs.E_theta0_4 == 16.0);
    REQUIRE(k.inputs.int_V2_pi.has_value());
    CHECK(std::abs(*k.inputs.int_V2_pi - 2.0) < 0.05);

    cfg.lambda_grid = {k.lambda_max / 4, k.lambda_max / 2, 2 * k.lambda_max};
    const auto rep = bound_check(cfg, k);
    CHECK_FALSE(rep.violated());
    int initial = 0, uncovered = 0;
    for (const auto& r : rep.rows) {
        if (r.n == 0 && r.n_source == "initial") ++initial;
        if (r.status == "not covered") ++uncovered;
        CHECK(r.status != "violated");
    }
    CHECK(initial == 3);
    CHECK(uncovered == 3);
    CHECK(rep.to_json()["violated"] == false);
    CHECK_FALSE(rep.notes.empty());
}

TEST_CASE("initial law moments for a shifted Gaussian start") {
    auto cfg = gaussian_config();
    cfg.model.d = 2;
    cfg.theta0 = {1.0, 0.0};
    cfg.init_sigma = 0.5;
    const auto model = make_model(cfg.model, cfg.beta);
    const auto k = constants_for(cfg, *model);
    // |m|² = 1, σ² = 0.25, d = 2.
    CHECK(k.inputs.E_theta0_2 == doctest::Approx(1.5));
    CHECK(k.inputs.E_theta0_4 == doctest::Approx(1.5 * 1.5 + 4 * 0.25 + 2 * 2 * 0.0625));
    // Monte Carlo check of the fourth moment.
    Rng rng(derive_seed(3, 0, Stream::Verify));
    double acc = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        Vector t = 0.5 * rng.gaussian(2);
        t[0] += 1.0;
        acc += std::pow(t.squaredNorm(), 2) / n;
    }
    CHECK(std::abs(acc / k.inputs.E_theta0_4 - 1.0) < 0.01);
}

TEST_CASE("config JSON round trip and rejection of unknown keys") {
    auto cfg = gaussian_config();
    cfg.lambda_grid = {0.1, 0.2};
    cfg.reference = Reference::LongRunChain;
    cfg.metric = MetricKind::Sliced;
    cfg.theta0 = {0.5};
    cfg.model.a_hat = {1.0};
    const auto j = cfg.to_json();
    const auto back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);

    Json bad = j;
    bad["chain"]["lamda"] = 0.1;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad), doctest::Contains("lamda"), ValidationError);

    cfg.lambda_grid = {0.2, 0.1};
    CHECK_THROWS_AS(cfg.validate_grid(), ValidationError);
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);

    const auto dir = temp_dir("cfg");
    std::ofstream(dir + "/broken.json") << "{ not json";
    CHECK_THROWS_AS(load_config(dir + "/broken.json"), ValidationError);
    CHECK_THROWS_AS(make_model(ModelSpec{"nope"}, 1.0), ValidationError);
}

TEST_CASE("manifest records command, seed and outputs") {
    const auto dir = temp_dir("manifest");
    Manifest m;
    m.command = "run";
    m.config = gaussian_config().to_json();
    m.seed = 42;
    m.outputs = {"samples.csv"};
    m.write(dir);
    const auto j = Json::parse(slurp(dir + "/manifest.json"));
    CHECK(j["command"] == "run");
    CHECK(j["seed"] == 42);
    CHECK(j["outputs"][0] == "samples.csv");
    CHECK(j.contains("version"));
    CHECK(j.contains("build_id"));
    CHECK(j["wall_clock_seconds"].get<double>() >= 0.0);
}

TEST_CASE("long-run reference for a model without an exact sampler") {
    ExperimentConfig cfg;
    cfg.model.id = "vi";
    cfg.model.d = 2;
    cfg.reference = Reference::LongRunChain;
    cfg.n_steps = 50;
    const auto model = make_model(cfg.model, cfg.beta);
    CHECK_FALSE(model->has_exact_target_sampler());
    const auto ref = reference_cloud(*model, cfg, 100, 1, 0.1);
    CHECK(ref.size() == 100);
    cfg.reference = Reference::ExactSampler;
    CHECK_THROWS_WITH_AS(reference_cloud(*model, cfg, 10, 1, 0.1), doctest::Contains("long_run_chain"),
                         ValidationError);
}
