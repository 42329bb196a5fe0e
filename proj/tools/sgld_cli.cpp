// Command-line front end. Each subcommand reads an optional JSON config,
// applies the flags given on the command line on top, and writes its outputs
// plus manifest.json into the output directory.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sgld/assumption_verifier.hpp"
#include "sgld/experiment.hpp"

using namespace sgld;

namespace {

enum Exit { kOk = 0, kValidation = 1, kDivergence = 2, kViolation = 3 };

// Flags that map onto ExperimentConfig keys. Only flags actually given
// override the config file.
struct Overrides {
    std::string config;
    CLI::Option* config_opt = nullptr;
    struct Flag {
        CLI::Option* opt;
        std::function<void(ExperimentConfig&)> apply;
    };
    std::vector<Flag> flags;

    std::string model, dataset, reference, metric, out;
    Eigen::Index d = 1;
    double sigma = 1, lambda = 0, beta = 1, init_sigma = 0, c_hat = 1;
    std::vector<double> a_hat, w, theta0, grid;
    std::size_t batch = 10, chains = 0;
    std::uint64_t seed = 0, data_seed = 0;
    std::int64_t n_steps = 0, burn_in = 0, thinning = 1, max_steps = 0, moments_mc = 0;
    int reps = 0, projections = 0;
    unsigned threads = 0;

    template <class T>
    void add(CLI::App* app, const std::string& name, T& var, const std::string& help,
             std::function<void(ExperimentConfig&)> apply) {
        auto* o = app->add_option(name, var, help);
        if constexpr (std::is_same_v<T, std::vector<double>>) o->delimiter(',');
        flags.push_back({o, std::move(apply)});
    }

    void common(CLI::App* app) {
        config_opt = app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
        add(app, "--seed", seed, "master seed", [this](auto& c) { c.seed = seed; });
        add(app, "--out", out, "output directory", [this](auto& c) { c.output_dir = out; });
        add(app, "--threads", threads, "worker threads (0: all cores)", [this](auto& c) { c.threads = threads; });
    }

    void model_flags(CLI::App* app) {
        add(app, "--model", model, "gaussian | mixture | logreg | vi | linear_mse",
            [this](auto& c) { c.model.id = model; });
        add(app, "--d", d, "parameter dimension", [this](auto& c) { c.model.d = d; });
        add(app, "--sigma", sigma, "data scale (gaussian, linear_mse)", [this](auto& c) { c.model.sigma = sigma; });
        add(app, "--a-hat", a_hat, "prior location, comma separated", [this](auto& c) { c.model.a_hat = a_hat; });
        add(app, "--w", w, "linear_mse weights, comma separated", [this](auto& c) { c.model.w = w; });
        add(app, "--dataset", dataset, "dataset CSV for logreg and vi", [this](auto& c) { c.model.dataset = dataset; });
        add(app, "--batch-size", batch, "logreg minibatch size K", [this](auto& c) { c.model.batch_size = batch; });
        add(app, "--data-seed", data_seed, "seed of the generated dataset when none is given",
            [this](auto& c) { c.model.data_seed = data_seed; });
        add(app, "--beta", beta, "inverse temperature", [this](auto& c) { c.beta = beta; });
    }

    void chain_flags(CLI::App* app) {
        add(app, "--lambda", lambda, "step size", [this](auto& c) { c.lambda = lambda; });
        add(app, "--n-steps", n_steps, "iterations", [this](auto& c) { c.n_steps = n_steps; });
        add(app, "--burn-in", burn_in, "discarded iterations", [this](auto& c) { c.burn_in = burn_in; });
        add(app, "--thinning", thinning, "keep every k-th iterate", [this](auto& c) { c.thinning = thinning; });
        add(app, "--theta0", theta0, "initial point, comma separated", [this](auto& c) { c.theta0 = theta0; });
        add(app, "--init-sigma", init_sigma, "Gaussian spread of the initial point",
            [this](auto& c) { c.init_sigma = init_sigma; });
    }

    void experiment_flags(CLI::App* app) {
        add(app, "--lambda-grid", grid, "step sizes, comma separated", [this](auto& c) { c.lambda_grid = grid; });
        add(app, "--chains", chains, "chains per ensemble", [this](auto& c) { c.n_chains = chains; });
        add(app, "--repetitions", reps, "independent ensembles per step size",
            [this](auto& c) { c.repetitions = reps; });
        add(app, "--reference", reference, "exact_sampler | long_run_chain", [this](auto& c) {
            Json j = c.to_json();
            j["experiment"]["reference"] = reference;
            c = ExperimentConfig::from_json(j);
        });
        add(app, "--metric", metric, "W1 | W2 | sliced", [this](auto& c) {
            Json j = c.to_json();
            j["experiment"]["metric"] = metric;
            c = ExperimentConfig::from_json(j);
        });
        add(app, "--projections", projections, "sliced projections", [this](auto& c) { c.n_projections = projections; });
        add(app, "--max-steps", max_steps, "cap on simulated iterations", [this](auto& c) { c.max_steps = max_steps; });
    }

    void constants_flags(CLI::App* app) {
        add(app, "--c-hat", c_hat, "contraction prefactor (user supplied)", [this](auto& c) { c.c_hat = c_hat; });
        add(app, "--moments-mc", moments_mc, "Monte Carlo draws for data moments",
            [this](auto& c) { c.moments_mc = moments_mc; });
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = config_opt && config_opt->count() ? load_config(config) : ExperimentConfig();
        for (const auto& f : flags)
            if (f.opt->count()) f.apply(c);
        return c;
    }
};

std::string out_path(const ExperimentConfig& c, const std::string& name) {
    std::filesystem::create_directories(c.output_dir);
    return (std::filesystem::path(c.output_dir) / name).string();
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream f(path);
    require(static_cast<bool>(f), "cannot open " + path + " for writing");
    f << j.dump(2) << '\n';
}

Manifest manifest_for(const std::string& command, const ExperimentConfig& c) {
    Manifest m;
    m.command = command;
    m.config = c.to_json();
    m.seed = c.seed;
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic gradient Langevin dynamics: sampling, constants and rate experiments"};
    app.require_subcommand(1);

    // gen-data
    Overrides gen_o;
    std::size_t gen_n = 1000;
    auto* gen = app.add_subcommand("gen-data", "synthetic logistic-regression dataset (z0,z1,y)");
    gen_o.common(gen);
    gen_o.add(gen, "--a-hat", gen_o.a_hat, "prior location used to draw the generating weight",
              [&](auto& c) { c.model.a_hat = gen_o.a_hat; });
    gen->add_option("--n", gen_n, "number of points");

    // run
    Overrides run_o;
    auto* run = app.add_subcommand("run", "one SGLD chain; samples CSV and a summary");
    run_o.common(run);
    run_o.model_flags(run);
    run_o.chain_flags(run);

    // sweep
    Overrides sweep_o;
    auto* sw = app.add_subcommand("sweep", "ensembles over a step-size grid at fixed n");
    for (auto f : {&Overrides::common, &Overrides::model_flags, &Overrides::chain_flags, &Overrides::experiment_flags})
        (sweep_o.*f)(sw);

    // rate
    Overrides rate_o;
    auto* rate = app.add_subcommand("rate", "plateau distances over a step-size grid and a power-law fit");
    for (auto f : {&Overrides::common, &Overrides::model_flags, &Overrides::chain_flags, &Overrides::experiment_flags})
        (rate_o.*f)(rate);

    // bound-check
    Overrides bound_o;
    auto* bound = app.add_subcommand("bound-check", "empirical distances against the explicit bounds");
    for (auto f : {&Overrides::common, &Overrides::model_flags, &Overrides::chain_flags, &Overrides::experiment_flags,
                   &Overrides::constants_flags})
        (bound_o.*f)(bound);

    // figure1
    Overrides fig_o;
    Figure1Options fig_opts;
    std::string fig_dataset;
    auto* fig = app.add_subcommand("figure1", "posterior samples and KDE grid for the logistic example");
    fig_o.common(fig);
    fig->add_option("--dataset", fig_dataset, "dataset CSV (default: generated from the seed)");
    fig->add_option("--samples", fig_opts.n_samples, "retained samples");
    fig->add_option("--burn-in", fig_opts.burn_in, "discarded iterations");
    fig->add_option("--lambda", fig_opts.lambda, "step size");
    fig->add_option("--batch-size", fig_opts.K, "minibatch size K");
    fig->add_option("--grid", fig_opts.grid, "KDE grid points per axis");

    // constants
    Overrides const_o;
    auto* cst = app.add_subcommand("constants", "every explicit constant, as JSON and a table");
    for (auto f : {&Overrides::common, &Overrides::model_flags, &Overrides::chain_flags, &Overrides::constants_flags})
        (const_o.*f)(cst);
    double eps = 0.0;
    cst->add_option("--epsilon", eps, "also report the step-size and iteration budget for this accuracy");

    // verify
    Overrides ver_o;
    VerifyOptions vopts;
    double radius_x = 0.0;
    auto* ver = app.add_subcommand("verify", "random-trial checks of the declared assumption constants");
    ver_o.common(ver);
    ver_o.model_flags(ver);
    ver->add_option("--trials", vopts.trials, "random tuples per check");
    ver->add_option("--radius", vopts.region_radius_theta, "radius of the parameter region");
    auto* rx = ver->add_option("--radius-x", radius_x, "radius the data draws are clipped to");
    ver->add_option("--unbiased-mc", vopts.unbiased_n_mc, "draws for the unbiasedness test (0: skip)");

    // wasserstein
    std::string wa, wb, wmethod = "exact", wout;
    int wp = 2, wproj = kDefaultProjections;
    std::uint64_t wseed = 0;
    unsigned wthreads = 0;
    auto* was = app.add_subcommand("wasserstein", "distance between two sample CSV files");
    was->add_option("--a", wa, "first samples CSV")->required()->check(CLI::ExistingFile);
    was->add_option("--b", wb, "second samples CSV")->required()->check(CLI::ExistingFile);
    was->add_option("--p", wp, "order, 1 or 2");
    was->add_option("--method", wmethod, "sorted_1d | exact | sliced");
    was->add_option("--projections", wproj, "sliced projections");
    was->add_option("--seed", wseed, "sliced projection seed");
    was->add_option("--threads", wthreads, "worker threads");
    was->add_option("--out", wout, "also write wasserstein.json and manifest.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*gen) {
            auto c = gen_o.resolve();
            const Vector a = c.model.a_hat.empty()
                                 ? Vector()
                                 : Eigen::Map<const Vector>(c.model.a_hat.data(), static_cast<Eigen::Index>(c.model.a_hat.size()));
            const auto data = gen_figure1_data(c.seed, gen_n, a);
            auto m = manifest_for("gen-data", c);
            write_dataset_csv(out_path(c, "dataset.csv"), data.dataset);
            m.outputs = {"dataset.csv"};
            m.extra = {{"n", gen_n}, {"w_star", json_vector(data.w_star)}};
            m.write(c.output_dir);
            return kOk;
        }
        if (*run) {
            auto c = run_o.resolve();
            c.validate();
            const auto model = make_model(c.model, c.beta);
            auto m = manifest_for("run", c);
            const auto cc = c.chain_config(c.lambda, c.seed);
            const auto out = run_chain(cc, *model);
            write_chain_csv(out_path(c, "samples.csv"), out);
            const auto& last = out.moment_trail.back();
            write_json(out_path(c, "summary.json"),
                       {{"samples", out.samples.size()},
                        {"final_state", json_vector(out.final_state)},
                        {"mean_sq_norm", json_number(last.second)},
                        {"mean_fourth_power", json_number(last.fourth)},
                        {"warnings", out.warnings}});
            m.outputs = {"samples.csv", "summary.json"};
            m.write(c.output_dir);
            return kOk;
        }
        if (*sw) {
            auto c = sweep_o.resolve();
            auto m = manifest_for("sweep", c);
            const auto rows = sweep(c);
            write_sweep_csv(out_path(c, "sweep.csv"), rows);
            Json j = Json::array();
            for (const auto& r : rows)
                j.push_back({{"lambda", r.lambda}, {"n_steps", r.n_steps}, {"repetition", r.repetition},
                             {"distance", r.distance.to_json()}, {"live_chains", r.live_chains},
                             {"mean_sq_norm", json_number(r.mean_sq_norm)}});
            write_json(out_path(c, "sweep.json"), j);
            m.outputs = {"sweep.csv", "sweep.json"};
            m.write(c.output_dir);
            return kOk;
        }
        if (*rate) {
            auto c = rate_o.resolve();
            auto m = manifest_for("rate", c);
            const auto fit = rate_experiment(c);
            write_json(out_path(c, "rate.json"), fit.to_json());
            std::ofstream f(out_path(c, "rate.csv"));
            f << std::setprecision(17) << "lambda,n,plateaued,distance,std_error,method\n";
            for (const auto& cell : fit.cells)
                f << cell.lambda << ',' << cell.n << ',' << (cell.plateaued ? 1 : 0) << ',' << cell.distance << ','
                  << cell.std_error << ',' << cell.method << '\n';
            for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
            m.outputs = {"rate.json", "rate.csv"};
            m.write(c.output_dir);
            return kOk;
        }
        if (*bound) {
            auto c = bound_o.resolve();
            c.validate();
            const auto model = make_model(c.model, c.beta);
            auto m = manifest_for("bound-check", c);
            const auto k = constants_for(c, *model);
            write_json(out_path(c, "constants.json"), k.to_json());
            const auto rep = bound_check(c, k);
            write_bound_csv(out_path(c, "bound_check.csv"), rep);
            write_json(out_path(c, "bound_check.json"), rep.to_json());
            m.outputs = {"constants.json", "bound_check.csv", "bound_check.json"};
            m.extra = {{"violated", rep.violated()}};
            m.write(c.output_dir);
            for (const auto& r : rep.rows)
                if (r.status == "violated")
                    std::cerr << "bound violated: " << r.bound << " at lambda " << r.lambda << ", n " << r.n
                              << ": empirical " << r.empirical << " > " << r.rhs << '\n';
            return rep.violated() ? kViolation : kOk;
        }
        if (*fig) {
            auto c = fig_o.resolve();
            auto m = manifest_for("figure1", c);
            Json extra;
            Dataset data;
            if (fig_dataset.empty()) {
                const auto g = gen_figure1_data(c.seed);
                data = g.dataset;
                write_dataset_csv(out_path(c, "dataset.csv"), data);
                m.outputs.push_back("dataset.csv");
                extra["w_star"] = json_vector(g.w_star);
            } else {
                data = read_dataset_csv(fig_dataset);
                extra["dataset"] = fig_dataset;
            }
            const auto r = run_figure1(data, c.seed, fig_opts);
            write_chain_csv(out_path(c, "samples.csv"), r.chain);
            write_kde_csv(out_path(c, "kde.csv"), r.kde);
            Json summary{{"samples", r.chain.samples.size()},
                         {"kde_integral", r.kde.integral},
                         {"bandwidth", {r.kde.hx, r.kde.hy}},
                         {"max_trail_second_moment", r.max_trail_second},
                         {"trail_bound", json_number(r.trail_bound)},
                         {"lambda", fig_opts.lambda},
                         {"K", fig_opts.K},
                         {"warnings", r.warnings}};
            write_json(out_path(c, "figure1.json"), summary);
            m.outputs.insert(m.outputs.end(), {"samples.csv", "kde.csv", "figure1.json"});
            m.extra = extra;
            m.write(c.output_dir);
            return kOk;
        }
        if (*cst) {
            auto c = const_o.resolve();
            c.validate();
            const auto model = make_model(c.model, c.beta);
            auto m = manifest_for("constants", c);
            const auto k = constants_for(c, *model);
            Json j = k.to_json();
            if (eps > 0.0) {
                Json b;
                for (auto metric : {Metric::W1, Metric::W2}) {
                    const char* name = metric == Metric::W1 ? "W1" : "W2";
                    try {
                        const auto bud = budget(eps, k, metric, k.inputs.E_theta0_4);
                        b[name] = {{"lambda_star", bud.lambda_star}, {"n_star", bud.n_star},
                                   {"log_argument", json_number(bud.log_argument)}};
                    } catch (const BudgetOverflowError& e) {
                        b[name] = {{"overflow", true}, {"log_n_star", json_number(e.log_value())},
                                   {"n_star_real", json_number(e.n_real())}};
                    }
                }
                j["budget"] = b;
            }
            write_json(out_path(c, "constants.json"), j);
            std::cout << k.table();
            m.outputs = {"constants.json"};
            m.write(c.output_dir);
            return kOk;
        }
        if (*ver) {
            auto c = ver_o.resolve();
            const auto model = make_model(c.model, c.beta);
            vopts.seed = c.seed;
            if (rx->count()) vopts.region_radius_x = radius_x;
            auto m = manifest_for("verify", c);
            const auto rep = verify_assumptions(*model, vopts);
            write_json(out_path(c, "verify.json"), rep.to_json());
            m.outputs = {"verify.json"};
            m.extra = {{"all_pass", rep.all_pass()}};
            m.write(c.output_dir);
            std::cout << (rep.all_pass() ? "all checks pass" : "assumption check failed") << '\n';
            return rep.all_pass() ? kOk : kViolation;
        }
        if (*was) {
            const EmpiricalMeasure a(read_samples_csv(wa), wa), b(read_samples_csv(wb), wb);
            DistanceEstimate e;
            switch (parse_method(wmethod)) {
                case DistanceMethod::Sorted1D: e = wasserstein_1d(a, b, wp); break;
                case DistanceMethod::ExactMatching: e = wasserstein_exact(a, b, wp); break;
                case DistanceMethod::Sliced: e = sliced_wasserstein(a, b, wp, wproj, wseed, wthreads); break;
            }
            std::cout << e.to_json().dump(2) << '\n';
            if (!wout.empty()) {
                std::filesystem::create_directories(wout);
                write_json((std::filesystem::path(wout) / "wasserstein.json").string(), e.to_json());
                Manifest m;
                m.command = "wasserstein";
                m.config = {{"a", wa}, {"b", wb}, {"p", wp}, {"method", wmethod}, {"projections", wproj}};
                m.seed = wseed;
                m.outputs = {"wasserstein.json"};
                m.write(wout);
            }
            return kOk;
        }
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kOk;
}
