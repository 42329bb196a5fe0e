#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sgld/assumption_verifier.hpp"
#include "sgld/experiment.hpp"

namespace py = pybind11;
using namespace sgld;

namespace {

// Structured values cross the boundary as JSON text; the Python package
// converts them to and from dicts.
ExperimentConfig config_from(const std::string& text) { return ExperimentConfig::from_json(Json::parse(text)); }

ModelSpec spec_from(const std::string& text) { return ModelSpec::from_json(Json::parse(text)); }

Matrix to_matrix(const std::vector<Vector>& rows) {
    if (rows.empty()) return Matrix(0, 0);
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
}

std::vector<Vector> from_matrix(const Matrix& m) {
    std::vector<Vector> rows;
    rows.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(m.row(i).transpose());
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SGLD sampler, explicit constants and Wasserstein estimators";

    static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
    static py::exception<DivergenceError> divergence(m, "DivergenceError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const DivergenceError& e) {
            py::set_error(divergence, e.what());
        } catch (const ValidationError& e) {
            py::set_error(validation, e.what());
        } catch (const Json::exception& e) {
            py::set_error(validation, e.what());
        }
    });

    m.def("version", [] { return std::string(library_version()); });

    m.def(
        "run_chain",
        [](const std::string& model, double lambda, double beta, std::int64_t n_steps, std::int64_t burn_in,
           std::int64_t thinning, std::uint64_t seed, std::optional<Vector> theta0, double init_sigma) {
            const auto mdl = make_model(spec_from(model), beta);
            ChainConfig c;
            c.lambda = lambda;
            c.beta = beta;
            c.n_steps = n_steps;
            c.burn_in = burn_in;
            c.thinning = thinning;
            c.seed = seed;
            c.theta0 = std::move(theta0);
            c.init_sigma = init_sigma;
            c.record_trail = false;
            ChainOutput out;
            {
                py::gil_scoped_release release;
                out = run_chain(c, *mdl);
            }
            return py::make_tuple(to_matrix(out.samples), out.sample_steps, out.warnings);
        },
        py::arg("model"), py::arg("lambda_"), py::arg("beta"), py::arg("n_steps"), py::arg("burn_in"),
        py::arg("thinning"), py::arg("seed"), py::arg("theta0"), py::arg("init_sigma"));

    m.def("stationary_variance", &GaussianModel::stationary_variance, py::arg("lambda_"), py::arg("beta"),
          py::arg("sigma"));

    m.def("lambda_max", &compute_lambda_max, py::arg("a"), py::arg("L1"), py::arg("E_one_plus_eta_4"));

    m.def("constants", [](const std::string& config) {
        const auto c = config_from(config);
        c.validate();
        const auto mdl = make_model(c.model, c.beta);
        return constants_for(c, *mdl).to_json().dump();
    });

    m.def("verify", [](const std::string& model, double beta, std::int64_t trials, std::uint64_t seed) {
        const auto mdl = make_model(spec_from(model), beta);
        VerifyOptions o;
        o.trials = trials;
        o.seed = seed;
        return verify_assumptions(*mdl, o).to_json().dump();
    });

    m.def(
        "wasserstein",
        [](const Matrix& a, const Matrix& b, int p, const std::string& method, int projections, std::uint64_t seed) {
            const EmpiricalMeasure mu(from_matrix(a), "a"), nu(from_matrix(b), "b");
            DistanceEstimate e;
            switch (parse_method(method)) {
                case DistanceMethod::Sorted1D: e = wasserstein_1d(mu, nu, p); break;
                case DistanceMethod::ExactMatching: e = wasserstein_exact(mu, nu, p); break;
                case DistanceMethod::Sliced: e = sliced_wasserstein(mu, nu, p, projections, seed); break;
            }
            return e.to_json().dump();
        },
        py::arg("a"), py::arg("b"), py::arg("p"), py::arg("method"), py::arg("projections"), py::arg("seed"));

    m.def("w12", [](const Matrix& a, const Matrix& b) {
        return w12_functional(EmpiricalMeasure(from_matrix(a)), EmpiricalMeasure(from_matrix(b))).value;
    });

    m.def("gen_figure1_data", [](std::uint64_t seed, std::size_t n) {
        const auto d = gen_figure1_data(seed, n);
        Matrix z(static_cast<Eigen::Index>(n), 2);
        Eigen::VectorXi y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            z.row(static_cast<Eigen::Index>(i)) = d.dataset[i].features.transpose();
            y[static_cast<Eigen::Index>(i)] = d.dataset[i].label;
        }
        return py::make_tuple(z, y, d.w_star);
    });

    m.def("kde_2d", [](const Matrix& samples, int grid) {
        const auto k = kde_2d(from_matrix(samples), grid);
        return py::make_tuple(k.xs, k.ys, k.density, k.integral);
    });

    m.def("sweep", [](const std::string& config) {
        std::vector<SweepRow> rows;
        const auto c = config_from(config);
        {
            py::gil_scoped_release release;
            rows = sweep(c);
        }
        Json j = Json::array();
        for (const auto& r : rows)
            j.push_back({{"lambda", r.lambda}, {"n_steps", r.n_steps}, {"repetition", r.repetition},
                         {"distance", r.distance.to_json()}, {"live_chains", r.live_chains},
                         {"mean_sq_norm", json_number(r.mean_sq_norm)}});
        return j.dump();
    });

    m.def("rate", [](const std::string& config) {
        const auto c = config_from(config);
        py::gil_scoped_release release;
        return rate_experiment(c).to_json().dump();
    });

    m.def("bound_check", [](const std::string& config) {
        const auto c = config_from(config);
        py::gil_scoped_release release;
        c.validate();
        const auto mdl = make_model(c.model, c.beta);
        const auto k = constants_for(c, *mdl);
        Json j = bound_check(c, k).to_json();
        j["constants"] = k.to_json();
        return j.dump();
    });
}
