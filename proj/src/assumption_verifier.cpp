#include "sgld/assumption_verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sgld {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Welford {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    double std_error() const {
        if (n < 2) return 0.0;
        return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    }
    Estimate estimate() const { return Estimate{mean, std_error()}; }
};

Vector draw_clipped(const GradientModel& model, Rng& rng, double radius) {
    if (!std::isfinite(radius)) return model.sample_data(rng);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Vector x = model.sample_data(rng);
        if (x.norm() <= radius) return x;
    }
    throw ValidationError("verify: data law almost never falls inside |x| <= " +
                          std::to_string(radius) + "; use a larger region_radius_x");
}

bool exceeds(double lhs, double rhs, double scale) {
    return lhs > rhs + kVerifySlack * std::max(std::abs(rhs), scale);
}

void record(CheckResult& r, bool violated, double value, bool larger_is_worse, Witness w) {
    ++r.trials;
    const bool worse = r.trials == 1 || (larger_is_worse ? value > r.worst : value < r.worst);
    if (worse) r.worst = value;
    if (violated) {
        ++r.violations;
        r.pass = false;
        if (r.violations == 1) r.witness = std::move(w);
    } else if (r.violations == 0 && worse) {
        r.witness = std::move(w);
    }
}

Json witness_json(const Witness& w) {
    Json j{{"theta", json_vector(w.theta)}, {"x", json_vector(w.x)},
           {"lhs", json_number(w.lhs)}, {"rhs", json_number(w.rhs)}};
    if (w.theta_prime) j["theta_prime"] = json_vector(*w.theta_prime);
    if (w.x_prime) j["x_prime"] = json_vector(*w.x_prime);
    return j;
}

Json check_json(const CheckResult& r) {
    Json j{{"name", r.name},         {"pass", r.pass},
           {"worst", json_number(r.worst)}, {"declared", json_number(r.declared)},
           {"trials", r.trials},     {"skipped", r.skipped},
           {"violations", r.violations}};
    if (r.witness) j["witness"] = witness_json(*r.witness);
    return j;
}

}  // namespace

std::optional<double> default_data_clip(const GradientModel& model) {
    return model.data_clip_radius();
}

bool VerificationReport::all_pass() const {
    return lipschitz_theta.pass && lipschitz_x.pass && dissipativity.pass && growth_bound.pass &&
           (!unbiasedness || unbiasedness->pass);
}

Json VerificationReport::to_json() const {
    Json j;
    j["model"] = model;
    j["seed"] = seed;
    j["trials"] = trials;
    j["region_radius_theta"] = json_number(region_radius_theta);
    j["region_radius_x"] = json_number(region_radius_x);
    j["constants"] = {{"L1", json_number(constants.L1)},
                      {"L2", json_number(constants.L2)},
                      {"a", json_number(constants.a)},
                      {"H_star", json_number(constants.H_star)}};
    if (constants.b) j["constants"]["b"] = json_number(*constants.b);
    j["lipschitz_theta"] = check_json(lipschitz_theta);
    j["lipschitz_x"] = check_json(lipschitz_x);
    j["dissipativity"] = check_json(dissipativity);
    j["growth_bound"] = check_json(growth_bound);
    if (unbiasedness) {
        const auto& u = *unbiasedness;
        Json thetas = Json::array();
        for (const auto& t : u.thetas) thetas.push_back(json_vector(t));
        Json zs = Json::array();
        for (const auto& row : u.z_scores) {
            Json r = Json::array();
            for (double z : row) r.push_back(json_number(z));
            zs.push_back(r);
        }
        j["unbiasedness"] = {{"pass", u.pass},         {"exact", u.exact},
                             {"max_abs_z", json_number(u.max_abs_z)},
                             {"n_mc", u.n_mc},         {"thetas", thetas},
                             {"z_scores", zs}};
    }
    j["all_pass"] = all_pass();
    j["build_id"] = build_id();
    return j;
}

VerificationReport verify_assumptions(const GradientModel& model, double region_radius_theta,
                                      double region_radius_x, std::int64_t trials,
                                      std::uint64_t seed) {
    VerifyOptions opts;
    opts.region_radius_theta = region_radius_theta;
    opts.region_radius_x = region_radius_x;
    opts.trials = trials;
    opts.seed = seed;
    return verify_assumptions(model, opts);
}

VerificationReport verify_assumptions(const GradientModel& model, const VerifyOptions& opts) {
    require(opts.trials >= 1000, "verify: trials must be >= 1000");
    require(opts.region_radius_theta > 0.0, "verify: region_radius_theta must be positive");
    const AssumptionConstants& c = model.constants();
    require(c.L1 > 0.0 && c.L2 > 0.0 && c.a > 0.0 && c.H_star >= 0.0,
            "verify: model " + model.id() + " lacks declared assumption constants");

    VerificationReport rep;
    rep.model = model.id();
    rep.seed = opts.seed;
    rep.trials = opts.trials;
    rep.region_radius_theta = opts.region_radius_theta;
    rep.region_radius_x = opts.region_radius_x ? *opts.region_radius_x
                                               : default_data_clip(model).value_or(kInf);
    require(rep.region_radius_x > 0.0, "verify: region_radius_x must be positive");
    rep.constants = c;
    rep.lipschitz_theta.name = "lipschitz_theta";
    rep.lipschitz_theta.declared = c.L1;
    rep.lipschitz_x.name = "lipschitz_x";
    rep.lipschitz_x.declared = c.L2;
    rep.dissipativity.name = "dissipativity";
    rep.growth_bound.name = "growth_bound";
    rep.growth_bound.declared = 1.0;

    Rng rng(derive_seed(opts.seed, 0, Stream::Verify));
    const Eigen::Index d = model.dim_theta();
    const double R = opts.region_radius_theta;
    const double eta0 = model.eta(Vector::Zero(model.dim_data()));

    for (std::int64_t t = 0; t < opts.trials; ++t) {
        const Vector theta = rng.uniform_ball(d, R);
        const Vector theta_p = rng.uniform_ball(d, R);
        const Vector x = draw_clipped(model, rng, rep.region_radius_x);
        const Vector x_p = draw_clipped(model, rng, rep.region_radius_x);
        const Vector H = model.stoch_grad(theta, x);
        const Vector H_tp = model.stoch_grad(theta_p, x);
        const Vector H_xp = model.stoch_grad(theta, x_p);
        const double eta_x = model.eta(x);
        const double eta_xp = model.eta(x_p);

        // |H(θ,x) − H(θ',x)| ≤ L1 η(x) |θ − θ'|
        {
            const double lhs = (H - H_tp).norm();
            const double dist = (theta - theta_p).norm();
            if (dist == 0.0) {
                ++rep.lipschitz_theta.skipped;
            } else {
                const double rhs = c.L1 * eta_x * dist;
                record(rep.lipschitz_theta, exceeds(lhs, rhs, H.norm() + H_tp.norm()),
                       lhs / (eta_x * dist), true, Witness{theta, theta_p, x, std::nullopt, lhs, rhs});
            }
        }
        // |H(θ,x) − H(θ,x')| ≤ L2 (η(x) + η(x')) (1 + |θ|) |x − x'|
        {
            const double lhs = (H - H_xp).norm();
            const double dist = (x - x_p).norm();
            if (dist == 0.0) {
                ++rep.lipschitz_x.skipped;
            } else {
                const double base = (eta_x + eta_xp) * (1.0 + theta.norm()) * dist;
                const double rhs = c.L2 * base;
                record(rep.lipschitz_x, exceeds(lhs, rhs, H.norm() + H_xp.norm()), lhs / base, true,
                       Witness{theta, std::nullopt, x, x_p, lhs, rhs});
            }
        }
        // ⟨H(θ,x), θ⟩ ≥ ⟨θ, A(x) θ⟩ − b(x)
        {
            const double inner = H.dot(theta);
            const double quad = model.dissipativity_quadform(x, theta);
            const double off = model.dissipativity_offset(x);
            const double margin = inner - quad + off;
            const double scale = std::abs(inner) + std::abs(quad) + std::abs(off);
            record(rep.dissipativity, exceeds(0.0, margin, scale), margin, false,
                   Witness{theta, std::nullopt, x, std::nullopt, inner, quad - off});
        }
        // |H(θ,x)| ≤ L1 η(x) |θ| + L2 η̄(x) + H★
        {
            const double lhs = H.norm();
            const double etabar = (eta_x + eta0) * x.norm();
            const double rhs = c.L1 * eta_x * theta.norm() + c.L2 * etabar + c.H_star;
            const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? kInf : 0.0);
            record(rep.growth_bound, exceeds(lhs, rhs, 0.0), ratio, true,
                   Witness{theta, std::nullopt, x, std::nullopt, lhs, rhs});
        }
    }

    if (opts.unbiased_n_mc > 0 && model.has_exact_full_gradient()) {
        Rng trng(derive_seed(opts.seed, 1, Stream::Verify));
        std::vector<Vector> thetas;
        for (int k = 0; k < opts.unbiased_thetas; ++k) thetas.push_back(trng.uniform_ball(d, R));
        rep.unbiasedness = unbiasedness_test(model, thetas, opts.unbiased_n_mc, opts.seed);
    }
    return rep;
}

UnbiasednessResult unbiasedness_test(const GradientModel& model, const std::vector<Vector>& thetas,
                                     std::int64_t n_mc, std::uint64_t seed) {
    require(model.has_exact_full_gradient(),
            "unbiasedness: model " + model.id() + " has no exact full gradient");
    require(n_mc >= 2, "unbiasedness: n_mc must be >= 2");
    UnbiasednessResult res;
    res.n_mc = n_mc;
    res.thetas = thetas;
    res.exact = true;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const Vector& theta = thetas[k];
        require(theta.size() == model.dim_theta(), "unbiasedness: theta has the wrong dimension");
        Rng rng(derive_seed(seed, k, Stream::Verify));
        const Eigen::Index d = theta.size();
        std::vector<Welford> acc(static_cast<std::size_t>(d));
        for (std::int64_t i = 0; i < n_mc; ++i) {
            const Vector H = model.stoch_grad(theta, model.sample_data(rng));
            for (Eigen::Index j = 0; j < d; ++j) acc[static_cast<std::size_t>(j)].add(H[j]);
        }
        const Vector h = model.full_grad(theta);
        std::vector<double> zs;
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto& a = acc[static_cast<std::size_t>(j)];
            const double diff = a.mean - h[j];
            const double se = a.std_error();
            double z = 0.0;
            // Relative floor on the SE: below it the spread is rounding noise in a deterministic H.
            const double floor = 1e-12 * std::max(1.0, std::abs(h[j]));
            if (se > floor) {
                res.exact = false;
                z = diff / se;
            } else {
                z = std::abs(diff) <= floor * 1e3 ? 0.0 : kInf;
            }
            zs.push_back(z);
            res.max_abs_z = std::max(res.max_abs_z, std::abs(z));
        }
        res.z_scores.push_back(std::move(zs));
    }
    res.pass = res.max_abs_z <= 4.0;
    return res;
}

ModelMoments estimate_moments(const GradientModel& model, std::int64_t n_mc, std::uint64_t seed) {
    require(n_mc >= 10000, "moments: n_mc must be >= 10^4");
    ModelMoments m;
    m.n_mc = n_mc;
    const double eta0 = model.eta(Vector::Zero(model.dim_data()));

    Welford e1, e2, e14, eb1, eb2, eb3, eb4, eb14, eb;
    Vector mean = Vector::Zero(model.dim_data());
    Rng rng(derive_seed(seed, 0, Stream::Moments));
    for (std::int64_t i = 0; i < n_mc; ++i) {
        const Vector x = model.sample_data(rng);
        if (model.eta_saturated(x)) ++m.saturated_draws;
        const double eta = model.eta(x);
        const double etabar = (eta + eta0) * x.norm();
        e1.add(eta);
        e2.add(eta * eta);
        e14.add(std::pow(1.0 + eta, 4));
        eb1.add(etabar);
        eb2.add(etabar * etabar);
        eb3.add(etabar * etabar * etabar);
        eb4.add(std::pow(etabar, 4));
        eb14.add(std::pow(1.0 + etabar, 4));
        eb.add(model.dissipativity_offset(x));
        mean += (x - mean) / static_cast<double>(i + 1);
    }
    m.E_eta = e1.estimate();
    m.E_eta_sq = e2.estimate();
    m.E_one_plus_eta_4 = e14.estimate();
    m.E_etabar = eb1.estimate();
    m.E_etabar_sq = eb2.estimate();
    m.E_etabar_3 = eb3.estimate();
    m.E_etabar_4 = eb4.estimate();
    m.E_one_plus_etabar_4 = eb14.estimate();
    m.E_b = eb.estimate();

    Welford sh;
    const double eta_mean = model.eta(mean);
    Rng rng2(derive_seed(seed, 1, Stream::Moments));
    for (std::int64_t i = 0; i < n_mc; ++i) {
        const Vector x = model.sample_data(rng2);
        if (model.eta_saturated(x)) ++m.saturated_draws;
        const double s = model.eta(x) + eta_mean;
        sh.add(s * s * (x - mean).squaredNorm());
    }
    m.sigma_hat = sh.estimate();

    if (m.saturated_draws > 0) {
        m.warnings.push_back(std::to_string(m.saturated_draws) +
                             " draws saturated eta at the largest finite double");
    }
    return m;
}

ModelMoments model_moments(const GradientModel& model, std::int64_t n_mc, std::uint64_t seed) {
    if (auto exact = model.exact_moments()) return *exact;
    return estimate_moments(model, n_mc, seed);
}

Json moments_to_json(const ModelMoments& m) {
    Json j;
    j["E_eta"] = json_estimate(m.E_eta);
    j["E_eta_sq"] = json_estimate(m.E_eta_sq);
    j["E_one_plus_eta_4"] = json_estimate(m.E_one_plus_eta_4);
    j["E_etabar"] = json_estimate(m.E_etabar);
    j["E_etabar_sq"] = json_estimate(m.E_etabar_sq);
    j["E_etabar_3"] = json_estimate(m.E_etabar_3);
    j["E_etabar_4"] = json_estimate(m.E_etabar_4);
    j["E_one_plus_etabar_4"] = json_estimate(m.E_one_plus_etabar_4);
    j["sigma_hat"] = json_estimate(m.sigma_hat);
    j["E_b"] = json_estimate(m.E_b);
    j["n_mc"] = m.n_mc;
    j["saturated_draws"] = m.saturated_draws;
    j["warnings"] = m.warnings;
    return j;
}

ModelMoments moments_from_json(const Json& j) {
    ModelMoments m;
    m.E_eta = estimate_from_json(j.at("E_eta"));
    m.E_eta_sq = estimate_from_json(j.at("E_eta_sq"));
    m.E_one_plus_eta_4 = estimate_from_json(j.at("E_one_plus_eta_4"));
    m.E_etabar = estimate_from_json(j.at("E_etabar"));
    m.E_etabar_sq = estimate_from_json(j.at("E_etabar_sq"));
    m.E_etabar_3 = estimate_from_json(j.at("E_etabar_3"));
    m.E_etabar_4 = estimate_from_json(j.at("E_etabar_4"));
    m.E_one_plus_etabar_4 = estimate_from_json(j.at("E_one_plus_etabar_4"));
    m.sigma_hat = estimate_from_json(j.at("sigma_hat"));
    m.E_b = estimate_from_json(j.at("E_b"));
    m.n_mc = j.value("n_mc", std::int64_t{0});
    m.saturated_draws = j.value("saturated_draws", std::int64_t{0});
    m.warnings = j.value("warnings", std::vector<std::string>{});
    return m;
}

}  // namespace sgld
