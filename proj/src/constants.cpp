#include "sgld/constants.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sgld/assumption_verifier.hpp"
#include "sgld/gradient_models.hpp"

namespace sgld {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
// exp() overflows a double just above 709.78; past this a constant is +inf.
constexpr double kMaxExponent = 700.0;

void require_positive(double v, const char* name) {
    require(std::isfinite(v) && v > 0.0, std::string(name) + " must be positive and finite");
}

void require_moment(const Estimate& e, const char* name) {
    require(std::isfinite(e.value) && e.value >= 0.0,
            std::string("missing or invalid moment ") + name);
}

// 1 − e^{−x}, accurate when x is tiny.
double one_minus_exp_neg(double x) { return -std::expm1(-x); }

}  // namespace

void ConstantsInputs::validate() const {
    require(std::isfinite(assumptions.L1) && assumptions.L1 >= 0.0, "L1 must be finite and >= 0");
    require(std::isfinite(assumptions.L2) && assumptions.L2 >= 0.0, "L2 must be finite and >= 0");
    require_positive(assumptions.a, "a");
    require(std::isfinite(assumptions.H_star) && assumptions.H_star >= 0.0,
            "H_star must be finite and >= 0");
    require(std::isfinite(b) && b >= 0.0, "b must be finite and >= 0");
    require_positive(d, "d");
    require_positive(beta, "beta");
    require(std::isfinite(c_hat) && c_hat > 0.0,
            "c_hat must be a positive number; it is the contraction prefactor of the diffusion, "
            "which is not derived here and must be supplied (default 1)");
    require(std::isfinite(E_theta0_2) && E_theta0_2 >= 0.0, "E|theta0|^2 must be >= 0");
    require(std::isfinite(E_theta0_4) && E_theta0_4 >= 0.0, "E|theta0|^4 must be >= 0");
    if (int_V2_pi) require(std::isfinite(*int_V2_pi) && *int_V2_pi >= 1.0, "int_V2_pi must be >= 1");
    require_moment(moments.E_eta, "E_eta");
    require_moment(moments.E_eta_sq, "E_eta_sq");
    require_moment(moments.E_one_plus_eta_4, "E_one_plus_eta_4");
    require(moments.E_one_plus_eta_4.value > 0.0, "E_one_plus_eta_4 must be positive");
    require_moment(moments.E_etabar, "E_etabar");
    require_moment(moments.E_etabar_sq, "E_etabar_sq");
    require_moment(moments.E_etabar_3, "E_etabar_3");
    require_moment(moments.E_etabar_4, "E_etabar_4");
    require_moment(moments.E_one_plus_etabar_4, "E_one_plus_etabar_4");
    require_moment(moments.sigma_hat, "sigma_hat");
}

double ConstantsInputs::int_V2_pi_or_default() const {
    if (int_V2_pi) return *int_V2_pi;
    const double a = assumptions.a;
    return 1.0 + b / a + d / (a * beta);
}

ConstantsInputs inputs_for_model(const GradientModel& model, const ModelMoments& moments,
                                 double beta, double c_hat) {
    ConstantsInputs in;
    in.assumptions = model.constants();
    in.b = in.assumptions.b.value_or(moments.E_b.value);
    in.moments = moments;
    in.d = static_cast<double>(model.dim_theta());
    in.beta = beta;
    in.c_hat = c_hat;
    return in;
}

double v_p(double p, double w) { return std::pow(1.0 + w * w, p / 2.0); }

double Mbar_p(double p, double a, double b, double d, double beta) {
    return std::sqrt(1.0 / 3.0 + 4.0 * b / (3.0 * a) + 4.0 * d / (3.0 * a * beta) +
                     4.0 * (p - 2.0) / (3.0 * a * beta));
}

double compute_lambda_max(double a, double L1, double E_one_plus_eta_4) {
    require_positive(a, "a");
    require_positive(L1, "L1");
    require_positive(E_one_plus_eta_4, "E(1+eta)^4");
    const double num = std::min(a, std::cbrt(a));
    const double den = 16.0 * (1.0 + L1) * (1.0 + L1) * std::sqrt(E_one_plus_eta_4);
    return std::min(num / den, 1.0 / a);
}

MomentConstants compute_moment_constants(const ConstantsInputs& in, double lm) {
    in.validate();
    require_positive(lm, "lambda_max");
    const auto& k = in.assumptions;
    const auto& m = in.moments;
    const double a = k.a, L2 = k.L2, H = k.H_star;
    MomentConstants out;
    out.c0 = 4.0 * lm * L2 * L2 * m.E_etabar_sq.value + 4.0 * lm * H * H + 2.0 * in.b;
    out.c1 = out.c0 + 2.0 * in.d / in.beta;
    const double r2 = std::sqrt(8.0 * in.b / a +
                                48.0 / a * lm * (L2 * L2 * m.E_etabar_sq.value + H * H));
    const double r3 = std::cbrt(128.0 / a * lm * lm *
                                (L2 * L2 * L2 * m.E_etabar_3.value + H * H * H));
    out.M = std::max(r2, r3);
    const double growth = std::pow(1.0 + L2, 4) * m.E_one_plus_etabar_4.value + std::pow(1.0 + H, 4);
    out.c2 = 4.0 * in.b * out.M * out.M +
             152.0 * std::pow(1.0 + lm, 3) * growth * (1.0 + out.M) * (1.0 + out.M);
    out.c3 = (1.0 + a * lm) * out.c2 +
             12.0 * in.d * in.d / (in.beta * in.beta) * (lm + 9.0 / a);
    return out;
}

DiscretizationConstants compute_discretization_constants(const ConstantsInputs& in, double lm,
                                                         double c1) {
    in.validate();
    require_positive(lm, "lambda_max");
    require_positive(c1, "c1");
    const auto& k = in.assumptions;
    const auto& m = in.moments;
    const double a = k.a;
    DiscretizationConstants out;
    const double L1sq_eta2 = k.L1 * k.L1 * m.E_eta_sq.value;
    out.sigmaY_bar = 2.0 * lm * L1sq_eta2;
    out.sigmaY_tilde = out.sigmaY_bar * c1 * (lm + 1.0 / a) +
                       4.0 * lm * k.L2 * k.L2 * m.E_etabar_sq.value +
                       4.0 * lm * k.H_star * k.H_star + 2.0 * in.d / in.beta;
    out.sigma_hat = m.sigma_hat.value;
    const double v2 = v_p(2.0, Mbar_p(2.0, a, in.b, in.d, in.beta));
    out.sigmaZ_bar = 8.0 * k.L2 * k.L2 * out.sigma_hat;
    out.sigmaZ_tilde = out.sigmaZ_bar * (3.0 * v2 + c1 * (lm + 1.0 / a) + 1.0);
    const double expo = 4.0 * L1sq_eta2;
    if (expo > kMaxExponent) {
        out.overflow = true;
        out.C21 = kInf;
        out.C22 = kInf;
    } else {
        const double e = std::exp(expo);
        out.C21 = 4.0 * e * (L1sq_eta2 * out.sigmaY_bar + out.sigmaZ_bar);
        out.C22 = 4.0 * e * (L1sq_eta2 * out.sigmaY_tilde + out.sigmaZ_tilde);
    }
    return out;
}

double log_int_exp_square(double c, double u) {
    require(std::isfinite(c) && std::isfinite(u) && 0.0 <= c && c <= u,
            "integration limits must satisfy 0 <= c <= u");
    if (u == c) return -kInf;
    // ∫_c^u e^{t²} dt = e^{u²} ∫_0^{u−c} e^{−s(2u−s)} ds with s = u − t. The
    // integrand is at most e^{−s u}, so beyond s = 60/u it is below e^{−60}
    // of its peak and is dropped. s = r/κ with κ = max(2u, 1) gives the layer
    // unit width.
    const double width = u > 0.0 ? std::min(u - c, 60.0 / u) : u - c;
    const double kappa = std::max(2.0 * u, 1.0);
    double err = 0.0;
    double l1 = 0.0;
    const double scaled = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [u, kappa](double r) {
            const double s = r / kappa;
            return std::exp(-s * (2.0 * u - s));
        },
        0.0, width * kappa, 30, 1e-11, &err, &l1);
    const double val = scaled / kappa;
    err /= kappa;
    if (!(val > 0.0) || !std::isfinite(val) || err > 1e-8 * val) {
        std::ostringstream msg;
        msg << "quadrature did not reach relative error 1e-8 on [" << c << ", " << u
            << "]: value " << val << ", error estimate " << err;
        throw ValidationError(msg.str());
    }
    return u * u + std::log(val);
}

ContractionRate compute_contraction_rate(double a, double b, double d, double beta, double K1) {
    require_positive(a, "a");
    require(std::isfinite(b) && b >= 0.0, "b must be finite and >= 0");
    require_positive(d, "d");
    require_positive(beta, "beta");
    require_positive(K1, "K1");
    ContractionRate r;
    r.K1 = K1;
    r.cbar = a * 2.0 / 4.0;
    r.Mbar = Mbar_p(2.0, a, b, d, beta);
    r.ctilde = 0.75 * a * 2.0 * v_p(2.0, r.Mbar);
    r.b_tilde = std::sqrt(2.0 * r.ctilde / r.cbar - 1.0);
    r.b_bar = std::sqrt(4.0 * r.ctilde * (1.0 + r.cbar) / r.cbar - 1.0);

    const double sk = std::sqrt(K1);
    const double shift = 2.0 / sk;
    const double top = r.b_bar * sk / 2.0 + shift;
    r.log_phi_bar = -(0.5 * std::log(4.0 * kPi / K1) + std::log(r.b_bar) + top * top);
    r.phi_bar = std::exp(r.log_phi_bar);

    // Substituting t = s√K1/2 + 2/√K1 gives (2/√K1) ∫_{2/√K1}^{b̃√K1/2+2/√K1} e^{t²} dt.
    const double alpha = sk / 2.0;
    r.log_integral = std::log(1.0 / alpha) + log_int_exp_square(shift, alpha * r.b_tilde + shift);
    r.log_epsilon =
        std::min(0.0, -(std::log(8.0 * r.ctilde * std::sqrt(kPi / K1)) + r.log_integral));
    r.epsilon = std::exp(r.log_epsilon);

    const double log_third = std::log(4.0 * r.ctilde * r.cbar) + r.log_epsilon;
    r.log_c_dot = std::min({r.log_phi_bar, std::log(r.cbar), log_third}) - std::log(2.0);
    r.c_dot = std::exp(r.log_c_dot);
    r.underflow = !(r.c_dot > 0.0);
    return r;
}

TheoremConstants compute_theorem_constants(const ConstantsInputs& in, double lm,
                                           const MomentConstants& mc,
                                           const DiscretizationConstants& dc,
                                           const ContractionRate& cr) {
    in.validate();
    const auto& k = in.assumptions;
    const auto& mo = in.moments;
    const double a = k.a;
    const double ch = in.c_hat;
    const double cd = cr.c_dot;
    const double intV2 = in.int_V2_pi_or_default();
    const double lam_a = lm + 1.0 / a;
    const double M4 = Mbar_p(4.0, a, in.b, in.d, in.beta);
    const double v4 = v_p(4.0, M4);
    const double m = std::min(cd, a / 4.0);

    TheoremConstants t;
    t.C23 = ch * (1.0 + 2.0 / m) * (std::exp(m) * dc.C21 + 12.0);
    t.C24 = ch / one_minus_exp_neg(cd) *
            (dc.C22 + 12.0 * mc.c3 * lam_a + 9.0 * v4 + 15.0);
    const double s2c = std::sqrt(2.0 * ch);
    t.C23_star = s2c * (1.0 + 4.0 / m) * (std::exp(m / 2.0) * std::sqrt(dc.C21) + 2.0 * std::sqrt(2.0));
    t.C24_star = s2c / one_minus_exp_neg(cd / 2.0) *
                 (std::sqrt(dc.C22) + 2.0 * std::sqrt(2.0 * mc.c3) * std::sqrt(lam_a) +
                  std::sqrt(3.0) * std::sqrt(v4) + std::sqrt(15.0));
    t.Cbar2 = std::sqrt(dc.C21) + std::sqrt(dc.C22);
    t.Cbar3 = t.C23 + t.C24;

    t.C0 = cd / 2.0;
    t.C1 = 2.0 * ((std::sqrt(lm) * (t.Cbar2 + t.Cbar3) + ch) + ch * (1.0 + intV2));
    t.C2 = t.Cbar2;
    t.C3 = t.Cbar3;

    const double lm4 = std::pow(lm, 0.25);
    const double Ct2 = lm4 * (std::sqrt(dc.C21) + std::sqrt(dc.C22));
    const double Ct3 = std::sqrt(2.0) * (t.C23_star + t.C24_star);
    t.C4 = cd / 4.0;
    t.C5 = 2.0 * ((lm4 * (Ct2 + Ct3) + std::sqrt(2.0 * ch)) + std::sqrt(ch) * (1.0 + intV2));
    t.C6 = Ct2;
    t.C7 = Ct3;

    t.G = k.L1 * mo.E_eta.value * (in.E_theta0_2 + mc.c1 * lam_a) +
          k.L2 * mo.E_etabar.value + k.H_star;
    t.Csharp0 = t.C4;
    t.Csharp1 = t.C5 * t.G * (in.E_theta0_4 + 1.0);
    t.Csharp2 = (t.C6 + t.C7) * t.G;
    t.Csharp3 = in.d / (2.0 * in.beta) *
                std::log(std::exp(1.0) * k.L1 * mo.E_eta.value / a * (in.b * in.beta / in.d + 1.0));
    return t;
}

ConstantsReport compute_constants(const ConstantsInputs& in) {
    in.validate();
    require_positive(in.assumptions.L1, "L1");
    ConstantsReport r;
    r.inputs = in;
    const double a = in.assumptions.a;
    r.lambda_max = compute_lambda_max(a, in.assumptions.L1, in.moments.E_one_plus_eta_4.value);
    r.moment = compute_moment_constants(in, r.lambda_max);
    r.discretization = compute_discretization_constants(in, r.lambda_max, r.moment.c1);
    r.Mbar2 = Mbar_p(2.0, a, in.b, in.d, in.beta);
    r.Mbar4 = Mbar_p(4.0, a, in.b, in.d, in.beta);
    r.vbar_M2 = v_p(2.0, r.Mbar2);
    r.vbar_M4 = v_p(4.0, r.Mbar4);
    r.cbar2 = a * 2.0 / 4.0;
    r.ctilde2 = 0.75 * a * 2.0 * r.vbar_M2;
    r.cbar4 = a * 4.0 / 4.0;
    r.ctilde4 = 0.75 * a * 4.0 * r.vbar_M4;
    r.contraction = compute_contraction_rate(a, in.b, in.d, in.beta,
                                             in.assumptions.L1 * in.moments.E_eta.value);
    r.theorem = compute_theorem_constants(in, r.lambda_max, r.moment, r.discretization, r.contraction);

    r.notes.push_back("c_hat = " + std::to_string(in.c_hat) +
                      " is supplied by the caller: it is the prefactor of the contraction of the "
                      "Langevin diffusion in w_{1,2}, which is defined externally and not computed here");
    if (!in.int_V2_pi) r.notes.push_back("int V2 dpi uses the dissipativity bound 1 + b/a + d/(a beta)");
    if (r.discretization.overflow)
        r.warnings.push_back("exp(4 L1^2 E[eta^2]) overflows: C21, C22 and every constant built "
                             "from them are +inf, so the bounds are vacuous at these parameters");
    if (r.contraction.underflow)
        r.warnings.push_back("contraction rate c_dot underflows to 0+ (log c_dot = " +
                             std::to_string(r.contraction.log_c_dot) +
                             "); rate constants are 0 and the bounds are vacuous");
    for (const auto& w : in.moments.warnings) r.warnings.push_back("moments: " + w);
    const auto vac = r.vacuous();
    if (!vac.empty() && !r.discretization.overflow && !r.contraction.underflow) {
        std::string names;
        for (const auto& n : vac) names += (names.empty() ? "" : ", ") + n;
        r.warnings.push_back("constants out of floating-point range: " + names);
    }
    return r;
}

std::vector<ConstantEntry> ConstantsReport::entries() const {
    const auto& m = moment;
    const auto& dc = discretization;
    const auto& cr = contraction;
    const auto& t = theorem;
    return {
        {"lambda_max", lambda_max, "min{min(a, a^(1/3)) / (16 (1+L1)^2 sqrt(E(1+eta)^4)), 1/a}"},
        {"c0", m.c0, "4 lambda_max L2^2 E[etabar^2] + 4 lambda_max H*^2 + 2b"},
        {"c1", m.c1, "c0 + 2d/beta"},
        {"M", m.M, "max{(8b/a + 48/a lambda_max (L2^2 E[etabar^2] + H*^2))^(1/2), "
                   "(128/a lambda_max^2 (L2^3 E[etabar^3] + H*^3))^(1/3)}"},
        {"c2", m.c2, "4b M^2 + 152 (1+lambda_max)^3 ((1+L2)^4 E(1+etabar)^4 + (1+H*)^4) (1+M)^2"},
        {"c3", m.c3, "(1 + a lambda_max) c2 + 12 d^2 beta^-2 (lambda_max + 9/a)"},
        {"sigmaY_bar", dc.sigmaY_bar, "2 lambda_max L1^2 E[eta^2]"},
        {"sigmaY_tilde", dc.sigmaY_tilde,
         "sigmaY_bar c1 (lambda_max + 1/a) + 4 lambda_max L2^2 E[etabar^2] + 4 lambda_max H*^2 + 2d/beta"},
        {"sigma_hat", dc.sigma_hat, "E[(eta(X0) + eta(E X0))^2 |X0 - E X0|^2]"},
        {"sigmaZ_bar", dc.sigmaZ_bar, "8 L2^2 sigma_hat"},
        {"sigmaZ_tilde", dc.sigmaZ_tilde, "8 L2^2 sigma_hat (3 v2(Mbar2) + c1 (lambda_max + 1/a) + 1)"},
        {"Mbar2", Mbar2, "(1/3 + 4b/(3a) + 4d/(3a beta))^(1/2)"},
        {"Mbar4", Mbar4, "(1/3 + 4b/(3a) + 4d/(3a beta) + 8/(3a beta))^(1/2)"},
        {"vbar_M2", vbar_M2, "v2(Mbar2) = 1 + Mbar2^2"},
        {"vbar_M4", vbar_M4, "v4(Mbar4) = (1 + Mbar4^2)^2"},
        {"cbar2", cbar2, "a p/4, p = 2"},
        {"ctilde2", ctilde2, "(3/4) a p v_p(Mbar_p), p = 2"},
        {"cbar4", cbar4, "a p/4, p = 4"},
        {"ctilde4", ctilde4, "(3/4) a p v_p(Mbar_p), p = 4"},
        {"C21", dc.C21, "4 exp(4 L1^2 E[eta^2]) (L1^2 E[eta^2] sigmaY_bar + sigmaZ_bar)"},
        {"C22", dc.C22, "4 exp(4 L1^2 E[eta^2]) (L1^2 E[eta^2] sigmaY_tilde + sigmaZ_tilde)"},
        {"C23", t.C23, "c_hat (1 + 2/min(c_dot, a/4)) (exp(min(c_dot, a/4)) C21 + 12)"},
        {"C24", t.C24, "c_hat / (1 - exp(-c_dot)) (C22 + 12 c3 (lambda_max + 1/a) + 9 v4(Mbar4) + 15)"},
        {"C23_star", t.C23_star,
         "sqrt(2 c_hat) (1 + 4/min(c_dot, a/4)) (exp(min(c_dot, a/4)/2) C21^(1/2) + 2 sqrt(2))"},
        {"C24_star", t.C24_star,
         "sqrt(2 c_hat) / (1 - exp(-c_dot/2)) (C22^(1/2) + 2 sqrt(2 c3) (lambda_max + 1/a)^(1/2) "
         "+ sqrt(3) v4(Mbar4)^(1/2) + sqrt(15))"},
        {"Cbar2", t.Cbar2, "C21^(1/2) + C22^(1/2)"},
        {"Cbar3", t.Cbar3, "C23 + C24"},
        {"C0", t.C0, "c_dot/2"},
        {"C1", t.C1, "2 [(lambda_max^(1/2) (Cbar2 + Cbar3) + c_hat) + c_hat (1 + int V2 dpi)]"},
        {"C2", t.C2, "Cbar2"},
        {"C3", t.C3, "Cbar3"},
        {"C4", t.C4, "c_dot/4"},
        {"C5", t.C5,
         "2 [(lambda_max^(1/4) (C6 + C7) + sqrt(2 c_hat)) + c_hat^(1/2) (1 + int V2 dpi)]"},
        {"C6", t.C6, "lambda_max^(1/4) (C21^(1/2) + C22^(1/2))"},
        {"C7", t.C7, "sqrt(2) (C23_star + C24_star)"},
        {"G", t.G, "L1 E[eta] (E|theta0|^2 + c1 (lambda_max + 1/a)) + L2 E[etabar] + H*"},
        {"Csharp0", t.Csharp0, "C4"},
        {"Csharp1", t.Csharp1, "C5 G E[|theta0|^4 + 1]"},
        {"Csharp2", t.Csharp2, "(C6 + C7) G"},
        {"Csharp3", t.Csharp3, "(d/(2 beta)) log(e L1 E[eta]/a (b beta/d + 1))"},
        {"K1", cr.K1, "L1 E[eta]"},
        {"b_tilde", cr.b_tilde, "sqrt(2 ctilde2/cbar2 - 1)"},
        {"b_bar", cr.b_bar, "sqrt(4 ctilde2 (1 + cbar2)/cbar2 - 1)"},
        {"phi_bar", cr.phi_bar, "(sqrt(4 pi/K1) b_bar exp((b_bar sqrt(K1)/2 + 2/sqrt(K1))^2))^-1"},
        {"epsilon", cr.epsilon,
         "min{1, (8 ctilde2 sqrt(pi/K1) int_0^b_tilde exp((s sqrt(K1)/2 + 2/sqrt(K1))^2) ds)^-1}"},
        {"c_dot", cr.c_dot, "min{phi_bar, cbar2, 4 ctilde2 epsilon cbar2}/2"},
        {"c_hat", inputs.c_hat, "supplied by the caller"},
        {"int_V2_pi", inputs.int_V2_pi_or_default(),
         inputs.int_V2_pi ? "supplied (Monte Carlo under the target)" : "1 + b/a + d/(a beta)"},
    };
}

std::vector<std::string> ConstantsReport::vacuous() const {
    std::vector<std::string> out;
    for (const auto& e : entries())
        if (!std::isfinite(e.value)) out.push_back(e.name);
    if (contraction.underflow) out.push_back("c_dot");
    return out;
}

namespace {

Json inputs_to_json(const ConstantsInputs& in) {
    Json j;
    j["L1"] = json_number(in.assumptions.L1);
    j["L2"] = json_number(in.assumptions.L2);
    j["a"] = json_number(in.assumptions.a);
    j["H_star"] = json_number(in.assumptions.H_star);
    if (in.assumptions.b) j["b_declared"] = json_number(*in.assumptions.b);
    j["b"] = json_number(in.b);
    j["moments"] = moments_to_json(in.moments);
    j["d"] = json_number(in.d);
    j["beta"] = json_number(in.beta);
    j["c_hat"] = json_number(in.c_hat);
    j["int_V2_pi"] = in.int_V2_pi ? json_number(*in.int_V2_pi) : Json(nullptr);
    j["E_theta0_2"] = json_number(in.E_theta0_2);
    j["E_theta0_4"] = json_number(in.E_theta0_4);
    return j;
}

ConstantsInputs inputs_from_json(const Json& j) {
    ConstantsInputs in;
    in.assumptions.L1 = number_from_json(j.at("L1"));
    in.assumptions.L2 = number_from_json(j.at("L2"));
    in.assumptions.a = number_from_json(j.at("a"));
    in.assumptions.H_star = number_from_json(j.at("H_star"));
    if (j.contains("b_declared")) in.assumptions.b = number_from_json(j["b_declared"]);
    in.b = number_from_json(j.at("b"));
    in.moments = moments_from_json(j.at("moments"));
    in.d = number_from_json(j.at("d"));
    in.beta = number_from_json(j.at("beta"));
    in.c_hat = number_from_json(j.at("c_hat"));
    if (j.contains("int_V2_pi") && !j["int_V2_pi"].is_null())
        in.int_V2_pi = number_from_json(j["int_V2_pi"]);
    in.E_theta0_2 = number_from_json(j.at("E_theta0_2"));
    in.E_theta0_4 = number_from_json(j.at("E_theta0_4"));
    return in;
}

}  // namespace

Json ConstantsReport::to_json() const {
    Json j;
    j["inputs"] = inputs_to_json(inputs);
    Json consts = Json::object();
    Json formulas = Json::object();
    for (const auto& e : entries()) {
        consts[e.name] = json_number(e.value);
        formulas[e.name] = e.formula;
    }
    j["constants"] = consts;
    j["formulas"] = formulas;
    j["log"] = {{"phi_bar", json_number(contraction.log_phi_bar)},
                {"epsilon", json_number(contraction.log_epsilon)},
                {"c_dot", json_number(contraction.log_c_dot)},
                {"integral", json_number(contraction.log_integral)}};
    j["flags"] = {{"overflow", discretization.overflow}, {"underflow", contraction.underflow}};
    j["vacuous"] = vacuous();
    j["warnings"] = warnings;
    j["notes"] = notes;
    j["version"] = library_version();
    j["build_id"] = build_id();
    return j;
}

ConstantsReport ConstantsReport::from_json(const Json& j) {
    ConstantsReport r;
    r.inputs = inputs_from_json(j.at("inputs"));
    const Json& c = j.at("constants");
    auto g = [&c](const char* k) { return number_from_json(c.at(k)); };
    r.lambda_max = g("lambda_max");
    r.moment = {g("c0"), g("c1"), g("M"), g("c2"), g("c3")};
    auto& dc = r.discretization;
    dc.sigmaY_bar = g("sigmaY_bar");
    dc.sigmaY_tilde = g("sigmaY_tilde");
    dc.sigma_hat = g("sigma_hat");
    dc.sigmaZ_bar = g("sigmaZ_bar");
    dc.sigmaZ_tilde = g("sigmaZ_tilde");
    dc.C21 = g("C21");
    dc.C22 = g("C22");
    dc.overflow = j.at("flags").at("overflow").get<bool>();
    r.Mbar2 = g("Mbar2");
    r.Mbar4 = g("Mbar4");
    r.vbar_M2 = g("vbar_M2");
    r.vbar_M4 = g("vbar_M4");
    r.cbar2 = g("cbar2");
    r.ctilde2 = g("ctilde2");
    r.cbar4 = g("cbar4");
    r.ctilde4 = g("ctilde4");
    auto& cr = r.contraction;
    cr.cbar = r.cbar2;
    cr.ctilde = r.ctilde2;
    cr.Mbar = r.Mbar2;
    cr.K1 = g("K1");
    cr.b_tilde = g("b_tilde");
    cr.b_bar = g("b_bar");
    cr.phi_bar = g("phi_bar");
    cr.epsilon = g("epsilon");
    cr.c_dot = g("c_dot");
    const Json& lg = j.at("log");
    cr.log_phi_bar = number_from_json(lg.at("phi_bar"));
    cr.log_epsilon = number_from_json(lg.at("epsilon"));
    cr.log_c_dot = number_from_json(lg.at("c_dot"));
    cr.log_integral = number_from_json(lg.at("integral"));
    cr.underflow = j.at("flags").at("underflow").get<bool>();
    auto& t = r.theorem;
    t.C23 = g("C23");
    t.C24 = g("C24");
    t.C23_star = g("C23_star");
    t.C24_star = g("C24_star");
    t.Cbar2 = g("Cbar2");
    t.Cbar3 = g("Cbar3");
    t.C0 = g("C0");
    t.C1 = g("C1");
    t.C2 = g("C2");
    t.C3 = g("C3");
    t.C4 = g("C4");
    t.C5 = g("C5");
    t.C6 = g("C6");
    t.C7 = g("C7");
    t.G = g("G");
    t.Csharp0 = g("Csharp0");
    t.Csharp1 = g("Csharp1");
    t.Csharp2 = g("Csharp2");
    t.Csharp3 = g("Csharp3");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
}

std::string ConstantsReport::table() const {
    std::ostringstream os;
    os << std::left << std::setw(14) << "name" << std::setw(26) << "value" << "formula\n";
    for (const auto& e : entries()) {
        std::ostringstream v;
        v << std::setprecision(10) << e.value;
        os << std::setw(14) << e.name << std::setw(26) << v.str() << e.formula << '\n';
    }
    os << "log c_dot = " << std::setprecision(10) << contraction.log_c_dot << '\n';
    for (const auto& w : warnings) os << "warning: " << w << '\n';
    for (const auto& n : notes) os << "note: " << n << '\n';
    return os.str();
}

Budget budget(double epsilon_target, const ConstantsReport& r, Metric metric, double E_theta0_4) {
    require(std::isfinite(epsilon_target) && epsilon_target > 0.0, "epsilon must be positive");
    require(std::isfinite(E_theta0_4) && E_theta0_4 >= 0.0, "E|theta0|^4 must be >= 0");
    const auto& t = r.theorem;
    Budget out;
    double rate = 0.0, pref = 0.0;
    if (metric == Metric::W1) {
        const double s = t.C2 + t.C3;
        out.lambda_star = std::min(epsilon_target * epsilon_target / (4.0 * s * s), r.lambda_max);
        rate = t.C0;
        pref = t.C1;
    } else {
        const double s = t.C6 + t.C7;
        out.lambda_star =
            std::min(std::pow(epsilon_target, 4) / (16.0 * std::pow(s, 4)), r.lambda_max);
        rate = t.C4;
        pref = t.C5;
    }
    out.log_argument = std::log(2.0 * pref * (1.0 + E_theta0_4) / epsilon_target);
    out.n_real = std::max(0.0, out.log_argument) / (rate * out.lambda_star);
    constexpr double kMaxN = 9.2e18;  // just below 2^63
    if (!(out.lambda_star > 0.0) || std::isnan(out.n_real) || !(out.n_real < kMaxN)) {
        std::ostringstream msg;
        msg << std::setprecision(17) << "iteration budget overflows 64 bits: ln(2C(1+E|theta0|^4)/eps) = "
            << out.log_argument << ", rate constant = " << rate << ", lambda* = " << out.lambda_star
            << ", n* = " << out.n_real;
        throw BudgetOverflowError(out.log_argument, out.n_real, msg.str());
    }
    out.n_star = static_cast<std::int64_t>(std::ceil(out.n_real));
    return out;
}

double w1_bound(const ConstantsReport& r, double lambda, double n, double E_theta0_4) {
    const auto& t = r.theorem;
    return t.C1 * std::exp(-t.C0 * lambda * n) * (1.0 + E_theta0_4) + (t.C2 + t.C3) * std::sqrt(lambda);
}

double w2_bound(const ConstantsReport& r, double lambda, double n, double E_theta0_4) {
    const auto& t = r.theorem;
    return t.C5 * std::exp(-t.C4 * lambda * n) * (1.0 + E_theta0_4) +
           (t.C6 + t.C7) * std::pow(lambda, 0.25);
}

double excess_risk_bound(const ConstantsReport& r, double lambda, double n) {
    const auto& t = r.theorem;
    return t.Csharp1 * std::exp(-t.Csharp0 * lambda * n) + t.Csharp2 * std::pow(lambda, 0.25) +
           t.Csharp3;
}

double second_moment_bound(const ConstantsReport& r, double E_theta0_2) {
    return E_theta0_2 + r.moment.c1 * (r.lambda_max + 1.0 / r.inputs.assumptions.a);
}

double fourth_moment_bound(const ConstantsReport& r, double E_theta0_4) {
    return E_theta0_4 + r.moment.c3 * (r.lambda_max + 1.0 / r.inputs.assumptions.a);
}

}  // namespace sgld
