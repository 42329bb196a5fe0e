#include "sgld/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgld/parallel.hpp"
#include "sgld/rng.hpp"

namespace sgld {

namespace {

void require_p(int p) { require(p == 1 || p == 2, "p must be 1 or 2"); }

double pow_p(double x, int p) { return p == 1 ? x : x * x; }

double root_p(double x, int p) { return p == 1 ? x : std::sqrt(x); }

// W_p^p between sorted samples, integrating |F⁻¹ − G⁻¹|^p over [0, 1].
double sorted_cost(const std::vector<double>& xs, const std::vector<double>& ys, int p) {
    const std::size_t n = xs.size(), m = ys.size();
    if (n == m) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += pow_p(std::abs(xs[i] - ys[i]), p);
        return acc / static_cast<double>(n);
    }
    // Breakpoints i/n and j/m in units of 1/(n m).
    std::size_t i = 0, j = 0;
    std::uint64_t t = 0;
    double acc = 0.0;
    while (i < n && j < m) {
        const std::uint64_t nx = (i + 1) * m, ny = (j + 1) * n;
        const std::uint64_t next = std::min(nx, ny);
        acc += static_cast<double>(next - t) * pow_p(std::abs(xs[i] - ys[j]), p);
        t = next;
        if (nx == next) ++i;
        if (ny == next) ++j;
    }
    return acc / (static_cast<double>(n) * static_cast<double>(m));
}

void require_exact_sizes(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    require(mu.size() == nu.size(),
            "exact solvers need equal sample counts (" + std::to_string(mu.size()) + " vs " +
                std::to_string(nu.size()) + "); use the sliced estimator or subsample");
    require(mu.size() <= kMaxExactN,
            "exact solvers accept at most " + std::to_string(kMaxExactN) +
                " points; use the sliced estimator for larger clouds");
    require(mu.dim == nu.dim, "measures have different dimensions");
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<Vector> pts, std::string lbl)
    : points(std::move(pts)), dim(points.empty() ? 0 : points.front().size()), label(std::move(lbl)) {}

EmpiricalMeasure EmpiricalMeasure::from_scalars(const std::vector<double>& xs, std::string lbl) {
    std::vector<Vector> pts;
    pts.reserve(xs.size());
    for (double x : xs) pts.push_back(Vector::Constant(1, x));
    return EmpiricalMeasure(std::move(pts), std::move(lbl));
}

void EmpiricalMeasure::validate() const {
    require(!points.empty(), "empirical measure '" + label + "' is empty");
    for (const auto& x : points) {
        require(x.size() == dim, "empirical measure '" + label + "' has mixed dimensions");
        require_finite(x, "point of '" + label + "'");
    }
}

std::string method_name(DistanceMethod m) {
    switch (m) {
        case DistanceMethod::Sorted1D: return "sorted_1d";
        case DistanceMethod::ExactMatching: return "exact_matching";
        case DistanceMethod::Sliced: return "sliced";
    }
    return "unknown";
}

DistanceMethod parse_method(const std::string& s) {
    if (s == "sorted_1d" || s == "1d") return DistanceMethod::Sorted1D;
    if (s == "exact_matching" || s == "exact") return DistanceMethod::ExactMatching;
    if (s == "sliced") return DistanceMethod::Sliced;
    throw ValidationError("unknown distance method '" + s + "' (sorted_1d, exact, sliced)");
}

Json DistanceEstimate::to_json() const {
    Json j{{"value", json_number(value)}, {"method", method_name(method)}, {"p", p},
           {"n_mu", n_mu}, {"n_nu", n_nu}};
    if (method == DistanceMethod::Sliced) {
        j["n_projections"] = n_projections;
        j["std_error"] = json_number(std_error);
    }
    if (!note.empty()) j["note"] = note;
    return j;
}

DistanceEstimate wasserstein_1d(std::vector<double> xs, std::vector<double> ys, int p) {
    require_p(p);
    require(!xs.empty() && !ys.empty(), "wasserstein_1d: empty sample");
    for (double v : xs) require(std::isfinite(v), "wasserstein_1d: non-finite sample");
    for (double v : ys) require(std::isfinite(v), "wasserstein_1d: non-finite sample");
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    DistanceEstimate e;
    e.method = DistanceMethod::Sorted1D;
    e.p = p;
    e.n_mu = xs.size();
    e.n_nu = ys.size();
    e.value = root_p(sorted_cost(xs, ys, p), p);
    if (xs.size() != ys.size()) e.note = "unequal sizes aligned by exact quantile-function merge";
    return e;
}

DistanceEstimate wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p) {
    mu.validate();
    nu.validate();
    require(mu.dim == 1 && nu.dim == 1, "wasserstein_1d needs 1-D measures");
    std::vector<double> xs(mu.size()), ys(nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) xs[i] = mu.points[i][0];
    for (std::size_t i = 0; i < nu.size(); ++i) ys[i] = nu.points[i][0];
    return wasserstein_1d(std::move(xs), std::move(ys), p);
}

Assignment min_cost_assignment(std::size_t n,
                               const std::function<double(std::size_t, std::size_t)>& cost) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based rows/columns; column 0 is the virtual start of each augmenting path.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = row_of_col[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            require(std::isfinite(delta), "assignment: non-finite cost");
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment a;
    a.col_of_row.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) a.col_of_row[row_of_col[j] - 1] = j - 1;
    // Sum the chosen costs directly rather than trusting the duals.
    for (std::size_t i = 0; i < n; ++i) a.total_cost += cost(i, a.col_of_row[i]);
    return a;
}

DistanceEstimate wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p) {
    require_p(p);
    mu.validate();
    nu.validate();
    require_exact_sizes(mu, nu);
    const auto& X = mu.points;
    const auto& Y = nu.points;
    const auto a = min_cost_assignment(mu.size(), [&](std::size_t i, std::size_t j) {
        const double d2 = (X[i] - Y[j]).squaredNorm();
        return p == 1 ? std::sqrt(d2) : d2;
    });
    DistanceEstimate e;
    e.method = DistanceMethod::ExactMatching;
    e.p = p;
    e.n_mu = e.n_nu = mu.size();
    e.value = root_p(a.total_cost / static_cast<double>(mu.size()), p);
    return e;
}

DistanceEstimate sliced_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p,
                                    int n_projections, std::uint64_t seed, unsigned threads) {
    require_p(p);
    require(n_projections >= 16, "sliced Wasserstein needs at least 16 projections");
    mu.validate();
    nu.validate();
    require(mu.dim == nu.dim, "measures have different dimensions");
    const auto K = static_cast<std::size_t>(n_projections);
    std::vector<double> costs(K);
    parallel_for(K, threads, [&](std::size_t k) {
        Rng rng(derive_seed(seed, k, Stream::Projections));
        Vector dir = rng.gaussian(mu.dim);
        double norm = dir.norm();
        while (norm == 0.0) {
            dir = rng.gaussian(mu.dim);
            norm = dir.norm();
        }
        dir /= norm;
        std::vector<double> xs(mu.size()), ys(nu.size());
        for (std::size_t i = 0; i < mu.size(); ++i) xs[i] = dir.dot(mu.points[i]);
        for (std::size_t i = 0; i < nu.size(); ++i) ys[i] = dir.dot(nu.points[i]);
        std::sort(xs.begin(), xs.end());
        std::sort(ys.begin(), ys.end());
        costs[k] = sorted_cost(xs, ys, p);
    });
    const double mean = std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(K);
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    const double se_mean = std::sqrt(ss / static_cast<double>(K - 1) / static_cast<double>(K));

    DistanceEstimate e;
    e.method = DistanceMethod::Sliced;
    e.p = p;
    e.n_mu = mu.size();
    e.n_nu = nu.size();
    e.n_projections = n_projections;
    e.value = root_p(mean, p);
    // d(x^{1/p})/dx = x^{1/p − 1}/p.
    e.std_error = p == 1 ? se_mean : (mean > 0.0 ? se_mean / (2.0 * std::sqrt(mean)) : 0.0);
    if (mu.size() != nu.size()) e.note = "unequal sizes aligned by exact quantile-function merge";
    return e;
}

DistanceEstimate w12_functional(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    mu.validate();
    nu.validate();
    require_exact_sizes(mu, nu);
    const auto& X = mu.points;
    const auto& Y = nu.points;
    std::vector<double> vx(X.size()), vy(Y.size());
    for (std::size_t i = 0; i < X.size(); ++i) vx[i] = 1.0 + X[i].squaredNorm();
    for (std::size_t i = 0; i < Y.size(); ++i) vy[i] = 1.0 + Y[i].squaredNorm();
    const auto a = min_cost_assignment(mu.size(), [&](std::size_t i, std::size_t j) {
        return std::min(1.0, (X[i] - Y[j]).norm()) * (1.0 + vx[i] + vy[j]);
    });
    DistanceEstimate e;
    e.method = DistanceMethod::ExactMatching;
    e.p = 1;
    e.n_mu = e.n_nu = mu.size();
    e.value = a.total_cost / static_cast<double>(mu.size());
    e.note = "w12: cost min(1, |x - y|) (1 + V2(x) + V2(y)), V2 = 1 + |.|^2";
    return e;
}

}  // namespace sgld
