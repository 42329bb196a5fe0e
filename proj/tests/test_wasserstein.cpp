#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgld/rng.hpp"
#include "sgld/wasserstein.hpp"

using namespace sgld;

namespace {

EmpiricalMeasure random_cloud(Rng& rng, std::size_t n, Eigen::Index d, double shift = 0.0) {
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.gaussian(d) + Vector::Constant(d, shift));
    return EmpiricalMeasure(std::move(pts));
}

// Minimum over all n! matchings.
template <class Cost>
double brute_force(std::size_t n, Cost cost) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += cost(i, perm[i]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("1-D worked values") {
    const auto a = EmpiricalMeasure::from_scalars({0.0});
    const auto b = EmpiricalMeasure::from_scalars({1.0});
    CHECK(wasserstein_1d(a, b, 1).value == 1.0);
    CHECK(wasserstein_1d(a, b, 2).value == 1.0);
    const auto c = EmpiricalMeasure::from_scalars({0.0, 2.0});
    const auto d = EmpiricalMeasure::from_scalars({3.0, 1.0});
    CHECK(wasserstein_1d(c, d, 1).value == 1.0);
    CHECK(wasserstein_1d(c, d, 2).value == 1.0);
    CHECK(wasserstein_exact(c, d, 1).value == 1.0);
    CHECK(wasserstein_1d(c, c, 2).value == 0.0);
    CHECK_THROWS_AS(wasserstein_1d(EmpiricalMeasure({Vector::Zero(2)}), EmpiricalMeasure({Vector::Zero(2)}), 1),
                    ValidationError);
}

TEST_CASE("assignment solver matches brute force over all permutations") {
    Rng rng(derive_seed(1, 0, Stream::Verify));
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + trial % 7;
        Matrix C(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) C(i, j) = std::floor(rng.uniform() * 10) - 3.0;
        auto cost = [&](std::size_t i, std::size_t j) { return C(i, j); };
        const auto a = min_cost_assignment(n, cost);
        CHECK(a.total_cost == brute_force(n, cost));
        std::vector<std::size_t> cols = a.col_of_row;
        std::sort(cols.begin(), cols.end());
        for (std::size_t k = 0; k < n; ++k) CHECK(cols[k] == k);
    }
}

TEST_CASE("exact W_p and w12 match brute force in 2-D") {
    Rng rng(derive_seed(2, 0, Stream::Verify));
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const auto mu = random_cloud(rng, n, 2);
        const auto nu = random_cloud(rng, n, 2, 0.5);
        for (int p : {1, 2}) {
            const double bf = brute_force(n, [&](std::size_t i, std::size_t j) {
                const double r = (mu.points[i] - nu.points[j]).norm();
                return p == 1 ? r : r * r;
            });
            const double expect = p == 1 ? bf / n : std::sqrt(bf / n);
            CHECK(std::abs(wasserstein_exact(mu, nu, p).value - expect) <= 1e-12 * (1 + expect));
        }
        const double bf12 = brute_force(n, [&](std::size_t i, std::size_t j) {
            const auto& x = mu.points[i];
            const auto& y = nu.points[j];
            return std::min(1.0, (x - y).norm()) * (3.0 + x.squaredNorm() + y.squaredNorm());
        });
        CHECK(std::abs(w12_functional(mu, nu).value - bf12 / n) <= 1e-12 * (1 + bf12));
    }
}

TEST_CASE("sorted 1-D equals the assignment solver on 64 random instances") {
    Rng rng(derive_seed(3, 0, Stream::Verify));
    for (int trial = 0; trial < 64; ++trial) {
        const std::size_t n = 1 + rng.index(64);
        const auto mu = random_cloud(rng, n, 1);
        const auto nu = random_cloud(rng, n, 1, rng.normal());
        for (int p : {1, 2}) {
            const double s = wasserstein_1d(mu, nu, p).value;
            const double e = wasserstein_exact(mu, nu, p).value;
            CHECK(std::abs(s - e) <= 1e-12);
        }
    }
}

TEST_CASE("unequal 1-D sizes: quantile merge equals the replicated equal-size problem") {
    Rng rng(derive_seed(4, 0, Stream::Verify));
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.index(7), m = 1 + rng.index(7);
        std::vector<double> xs(n), ys(m), xr, yr;
        for (auto& x : xs) x = rng.normal();
        for (auto& y : ys) y = rng.normal() + 1.0;
        for (double x : xs) xr.insert(xr.end(), m, x);
        for (double y : ys) yr.insert(yr.end(), n, y);
        for (int p : {1, 2}) {
            const auto merged = wasserstein_1d(xs, ys, p);
            const auto rep = wasserstein_1d(xr, yr, p);
            CHECK(std::abs(merged.value - rep.value) <= 1e-12 * (1 + rep.value));
            if (n != m) CHECK_FALSE(merged.note.empty());
        }
    }
}

TEST_CASE("exact solver: permutation invariance and translation") {
    Rng rng(derive_seed(5, 0, Stream::Verify));
    auto mu = random_cloud(rng, 40, 3);
    auto nu = random_cloud(rng, 40, 3, 1.0);
    const double before = wasserstein_exact(mu, nu, 2).value;
    std::shuffle(mu.points.begin(), mu.points.end(), rng.engine());
    std::shuffle(nu.points.begin(), nu.points.end(), rng.engine());
    CHECK(std::abs(wasserstein_exact(mu, nu, 2).value - before) <= 1e-12);

    Vector c(3);
    c << 0.3, -0.4, 1.2;
    std::vector<Vector> shifted;
    for (const auto& x : mu.points) shifted.push_back(x + c);
    const EmpiricalMeasure ms(shifted);
    for (int p : {1, 2}) CHECK(wasserstein_exact(mu, ms, p).value == doctest::Approx(c.norm()).epsilon(1e-12));
    CHECK(wasserstein_exact(mu, mu, 1).value == 0.0);
}

TEST_CASE("W1 <= W2, symmetry and the triangle inequality on 100 triples") {
    Rng rng(derive_seed(6, 0, Stream::Verify));
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.index(32);
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.index(3));
        const auto a = random_cloud(rng, n, d);
        const auto b = random_cloud(rng, n, d, 0.7);
        const auto c = random_cloud(rng, n, d, -0.4);
        for (int p : {1, 2}) {
            const double ab = wasserstein_exact(a, b, p).value;
            const double ba = wasserstein_exact(b, a, p).value;
            const double bc = wasserstein_exact(b, c, p).value;
            const double ac = wasserstein_exact(a, c, p).value;
            CHECK(std::abs(ab - ba) <= 1e-12 * (1 + ab));
            CHECK(ac <= ab + bc + 1e-9);
        }
        CHECK(wasserstein_exact(a, b, 1).value <= wasserstein_exact(a, b, 2).value + 1e-12);
    }
}

TEST_CASE("w12 dominates W1 and vanishes on the diagonal") {
    Rng rng(derive_seed(7, 0, Stream::Verify));
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.index(128);
        const auto a = random_cloud(rng, n, 2);
        const auto b = random_cloud(rng, n, 2, rng.normal());
        CHECK(w12_functional(a, b).value >= wasserstein_exact(a, b, 1).value - 1e-12);
    }
    const auto a = random_cloud(rng, 10, 2);
    CHECK(w12_functional(a, a).value == 0.0);

    Vector one(2);
    one << 0.6, 0.8;
    CHECK(w12_functional(EmpiricalMeasure({Vector::Zero(2)}), EmpiricalMeasure({one})).value ==
          doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("exact solvers reject mismatched or oversized inputs") {
    Rng rng(derive_seed(8, 0, Stream::Verify));
    const auto a = random_cloud(rng, 3, 1);
    const auto b = random_cloud(rng, 4, 1);
    CHECK_THROWS_WITH_AS(wasserstein_exact(a, b, 1), doctest::Contains("sliced"), ValidationError);
    CHECK_THROWS_AS(w12_functional(a, b), ValidationError);
    const auto big = random_cloud(rng, kMaxExactN + 1, 1);
    CHECK_THROWS_AS(wasserstein_exact(big, big, 1), ValidationError);
    CHECK_THROWS_AS(wasserstein_exact(a, a, 3), ValidationError);
}

TEST_CASE("sliced: d = 1 reduces to the 1-D distance, identical clouds give 0") {
    Rng rng(derive_seed(9, 0, Stream::Verify));
    const auto a = random_cloud(rng, 50, 1);
    const auto b = random_cloud(rng, 50, 1, 0.3);
    for (int p : {1, 2}) {
        const auto s = sliced_wasserstein(a, b, p, 32, 1);
        CHECK(s.value == doctest::Approx(wasserstein_1d(a, b, p).value).epsilon(1e-12));
        CHECK(s.std_error <= 1e-12);
    }
    const auto c = random_cloud(rng, 50, 3);
    CHECK(sliced_wasserstein(c, c, 2, 64, 2).value == 0.0);
    CHECK_THROWS_AS(sliced_wasserstein(c, c, 2, 8, 2), ValidationError);
}

TEST_CASE("sliced: deterministic in the seed, symmetric, thread-count independent") {
    Rng rng(derive_seed(10, 0, Stream::Verify));
    const auto a = random_cloud(rng, 300, 3);
    const auto b = random_cloud(rng, 300, 3, 0.5);
    const auto s1 = sliced_wasserstein(a, b, 2, 64, 11, 1);
    const auto s4 = sliced_wasserstein(a, b, 2, 64, 11, 4);
    const auto r = sliced_wasserstein(b, a, 2, 64, 11, 2);
    CHECK(s1.value == s4.value);
    CHECK(s1.std_error == s4.std_error);
    CHECK(s1.value == r.value);
}

TEST_CASE("sliced W2 between shifted Gaussians is stable across seeds") {
    Rng rng(derive_seed(12, 0, Stream::Verify));
    const std::size_t n = 10000;
    std::vector<Vector> pa, pb;
    Vector shift(2);
    shift << 2.0, 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pa.push_back(rng.gaussian(2));
        pb.push_back(rng.gaussian(2) + shift);
    }
    const EmpiricalMeasure a(pa), b(pb);
    const auto x = sliced_wasserstein(a, b, 2, kDefaultProjections, 1);
    const auto y = sliced_wasserstein(a, b, 2, kDefaultProjections, 2);
    CHECK(x.std_error > 0.0);
    CHECK(std::abs(x.value - y.value) <= 3.0 * std::hypot(x.std_error, y.std_error));
    // Population value: E[(2 cos φ)²]^{1/2} = √2.
    CHECK(std::abs(x.value - std::sqrt(2.0)) <= 3.0 * x.std_error + 0.05);
}

TEST_CASE("distance estimate JSON carries method and sizes") {
    const auto e = wasserstein_1d(std::vector<double>{0.0, 1.0}, std::vector<double>{2.0}, 2);
    const auto j = e.to_json();
    CHECK(j["method"] == "sorted_1d");
    CHECK(j["n_mu"] == 2);
    CHECK(j["n_nu"] == 1);
    CHECK(j.contains("note"));
}
