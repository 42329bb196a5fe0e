#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "sgld/types.hpp"

namespace sgld {

/// Tags for independent sub-streams derived from one user seed.
enum class Stream : std::uint64_t {
    Noise = 1,
    Data = 2,
    Init = 3,
    Reference = 4,
    Verify = 5,
    Moments = 6,
    Projections = 7,
    Generator = 8,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Pure function of (seed, index, stream). Chained splitmix64 so distinct
/// (index, stream) pairs land on unrelated engine seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                    Stream stream) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
    return h;
}

/// Thin wrapper over mt19937_64 with the draws this library needs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::mt19937_64& engine() noexcept { return engine_; }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    Vector gaussian(Eigen::Index d) {
        Vector v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = normal_(engine_);
        return v;
    }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform point in the closed ball of the given radius.
    Vector uniform_ball(Eigen::Index d, double radius) {
        Vector dir = gaussian(d);
        double norm = dir.norm();
        while (norm == 0.0) {
            dir = gaussian(d);
            norm = dir.norm();
        }
        const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(d));
        return dir * (r / norm);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sgld
