#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgld/json_util.hpp"
#include "sgld/types.hpp"

namespace sgld {

/// Equal-weight point cloud.
struct EmpiricalMeasure {
    std::vector<Vector> points;
    Eigen::Index dim = 0;
    std::string label;

    EmpiricalMeasure() = default;
    EmpiricalMeasure(std::vector<Vector> pts, std::string lbl = {});
    /// From scalars, as a 1-D measure.
    static EmpiricalMeasure from_scalars(const std::vector<double>& xs, std::string lbl = {});

    std::size_t size() const { return points.size(); }
    void validate() const;
};

enum class DistanceMethod { Sorted1D, ExactMatching, Sliced };

std::string method_name(DistanceMethod m);
DistanceMethod parse_method(const std::string& s);

struct DistanceEstimate {
    double value = 0.0;
    DistanceMethod method = DistanceMethod::Sorted1D;
    int p = 1;
    std::size_t n_mu = 0;
    std::size_t n_nu = 0;
    int n_projections = 0;   // sliced only
    double std_error = 0.0;  // sliced only; 0 for exact methods
    std::string note;        // e.g. how unequal sample counts were aligned

    Json to_json() const;
};

/// Exact W_p between two 1-D empirical measures by integrating the distance
/// of the two quantile functions. For equal N this is the sorted pairing.
DistanceEstimate wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p);
DistanceEstimate wasserstein_1d(std::vector<double> xs, std::vector<double> ys, int p);

inline constexpr std::size_t kMaxExactN = 4096;

struct Assignment {
    std::vector<std::size_t> col_of_row;
    double total_cost = 0.0;
};

/// Minimum-cost perfect matching on an n×n cost given by cost(i, j), by
/// shortest augmenting paths with dual potentials, O(n³). Costs are
/// evaluated on demand, so memory is O(n).
Assignment min_cost_assignment(std::size_t n,
                               const std::function<double(std::size_t, std::size_t)>& cost);

/// ((1/N) min_σ Σ |x_i − y_σ(i)|^p)^{1/p} for N ≤ kMaxExactN.
DistanceEstimate wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p);

inline constexpr int kDefaultProjections = 256;

/// (mean over random unit directions of 1-D W_p^p)^{1/p}, with a delta-method
/// standard error over projections. Deterministic in the seed and
/// independent of the thread count.
DistanceEstimate sliced_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p,
                                    int n_projections, std::uint64_t seed, unsigned threads = 0);

/// (1/N) min over matchings of Σ min(1, |θ − θ'|)(1 + V₂(θ) + V₂(θ')) with
/// V₂(θ) = 1 + |θ|². Dominates W₁.
DistanceEstimate w12_functional(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

}  // namespace sgld
