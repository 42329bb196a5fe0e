#pragma once

#include <cmath>

namespace sgld {

/// 1 / (1 + e^t) without overflow for any finite t.
inline double inv_one_plus_exp(double t) noexcept {
    if (t > 0.0) {
        const double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}

/// Standard logistic 1 / (1 + e^{-t}).
inline double logistic(double t) noexcept { return inv_one_plus_exp(-t); }

/// log(1 + e^t).
inline double log1p_exp(double t) noexcept {
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

}  // namespace sgld
