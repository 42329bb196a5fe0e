#include "sgld/types.hpp"

namespace sgld {

void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

void require_finite(const Vector& v, const std::string& what) {
    if (!v.allFinite()) throw ValidationError(what + ": non-finite entry");
}

void require_same_dim(const Vector& a, const Vector& b, const std::string& what) {
    if (a.size() != b.size()) {
        throw ValidationError(what + ": dimension mismatch (" + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace sgld
