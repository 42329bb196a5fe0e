#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgld/types.hpp"

namespace sgld {

using Json = nlohmann::json;

/// JSON has no infinities or NaN; they are written as the strings "+inf",
/// "-inf" and "nan" so reports round-trip exactly.
inline Json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

inline double number_from_json(const Json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw ValidationError("expected a number, got string '" + s + "'");
    }
    if (!j.is_number()) throw ValidationError("expected a number in JSON");
    return j.get<double>();
}

inline Json json_vector(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v[i]));
    return a;
}

inline Vector vector_from_json(const Json& j) {
    if (!j.is_array()) throw ValidationError("expected a JSON array for a vector");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number_from_json(j[i]);
    return v;
}

inline Json json_estimate(const Estimate& e) {
    return Json{{"value", json_number(e.value)}, {"std_error", json_number(e.std_error)}};
}

inline Estimate estimate_from_json(const Json& j) {
    return Estimate{number_from_json(j.at("value")), number_from_json(j.at("std_error"))};
}

/// Version string and the source revision captured at configure time.
const char* library_version();
const char* build_id();

}  // namespace sgld
