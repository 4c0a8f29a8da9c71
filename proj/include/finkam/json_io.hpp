#pragma once

#include <string>

#include <json.hpp>

#include "finkam/series.hpp"

namespace finkam {

using Json = nlohmann::json;

/// Deterministic text for a JSON value: object keys sorted, two-space indent,
/// floating-point numbers printed with 17 significant digits.
std::string dump_json(const Json& value);

/// Record layout: {dim, taylor_degree, center, angle_cutoff, modes: [{k, l, coeffs: [[re, im], ...]}]}.
Json series_to_json(const Series& f);
Series series_from_json(const Json& record);

/// 64-bit FNV-1a of a string, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace finkam
