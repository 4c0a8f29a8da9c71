#include "finkam/json_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <algorithm>

#include "finkam/errors.hpp"

namespace finkam {

namespace {

void write_number(double v, std::string& out) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void write(const Json& v, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(it.key()).dump() + ": ";
        write(it.value(), indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          write(v[i], indent + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write(v[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float:
      write_number(v.get<double>(), out);
      return;
    default:
      out += v.dump();
  }
}

}  // namespace

std::string dump_json(const Json& value) {
  std::string out;
  write(value, 0, out);
  out += "\n";
  return out;
}

Json series_to_json(const Series& f) {
  Json modes = Json::array();
  for (std::size_t p = 0; p < f.size(); ++p) {
    const ModeIndex& m = f.mode(p);
    Json k = Json::array();
    for (int j = 0; j < f.dim(); ++j) k.push_back(m.k[j]);
    Json coeffs = Json::array();
    for (const Complex& c : f.coeffs(p)) coeffs.push_back(Json::array({c.real(), c.imag()}));
    modes.push_back({{"k", k}, {"l", m.l}, {"coeffs", coeffs}});
  }
  return {{"dim", f.dim()},
          {"taylor_degree", f.degree()},
          {"center", f.center()},
          {"angle_cutoff", f.angle_cutoff()},
          {"modes", modes}};
}

Series series_from_json(const Json& record) {
  try {
    const int dim = record.at("dim").get<int>();
    const int degree = record.at("taylor_degree").get<int>();
    const auto center = record.at("center").get<std::vector<double>>();
    const int cutoff = record.at("angle_cutoff").get<int>();
    SeriesAccumulator acc(dim, degree, center, cutoff);
    const std::size_t nb = monomial_basis(dim, degree).size();
    for (const auto& m : record.at("modes")) {
      ModeIndex mode;
      const auto k = m.at("k").get<std::vector<int>>();
      if (static_cast<int>(k.size()) != dim) throw InvalidArgument("series record: k length != dim");
      for (int j = 0; j < dim; ++j) mode.k[j] = k[j];
      mode.l = m.at("l").get<int>();
      if (mode.order() > cutoff) throw InvalidArgument("series record: mode beyond angle_cutoff");
      const auto& coeffs = m.at("coeffs");
      if (coeffs.size() != nb) throw InvalidArgument("series record: coefficient count does not match degree");
      auto dst = acc.slot(mode);
      for (std::size_t a = 0; a < nb; ++a) dst[a] = {coeffs[a].at(0).get<double>(), coeffs[a].at(1).get<double>()};
    }
    return acc.finish();
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("series record: ") + e.what());
  }
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace finkam
