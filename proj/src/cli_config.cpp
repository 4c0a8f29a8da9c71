#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "finkam/cli.hpp"
#include "finkam/duffing.hpp"
#include "finkam/errors.hpp"
#include "finkam/monomials.hpp"

namespace finkam::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Range {
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double v) const {
    if (lo_open ? !(v > lo) : !(v >= lo)) return false;
    if (hi_open ? !(v < hi) : !(v <= hi)) return false;
    return true;
  }
  std::string describe() const {
    std::ostringstream s;
    s.precision(17);
    if (lo > -kInf && hi < kInf)
      s << "in " << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
    else if (lo > -kInf)
      s << (lo_open ? "> " : ">= ") << lo;
    else
      s << (hi_open ? "< " : "<= ") << hi;
    return s.str();
  }
};

const Range kPositive{0.0, kInf, true, false};
const Range kAny{};

std::string type_name(const Json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  return "null";
}

// Reads the keys of one object, filling `dst` with validated values and defaults.
class Fields {
 public:
  Fields(const Json* src, std::string path, std::vector<ValidationError>& errs)
      : src_(src), path_(std::move(path)), errs_(errs) {
    if (src_ && !src_->is_object()) {
      fail(path_, "expected an object, got " + type_name(*src_));
      src_ = nullptr;
    }
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }
  void fail(const std::string& path, const std::string& msg) { errs_.push_back({path, msg}); }
  std::vector<ValidationError>& errors() { return errs_; }

  const Json* take(const std::string& key) {
    seen_.insert(key);
    if (!src_) return nullptr;
    auto it = src_->find(key);
    return it == src_->end() ? nullptr : &*it;
  }

  std::optional<double> number(const std::string& key, std::optional<double> def, Range r = kAny) {
    const Json* v = take(key);
    if (!v) {
      if (!def) fail(at(key), "required number is missing");
      else dst[key] = *def;
      return def;
    }
    if (!v->is_number()) {
      fail(at(key), "expected a number, got " + type_name(*v));
      return std::nullopt;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x) || !r.contains(x)) {
      fail(at(key), "value must be " + r.describe());
      return std::nullopt;
    }
    dst[key] = x;
    return x;
  }

  std::optional<std::int64_t> integer(const std::string& key, std::optional<std::int64_t> def,
                                      std::int64_t lo = std::numeric_limits<std::int64_t>::min(),
                                      std::int64_t hi = std::numeric_limits<std::int64_t>::max()) {
    const Json* v = take(key);
    if (!v) {
      if (!def) fail(at(key), "required integer is missing");
      else dst[key] = *def;
      return def;
    }
    if (!v->is_number_integer()) {
      fail(at(key), "expected an integer, got " + type_name(*v));
      return std::nullopt;
    }
    const bool huge = v->is_number_unsigned() &&
                      v->get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
    const std::int64_t x = huge ? 0 : v->get<std::int64_t>();
    if (huge || x < lo || x > hi) {
      fail(at(key), "value must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return std::nullopt;
    }
    dst[key] = x;
    return x;
  }

  std::optional<bool> boolean(const std::string& key, bool def) {
    const Json* v = take(key);
    if (!v) {
      dst[key] = def;
      return def;
    }
    if (!v->is_boolean()) {
      fail(at(key), "expected a boolean, got " + type_name(*v));
      return std::nullopt;
    }
    dst[key] = v->get<bool>();
    return v->get<bool>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key, std::optional<std::vector<double>> def,
                                             Range r = kAny, std::size_t min_size = 1) {
    const Json* v = take(key);
    if (!v) {
      if (!def) fail(at(key), "required list of numbers is missing");
      else dst[key] = *def;
      return def;
    }
    if (!v->is_array()) {
      fail(at(key), "expected a list of numbers, got " + type_name(*v));
      return std::nullopt;
    }
    if (v->size() < min_size) {
      fail(at(key), "needs at least " + std::to_string(min_size) + " entries");
      return std::nullopt;
    }
    std::vector<double> out;
    bool good = true;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const Json& e = (*v)[i];
      const std::string p = at(key) + "[" + std::to_string(i) + "]";
      if (!e.is_number()) {
        fail(p, "expected a number, got " + type_name(e));
        good = false;
      } else if (!std::isfinite(e.get<double>()) || !r.contains(e.get<double>())) {
        fail(p, "value must be " + r.describe());
        good = false;
      } else {
        out.push_back(e.get<double>());
      }
    }
    if (!good) return std::nullopt;
    dst[key] = out;
    return out;
  }

  std::optional<std::vector<int>> integers(const Json& v, const std::string& path, int lo, int hi) {
    if (!v.is_array()) {
      fail(path, "expected a list of integers, got " + type_name(v));
      return std::nullopt;
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Json& e = v[i];
      if (!e.is_number_integer() || e.get<std::int64_t>() < lo || e.get<std::int64_t>() > hi) {
        fail(path + "[" + std::to_string(i) + "]",
             "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return std::nullopt;
      }
      out.push_back(static_cast<int>(e.get<std::int64_t>()));
    }
    return out;
  }

  void finish() {
    if (!src_) return;
    for (auto it = src_->begin(); it != src_->end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
  }

  Json dst = Json::object();

 private:
  const Json* src_;
  std::string path_;
  std::vector<ValidationError>& errs_;
  std::set<std::string> seen_;
};

bool dio_block(Fields& f) {
  const auto a = f.number("a", std::nullopt, kPositive);
  const auto b = f.number("b", std::nullopt, kPositive);
  const auto d = f.integer("d", std::nullopt, 1, kMaxAngles);
  const auto mu = f.number("mu", std::nullopt, kPositive);
  const auto eps = f.number("eps", std::nullopt, Range{0.0, 1.0, true, true});
  if (a && b && !(*a > *b)) {
    std::ostringstream s;
    s.precision(17);
    s << "constraint a>b violated (a = " << *a << ", b = " << *b << ")";
    f.fail(f.at("b"), s.str());
    return false;
  }
  return a && b && d && mu && eps;
}

// {"terms": [{"exponent": [..d..], "coeff": c}, ...]}; default sum_j I_j^2 / 2.
void h0_block(Fields& parent, int d) {
  const Json* src = parent.take("h0");
  Json terms = Json::array();
  if (!src) {
    for (int j = 0; j < d; ++j) {
      std::vector<int> e(d, 0);
      e[j] = 2;
      terms.push_back({{"coeff", 0.5}, {"exponent", e}});
    }
    parent.dst["h0"] = {{"terms", terms}};
    return;
  }
  Fields f(src, parent.at("h0"), parent.errors());
  const Json* list = f.take("terms");
  if (!list || !list->is_array() || list->empty()) {
    f.fail(f.at("terms"), "expected a non-empty list of {exponent, coeff} terms");
  } else {
    int top = 0;
    for (std::size_t q = 0; q < list->size(); ++q) {
      Fields t(&(*list)[q], f.at("terms") + "[" + std::to_string(q) + "]", parent.errors());
      const auto c = t.number("coeff", std::nullopt);
      const Json* ex = t.take("exponent");
      if (!ex) {
        t.fail(t.at("exponent"), "required list of integers is missing");
      } else if (auto e = t.integers(*ex, t.at("exponent"), 0, 16)) {
        if (static_cast<int>(e->size()) != d) {
          t.fail(t.at("exponent"), "needs d = " + std::to_string(d) + " entries");
        } else {
          int order = 0;
          for (int v : *e) order += v;
          top = std::max(top, order);
          t.dst["exponent"] = *e;
        }
      }
      t.finish();
      if (c) terms.push_back(t.dst);
    }
    if (top < 2) f.fail(f.at("terms"), "H0 must have total degree at least 2 (non-degenerate frequency map)");
  }
  f.finish();
  f.dst["terms"] = terms;
  parent.dst["h0"] = f.dst;
}

// Exactly one of {"modes": [{k, l, cos, sin}]} or {"decay": {ell, cutoff, amplitude}}.
void perturbation_block(Fields& parent, int d) {
  const Json* src = parent.take("p");
  if (!src) {
    parent.fail(parent.at("p"), "required perturbation is missing (give \"modes\" or \"decay\")");
    return;
  }
  Fields f(src, parent.at("p"), parent.errors());
  const Json* modes = f.take("modes");
  const Json* decay = f.take("decay");
  if ((modes != nullptr) == (decay != nullptr)) {
    f.fail(parent.at("p"), "give exactly one of \"modes\" or \"decay\"");
  } else if (modes) {
    if (!modes->is_array()) {
      f.fail(f.at("modes"), "expected a list of {k, l, cos, sin} entries");
    } else {
      Json out = Json::array();
      for (std::size_t q = 0; q < modes->size(); ++q) {
        Fields m(&(*modes)[q], f.at("modes") + "[" + std::to_string(q) + "]", parent.errors());
        const Json* k = m.take("k");
        if (!k) {
          m.fail(m.at("k"), "required list of integers is missing");
        } else if (auto kv = m.integers(*k, m.at("k"), -1000, 1000)) {
          if (static_cast<int>(kv->size()) != d) m.fail(m.at("k"), "needs d = " + std::to_string(d) + " entries");
          else m.dst["k"] = *kv;
        }
        m.integer("l", std::nullopt, -100000, 100000);
        m.number("cos", 0.0);
        m.number("sin", 0.0);
        m.finish();
        out.push_back(m.dst);
      }
      f.dst["modes"] = out;
    }
  } else {
    Fields g(decay, f.at("decay"), parent.errors());
    g.number("ell", std::nullopt, kPositive);
    g.integer("cutoff", std::nullopt, 1, 400);
    g.number("amplitude", 1.0, kPositive);
    g.finish();
    f.dst["decay"] = g.dst;
  }
  f.finish();
  parent.dst["p"] = f.dst;
}

void tolerances_block(Fields& parent, const std::vector<std::pair<std::string, double>>& known, Json& out) {
  const Json* src = parent.take("tolerances");
  Fields f(src, parent.at("tolerances"), parent.errors());
  for (const auto& [key, def] : known) f.number(key, def, kPositive);
  f.finish();
  out = f.dst;
}

void schedule_payload(Fields& f) {
  dio_block(f);
  f.integer("steps", 6, 1, 1000);
}

void smooth_payload(Fields& f) {
  f.integer("d", 1, 1, kMaxAngles);
  f.number("ell", 4.0, kPositive);
  f.integer("cutoff", 730, 1, 2000);
  f.number("amplitude", 1.0, kPositive);
  f.number("s0", 1.0 / 16, Range{0.0, 1.0, true, false});
  f.number("ratio", 0.5, Range{0.0, 1.0, true, true});
  const auto levels = f.integer("levels", 9, 2, 40);
  const auto fit = f.integer("fit_levels", 6, 2, 39);
  if (levels && fit && *fit >= *levels) f.fail(f.at("fit_levels"), "must be smaller than levels");
  f.boolean("kernel_check", false);
  const Json* k = f.take("kernel");
  Fields g(k, f.at("kernel"), f.errors());
  const auto a1 = g.number("a1", 1.0, kPositive);
  const auto plateau = g.number("plateau", 0.5, kPositive);
  if (a1 && plateau && !(*plateau < *a1)) g.fail(g.at("plateau"), "must be smaller than a1");
  g.integer("beta", 0, 0, 4);
  g.integer("p", 4, 0, 8);
  g.finish();
  f.dst["kernel"] = g.dst;
}

void dio_payload(Fields& f) {
  dio_block(f);
  const auto d = f.dst.value("d", std::int64_t{1});
  f.integer("n_samples", 1000, 20, 100'000'000);
  f.number("k_max_factor", 10.0, kPositive);
  const auto eps = f.dst.contains("eps") ? f.dst["eps"].get<double>() : 0.5;
  f.numbers("eps_list", std::vector<double>{eps}, Range{0.0, 1.0, true, true});
  h0_block(f, static_cast<int>(d));
}

void kam_payload(Fields& f) {
  dio_block(f);
  const int d = static_cast<int>(f.dst.value("d", std::int64_t{1}));
  h0_block(f, d);
  perturbation_block(f, d);
  if (auto I0 = f.numbers("I0", std::nullopt); I0 && static_cast<int>(I0->size()) != d)
    f.fail(f.at("I0"), "needs d = " + std::to_string(d) + " entries");
  f.integer("taylor_degree", 3, 2, 8);
  f.integer("max_cutoff", 16, 1, 64);
  f.number("r_cap", 1e-3, kPositive);
  f.number("anchor_radius", 1e-2, kPositive);
  f.integer("pre_steps", 2, 0, 100);
  const auto lo = f.integer("min_steps", 3, 0, 100);
  const auto hi = f.integer("max_steps", 8, 0, 100);
  if (lo && hi && *hi < *lo) f.fail(f.at("max_steps"), "must be at least min_steps");
  if (auto n = f.integer("grid_n", 32, 8, 256); n && *n % 2 != 0) f.fail(f.at("grid_n"), "must be even");
  f.integer("composition_points", 50, 1, 100000);
  f.integer("symplectic_points", 20, 1, 100000);
  f.boolean("require_diophantine", true);
}

void duffing_payload(Fields& f) {
  const auto m = f.integer("m", std::nullopt, 1, 16);
  const auto n = f.integer("n", std::nullopt, 1, 8);
  const Json* terms = f.take("terms");
  Json out = Json::array();
  if (terms && !terms->is_array()) {
    f.fail(f.at("terms"), "expected a list of {alpha, modes} entries");
  } else if (terms) {
    DuffingNetwork net;
    bool complete = m && n;
    for (std::size_t q = 0; q < terms->size(); ++q) {
      Fields t(&(*terms)[q], f.at("terms") + "[" + std::to_string(q) + "]", f.errors());
      ForcingTerm term;
      const Json* alpha = t.take("alpha");
      if (!alpha) {
        t.fail(t.at("alpha"), "required list of integers is missing");
        complete = false;
      } else if (auto al = t.integers(*alpha, t.at("alpha"), 0, 64)) {
        int order = 0;
        for (int v : *al) order += v;
        if (m && static_cast<std::int64_t>(al->size()) != *m) {
          t.fail(t.at("alpha"), "needs m = " + std::to_string(*m) + " entries");
          complete = false;
        } else if (n && order > 2 * *n + 1) {
          t.fail(t.at("alpha"), "|alpha| = " + std::to_string(order) + " exceeds 2n+1 = " + std::to_string(2 * *n + 1));
          complete = false;
        }
        term.alpha = *al;
        t.dst["alpha"] = *al;
      } else {
        complete = false;
      }
      const Json* modes = t.take("modes");
      Json mout = Json::array();
      if (!modes || !modes->is_array()) {
        t.fail(t.at("modes"), "expected a list of {l, re, im} entries");
        complete = false;
      } else {
        for (std::size_t r = 0; r < modes->size(); ++r) {
          Fields md(&(*modes)[r], t.at("modes") + "[" + std::to_string(r) + "]", f.errors());
          const auto l = md.integer("l", std::nullopt, -1000, 1000);
          const auto re = md.number("re", std::nullopt);
          const auto im = md.number("im", 0.0);
          md.finish();
          if (l && re && im) term.modes.push_back({static_cast<int>(*l), {*re, *im}});
          else complete = false;
          mout.push_back(md.dst);
        }
      }
      t.dst["modes"] = mout;
      t.finish();
      out.push_back(t.dst);
      net.terms.push_back(term);
    }
    if (complete) {
      net.m = static_cast<int>(*m);
      net.n = static_cast<int>(*n);
      try {
        net.validate();
      } catch (const InvalidArgument& e) {
        f.fail(f.at("terms"), e.what());
      }
    }
  }
  f.dst["terms"] = out;
  f.numbers("A", std::nullopt, kPositive);
  f.number("c4", 2.0, Range{1.0, kInf, true, false});
  f.number("T", 2000.0, kPositive);
  f.number("dt", 0.0, Range{0.0, kInf, false, false});
  f.integer("n_samples", 50, 1, 1'000'000);
  f.number("bound_multiple", 10.0, kPositive);
  f.number("escape_multiple", 100.0, Range{1.0, kInf, true, false});
  f.number("min_turns", 100.0, kPositive);
  f.integer("trajectory_stride", 100, 1, 1'000'000);
}

}  // namespace

Json RunConfig::canonical() const {
  return {{"payload", payload}, {"seed", seed}, {"slack", slack}, {"subcommand", subcommand}, {"tolerances", tolerances}};
}

std::string Validation::report() const {
  std::string out;
  for (const auto& e : errors) out += e.path + ": " + e.message + "\n";
  return out;
}

Validation parse_and_validate(const std::string& subcommand, const Json& document, const Overrides& overrides,
                              const std::optional<std::string>& env_out) {
  Validation res;
  auto& errs = res.errors;
  if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end()) {
    errs.push_back({"$", "unknown subcommand \"" + subcommand + "\""});
    return res;
  }
  Fields f(&document, "$", errs);

  RunConfig cfg;
  cfg.subcommand = subcommand;
  if (overrides.seed) {
    f.take("seed");
    cfg.seed = *overrides.seed;
  } else if (const Json* s = f.take("seed")) {
    if (s->is_number_unsigned()) cfg.seed = s->get<std::uint64_t>();
    else if (s->is_number_integer()) f.fail("$.seed", "must be nonnegative");
    else f.fail("$.seed", "expected an integer, got " + type_name(*s));
  }
  if (overrides.slack) {
    f.take("slack");
    if (!(*overrides.slack > 0) || !std::isfinite(*overrides.slack)) errs.push_back({"--slack", "value must be > 0"});
    cfg.slack = *overrides.slack;
  } else if (auto s = f.number("slack", 10.0, kPositive)) {
    cfg.slack = *s;
  }
  std::optional<std::string> doc_out;
  if (const Json* o = f.take("out")) {
    if (o->is_string()) doc_out = o->get<std::string>();
    else f.fail("$.out", "expected a string, got " + type_name(*o));
  }
  cfg.out = overrides.out ? *overrides.out : env_out ? *env_out : doc_out ? *doc_out : ".";

  if (subcommand == "schedule") {
    schedule_payload(f);
    tolerances_block(f, {}, cfg.tolerances);
  } else if (subcommand == "smooth-demo") {
    smooth_payload(f);
    tolerances_block(f, {}, cfg.tolerances);
  } else if (subcommand == "dio") {
    dio_payload(f);
    tolerances_block(f, {}, cfg.tolerances);
  } else if (subcommand == "kam") {
    kam_payload(f);
    tolerances_block(f, {{"anchor", 1e-12}, {"inversion", 1e-17}, {"substitution", 1e-20}, {"target_norm", 1e-30}},
                     cfg.tolerances);
  } else {
    duffing_payload(f);
    tolerances_block(f, {{"birkhoff", 1e-6}}, cfg.tolerances);
  }
  f.finish();
  if (!errs.empty()) return res;

  cfg.payload = f.dst;
  cfg.payload.erase("slack");
  cfg.hash = fnv1a_hex(dump_json(cfg.canonical()));
  res.config = std::move(cfg);
  return res;
}

Validation parse_and_validate_text(const std::string& subcommand, const std::string& text, const Overrides& overrides,
                                   const std::optional<std::string>& env_out) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    Validation res;
    res.errors.push_back({"$", std::string("document is not valid JSON: ") + e.what()});
    return res;
  }
  return parse_and_validate(subcommand, doc, overrides, env_out);
}

}  // namespace finkam::cli
