#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "finkam/cli.hpp"
#include "finkam/diophantine.hpp"
#include "finkam/duffing.hpp"
#include "finkam/errors.hpp"
#include "finkam/kam.hpp"
#include "finkam/smoothing.hpp"

using namespace finkam;
namespace fs = std::filesystem;

namespace {

const std::vector<double> kC1{0.0};
const double kGoldenI0 = (13000 + std::numbers::phi - 1) * 1e-4;

struct Verdict {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

ModeIndex mode1(int k, int l) {
  ModeIndex m;
  m.k[0] = k;
  m.l = l;
  return m;
}

ModeIndex mode2(int k0, int k1, int l) {
  ModeIndex m;
  m.k[0] = k0;
  m.k[1] = k1;
  m.l = l;
  return m;
}

Series quadratic_h0(int d, std::vector<double> center = {}) {
  if (center.empty()) center.assign(d, 0.0);
  const std::vector<double> origin(d, 0.0);
  Series h(d, 2, center, 0);
  for (int j = 0; j < d; ++j) {
    Exponent e{};
    e[j] = 2;
    h = h + Series::monomial(d, 2, origin, ModeIndex{}, e, 0.5).rebased(center);
  }
  return h;
}

Series cos_mode(int k, int l, double amp, int degree = 0, std::vector<double> center = kC1) {
  return Series::monomial(1, degree, center, mode1(k, l), Exponent{}, amp / 2) +
         Series::monomial(1, degree, center, mode1(-k, -l), Exponent{}, amp / 2);
}

Series random_real(std::mt19937_64& rng, int d, int degree, const std::vector<double>& center, int cutoff,
                   double amp) {
  std::normal_distribution<double> g;
  SeriesAccumulator acc(d, degree, center, cutoff);
  const auto& basis = monomial_basis(d, degree);
  for (int k0 = -cutoff; k0 <= cutoff; ++k0)
    for (int k1 = (d > 1 ? -cutoff : 0); k1 <= (d > 1 ? cutoff : 0); ++k1)
      for (int l = -cutoff; l <= cutoff; ++l) {
        ModeIndex m = d > 1 ? mode2(k0, k1, l) : mode1(k0, l);
        if (m.order() > cutoff || m < -m) continue;
        for (std::size_t a = 0; a < basis.size(); ++a) {
          Complex c(g(rng), m == -m ? 0.0 : g(rng));
          c *= amp / (1.0 + m.order());
          acc.slot(m)[a] += c;
          if (m != -m) acc.slot(-m)[a] += std::conj(c);
        }
      }
  return acc.finish();
}

// The d = 1 toy problem H0 = I^2/2, P = delta cos(theta - t); shared by criteria 2 to 5.
struct Toy {
  DioParams params = derive_params(2, 1, 1, 1e-3, 1e-2);
  KamConfig cfg;
  TorusResult result;
  Toy() {
    cfg.I0 = {kGoldenI0};
    result = run(quadratic_h0(1), cos_mode(1, -1, 1e-3), params, cfg);
  }
};

const Toy& toy() {
  static const Toy instance;
  return instance;
}

Verdict homological_exactness() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  double worst = 0.0;
  int solved = 0;
  for (int trial = 0; solved < 100 && trial < 400; ++trial) {
    const int d = 1 + trial % 2;
    const int degree = trial % 4;
    const auto mode = trial % 3 == 0 ? HomologicalMode::ThetaOnly : HomologicalMode::ThetaAndTime;
    std::vector<double> center(d);
    for (auto& x : center) x = u(rng);
    Series h0 = quadratic_h0(d, center);
    if (degree >= 2) {
      Exponent e{};
      e[0] = 2;
      if (d > 1) e[1] = 1; else e[0] = 3;
      h0 = h0 + Series::monomial(d, 3, std::vector<double>(d, 0.0), ModeIndex{}, e, 0.01 * u(rng)).rebased(center);
    }
    std::vector<Series> omega;
    for (int j = 0; j < d; ++j) omega.push_back(derive(h0, Variable::action(j)).with_degree(degree));
    const Series P = random_real(rng, d, degree, center, d == 1 ? 8 : 5, 1e-3);
    auto bound = [](double k) { return 1e-6 / std::pow(k, 2); };
    GeneratingFunction gen;
    try {
      gen = solve_homological(P, omega, 1e-2, 10.0, mode, bound);
    } catch (const SmallDivisorViolation&) {
      continue;
    }
    ++solved;
    worst = std::max(worst, homological_residual(gen.S, P, omega, 1e-2, 10.0, mode, {0.05, 1e-3, center}));
  }
  return {solved == 100 && worst <= 1e-12, fmt("%.0f perturbations, worst residual %.3e", solved, worst)};
}

Verdict symplecticity() {
  const auto& log = toy().result.decay_log;
  double worst = 0.0;
  for (const auto& rec : log) worst = std::max(worst, rec.symplectic_error);
  // A rho-dependent generator whose inverse is a genuine series solve.
  const Domain dom{0.1, 1e-3, kC1};
  Series S = 1e3 * (Series::monomial(1, 2, kC1, mode1(1, -1), Exponent{}, Complex(0.0, -5e-7)) +
                    Series::monomial(1, 2, kC1, mode1(-1, 1), Exponent{}, Complex(0.0, 5e-7))) *
             (Series::constant(1, 2, kC1, 1.0) + 3.0 * Series::action_coordinate(1, 2, kC1, 0));
  const auto extra = check_symplectic(invert_generating(S, dom, 1e-16), 20, 99);
  worst = std::max(worst, extra.symplectic_error);
  return {!log.empty() && worst <= 1e-8, fmt("%.0f steps, worst |J^T Omega J - Omega| %.3e", log.size() + 1.0, worst)};
}

Verdict composition_exactness() {
  const auto& log = toy().result.decay_log;
  double worst = 0.0;
  int pre = 0, avg = 0, main = 0;
  for (const auto& rec : log) {
    worst = std::max(worst, rec.composition_error);
    pre += rec.phase == "pre";
    avg += rec.phase == "average";
    main += rec.phase == "main";
  }
  return {pre > 0 && avg > 0 && main > 0 && worst <= 1e-9,
          fmt("pre %.0f, average %.0f, main %.0f steps, worst relative error %.3e", pre, avg, main, worst)};
}

Verdict toy_convergence() {
  const auto& r = toy().result;
  const double drop = r.initial_norm / r.final_norm;
  return {r.main_steps >= 3 && drop >= 1e3 && r.invariance_residual <= 1e-6,
          fmt("%.0f main steps, norm drop %.3e, invariance residual %.3e", r.main_steps, drop, r.invariance_residual)};
}

Verdict averaging() {
  const auto& t = toy();
  const ScheduleParams sched = make_schedule(t.params);
  HamiltonianState st;
  st.eps_a = t.params.eps_a;
  st.eps_b = std::pow(t.params.eps, t.params.b);
  st.h0 = quadratic_h0(1, t.cfg.I0);
  st.p = (1e-4 * cos_mode(1, 0, 1.0)).rebased(t.cfg.I0).with_degree(t.cfg.taylor_degree);
  st.dom = {sched.s(0), t.cfg.r_cap, t.cfg.I0};
  st.omega_target = t.cfg.I0;
  st.anchor = t.cfg.I0;
  const Series c = Series::constant(1, 3, t.cfg.I0, 1e-3) + 2e-3 * Series::action_coordinate(1, 3, t.cfg.I0, 0);
  st.h = c * cos_mode(0, 1, 1.0, 3, t.cfg.I0) + 5e-4 * Series::action_coordinate(1, 3, t.cfg.I0, 0) +
         2e-4 * cos_mode(0, 3, 1.0, 3, t.cfg.I0);
  const StepOptions opt{&sched, &t.cfg, 0.0};
  const auto out = average_transform(st, opt);
  double worst = out.record.averaged_residual;
  for (const auto& rec : t.result.decay_log)
    if (rec.phase == "average") worst = std::max(worst, rec.averaged_residual);
  return {worst <= 1e-12, fmt("largest l != 0 remainder %.3e", worst)};
}

Verdict anchor_newton() {
  Series h0 = quadratic_h0(1) + Series::monomial(1, 3, kC1, ModeIndex{}, Exponent{3}, 0.1);
  const auto res = anchor_frequency(h0, std::vector<double>{1.3}, std::vector<double>{2.0}, 2.0, 1e-13);
  double worst_ratio = 0.0;
  int used = 0;
  for (std::size_t n = 0; n + 1 < res.errors.size() && used < 4; ++n) {
    if (res.errors[n + 1] < 1e-13) break;
    worst_ratio = std::max(worst_ratio, res.errors[n + 1] / (res.errors[n] * res.errors[n]));
    ++used;
  }
  const double final_err = res.errors.back();
  return {used >= 3 && worst_ratio < 1.0 && final_err <= 1e-12,
          fmt("%.0f ratios, max e_{n+1}/e_n^2 %.3f, final mismatch %.3e", used, worst_ratio, final_err)};
}

Verdict smoothing_checks() {
  SmoothingKernel kernel;
  double wave_err = 0.0;
  for (int k = -6; k <= 6; ++k)
    for (int l = -6; l <= 6; ++l)
      for (double s : {0.05, 0.1, 0.2}) {
        const Series w = Series::monomial(1, 0, kC1, mode1(k, l), Exponent{}, 1.0);
        const Complex got = smooth(w, s, kernel).coefficient(mode1(k, l), Exponent{});
        wave_err = std::max(wave_err, std::abs(got - kernel.multiplier(s * std::hypot(k, l))));
      }

  std::mt19937_64 rng(23);
  const auto sched = DecompositionSchedule::geometric(0.25, 0.5, 8, 4.0);
  double recon = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Series f = random_real(rng, 1, 0, kC1, 30, 1.0);
    Series sum(1, 0, kC1, 30);
    for (const auto& p : decompose(f, sched, kernel)) sum = sum + p.piece;
    recon = std::max(recon, majorant_norm(sum - f, {0.0, 0.0, kC1}));
  }

  double slope4 = 0.0, slope8 = 0.0;
  bool slopes_ok = true;
  for (double ell : {4.0, 8.0}) {
    const auto s = DecompositionSchedule::geometric(1.0 / 16, 0.5, 9, ell);
    const Series f = algebraic_decay_series(1, 0, kC1, ell, 730, 1.0);
    const auto fit = fit_decay_law(decompose(f, s, kernel), s, 6);
    (ell == 4.0 ? slope4 : slope8) = fit.slope;
    slopes_ok = slopes_ok && fit.slope >= ell - 0.5;
  }
  return {wave_err <= 1e-14 && recon <= 1e-12 && slopes_ok,
          fmt("plane wave %.1e, reconstruction %.1e, slopes %.2f (ell 4) %.2f (ell 8)", wave_err, recon, slope4,
              slope8)};
}

Verdict measure() {
  Series h(1, 2, kC1, 0);
  h = h + Series::monomial(1, 2, kC1, ModeIndex{}, Exponent{2}, 0.5);
  const FrequencyMap fm(h);
  const auto base = measure_estimate(fm, derive_params(2, 1, 1, 1e-3, 1e-2), 1000, 7);
  const double L0 = std::log(1e2);
  const double C = (1 - base.fraction) * L0 * L0;
  bool ok = true;
  std::string detail = fmt("C = %.4f at eps 1e-2", C);
  for (double eps : {1e-3, 1e-4}) {
    const auto r = measure_estimate(fm, derive_params(2, 1, 1, 1e-3, eps), 1000, 7);
    const double L = std::log(1 / eps);
    const double bound = 1 - C / (L * L);
    ok = ok && r.ci_high >= bound;
    detail += fmt("; eps %.0e fraction %.3f (ci high %.3f) vs bound %.4f", eps, r.fraction, r.ci_high, bound);
  }
  return {ok, detail};
}

Verdict duffing_baseline() {
  DuffingNetwork net;
  net.n = 1;
  const double P = exact_period(1.0, 1);
  SimOptions opt;
  opt.sample_every = 50;
  const auto tr = simulate(net, std::vector<double>{1.0}, std::vector<double>{0.0}, 1000 * P, P / 50000, Integrator::Verlet, opt);
  double drift = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) drift = std::max(drift, std::abs(tr.action_at(k, 0) - 1.0));
  const double f1 = frequency_extract(tr, 0).frequency;
  const double ferr = std::abs(f1 - exact_frequency(1.0, 1));

  const double P2 = exact_period(2.0, 1);
  const auto tr2 = simulate(net, std::vector<double>{2.0}, std::vector<double>{0.0}, 1000 * P2, P2 / 1000, Integrator::Verlet);
  const double f2 = frequency_extract(tr2, 0).frequency;
  const double ratio_err = std::abs(f2 / f1 - 2.0) / 2.0;
  return {drift <= 1e-8 && ferr <= 1e-6 && ratio_err <= 1e-3,
          fmt("action drift %.2e, frequency error %.2e, doubling ratio %.8f", drift, ferr, f2 / f1)};
}

Verdict duffing_shells() {
  DuffingNetwork net;
  net.m = 2;
  const std::vector<std::pair<int, std::complex<double>>> cosine{{1, 0.005}, {-1, 0.005}};
  net.terms = {{{1, 1}, cosine}, {{2, 1}, cosine}, {{1, 0}, cosine}};
  ShellOptions opt;
  opt.T = 10000;
  opt.n_samples = 50;
  bool ok = true;
  std::string detail;
  double prev_low = 0.0;
  for (double A : {10.0, 100.0, 1000.0}) {
    const auto r = stability_fraction(net, A, opt, 7);
    if (r.ci.second < prev_low) ok = false;
    prev_low = r.ci.first;
    if (!detail.empty()) detail += ", ";
    detail += fmt("A=%.0f %.2f [%.2f, %.2f]", A, r.fraction, r.ci.first, r.ci.second);
  }
  return {ok, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const std::vector<std::pair<std::string, std::string>> runs{
      {"schedule", R"({"a":2,"b":1,"d":1,"mu":1e-3,"eps":1e-3})"},
      {"smooth-demo", R"({"ell":4,"levels":7,"fit_levels":4,"cutoff":200})"},
      {"dio", R"({"a":2,"b":1,"d":1,"mu":1e-3,"eps":1e-3,"n_samples":300,"seed":5,"eps_list":[1e-3,1e-4]})"},
      {"kam", R"({"a":2,"b":1,"d":1,"mu":1e-3,"eps":1e-2,"I0":[1.3000618033988749],
                  "p":{"modes":[{"k":[1],"l":-1,"cos":1e-3}]}})"},
      {"duffing", R"({"m":2,"n":1,"A":[10],"T":300,"n_samples":4,"seed":3,"min_turns":20,
                      "terms":[{"alpha":[1,1],"modes":[{"l":1,"re":0.005},{"l":-1,"re":0.005}]}]})"}};
  const fs::path root = fs::temp_directory_path() / "finkam_acceptance";
  int identical = 0;
  for (const auto& [sub, doc] : runs) {
    const auto v = cli::parse_and_validate_text(sub, doc);
    if (!v.ok()) return {false, sub + ": " + v.report()};
    std::string first;
    bool same = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (sub + std::to_string(rep));
      fs::remove_all(dir);
      cli::write_outputs(cli::run_experiment(*v.config), dir.string());
      const std::string text = slurp(dir / "summary.json");
      if (rep == 0) first = text;
      else same = !text.empty() && text == first;
    }
    identical += same;
  }
  fs::remove_all(root);
  return {identical == static_cast<int>(runs.size()),
          fmt("%.0f of %.0f subcommands byte-identical on rerun", identical, runs.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"homological exactness", homological_exactness},
      {"symplecticity", symplecticity},
      {"composition exactness", composition_exactness},
      {"toy KAM convergence", toy_convergence},
      {"averaging", averaging},
      {"anchor Newton", anchor_newton},
      {"smoothing", smoothing_checks},
      {"measure estimate", measure},
      {"Duffing integrable baseline", duffing_baseline},
      {"Duffing perturbed shells", duffing_shells},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s (%.1f s)\n", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.ok;
  }
  return failed == 0 ? 0 : 1;
}
