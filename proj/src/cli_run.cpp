#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "finkam/cli.hpp"
#include "finkam/diophantine.hpp"
#include "finkam/duffing.hpp"
#include "finkam/errors.hpp"
#include "finkam/kam.hpp"
#include "finkam/schedule.hpp"
#include "finkam/smoothing.hpp"

namespace finkam::cli {

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV text with a leading hash comment.
class Csv {
 public:
  Csv(const std::string& hash, const std::vector<std::string>& columns) {
    text_ = "# config_hash: " + hash + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) text_ += (i ? "," : "") + columns[i];
    text_ += "\n";
  }
  Csv& cell(const std::string& s) {
    text_ += (open_ ? "," : "") + s;
    open_ = true;
    return *this;
  }
  Csv& cell(double v) { return cell(num(v)); }
  Csv& cell(std::int64_t v) { return cell(std::to_string(v)); }
  void end_row() {
    text_ += "\n";
    open_ = false;
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  bool open_ = false;
};

DioParams dio_params(const Json& p) {
  return derive_params(p["a"].get<double>(), p["b"].get<double>(), p["d"].get<int>(), p["mu"].get<double>(),
                       p["eps"].get<double>());
}

Json params_json(const DioParams& p) {
  return {{"B", p.B},         {"a", p.a},         {"b", p.b},       {"cutoff", p.cutoff}, {"d", p.d},
          {"ell", p.ell},     {"eps", p.eps},     {"eps_a", p.eps_a}, {"gamma", p.gamma}, {"mu", p.mu},
          {"mu_term", p.mu_term}, {"tau1", p.tau1}, {"tau2", p.tau2}};
}

Series h0_series(const Json& h0, int d) {
  int degree = 0;
  for (const auto& t : h0["terms"]) {
    int order = 0;
    for (int e : t["exponent"]) order += e;
    degree = std::max(degree, order);
  }
  const std::vector<double> origin(d, 0.0);
  Series h(d, degree, origin, 0);
  for (const auto& t : h0["terms"]) {
    Exponent alpha{};
    for (int j = 0; j < d; ++j) alpha[j] = t["exponent"][j].get<int>();
    h = h + Series::monomial(d, degree, origin, ModeIndex{}, alpha, t["coeff"].get<double>());
  }
  return h;
}

Series perturbation_series(const Json& p, int d) {
  const std::vector<double> origin(d, 0.0);
  if (p.contains("decay")) {
    const Json& g = p["decay"];
    return algebraic_decay_series(d, 0, origin, g["ell"].get<double>(), g["cutoff"].get<int>(),
                                  g["amplitude"].get<double>());
  }
  Series out(d, 0, origin, 0);
  for (const auto& m : p["modes"]) {
    ModeIndex mode;
    for (int j = 0; j < d; ++j) mode.k[j] = m["k"][j].get<int>();
    mode.l = m["l"].get<int>();
    const double c = m["cos"].get<double>(), s = m["sin"].get<double>();
    // c cos(phi) + s sin(phi) = ((c - is)/2) e^{i phi} + ((c + is)/2) e^{-i phi}
    out = out + Series::monomial(d, 0, origin, mode, Exponent{}, Complex(c / 2, -s / 2));
    out = out + Series::monomial(d, 0, origin, -mode, Exponent{}, Complex(c / 2, s / 2));
  }
  return out;
}

void finish(RunOutput& out, const RunConfig& cfg) {
  out.summary["config_hash"] = cfg.hash;
  out.summary["config"] = cfg.canonical();
  out.summary_text = dump_json(out.summary);
}

RunOutput run_schedule(const RunConfig& cfg) {
  const Json& p = cfg.payload;
  const DioParams dp = dio_params(p);
  const ScheduleParams s = make_schedule(dp);
  const int steps = p["steps"].get<int>();
  RunOutput out;
  Json pre = Json::array(), main = Json::array();
  Csv csv(cfg.hash, {"phase", "j", "log_eps", "log_s", "log_r", "K"});
  for (int j = 0; j <= steps; ++j) {
    pre.push_back({{"j", j}, {"log_eps", s.log_eps(j)}, {"s", s.s(j)}, {"log_r", s.log_r(j)}, {"K", s.K(j)}});
    csv.cell("pre").cell(std::int64_t{j}).cell(s.log_eps(j)).cell(std::log(s.s(j))).cell(s.log_r(j)).cell(s.K(j));
    csv.end_row();
  }
  for (int j = 0; j <= steps; ++j) {
    main.push_back({{"j", j},
                    {"log_eps", s.log_eps_tilde(j)},
                    {"log_s", s.log_s_tilde(j)},
                    {"log_r", s.log_r_tilde(j)},
                    {"K", s.K_tilde(j)}});
    csv.cell("main").cell(std::int64_t{j}).cell(s.log_eps_tilde(j)).cell(s.log_s_tilde(j)).cell(s.log_r_tilde(j));
    csv.cell(s.K_tilde(j));
    csv.end_row();
  }
  out.summary = {{"params", params_json(dp)},
                 {"schedule", {{"E", s.E}, {"m0", s.m0}, {"mu1", s.mu1}, {"mu2", s.mu2}, {"mu3", s.mu3}}},
                 {"ladders", {{"pre", pre}, {"main", main}}}};
  out.files.push_back({"schedule.csv", csv.text()});
  finish(out, cfg);
  return out;
}

RunOutput run_smooth(const RunConfig& cfg) {
  const Json& p = cfg.payload;
  const int d = p["d"].get<int>();
  const std::vector<double> origin(d, 0.0);
  SmoothingKernel kernel;
  kernel.a1 = p["kernel"]["a1"].get<double>();
  kernel.plateau = p["kernel"]["plateau"].get<double>();
  kernel.validate();
  const double ell = p["ell"].get<double>();
  const Series f = algebraic_decay_series(d, 0, origin, ell, p["cutoff"].get<int>(), p["amplitude"].get<double>());
  const auto sched =
      DecompositionSchedule::geometric(p["s0"].get<double>(), p["ratio"].get<double>(), p["levels"].get<int>(), ell);
  const auto pieces = decompose(f, sched, kernel);
  const int fit_levels = p["fit_levels"].get<int>();
  for (int nu = 1; nu <= fit_levels; ++nu)
    if (static_cast<std::size_t>(nu) >= pieces.size() || pieces[nu].piece.empty())
      throw InvalidArgument("smooth-demo: piece " + std::to_string(nu) +
                            " is empty; raise cutoff or lower fit_levels");
  const auto fit = fit_decay_law(pieces, sched, fit_levels);

  Series sum(d, 0, origin, f.angle_cutoff());
  Csv csv(cfg.hash, {"nu", "s", "width", "norm", "modes"});
  Json rows = Json::array();
  for (std::size_t nu = 0; nu < pieces.size(); ++nu) {
    sum = sum + pieces[nu].piece;
    const double norm = majorant_norm(pieces[nu].piece, Domain{pieces[nu].width, 0.0, origin});
    rows.push_back({{"nu", nu}, {"s", sched.s_list[nu]}, {"width", pieces[nu].width}, {"norm", norm},
                    {"modes", pieces[nu].piece.size()}});
    csv.cell(static_cast<std::int64_t>(nu)).cell(sched.s_list[nu]).cell(pieces[nu].width).cell(norm);
    csv.cell(static_cast<std::int64_t>(pieces[nu].piece.size()));
    csv.end_row();
  }
  RunOutput out;
  out.summary = {{"modes", f.size()},
                 {"reconstruction_error", majorant_norm(sum - f, Domain{0.0, 0.0, origin})},
                 {"fit", {{"slope", fit.slope}, {"c_spread", fit.c_spread}, {"norms", fit.norms}, {"target_ell", ell}}},
                 {"pieces", rows}};
  out.files.push_back({"pieces.csv", csv.text()});
  if (p["kernel_check"].get<bool>()) {
    const auto report = validate_kernel_decay(kernel, p["kernel"]["beta"].get<int>(), p["kernel"]["p"].get<int>());
    out.summary["kernel_decay"] = {{"beta", report.beta}, {"p", report.p}, {"c", report.c}, {"passed", report.passed}};
    out.files.push_back({"kernel_decay.csv", "# config_hash: " + cfg.hash + "\n" + report.csv()});
  }
  finish(out, cfg);
  return out;
}

Json witness_json(const DivisorWitness& w) {
  return {{"k", w.k}, {"l", w.l}, {"value", w.value}, {"bound", w.bound}};
}

RunOutput run_dio(const RunConfig& cfg) {
  const Json& p = cfg.payload;
  const int d = p["d"].get<int>();
  const FrequencyMap fm(h0_series(p["h0"], d));
  const auto n = p["n_samples"].get<std::uint64_t>();
  const double kf = p["k_max_factor"].get<double>();
  const DioParams dp = dio_params(p);
  const MeasureResult main = measure_estimate(fm, dp, n, cfg.seed, kf);
  const double L = std::log(1.0 / dp.eps);
  const double C = (1.0 - main.fraction) * L * L;

  Csv csv(cfg.hash, {"eps", "log_inv_eps", "fraction", "ci_low", "ci_high", "bound", "consistent"});
  Json curve = Json::array();
  for (double e : p["eps_list"].get<std::vector<double>>()) {
    Json q = p;
    q["eps"] = e;
    const MeasureResult r = e == dp.eps ? main : measure_estimate(fm, dio_params(q), n, cfg.seed, kf);
    const double Le = std::log(1.0 / e);
    const double bound = 1.0 - C / (Le * Le);
    const bool consistent = r.ci_high >= bound;
    curve.push_back({{"eps", e}, {"fraction", r.fraction}, {"ci", {r.ci_low, r.ci_high}}, {"bound", bound},
                     {"consistent", consistent}});
    csv.cell(e).cell(Le).cell(r.fraction).cell(r.ci_low).cell(r.ci_high).cell(bound).cell(consistent ? "1" : "0");
    csv.end_row();
  }
  Json witnesses = Json::array();
  for (const auto& w : main.worst_witnesses) witnesses.push_back(witness_json(w));
  RunOutput out;
  out.summary = {{"params", params_json(dp)},
                 {"fraction", main.fraction},
                 {"ci", {main.ci_low, main.ci_high}},
                 {"passed", main.passed},
                 {"samples", main.samples},
                 {"c5", main.c5},
                 {"k_max", main.k_max},
                 {"truncated", main.truncated},
                 {"worst_witnesses", witnesses},
                 {"fitted_C", C},
                 {"curve", curve}};
  out.files.push_back({"measure_curve.csv", csv.text()});
  finish(out, cfg);
  return out;
}

RunOutput run_kam(const RunConfig& cfg) {
  const Json& p = cfg.payload;
  const int d = p["d"].get<int>();
  const DioParams dp = dio_params(p);
  KamConfig kc;
  kc.I0 = p["I0"].get<std::vector<double>>();
  kc.taylor_degree = p["taylor_degree"].get<int>();
  kc.max_cutoff = p["max_cutoff"].get<int>();
  kc.r_cap = p["r_cap"].get<double>();
  kc.anchor_radius = p["anchor_radius"].get<double>();
  kc.slack = cfg.slack;
  kc.pre_steps = p["pre_steps"].get<int>();
  kc.min_main_steps = p["min_steps"].get<int>();
  kc.max_main_steps = p["max_steps"].get<int>();
  kc.grid_n = p["grid_n"].get<int>();
  kc.composition_points = p["composition_points"].get<int>();
  kc.symplectic_points = p["symplectic_points"].get<int>();
  kc.require_diophantine = p["require_diophantine"].get<bool>();
  kc.seed = cfg.seed;
  kc.anchor_tol = cfg.tolerances["anchor"].get<double>();
  kc.inversion_tol = cfg.tolerances["inversion"].get<double>();
  kc.substitution_tol = cfg.tolerances["substitution"].get<double>();
  kc.target_norm = cfg.tolerances["target_norm"].get<double>();

  const TorusResult res = run(h0_series(p["h0"], d), perturbation_series(p["p"], d), dp, kc);
  const ScheduleParams sch = make_schedule(dp);

  Csv log(cfg.hash, {"phase", "step", "scale", "norm", "normalized", "s", "r", "cutoff", "homological_residual",
                     "composition_error", "symplectic_error", "derivative_bound", "min_divisor_ratio",
                     "averaged_residual", "anchor_move"});
  Json steps = Json::array();
  for (const auto& r : res.decay_log) {
    steps.push_back({{"phase", r.phase},
                     {"step", r.step},
                     {"scale", r.scale},
                     {"norm", r.norm},
                     {"normalized", r.normalized},
                     {"s", r.s},
                     {"r", r.r},
                     {"cutoff", r.cutoff},
                     {"homological_residual", r.homological_residual},
                     {"composition_error", r.composition_error},
                     {"symplectic_error", r.symplectic_error},
                     {"derivative_bound", r.derivative_bound},
                     {"derivative_ok", r.derivative_ok},
                     {"min_divisor_ratio", r.min_divisor_ratio},
                     {"averaged_residual", r.averaged_residual},
                     {"anchor", r.anchor},
                     {"anchor_move", r.anchor_move},
                     {"anchor_within_radius", r.anchor_within_radius},
                     {"newton_errors", r.newton_errors}});
    log.cell(r.phase).cell(r.step).cell(r.scale).cell(r.norm).cell(r.normalized).cell(r.s).cell(r.r);
    log.cell(std::int64_t{r.cutoff}).cell(r.homological_residual).cell(r.composition_error).cell(r.symplectic_error);
    log.cell(r.derivative_bound).cell(r.min_divisor_ratio).cell(r.averaged_residual).cell(r.anchor_move);
    log.end_row();
  }

  std::vector<std::string> cols;
  for (int j = 0; j < d; ++j) cols.push_back("phi" + std::to_string(j + 1));
  cols.push_back("t");
  for (int j = 0; j < d; ++j) cols.push_back("theta" + std::to_string(j + 1));
  for (int j = 0; j < d; ++j) cols.push_back("I" + std::to_string(j + 1));
  Csv torus(cfg.hash, cols);
  const auto& emb = res.embedding;
  const double h = 2 * std::numbers::pi / emb.n;
  for (std::size_t q = 0; q < emb.samples.size(); ++q) {
    std::size_t rest = q;
    std::vector<double> phi(d);
    for (int j = d - 1; j >= 0; --j) {
      phi[j] = h * static_cast<double>(rest % emb.n);
      rest /= emb.n;
    }
    for (double v : phi) torus.cell(v);
    torus.cell(h * static_cast<double>(rest));
    for (double v : emb.samples[q].angle) torus.cell(v);
    for (double v : emb.samples[q].action) torus.cell(v);
    torus.end_row();
  }

  RunOutput out;
  out.summary = {
      {"schedule",
       {{"params", params_json(dp)}, {"m0", sch.m0}, {"mu1", sch.mu1}, {"mu2", sch.mu2}, {"mu3", sch.mu3}, {"E", sch.E}}},
      {"steps", steps},
      {"anchor_trajectory", res.anchor_trajectory},
      {"anchor_limit", res.anchor_limit},
      {"omega", res.omega},
      {"norms", {{"initial", res.initial_norm}, {"final", res.final_norm}}},
      {"counts", {{"pre_steps", res.pre_steps}, {"main_steps", res.main_steps}, {"pieces", res.pieces}}},
      {"residuals",
       {{"invariance", res.invariance_residual},
        {"identity_deviation", res.identity_deviation},
        {"identity_bound", res.identity_bound},
        {"derivative_product", res.derivative_product}}}};
  out.files.push_back({"decay_log.csv", log.text()});
  out.files.push_back({"torus.csv", torus.text()});
  finish(out, cfg);
  return out;
}

DuffingNetwork network(const Json& p) {
  DuffingNetwork net;
  net.m = p["m"].get<int>();
  net.n = p["n"].get<int>();
  for (const auto& t : p["terms"]) {
    ForcingTerm term;
    term.alpha = t["alpha"].get<std::vector<int>>();
    for (const auto& md : t["modes"])
      term.modes.push_back({md["l"].get<int>(), {md["re"].get<double>(), md["im"].get<double>()}});
    net.terms.push_back(term);
  }
  return net;
}

Json spread(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return {{"count", 0}};
  std::sort(v.begin(), v.end());
  const double median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  return {{"count", v.size()}, {"min", v.front()}, {"median", median}, {"max", v.back()}};
}

RunOutput run_duffing(const RunConfig& cfg) {
  const Json& p = cfg.payload;
  const DuffingNetwork net = network(p);
  ShellOptions opt;
  opt.c4 = p["c4"].get<double>();
  opt.n_samples = p["n_samples"].get<std::size_t>();
  opt.T = p["T"].get<double>();
  opt.dt = p["dt"].get<double>();
  opt.bound_multiple = p["bound_multiple"].get<double>();
  opt.escape_multiple = p["escape_multiple"].get<double>();
  opt.min_turns = p["min_turns"].get<double>();
  opt.birkhoff_tol = cfg.tolerances["birkhoff"].get<double>();
  const int m = net.m;
  const int stride = p["trajectory_stride"].get<int>();

  std::vector<std::string> cols{"A", "sample"};
  for (const char* what : {"I", "x0", "v0", "freq"})
    for (int i = 0; i < m; ++i) cols.push_back(what + std::to_string(i + 1));
  for (const char* what : {"sup", "escaped", "bounded", "quasi_periodic"}) cols.push_back(what);
  Csv samples(cfg.hash, cols);

  RunOutput out;
  Json shells = Json::array();
  const auto As = p["A"].get<std::vector<double>>();
  for (std::size_t a = 0; a < As.size(); ++a) {
    const StabilityResult res = stability_fraction(net, As[a], opt, cfg.seed);
    std::vector<double> sups;
    std::vector<std::vector<double>> freqs(m);
    std::size_t escaped = 0, bounded = 0, qp = 0;
    for (std::size_t s = 0; s < res.samples.size(); ++s) {
      const auto& smp = res.samples[s];
      sups.push_back(smp.sup);
      escaped += smp.escaped;
      bounded += smp.bounded;
      qp += smp.bounded && smp.quasi_periodic;
      for (int i = 0; i < m; ++i) freqs[i].push_back(smp.frequencies[i]);
      samples.cell(As[a]).cell(static_cast<std::int64_t>(s));
      for (double v : smp.actions) samples.cell(v);
      for (double v : smp.x0) samples.cell(v);
      for (double v : smp.v0) samples.cell(v);
      for (double v : smp.frequencies) samples.cell(v);
      samples.cell(smp.sup).cell(smp.escaped ? "1" : "0").cell(smp.bounded ? "1" : "0");
      samples.cell(smp.quasi_periodic ? "1" : "0");
      samples.end_row();
    }
    Json fstats = Json::array();
    for (int i = 0; i < m; ++i) fstats.push_back(spread(freqs[i]));
    shells.push_back({{"A", As[a]},
                      {"fraction", res.fraction},
                      {"ci", {res.ci.first, res.ci.second}},
                      {"stable", res.stable},
                      {"n_samples", res.samples.size()},
                      {"escaped", escaped},
                      {"bounded", bounded},
                      {"quasi_periodic", qp},
                      {"dt", res.dt},
                      {"shell_bound", res.shell_bound},
                      {"sup", spread(sups)},
                      {"frequencies", fstats}});

    // The first sample of every shell, kept at a coarser stride.
    const auto& first = res.samples.front();
    SimOptions sim;
    sim.escape_bound = opt.escape_multiple * amplitude_of_action(opt.c4 * As[a], net.n);
    sim.sample_every = stride;
    const auto traj = simulate(net, first.x0, first.v0, opt.T, res.dt, Integrator::Verlet, sim);
    std::vector<std::string> tcols{"t"};
    for (const char* what : {"x", "xdot", "I"})
      for (int i = 0; i < m; ++i) tcols.push_back(what + std::to_string(i + 1));
    Csv tr(cfg.hash, tcols);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      tr.cell(traj.times[k]);
      for (int i = 0; i < m; ++i) tr.cell(traj.x_at(k, i));
      for (int i = 0; i < m; ++i) tr.cell(traj.v_at(k, i));
      for (int i = 0; i < m; ++i) tr.cell(traj.action_at(k, i));
      tr.end_row();
    }
    out.files.push_back({"trajectory_" + std::to_string(a) + ".csv", tr.text()});
  }
  out.summary = {{"shells", shells}};
  out.files.push_back({"samples.csv", samples.text()});
  finish(out, cfg);
  return out;
}

}  // namespace

RunOutput run_experiment(const RunConfig& cfg) {
  if (cfg.subcommand == "schedule") return run_schedule(cfg);
  if (cfg.subcommand == "smooth-demo") return run_smooth(cfg);
  if (cfg.subcommand == "dio") return run_dio(cfg);
  if (cfg.subcommand == "kam") return run_kam(cfg);
  if (cfg.subcommand == "duffing") return run_duffing(cfg);
  throw InvalidArgument("unknown subcommand \"" + cfg.subcommand + "\"");
}

void write_outputs(const RunOutput& output, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream f(path, std::ios::binary);
    f << content;
    f.close();
    if (!f) throw IoError("cannot write " + path.string());
  };
  put("summary.json", output.summary_text);
  for (const auto& a : output.files) put(a.name, a.content);
}

}  // namespace finkam::cli
