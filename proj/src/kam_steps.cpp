#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "finkam/errors.hpp"
#include "finkam/kam.hpp"

namespace finkam {

namespace {

// Gauss-Legendre nodes and weights of order 5 on [0, 1].
constexpr std::array<double, 5> kGaussX{0.046910077030668, 0.230765344947158, 0.5, 0.769234655052842,
                                        0.953089922969332};
constexpr std::array<double, 5> kGaussW{0.118463442528095, 0.239314335249683, 0.284444444444444,
                                        0.239314335249683, 0.118463442528095};

struct Working {
  Domain dom;
  int cutoff = 0;
};

Working working_domain(double s, double r, double K, const KamConfig& cfg, const std::vector<double>& center) {
  Working w;
  w.dom = {s, std::min(r, cfg.r_cap), center};
  w.cutoff = static_cast<int>(std::min<double>(std::floor(K), cfg.max_cutoff));
  return w;
}

std::vector<Series> gradient(const Series& h0) {
  std::vector<Series> g;
  for (int j = 0; j < h0.dim(); ++j) g.push_back(derive(h0, Variable::action(j)));
  return g;
}

Series centered(const Series& f, const std::vector<double>& c) { return f.center() == c ? f : f.rebased(c); }

double sup_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

// eps^b R1 as a function of (theta, t, rho): the Taylor remainders of H0 / eps^a about rho
// plus the first-order remainders of every eps^-b part, along rho + tau dS/dtheta.
Series remainder(const Series& h0, std::span<const Series> eps_b_parts, std::span<const Series> St, double eps_a,
                 double eps_b, const Series& like) {
  const int d = like.dim();
  Series total(d, like.degree(), like.center(), like.angle_cutoff());
  std::vector<std::vector<Series>> hess(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      hess[i].push_back(derive(derive(h0, Variable::action(i)), Variable::action(j)).with_degree(like.degree()));
  std::vector<std::vector<Series>> grads;
  for (const auto& part : eps_b_parts) {
    if (part.empty() || part.degree() == 0) continue;
    grads.push_back(gradient(part));
  }
  for (std::size_t q = 0; q < kGaussX.size(); ++q) {
    const double tau = kGaussX[q];
    std::vector<Series> shift;
    for (const auto& s : St) shift.push_back(tau * s);
    Series quad(d, like.degree(), like.center(), like.angle_cutoff());
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (hess[i][j].empty()) continue;
        quad = quad + substitute_action(hess[i][j], shift) * (St[i] * St[j]);
      }
    total = total + (kGaussW[q] * (1 - tau) * eps_b / eps_a) * quad;
    for (const auto& g : grads)
      for (int i = 0; i < d; ++i)
        if (!g[i].empty()) total = total + kGaussW[q] * (substitute_action(g[i], shift) * St[i]);
  }
  return total;
}

// Relative sup over random points of |H_before(Phi z) + injected + dS/dt - H_after(z)|.
double composition_error(const HamiltonianState& before, const HamiltonianState& after, const SymplecticStep& step,
                         const Series* injected, int n, std::uint64_t seed) {
  const int d = static_cast<int>(after.dom.center.size());
  std::uint64_t state = seed;
  Series dSdt = derive(step.generator(), Variable::time());
  double worst = 0.0, scale = 0.0;
  for (int s = 0; s < n; ++s) {
    PhasePoint z;
    z.angle.resize(d);
    z.action.resize(d);
    for (int j = 0; j < d; ++j) z.angle[j] = 2 * std::numbers::pi * uniform01(state);
    z.t = 2 * std::numbers::pi * uniform01(state);
    for (int j = 0; j < d; ++j) z.action[j] = after.dom.center[j] + after.dom.r * (2 * uniform01(state) - 1);
    const PhasePoint w = step.map(z);
    const double hb = before.energy(w);
    double lhs = hb;
    if (injected && !injected->empty()) {
      const PhasePoint o = before.to_original(w);
      lhs += injected->evaluate(o.angle, o.t, o.action) / before.eps_b;
    }
    if (!dSdt.empty()) lhs += dSdt.evaluate(w.angle, z.t, z.action);
    worst = std::max(worst, std::abs(lhs - after.energy(z)));
    scale = std::max(scale, std::abs(hb));
  }
  return worst / (1.0 + scale);
}

std::uint64_t check_seed(const KamConfig& cfg, int phase, std::int64_t step) {
  std::uint64_t s = cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(3 * step + phase + 1));
  return splitmix64(s);
}

void record_step_checks(StepRecord& rec, const SymplecticStep& step, const KamConfig& cfg, std::uint64_t seed,
                        std::int64_t m) {
  const auto jac = check_symplectic(step, cfg.symplectic_points, seed);
  rec.symplectic_error = jac.symplectic_error;
  rec.derivative_bound = jac.derivative_bound;
  rec.derivative_ok = jac.derivative_bound <= std::ldexp(1.0, -static_cast<int>(std::min<std::int64_t>(m + 2, 1000)));
}

void check_norm(const StepRecord& rec, const StepOptions& opt, const char* inequality) {
  if (opt.reference_norm > 0 && rec.normalized > opt.config->slack * opt.reference_norm)
    throw NormBlowup(inequality, "normalized perturbation " + std::to_string(rec.normalized) + " exceeds slack x " +
                                     std::to_string(opt.reference_norm));
}

struct Pieces {
  Series injected;
  bool any = false;
};

// The next tail piece, pulled back through the whole chain (including the new step).
Pieces next_piece(const HamiltonianState& s, std::vector<SymplecticStep>& chain, double tol) {
  Pieces out;
  if (s.tails.empty()) return out;
  out.any = true;
  Series f = s.tails.front();
  for (const auto& step : chain) f = step.pull_back(f, tol);
  out.injected = f;
  return out;
}

}  // namespace

AnchorResult anchor_frequency(const Series& h0, std::span<const double> omega_target, std::span<const double> start,
                              double radius, double tol, int max_iter) {
  const int d = h0.dim();
  if (static_cast<int>(omega_target.size()) != d || static_cast<int>(start.size()) != d)
    throw InvalidArgument("anchor: dimension mismatch");
  FrequencyMap fm(h0);
  AnchorResult res;
  std::vector<double> x(start.begin(), start.end());
  auto mismatch = [&](const std::vector<double>& at) {
    const auto g = fm.omega(at);
    Eigen::VectorXd r(d);
    for (int j = 0; j < d; ++j) r[j] = g[j] - omega_target[j];
    return r;
  };
  Eigen::VectorXd r = mismatch(x);
  res.errors.push_back(r.cwiseAbs().maxCoeff());
  while (res.errors.back() > tol) {
    if (res.iterations >= max_iter)
      throw AnchorLost("Newton iteration for the anchor did not reach " + std::to_string(tol) + " (mismatch " +
                       std::to_string(res.errors.back()) + ")");
    const auto hv = fm.hessian(x);
    Eigen::MatrixXd H(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) H(i, j) = hv[i * d + j];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
    if (!lu.isInvertible()) throw AnchorLost("degenerate Hessian at the anchor");
    const Eigen::VectorXd dx = lu.solve(r);
    for (int j = 0; j < d; ++j) x[j] -= dx[j];
    ++res.iterations;
    if (sup_distance(x, start) > radius)
      throw AnchorLost("Newton iterate left the ball of radius " + std::to_string(radius));
    r = mismatch(x);
    const double e = r.cwiseAbs().maxCoeff();
    // Stagnation at rounding level counts as converged only if already within the tolerance.
    if (!(e < res.errors.back()) && e > tol)
      throw AnchorLost("Newton iteration stalled at mismatch " + std::to_string(e));
    res.errors.push_back(e);
  }
  res.action = x;
  return res;
}

StepOutcome pre_step(const HamiltonianState& st, const StepOptions& opt) {
  if (st.phase != Phase::Pre) throw InvalidArgument("pre_step: state is not in the first phase");
  const ScheduleParams& sch = *opt.schedule;
  const KamConfig& cfg = *opt.config;
  const std::int64_t m = st.step;
  const Working cur = working_domain(sch.s(m), sch.r(m), sch.K(m), cfg, st.dom.center);
  const Working nxt = working_domain(sch.s(m + 1), sch.r(m + 1), sch.K(m + 1), cfg, st.dom.center);
  const DioParams& p = sch.dio;

  auto [low0, high] = split_by_cutoff(st.p, cur.cutoff);
  const Series low = low0.with_cutoff(cur.cutoff);
  const auto omega = gradient(st.h0);
  auto bound = [&p](double k) { return 0.5 * p.low_bound(k); };
  auto gen = solve_homological(low, omega, st.eps_a, 1.0 / st.eps_b, HomologicalMode::ThetaOnly, bound,
                               cfg.divisor_safety);
  StepRecord rec;
  rec.phase = "pre";
  rec.step = m;
  rec.homological_residual = homological_residual(gen.S, low, omega, st.eps_a, 1.0 / st.eps_b,
                                                  HomologicalMode::ThetaOnly, cur.dom);
  rec.min_divisor_ratio = gen.min_divisor_ratio;
  SymplecticStep step = invert_generating(gen.S, nxt.dom, cfg.inversion_tol);

  HamiltonianState out = st;
  out.step = m + 1;
  out.h = st.h + zero_mode(low, AverageOver::Theta);
  std::vector<Series> St;
  for (int j = 0; j < low.dim(); ++j) St.push_back(derive(gen.S, Variable::theta(j)));
  const std::vector<Series> parts{st.p, st.h};
  Series W = high + remainder(st.h0, parts, St, st.eps_a, st.eps_b, low);
  out.p = step.pull_back_angles(W, cfg.substitution_tol);
  out.chain.push_back(step);
  const auto piece = next_piece(st, out.chain, cfg.substitution_tol);
  if (piece.any) {
    out.p = out.p + piece.injected;
    out.tails.erase(out.tails.begin());
  }
  out.scale = sch.eps(m + 1);
  out.dom = nxt.dom;

  rec.scale = out.scale;
  rec.norm = majorant_norm(out.p, nxt.dom);
  rec.normalized = rec.norm / out.scale;
  rec.s = nxt.dom.s;
  rec.r = nxt.dom.r;
  rec.cutoff = cur.cutoff;
  record_step_checks(rec, step, cfg, check_seed(cfg, 0, m), m);
  rec.composition_error = composition_error(st, out, step, piece.any ? &st.tails.front() : nullptr,
                                            cfg.composition_points, check_seed(cfg, 0, m) + 1);
  rec.anchor = st.dom.center;
  check_norm(rec, opt, "first-phase perturbation bound");
  return {std::move(out), std::move(rec)};
}

StepOutcome average_transform(const HamiltonianState& st, const StepOptions& opt) {
  if (st.phase != Phase::Pre) throw InvalidArgument("average_transform: state is not at the end of the first phase");
  const ScheduleParams& sch = *opt.schedule;
  const KamConfig& cfg = *opt.config;
  const int d = st.h0.dim();
  for (std::size_t q = 0; q < st.h.size(); ++q)
    if (!st.h.mode(q).angle_free()) throw InvalidArgument("average_transform: h depends on the angles");

  const Series mean = zero_mode(st.h, AverageOver::ThetaAndTime);
  const Series fluct = st.h - mean;
  const Series A = antiderive_time(fluct);
  // S~ = -eps^-b (A(t) - A(0)), with A(0) the sum of the l-coefficients.
  SeriesAccumulator at0(A.dim(), A.degree(), A.center(), 0);
  for (std::size_t q = 0; q < A.size(); ++q) at0.add(ModeIndex{}, A.coeffs(q));
  const Working nxt = working_domain(std::exp(sch.log_s_tilde(0)), sch.r_tilde(0), sch.K_tilde(0), cfg,
                                     st.dom.center);
  const Series S_tilde = ((-1.0 / st.eps_b) * (A - at0.finish())).with_cutoff(nxt.cutoff);

  SymplecticStep step = SymplecticStep::averaging(S_tilde, nxt.dom);

  StepRecord rec;
  rec.phase = "average";
  rec.step = st.step;
  // l != 0 content of h + eps^b dS~/dt: the averaged part must be time independent.
  const Series averaged = st.h + st.eps_b * derive(S_tilde, Variable::time());
  rec.averaged_residual = majorant_norm(averaged.filtered([](const ModeIndex& mm) { return mm.l != 0; }), nxt.dom);

  HamiltonianState out = st;
  out.phase = Phase::Averaged;
  out.h0 = st.h0 + (st.eps_a / st.eps_b) * mean.with_degree(std::max(st.h0.degree(), mean.degree()));
  out.h = Series(d, st.h.degree(), st.dom.center, 0);
  out.p = step.pull_back(st.p, cfg.substitution_tol);
  out.chain.push_back(step);

  const auto anchor = anchor_frequency(out.h0, st.omega_target, st.dom.center, cfg.anchor_radius, cfg.anchor_tol);
  rec.newton_errors = anchor.errors;
  rec.anchor = anchor.action;
  rec.anchor_move = sup_distance(anchor.action, st.dom.center);
  rec.anchor_within_radius = rec.anchor_move <= sch.r_tilde(0);
  out.anchor = anchor.action;

  // Composition check before re-centering (the point map does not depend on the expansion point).
  HamiltonianState probe = out;
  probe.dom = nxt.dom;
  rec.composition_error =
      composition_error(st, probe, step, nullptr, cfg.composition_points, check_seed(cfg, 1, st.step) + 1);
  record_step_checks(rec, step, cfg, check_seed(cfg, 1, st.step), 0);
  rec.derivative_ok = true;

  out.h0 = centered(out.h0, anchor.action);
  out.h = centered(out.h, anchor.action);
  out.p = centered(out.p, anchor.action);
  out.dom = nxt.dom;
  out.dom.center = anchor.action;
  out.scale = sch.eps_tilde(0);
  out.step = 0;
  rec.scale = out.scale;
  rec.norm = majorant_norm(out.p, out.dom);
  rec.normalized = rec.norm / out.scale;
  rec.s = out.dom.s;
  rec.r = out.dom.r;
  rec.cutoff = nxt.cutoff;
  return {std::move(out), std::move(rec)};
}

StepOutcome main_step(const HamiltonianState& st, const StepOptions& opt) {
  if (st.phase == Phase::Pre) throw InvalidArgument("main_step: the averaging transform has not been applied");
  const ScheduleParams& sch = *opt.schedule;
  const KamConfig& cfg = *opt.config;
  const std::int64_t m = st.step;
  const Working cur = working_domain(sch.s_tilde(m), sch.r_tilde(m), sch.K_tilde(m), cfg, st.dom.center);
  const Working nxt = working_domain(sch.s_tilde(m + 1), sch.r_tilde(m + 1), sch.K_tilde(m + 1), cfg, st.dom.center);
  const DioParams& p = sch.dio;

  auto [low0, high] = split_by_cutoff(st.p, cur.cutoff);
  const Series low = low0.with_cutoff(cur.cutoff);
  const auto omega = gradient(st.h0);
  auto bound = [&p](double k) { return 0.5 * p.high_bound(k); };
  auto gen = solve_homological(low, omega, st.eps_a, 1.0 / st.eps_b, HomologicalMode::ThetaAndTime, bound,
                               cfg.divisor_safety);
  StepRecord rec;
  rec.phase = "main";
  rec.step = m;
  rec.homological_residual = homological_residual(gen.S, low, omega, st.eps_a, 1.0 / st.eps_b,
                                                  HomologicalMode::ThetaAndTime, cur.dom);
  rec.min_divisor_ratio = gen.min_divisor_ratio;
  SymplecticStep step = invert_generating(gen.S, nxt.dom, cfg.inversion_tol);

  HamiltonianState out = st;
  out.phase = Phase::Main;
  out.step = m + 1;
  const Series mean = zero_mode(low, AverageOver::ThetaAndTime);
  out.h0 = st.h0 + (st.eps_a / st.eps_b) * mean;
  std::vector<Series> St;
  for (int j = 0; j < low.dim(); ++j) St.push_back(derive(gen.S, Variable::theta(j)));
  const std::vector<Series> parts{st.p};
  Series W = high + remainder(st.h0, parts, St, st.eps_a, st.eps_b, low);
  out.p = step.pull_back_angles(W, cfg.substitution_tol);
  out.chain.push_back(step);
  const auto piece = next_piece(st, out.chain, cfg.substitution_tol);
  if (piece.any) {
    out.p = out.p + piece.injected;
    out.tails.erase(out.tails.begin());
  }
  out.dom = nxt.dom;
  rec.composition_error = composition_error(st, out, step, piece.any ? &st.tails.front() : nullptr,
                                            cfg.composition_points, check_seed(cfg, 2, m) + 1);
  record_step_checks(rec, step, cfg, check_seed(cfg, 2, m), m);

  const auto anchor = anchor_frequency(out.h0, st.omega_target, st.dom.center, cfg.anchor_radius, cfg.anchor_tol);
  rec.newton_errors = anchor.errors;
  rec.anchor = anchor.action;
  rec.anchor_move = sup_distance(anchor.action, st.dom.center);
  rec.anchor_within_radius = rec.anchor_move <= sch.r_tilde(m);
  out.anchor = anchor.action;
  out.h0 = centered(out.h0, anchor.action);
  out.p = centered(out.p, anchor.action);
  out.h = centered(out.h, anchor.action);
  out.dom.center = anchor.action;
  out.scale = sch.eps_tilde(m + 1);

  rec.scale = out.scale;
  rec.norm = majorant_norm(out.p, out.dom);
  rec.normalized = rec.norm / out.scale;
  rec.s = out.dom.s;
  rec.r = out.dom.r;
  rec.cutoff = cur.cutoff;
  check_norm(rec, opt, "second-phase perturbation bound");
  return {std::move(out), std::move(rec)};
}

}  // namespace finkam
