#include <algorithm>
#include <cmath>
#include <numbers>

#include "finkam/errors.hpp"
#include "finkam/kam.hpp"

namespace finkam {

namespace {

void require_diophantine(std::span<const double> omega, const DioParams& p) {
  for (const DioCheck& c : {check_low(omega, p), check_high(omega, p, 10 * std::max(p.cutoff, 1.0))}) {
    if (c.passed) continue;
    const auto& w = *c.worst;
    throw SmallDivisorViolation(w.k, static_cast<int>(w.l), w.value, w.bound);
  }
}

std::vector<Series> smooth_pieces(const Series& p, const KamConfig& cfg, double ell) {
  if (p.empty()) return {};
  double xi = 0.0;
  for (std::size_t q = 0; q < p.size(); ++q) {
    double s2 = p.mode(q).l * static_cast<double>(p.mode(q).l);
    for (int j = 0; j < p.dim(); ++j) s2 += p.mode(q).k[j] * static_cast<double>(p.mode(q).k[j]);
    xi = std::max(xi, std::sqrt(s2));
  }
  // The last level must see every mode on the plateau of the multiplier.
  const double need = cfg.kernel.plateau * cfg.kernel.a1 / (2 * xi);
  int levels = 1;
  while (cfg.smoothing_s0 * std::pow(cfg.smoothing_ratio, levels - 1) > need) ++levels;
  auto sched = DecompositionSchedule::geometric(cfg.smoothing_s0, cfg.smoothing_ratio, levels, ell);
  std::vector<Series> out;
  for (auto& piece : decompose(p, sched, cfg.kernel)) out.push_back(std::move(piece.piece));
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

template <class F>
StepOutcome with_context(const char* phase, std::int64_t step, F&& f) {
  try {
    return f();
  } catch (Error& e) {
    e.add_context(std::string(phase) + " step " + std::to_string(step));
    throw;
  }
}

// One spectral derivative along `axis` of a real function sampled on the (d+1)-torus grid.
// Index layout: time slowest, then angles, last angle fastest; axis d is time.
struct Spectral {
  int dim, n;
  std::vector<std::size_t> stride;
  std::vector<std::complex<double>> twiddle;

  Spectral(int d, int n_) : dim(d), n(n_), stride(d + 1), twiddle(n_) {
    std::size_t s = 1;
    for (int a = d - 1; a >= 0; --a) {
      stride[a] = s;
      s *= n;
    }
    stride[d] = s;
    for (int j = 0; j < n; ++j) twiddle[j] = std::polar(1.0, -2 * std::numbers::pi * j / n);
  }

  std::size_t total() const { return stride[dim] * n; }

  // Returns the derivative and the largest coefficient magnitude in the top frequency band.
  std::vector<double> derivative(const std::vector<double>& f, int axis, double& top, double& peak) const {
    std::vector<double> out(f.size());
    const std::size_t st = stride[axis];
    std::vector<std::complex<double>> c(n);
    for (std::size_t base = 0; base < f.size(); ++base) {
      if ((base / st) % n != 0) continue;
      // The derivative ignores constants; removing the first sample keeps constant lines exact.
      const double shift = f[base];
      for (int k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (int j = 0; j < n; ++j)
          acc += (f[base + j * st] - shift) * twiddle[(static_cast<std::size_t>(j) * k) % n];
        c[k] = acc / static_cast<double>(n);
      }
      for (int k = 0; k < n; ++k) {
        const int freq = k <= n / 2 ? k : k - n;
        peak = std::max(peak, std::abs(c[k]));
        if (std::abs(freq) >= n / 2 - 1) top = std::max(top, std::abs(c[k]));
      }
      for (int j = 0; j < n; ++j) {
        std::complex<double> acc = 0.0;
        for (int k = 0; k < n; ++k) {
          const int freq = k <= n / 2 ? k : k - n;
          if (2 * std::abs(freq) == n) continue;
          acc += std::complex<double>(0.0, freq) * c[k] * std::conj(twiddle[(static_cast<std::size_t>(j) * k) % n]);
        }
        out[base + j * st] = acc.real();
      }
    }
    return out;
  }
};

}  // namespace

double invariance_residual(const TorusEmbedding& torus, const Hamiltonian& H, std::span<const double> omega) {
  const int d = torus.dim, n = torus.n;
  if (n < 8 || n % 2 != 0) throw GridTooCoarse("torus grid needs an even number of at least 8 points per axis");
  const Spectral sp(d, n);
  if (torus.samples.size() != sp.total()) throw InvalidArgument("torus samples do not match the grid size");

  // Periodic parts: theta_j - phi_j and I_j.
  std::vector<std::vector<double>> comp(2 * d, std::vector<double>(sp.total()));
  for (std::size_t q = 0; q < sp.total(); ++q)
    for (int j = 0; j < d; ++j) {
      const double phi = 2 * std::numbers::pi * static_cast<double>((q / sp.stride[j]) % n) / n;
      comp[j][q] = torus.samples[q].angle[j] - phi;
      comp[d + j][q] = torus.samples[q].action[j];
    }
  // Lie derivative (omega/eps^a . d_phi + d_t) of every component.
  std::vector<std::vector<double>> lie(2 * d, std::vector<double>(sp.total(), 0.0));
  double top = 0.0, peak = 0.0;
  for (int c = 0; c < 2 * d; ++c) {
    for (int a = 0; a <= d; ++a) {
      const double w = a < d ? omega[a] / H.eps_a : 1.0;
      const auto der = sp.derivative(comp[c], a, top, peak);
      for (std::size_t q = 0; q < sp.total(); ++q) lie[c][q] += w * der[q];
    }
  }
  // Periodic parts of a constant offset have peak ~ |I|; resolution is judged on the oscillating part.
  if (top > 1e-9 * std::max(peak, 1e-300) && top > 1e-13)
    throw GridTooCoarse("embedding has spectral content at the Nyquist band (" + std::to_string(top) + ")");

  std::vector<Series> dH0(d), dPdI(d), dPdth(d);
  for (int j = 0; j < d; ++j) {
    dH0[j] = derive(H.h0, Variable::action(j));
    dPdth[j] = derive(H.p, Variable::theta(j));
    if (H.p.degree() > 0) dPdI[j] = derive(H.p, Variable::action(j));
  }
  double worst = 0.0;
  for (std::size_t q = 0; q < sp.total(); ++q) {
    const PhasePoint& z = torus.samples[q];
    for (int j = 0; j < d; ++j) {
      double dHdI = dH0[j].evaluate(z.angle, z.t, z.action) / H.eps_a;
      if (!dPdI[j].empty()) dHdI += dPdI[j].evaluate(z.angle, z.t, z.action) / H.eps_b;
      const double dHdth = dPdth[j].empty() ? 0.0 : dPdth[j].evaluate(z.angle, z.t, z.action) / H.eps_b;
      const double angle_defect = omega[j] / H.eps_a + lie[j][q] - dHdI;
      const double action_defect = lie[d + j][q] + dHdth;
      worst = std::max({worst, std::abs(angle_defect), std::abs(action_defect)});
    }
  }
  return worst;
}

TorusResult run(const Series& h0_in, const Series& p_in, const DioParams& params, const KamConfig& cfg) {
  const int d = h0_in.dim();
  if (p_in.dim() != d || params.d != d) throw InvalidArgument("run: H0, P and the parameters disagree on d");
  if (static_cast<int>(cfg.I0.size()) != d) throw InvalidArgument("run: I0 must have d components");
  if (cfg.taylor_degree < 2) throw InvalidArgument("run: taylor_degree must be at least 2");
  if (cfg.max_main_steps < cfg.min_main_steps) throw InvalidArgument("run: max_main_steps < min_main_steps");

  const ScheduleParams sch = make_schedule(params);
  const FrequencyMap fm(h0_in);
  TorusResult res;
  res.omega = fm.omega(cfg.I0);
  if (cfg.require_diophantine) require_diophantine(res.omega, params);

  const double eps_a = std::pow(params.eps, params.a), eps_b = std::pow(params.eps, params.b);
  const int D = cfg.taylor_degree;
  const Series P = p_in.rebased(cfg.I0).with_degree(D);
  auto pieces = smooth_pieces(P, cfg, params.ell);
  res.pieces = pieces.size();

  HamiltonianState st;
  st.phase = Phase::Pre;
  st.eps_a = eps_a;
  st.eps_b = eps_b;
  st.h0 = h0_in.rebased(cfg.I0);
  st.h = Series(d, D, cfg.I0, 0);
  st.p = pieces.empty() ? Series(d, D, cfg.I0, 0) : pieces.front();
  if (!pieces.empty()) st.tails.assign(pieces.begin() + 1, pieces.end());
  st.scale = 1.0;
  st.dom = {sch.s(0), std::min(sch.r(0), cfg.r_cap), cfg.I0};
  st.omega_target = res.omega;
  st.anchor = cfg.I0;

  StepOptions opt{&sch, &cfg, 0.0};
  opt.reference_norm = majorant_norm(st.p, st.dom) / st.scale;
  res.initial_norm = majorant_norm(st.p, st.dom);
  const std::int64_t pre_steps =
      std::min<std::int64_t>(sch.m0, std::max<std::int64_t>(cfg.pre_steps, static_cast<std::int64_t>(pieces.size()) - 1));
  res.anchor_trajectory.push_back(cfg.I0);
  for (std::int64_t m = 0; m < pre_steps; ++m) {
    auto out = with_context("pre", m, [&] { return pre_step(st, opt); });
    st = std::move(out.state);
    res.decay_log.push_back(std::move(out.record));
  }
  res.pre_steps = pre_steps;

  {
    auto out = with_context("averaging", pre_steps, [&] { return average_transform(st, opt); });
    st = std::move(out.state);
    res.anchor_trajectory.push_back(st.anchor);
    res.decay_log.push_back(std::move(out.record));
  }
  opt.reference_norm = res.decay_log.back().normalized;
  for (int j = 0; j < cfg.max_main_steps; ++j) {
    const double norm = majorant_norm(st.p, st.dom);
    if (j >= cfg.min_main_steps && st.tails.empty() && norm < cfg.target_norm) break;
    auto out = with_context("main", j, [&] { return main_step(st, opt); });
    st = std::move(out.state);
    res.anchor_trajectory.push_back(st.anchor);
    res.decay_log.push_back(std::move(out.record));
    ++res.main_steps;
  }
  res.final_norm = majorant_norm(st.p, st.dom);
  res.anchor_limit = st.anchor;

  for (const auto& rec : res.decay_log)
    if (rec.phase != "average") res.derivative_product *= 1.0 + rec.derivative_bound;

  TorusEmbedding& emb = res.embedding;
  emb.dim = d;
  emb.n = cfg.grid_n;
  emb.rho = st.anchor;
  std::size_t total = 1;
  for (int a = 0; a <= d; ++a) total *= static_cast<std::size_t>(cfg.grid_n);
  emb.samples.reserve(total);
  const double h = 2 * std::numbers::pi / cfg.grid_n;
  for (std::size_t q = 0; q < total; ++q) {
    PhasePoint z;
    z.angle.resize(d);
    std::size_t rest = q;
    for (int j = d - 1; j >= 0; --j) {
      z.angle[j] = h * static_cast<double>(rest % cfg.grid_n);
      rest /= cfg.grid_n;
    }
    z.t = h * static_cast<double>(rest);
    z.action = st.anchor;
    PhasePoint img = apply_chain(st.chain, z);
    for (int j = 0; j < d; ++j)
      res.identity_deviation = std::max({res.identity_deviation, std::abs(img.angle[j] - z.angle[j]),
                                         std::abs(img.action[j] - z.action[j])});
    emb.samples.push_back(std::move(img));
  }
  res.identity_bound = std::exp(sch.log_eps_tilde(0) / (2 * params.ell));
  res.invariance_residual = invariance_residual(emb, {h0_in, p_in, eps_a, eps_b}, res.omega);
  return res;
}

}  // namespace finkam
