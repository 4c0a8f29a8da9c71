#include "finkam/duffing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

#include "finkam/diophantine.hpp"
#include "finkam/errors.hpp"

namespace finkam {

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= x;
  return r;
}

// int_0^{pi/2} dphi / sqrt(sum_{j=0}^n sin^{2j} phi): the amplitude-free part of the period.
// The integrand is even and pi-periodic, so the trapezoid rule converges geometrically.
double period_integral(int n) {
  auto g = [n](double phi) {
    const double s2 = std::sin(phi) * std::sin(phi);
    double sum = 0.0, p = 1.0;
    for (int j = 0; j <= n; ++j, p *= s2) sum += p;
    return 1.0 / std::sqrt(sum);
  };
  const double L = std::numbers::pi / 2;
  double prev = 0.0;
  for (int N = 8; N <= (1 << 20); N *= 2) {
    const double h = L / N;
    double acc = 0.5 * (g(0.0) + g(L));
    for (int k = 1; k < N; ++k) acc += g(k * h);
    const double val = acc * h;
    if (N > 8 && std::abs(val - prev) <= 1e-15 * val) return val;
    prev = val;
  }
  throw QuadratureNonConvergence("period integral did not converge");
}

double wrap(double a) { return std::remainder(a, 2 * std::numbers::pi); }

}  // namespace

double ForcingTerm::value(double t) const {
  double acc = 0.0;
  for (const auto& [l, c] : modes) acc += (c * std::polar(1.0, l * t)).real();
  return acc;
}

void DuffingNetwork::validate() const {
  if (m < 1) throw InvalidArgument("duffing: m must be at least 1");
  if (n < 1) throw InvalidArgument("duffing: n must be at least 1");
  for (std::size_t q = 0; q < terms.size(); ++q) {
    const auto& term = terms[q];
    const std::string where = "duffing: term " + std::to_string(q);
    if (static_cast<int>(term.alpha.size()) != m) throw InvalidArgument(where + ": alpha must have m entries");
    int order = 0;
    for (int a : term.alpha) {
      if (a < 0) throw InvalidArgument(where + ": alpha entries must be nonnegative");
      order += a;
    }
    if (order > 2 * n + 1) throw InvalidArgument(where + ": |alpha| exceeds 2n+1");
    for (const auto& [l, c] : term.modes) {
      auto partner = std::find_if(term.modes.begin(), term.modes.end(), [l = l](const auto& e) { return e.first == -l; });
      const std::complex<double> want = partner == term.modes.end() ? 0.0 : std::conj(partner->second);
      if (std::abs(c - want) > 1e-14 * (1.0 + std::abs(c)))
        throw InvalidArgument(where + ": p_alpha is not real (mode " + std::to_string(l) + " lacks its conjugate)");
    }
  }
}

double DuffingNetwork::coupling(std::span<const double> x, double t) const {
  double F = 0.0;
  for (const auto& term : terms) {
    double mono = term.value(t);
    for (int i = 0; i < m; ++i) mono *= ipow(x[i], term.alpha[i]);
    F += mono;
  }
  return F;
}

void DuffingNetwork::acceleration(std::span<const double> x, double t, std::span<double> out) const {
  for (int i = 0; i < m; ++i) out[i] = -ipow(x[i], 2 * n + 1);
  for (const auto& term : terms) {
    const double p = term.value(t);
    for (int i = 0; i < m; ++i) {
      if (term.alpha[i] == 0) continue;
      double g = p * term.alpha[i] * ipow(x[i], term.alpha[i] - 1);
      for (int j = 0; j < m; ++j)
        if (j != i) g *= ipow(x[j], term.alpha[j]);
      out[i] -= g;
    }
  }
}

double DuffingNetwork::energy(std::span<const double> x, std::span<const double> v, double t) const {
  double e = coupling(x, t);
  for (int i = 0; i < m; ++i) e += 0.5 * v[i] * v[i] + ipow(x[i], 2 * n + 2) / (2 * n + 2);
  return e;
}

double action_of(double x, double xdot, int n) { return (n + 1) * xdot * xdot + ipow(x, 2 * n + 2); }

double amplitude_of_action(double I, int n) { return std::pow(I, 1.0 / (2 * n + 2)); }

double exact_period(double amplitude, int n) {
  if (!(amplitude > 0)) throw InvalidArgument("exact_period: amplitude must be positive");
  return 4 * std::sqrt(n + 1.0) * std::pow(amplitude, -n) * period_integral(n);
}

double exact_frequency(double amplitude, int n) { return 2 * std::numbers::pi / exact_period(amplitude, n); }

std::pair<double, double> point_on_orbit(double I, double phase, int n) {
  if (!(I >= 0)) throw InvalidArgument("point_on_orbit: action must be nonnegative");
  if (I == 0) return {0.0, 0.0};
  // Orbits are rescalings of the unit one: x(t) = A X(A^n t).
  const double A = amplitude_of_action(I, n);
  const double tau = (phase - std::floor(phase)) * exact_period(1.0, n);
  const int steps = std::max(1, static_cast<int>(std::ceil(tau / (exact_period(1.0, n) / 20000))));
  const double h = tau / steps;
  double X = 1.0, V = 0.0;
  auto f = [n](double y) { return -ipow(y, 2 * n + 1); };
  for (int k = 0; k < steps; ++k) {
    const double k1x = V, k1v = f(X);
    const double k2x = V + 0.5 * h * k1v, k2v = f(X + 0.5 * h * k1x);
    const double k3x = V + 0.5 * h * k2v, k3v = f(X + 0.5 * h * k2x);
    const double k4x = V + h * k3v, k4v = f(X + h * k3x);
    X += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    V += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return {A * X, std::pow(A, n + 1) * V};
}

TrajectoryRecord simulate(const DuffingNetwork& net, std::span<const double> x0, std::span<const double> v0, double T,
                          double dt, Integrator method, const SimOptions& opt) {
  net.validate();
  const int m = net.m;
  if (static_cast<int>(x0.size()) != m || static_cast<int>(v0.size()) != m)
    throw InvalidArgument("simulate: initial state must have m positions and m velocities");
  if (!(T >= 0) || !(dt != 0) || !std::isfinite(dt)) throw InvalidArgument("simulate: need T >= 0 and dt != 0");
  if (opt.sample_every < 1) throw InvalidArgument("simulate: sample_every must be positive");
  double total = 0.0;
  for (int i = 0; i < m; ++i) total += action_of(x0[i], v0[i], net.n);
  if (total > 0) {
    const double omega = exact_frequency(amplitude_of_action(total, net.n), net.n);
    if (std::abs(dt) * omega > 0.1)
      throw InvalidArgument("simulate: dt = " + std::to_string(dt) + " does not resolve frequency " +
                            std::to_string(omega) + " (need |dt| omega <= 0.1)");
  }

  TrajectoryRecord rec;
  rec.m = m;
  rec.n = net.n;
  rec.dt = dt * opt.sample_every;
  std::vector<double> x(x0.begin(), x0.end()), v(v0.begin(), v0.end()), a(m);
  double t = 0.0;
  auto record = [&] {
    rec.times.push_back(t);
    for (int i = 0; i < m; ++i) {
      rec.x.push_back(x[i]);
      rec.v.push_back(v[i]);
      rec.action.push_back(action_of(x[i], v[i], net.n));
    }
    rec.energy.push_back(net.energy(x, v, t));
  };
  record();

  const long long steps = std::llround(T / std::abs(dt));
  std::vector<double> k1x(m), k1v(m), k2x(m), k2v(m), k3x(m), k3v(m), k4x(m), k4v(m), tmp(m);
  net.acceleration(x, t, a);
  for (long long s = 1; s <= steps; ++s) {
    if (method == Integrator::Verlet) {
      for (int i = 0; i < m; ++i) v[i] += 0.5 * dt * a[i];
      for (int i = 0; i < m; ++i) x[i] += dt * v[i];
      t = dt * static_cast<double>(s);
      net.acceleration(x, t, a);
      for (int i = 0; i < m; ++i) v[i] += 0.5 * dt * a[i];
    } else {
      const double t0 = t;
      k1x = v;
      net.acceleration(x, t0, k1v);
      for (int i = 0; i < m; ++i) {
        tmp[i] = x[i] + 0.5 * dt * k1x[i];
        k2x[i] = v[i] + 0.5 * dt * k1v[i];
      }
      net.acceleration(tmp, t0 + 0.5 * dt, k2v);
      for (int i = 0; i < m; ++i) {
        tmp[i] = x[i] + 0.5 * dt * k2x[i];
        k3x[i] = v[i] + 0.5 * dt * k2v[i];
      }
      net.acceleration(tmp, t0 + 0.5 * dt, k3v);
      for (int i = 0; i < m; ++i) {
        tmp[i] = x[i] + dt * k3x[i];
        k4x[i] = v[i] + dt * k3v[i];
      }
      t = dt * static_cast<double>(s);
      net.acceleration(tmp, t, k4v);
      for (int i = 0; i < m; ++i) {
        x[i] += dt / 6 * (k1x[i] + 2 * k2x[i] + 2 * k3x[i] + k4x[i]);
        v[i] += dt / 6 * (k1v[i] + 2 * k2v[i] + 2 * k3v[i] + k4v[i]);
      }
    }
    bool finite = true, out = false;
    for (int i = 0; i < m; ++i) {
      finite = finite && std::isfinite(x[i]) && std::isfinite(v[i]);
      out = out || std::abs(x[i]) > opt.escape_bound;
    }
    if (!finite || out) {
      rec.finite = finite;
      rec.escaped = true;
      rec.stop_time = t;
      if (finite) record();
      return rec;
    }
    if (s % opt.sample_every == 0) record();
  }
  rec.stop_time = t;
  return rec;
}

double boundedness_sup(const TrajectoryRecord& traj) {
  double sup = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    double s = 0.0;
    for (int i = 0; i < traj.m; ++i) s += std::abs(traj.x_at(k, i)) + std::abs(traj.v_at(k, i));
    sup = std::max(sup, s);
  }
  return sup;
}

double weighted_birkhoff_mean(std::span<const double> values) {
  const std::size_t N = values.size();
  if (N == 0) throw InvalidArgument("weighted_birkhoff_mean: no samples");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double s = (static_cast<double>(k) + 1.0) / (static_cast<double>(N) + 1.0);
    const double w = std::exp(-1.0 / (s * (1.0 - s)));
    num += w * values[k];
    den += w;
  }
  return num / den;
}

FrequencyEstimate rotation_frequency(std::span<const double> angle, double dt, double threshold, double min_turns) {
  if (angle.size() < 4) throw InvalidArgument("rotation_frequency: need at least 4 samples");
  if (!(dt > 0)) throw InvalidArgument("rotation_frequency: dt must be positive");
  std::vector<double> inc(angle.size() - 1);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < angle.size(); ++k) {
    inc[k] = wrap(angle[k + 1] - angle[k]);
    if (std::abs(inc[k]) > std::numbers::pi / 2)
      throw InsufficientWinding("angle jumps by " + std::to_string(inc[k]) + " between samples (orbit near the origin)");
    total += inc[k];
  }
  FrequencyEstimate est;
  est.turns = std::abs(total) / (2 * std::numbers::pi);
  if (est.turns < min_turns)
    throw InsufficientWinding("only " + std::to_string(est.turns) + " turns, need " + std::to_string(min_turns));
  est.frequency = weighted_birkhoff_mean(inc) / dt;
  est.half_window = weighted_birkhoff_mean(std::span<const double>(inc).first(inc.size() / 2)) / dt;
  est.change = std::abs(est.frequency - est.half_window) / std::abs(est.frequency);
  est.quasi_periodic = est.change < threshold;
  return est;
}

FrequencyEstimate frequency_extract(const TrajectoryRecord& traj, int i, double threshold, double min_turns) {
  if (i < 0 || i >= traj.m) throw InvalidArgument("frequency_extract: oscillator index out of range");
  double xmax = 0.0, vmax = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    xmax = std::max(xmax, std::abs(traj.x_at(k, i)));
    vmax = std::max(vmax, std::abs(traj.v_at(k, i)));
  }
  if (!(xmax > 0) || !(vmax > 0)) throw InsufficientWinding("oscillator " + std::to_string(i) + " does not move");
  const double scale = vmax / xmax;
  std::vector<double> angle(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) angle[k] = std::atan2(-traj.v_at(k, i) / scale, traj.x_at(k, i));
  return rotation_frequency(angle, std::abs(traj.dt), threshold, min_turns);
}

StabilityResult stability_fraction(const DuffingNetwork& net, double A, const ShellOptions& opt, std::uint64_t seed) {
  net.validate();
  if (!(A > 0)) throw InvalidArgument("stability_fraction: A must be positive");
  if (!(opt.c4 > 1)) throw InvalidArgument("stability_fraction: c4 must exceed 1");
  if (opt.n_samples < 1) throw InvalidArgument("stability_fraction: need at least one sample");
  const int m = net.m, n = net.n;
  const double amax = amplitude_of_action(opt.c4 * A, n);
  const double vmax = std::sqrt(opt.c4 * A / (n + 1));

  StabilityResult res;
  res.A = A;
  res.shell_bound = m * (amax + vmax);
  res.dt = opt.dt > 0 ? opt.dt : 0.05 / exact_frequency(amax, n);
  SimOptions sim;
  sim.escape_bound = opt.escape_multiple * amax;

  for (std::size_t s = 0; s < opt.n_samples; ++s) {
    std::uint64_t state = seed ^ (0x9E3779B97F4A7C15ULL * (s + 1));
    // Total action with density ~ S^{m-1} on [A, c4 A], split uniformly over the simplex.
    const double u = uniform01(state);
    const double S = A * std::pow(1.0 + u * (std::pow(opt.c4, m) - 1.0), 1.0 / m);
    std::vector<double> e(m);
    double esum = 0.0;
    for (int i = 0; i < m; ++i) {
      e[i] = -std::log1p(-uniform01(state));
      esum += e[i];
    }
    ShellSample smp;
    smp.x0.resize(m);
    smp.v0.resize(m);
    for (int i = 0; i < m; ++i) {
      smp.actions.push_back(S * e[i] / esum);
      std::tie(smp.x0[i], smp.v0[i]) = point_on_orbit(smp.actions[i], uniform01(state), n);
    }
    const auto traj = simulate(net, smp.x0, smp.v0, opt.T, res.dt, Integrator::Verlet, sim);
    smp.escaped = traj.escaped;
    smp.sup = boundedness_sup(traj);
    smp.bounded = !traj.escaped && smp.sup <= opt.bound_multiple * res.shell_bound;
    smp.frequencies.assign(m, std::numeric_limits<double>::quiet_NaN());
    if (smp.bounded) {
      smp.quasi_periodic = true;
      for (int i = 0; i < m; ++i) {
        try {
          const auto est = frequency_extract(traj, i, opt.birkhoff_tol, opt.min_turns);
          smp.frequencies[i] = est.frequency;
          smp.quasi_periodic = smp.quasi_periodic && est.quasi_periodic;
        } catch (const InsufficientWinding&) {
          smp.quasi_periodic = false;
        }
      }
    }
    if (smp.bounded && smp.quasi_periodic) ++res.stable;
    res.samples.push_back(std::move(smp));
  }
  res.fraction = static_cast<double>(res.stable) / static_cast<double>(opt.n_samples);
  res.ci = wilson_interval(res.stable, opt.n_samples);
  return res;
}

}  // namespace finkam
