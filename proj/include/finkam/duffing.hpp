#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace finkam {

/// One coefficient p_alpha(t) = sum_l c_l e^{ilt} of the coupling F(x, t) = sum_alpha p_alpha(t) x^alpha.
/// The mode list must be conjugate symmetric so that p_alpha is real.
struct ForcingTerm {
  std::vector<int> alpha;
  std::vector<std::pair<int, std::complex<double>>> modes;

  double value(double t) const;
};

/// m coupled oscillators x_i'' + x_i^{2n+1} + dF/dx_i = 0.
struct DuffingNetwork {
  int m = 1;
  int n = 1;
  std::vector<ForcingTerm> terms;

  /// Throws InvalidArgument on a malformed network (|alpha| > 2n+1, wrong arity, non-real p_alpha).
  void validate() const;
  bool unforced() const noexcept { return terms.empty(); }

  double coupling(std::span<const double> x, double t) const;
  /// Acceleration -(x_i^{2n+1} + dF/dx_i).
  void acceleration(std::span<const double> x, double t, std::span<double> out) const;
  double energy(std::span<const double> x, std::span<const double> v, double t) const;
};

enum class Integrator { Verlet, Rk4Reference };

struct SimOptions {
  /// Integration stops (and the record is flagged) once some |x_i| exceeds this bound.
  double escape_bound = std::numeric_limits<double>::infinity();
  /// Keep every k-th step in the record.
  int sample_every = 1;
};

/// Uniformly sampled trajectory; state arrays are row-major (sample, oscillator).
struct TrajectoryRecord {
  int m = 0;
  int n = 1;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<double> x, v, action;
  std::vector<double> energy;
  bool escaped = false;
  bool finite = true;
  double stop_time = 0.0;

  std::size_t size() const noexcept { return times.size(); }
  double x_at(std::size_t k, int i) const { return x[k * m + i]; }
  double v_at(std::size_t k, int i) const { return v[k * m + i]; }
  double action_at(std::size_t k, int i) const { return action[k * m + i]; }
};

/// I = (n+1) xdot^2 + x^{2n+2}.
double action_of(double x, double xdot, int n);
/// Turning point of the unforced orbit with action I: I^{1/(2n+2)}.
double amplitude_of_action(double I, int n);
/// Period of x'' + x^{2n+1} = 0 at amplitude A, by quadrature of the energy integral.
double exact_period(double amplitude, int n);
/// Angular frequency 2 pi / period.
double exact_frequency(double amplitude, int n);

/// Point of the unforced orbit with action I at normalized time phase in [0, 1),
/// measured from the turning point (A, 0).
std::pair<double, double> point_on_orbit(double I, double phase, int n);

/// Kick-drift-kick leapfrog, or classical RK4 as a reference. dt may be negative.
/// Throws InvalidArgument when dt does not resolve the fastest oscillation (|dt| omega > 0.1).
TrajectoryRecord simulate(const DuffingNetwork& net, std::span<const double> x0, std::span<const double> v0, double T,
                          double dt, Integrator method, const SimOptions& opt = {});

/// max over samples of sum_i |x_i| + |xdot_i|.
double boundedness_sup(const TrajectoryRecord& traj);

/// Bump-weighted average sum w(k/N) f_k / sum w(k/N) with w(s) = exp(-1/(s(1-s))).
double weighted_birkhoff_mean(std::span<const double> values);

struct FrequencyEstimate {
  double frequency = 0.0;  // angular frequency of the winding
  double half_window = 0.0;  // same estimate on the first half of the samples
  double change = 0.0;  // |frequency - half_window| / |frequency|
  double turns = 0.0;
  bool quasi_periodic = false;  // change below the threshold
};

/// Rotation frequency of a sampled angle (wrapped or not, spacing dt) by weighted Birkhoff
/// averaging of its increments. Throws InsufficientWinding below `min_turns` turns.
FrequencyEstimate rotation_frequency(std::span<const double> angle, double dt, double threshold = 1e-6,
                                     double min_turns = 100);

/// Winding of oscillator i in its (x, xdot) plane.
FrequencyEstimate frequency_extract(const TrajectoryRecord& traj, int i, double threshold = 1e-6,
                                    double min_turns = 100);

struct ShellOptions {
  double c4 = 2.0;
  std::size_t n_samples = 50;
  double T = 2000.0;
  /// Step size; 0 picks 0.05 / omega at the outer shell edge.
  double dt = 0.0;
  /// A sample is bounded when its sup stays below this multiple of the shell's sup bound.
  double bound_multiple = 10.0;
  /// Escape threshold as a multiple of the shell's largest amplitude.
  double escape_multiple = 100.0;
  double birkhoff_tol = 1e-6;
  double min_turns = 100.0;
};

struct ShellSample {
  std::vector<double> x0, v0, actions;
  double sup = 0.0;
  bool escaped = false;
  bool bounded = false;
  bool quasi_periodic = false;
  std::vector<double> frequencies;  // NaN where the winding was insufficient
};

struct StabilityResult {
  double A = 0.0;
  double fraction = 0.0;
  std::size_t stable = 0;
  std::pair<double, double> ci{0.0, 0.0};
  double shell_bound = 0.0;
  double dt = 0.0;
  std::vector<ShellSample> samples;
};

/// Samples the shell A <= sum I_i(0) <= c4 A uniformly in the (I, theta) product measure,
/// integrates each sample to T and counts those that stay bounded and pass the Birkhoff test.
StabilityResult stability_fraction(const DuffingNetwork& net, double A, const ShellOptions& opt, std::uint64_t seed);

}  // namespace finkam
