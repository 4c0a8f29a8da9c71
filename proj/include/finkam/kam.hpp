#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finkam/diophantine.hpp"
#include "finkam/schedule.hpp"
#include "finkam/series.hpp"
#include "finkam/smoothing.hpp"

namespace finkam {

// ---------------------------------------------------------------------------
// Homological equation

enum class HomologicalMode { ThetaOnly, ThetaAndTime };

/// Admissible divisor size as a function of |k|_1.
using DivisorBound = std::function<double(double k_norm)>;

struct GeneratingFunction {
  Series S;
  /// Smallest |divisor| / bound over the solved modes (infinite when nothing was solved).
  double min_divisor_ratio = 0.0;
  std::optional<DivisorWitness> tightest;
};

/// Solves d_t S + <omega(rho)/eps_a, d_theta S> + scale * (P_low - excluded modes) = 0 mode by
/// mode. `omega` holds one action-only series per angle (the frequency map about the center of
/// `p_low`); the rho-dependence of the divisor is kept through a truncated Taylor inverse.
/// The divisor value at the expansion center must exceed safety * bound(|k|) for every k != 0.
GeneratingFunction solve_homological(const Series& p_low, std::span<const Series> omega, double eps_a, double scale,
                                     HomologicalMode mode, const DivisorBound& bound, double safety = 1.0);

/// Constant-frequency overload.
GeneratingFunction solve_homological(const Series& p_low, std::span<const double> omega, double eps_a, double scale,
                                     HomologicalMode mode, const DivisorBound& bound, double safety = 1.0);

/// Majorant norm of the left-hand side of the homological equation after substituting S.
double homological_residual(const Series& S, const Series& p_low, std::span<const Series> omega, double eps_a,
                            double scale, HomologicalMode mode, const Domain& dom);

/// Constant frequency series omega_j about `center` (used by tests and the constant overload).
std::vector<Series> constant_frequency(int dim, int degree, const std::vector<double>& center,
                                       std::span<const double> omega);

// ---------------------------------------------------------------------------
// Symplectic steps

/// A real phase-space point (angles, time, actions).
struct PhasePoint {
  std::vector<double> angle;
  double t = 0.0;
  std::vector<double> action;
};

/// One canonical change of variables (phi, t, rho) -> (theta, t, I).
///   Generating: I = rho + dS/dtheta(theta, t, rho), phi = theta + dS/drho(theta, t, rho);
///               as explicit series I = rho + u(phi, t, rho), theta = phi + v(phi, t, rho).
///   Averaging:  I = rho, theta = phi - dS/dI(t, rho).
class SymplecticStep {
 public:
  enum class Kind { Generating, Averaging };

  SymplecticStep() = default;
  static SymplecticStep averaging(const Series& S_tilde, const Domain& dom);

  Kind kind() const noexcept { return kind_; }
  const Series& generator() const noexcept { return S_; }
  std::span<const Series> u() const noexcept { return u_; }
  std::span<const Series> v() const noexcept { return v_; }
  const Domain& domain() const noexcept { return dom_; }
  const std::vector<double>& center() const noexcept { return dom_.center; }
  bool is_identity() const noexcept { return S_.empty(); }

  /// Image of a point of the new variables in the old ones, solving the implicit relation
  /// by fixed-point iteration to rounding level.
  PhasePoint map(const PhasePoint& z) const;

  /// f(theta(phi, t, rho), t, I(phi, t, rho)) as a series in the new variables.
  Series pull_back(const Series& f, double tol) const;

  /// f(theta(phi, t, rho), t, rho) for a function already written in the new action.
  Series pull_back_angles(const Series& f, double tol) const;

  /// Diagnostics recorded by the engine.
  double derivative_bound = 0.0;  // sampled sup of ||d(Phi - id)||_inf
  double symplectic_error = 0.0;  // sampled sup of |J^T Omega J - Omega|
  double inversion_residual = 0.0;

 private:
  friend SymplecticStep invert_generating(const Series& S, const Domain& dom, double tol);

  Kind kind_ = Kind::Generating;
  Series S_;
  Domain dom_;
  std::vector<Series> u_, v_;
  std::vector<Series> dS_dangle_, dS_daction_;
};

/// Fixed-point solution of theta = phi - dS/drho(theta, t, rho) as series.
/// Throws StepTooLarge when the mixed second derivative of S is not contracting on `dom`.
SymplecticStep invert_generating(const Series& S, const Domain& dom, double tol);

struct JacobianReport {
  double symplectic_error = 0.0;  // max entry of |J^T Omega J - Omega|
  double derivative_bound = 0.0;  // max ||J - Id||_inf
};

/// Finite-difference Jacobians of the step's point map at `n` random real points of its domain.
JacobianReport check_symplectic(const SymplecticStep& step, int n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Iteration state

enum class Phase { Pre, Averaged, Main };

struct HamiltonianState {
  Phase phase = Phase::Pre;
  std::int64_t step = 0;
  double eps_a = 1.0;
  double eps_b = 1.0;
  Series h0;  // action polynomial, enters as h0 / eps^a
  Series h;   // (t, I) part, enters as h / eps^b
  Series p;   // perturbation with its actual size, enters as p / eps^b
  double scale = 1.0;  // scheduled eps_m (or eps~_m) that p is measured against
  std::vector<Series> tails;  // pieces not yet absorbed, in the original variables; front is next
  std::vector<SymplecticStep> chain;  // transforms applied so far, oldest first
  Domain dom;
  std::vector<double> omega_target;  // omega(I0)
  std::vector<double> anchor;        // current anchor; equals the center in the main phase

  /// H at a point of the current variables (without the unabsorbed tails).
  double energy(const PhasePoint& z) const;
  /// Maps a point of the current variables back to the original ones through the chain.
  PhasePoint to_original(const PhasePoint& z) const;
};

struct KamConfig {
  std::vector<double> I0;
  int taylor_degree = 3;
  int max_cutoff = 16;
  double r_cap = 1e-3;
  double slack = 10.0;
  double divisor_safety = 1.0;
  int pre_steps = 2;
  int min_main_steps = 3;
  int max_main_steps = 8;
  double target_norm = 1e-30;
  double inversion_tol = 1e-17;
  double substitution_tol = 1e-20;
  double anchor_tol = 1e-12;
  double anchor_radius = 1e-2;
  int composition_points = 50;
  int symplectic_points = 20;
  int grid_n = 32;
  std::uint64_t seed = 1;
  double smoothing_s0 = 0.25;
  double smoothing_ratio = 0.5;
  bool require_diophantine = true;
  SmoothingKernel kernel;
};

/// Per-step diagnostics; the decay log is the sequence of these.
struct StepRecord {
  std::string phase;
  std::int64_t step = 0;
  double scale = 0.0;           // eps_{m+1} or eps~_{m+1}
  double norm = 0.0;            // majorant of the new perturbation on the shrunk working domain
  double normalized = 0.0;      // norm / scale
  double s = 0.0;               // working strip width
  double r = 0.0;               // working action radius
  int cutoff = 0;               // working Fourier cutoff
  double homological_residual = 0.0;
  double composition_error = 0.0;  // relative
  double symplectic_error = 0.0;
  double derivative_bound = 0.0;
  bool derivative_ok = true;       // derivative_bound <= 2^-(m+2)
  double min_divisor_ratio = 0.0;
  double averaged_residual = 0.0;  // averaging step: majorant of the l != 0 remainder
  std::vector<double> anchor;
  double anchor_move = 0.0;
  bool anchor_within_radius = true;  // move <= r~_m
  std::vector<double> newton_errors;
};

struct StepOptions {
  const ScheduleParams* schedule = nullptr;
  const KamConfig* config = nullptr;
  double reference_norm = 0.0;  // normalized perturbation norm of the phase's first state
};

struct StepOutcome {
  HamiltonianState state;
  StepRecord record;
};

/// One normal-form step of the first phase.
StepOutcome pre_step(const HamiltonianState& state, const StepOptions& opt);

/// Removes the time dependence of the (t, I) part and folds its average into H0.
StepOutcome average_transform(const HamiltonianState& state, const StepOptions& opt);

/// One step of the anchored second phase.
StepOutcome main_step(const HamiltonianState& state, const StepOptions& opt);

struct AnchorResult {
  std::vector<double> action;
  std::vector<double> errors;  // |grad H0 - omega_target| per iterate, starting at the initial guess
  int iterations = 0;
};

/// Newton solve of grad H0(I) = omega_target from `start`; AnchorLost when an iterate leaves the
/// ball of radius `radius` about `start` or the iteration fails to reach `tol`.
AnchorResult anchor_frequency(const Series& h0, std::span<const double> omega_target, std::span<const double> start,
                              double radius, double tol, int max_iter = 30);

// ---------------------------------------------------------------------------
// Driver

struct Hamiltonian {
  Series h0;
  Series p;
  double eps_a = 1.0;
  double eps_b = 1.0;
};

/// Samples of the torus embedding (phi, t) -> (theta, I) on a regular grid of n points per
/// angle and n in time. Index order: time slowest, then angles with the last one fastest.
struct TorusEmbedding {
  int dim = 1;
  int n = 0;
  std::vector<double> rho;
  std::vector<PhasePoint> samples;
};

struct TorusResult {
  std::vector<double> anchor_limit;
  TorusEmbedding embedding;
  double invariance_residual = 0.0;
  double identity_deviation = 0.0;  // sampled ||Phi - id||
  double identity_bound = 0.0;      // eps~_0^{1/(2 ell)}
  double derivative_product = 1.0;  // prod (1 + ||d(Phi_j - id)||)
  double initial_norm = 0.0;
  double final_norm = 0.0;
  std::int64_t pre_steps = 0;
  std::int64_t main_steps = 0;
  std::size_t pieces = 0;
  std::vector<StepRecord> decay_log;
  std::vector<std::vector<double>> anchor_trajectory;
  std::vector<double> omega;
};

TorusResult run(const Series& h0, const Series& p, const DioParams& params, const KamConfig& config);

/// Max over the grid of |(omega/eps^a . d_phi + d_t) K - X_H(K)| with spectral derivatives.
/// Throws GridTooCoarse when the grid cannot resolve the embedding.
double invariance_residual(const TorusEmbedding& torus, const Hamiltonian& H, std::span<const double> omega);

/// Point map of a whole chain (newest step applied first).
PhasePoint apply_chain(std::span<const SymplecticStep> chain, const PhasePoint& z);

}  // namespace finkam
