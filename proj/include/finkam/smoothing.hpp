#pragma once

#include <complex>
#include <string>
#include <vector>

#include "finkam/series.hpp"

namespace finkam {

/// Radial C-infinity multiplier K^: 1 on |xi| <= plateau, 0 on |xi| >= a1, with an
/// exp(-1/x) bump transition in between.
struct SmoothingKernel {
  double a1 = 1.0;
  double plateau = 0.5;

  void validate() const;
  double multiplier(double xi_norm) const;
  /// K^(s * (k, l)) with the Euclidean norm of (k, l).
  double multiplier(const ModeIndex& mode, double s) const;
};

struct DecompositionSchedule {
  std::vector<double> s_list;
  double target_ell = 0.0;

  /// s_nu = s0 * ratio^nu for nu = 0..levels-1.
  static DecompositionSchedule geometric(double s0, double ratio, int levels, double ell);
  void validate() const;
};

struct DecompositionPiece {
  Series piece;
  double width = 0.0;  // analyticity width 2 s_nu
};

Series smooth(const Series& f, double s, const SmoothingKernel& kernel);

/// F_0 = S_{2 s_0} f and F_{nu+1} = S_{2 s_{nu+1}} f - S_{2 s_nu} f; the pieces sum to f.
std::vector<DecompositionPiece> decompose(const Series& f, const DecompositionSchedule& sched,
                                          const SmoothingKernel& kernel);

/// beta-th derivative of the 1-D kernel K(z) = (1/2pi) int K^(xi) e^{i xi z} dxi at complex z.
std::complex<double> kernel_derivative(const SmoothingKernel& kernel, int beta, std::complex<double> z);

struct KernelDecayRow {
  double x = 0.0;
  double y = 0.0;
  double abs_k = 0.0;
  double bound = 0.0;
};

struct KernelDecayReport {
  int beta = 0;
  int p = 0;
  double c = 0.0;  // smallest constant admissible on the fitting grid
  bool passed = false;
  std::vector<KernelDecayRow> rows;

  std::string csv() const;
};

/// Fits c in |d^beta K(x+iy)| <= c (1+|x|)^{-p} e^{a1|y|} on a grid, then checks the
/// envelope on a wider grid. Throws QuadratureNonConvergence if refinement disagrees.
KernelDecayReport validate_kernel_decay(const SmoothingKernel& kernel, int beta, int p);

/// Real test perturbation with coefficients amplitude * (1 + |k| + |l|)^{-ell-2} on every
/// mode of order <= cutoff (constant Taylor polynomials).
Series algebraic_decay_series(int dim, int degree, std::vector<double> center, double ell, int cutoff,
                              double amplitude);

struct DecayFit {
  double slope = 0.0;       // least-squares slope of log ||F_{nu+1}|| against log s_nu
  double c_spread = 0.0;    // max/min of ||F_{nu+1}|| / s_nu^ell over the fitted levels
  std::vector<double> norms;
};

/// Regression over nu = 0..levels-1 of ||F_{nu+1}|| measured on width 2 s_{nu+1}.
DecayFit fit_decay_law(const std::vector<DecompositionPiece>& pieces, const DecompositionSchedule& sched,
                       int levels);

}  // namespace finkam
