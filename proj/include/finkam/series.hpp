#pragma once

#include <complex>
#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "finkam/monomials.hpp"

namespace finkam {

using Complex = std::complex<double>;

/// Fourier index (k, l): k multiplies the angles theta, l multiplies time t.
/// Entries of k past the series dimension are always zero.
struct ModeIndex {
  std::array<int, kMaxAngles> k{};
  int l = 0;

  /// |k|_1 + |l|, the order used by every truncation.
  int order() const noexcept;
  bool is_zero() const noexcept { return order() == 0; }
  bool angle_free() const noexcept;

  friend auto operator<=>(const ModeIndex&, const ModeIndex&) = default;
};

ModeIndex operator+(const ModeIndex& a, const ModeIndex& b) noexcept;
ModeIndex operator-(const ModeIndex& a) noexcept;

struct ModeIndexHash {
  std::size_t operator()(const ModeIndex& m) const noexcept;
};

/// D(s, r): angle/time strip of width s times the action ball B(center, r).
struct Domain {
  double s = 0.0;
  double r = 0.0;
  std::vector<double> center;
};

struct Variable {
  enum class Kind { Theta, Time, Action };
  Kind kind = Kind::Time;
  int index = 0;

  static Variable theta(int j) { return {Kind::Theta, j}; }
  static Variable time() { return {Kind::Time, 0}; }
  static Variable action(int j) { return {Kind::Action, j}; }
};

enum class AverageOver { Theta, ThetaAndTime };

/// Truncated Fourier series in (theta, t) whose coefficients are complex Taylor
/// polynomials in (I - center). Values are immutable once built; modes are kept
/// sorted and exactly-zero modes are never stored.
class Series {
 public:
  Series() = default;
  Series(int dim, int degree, std::vector<double> center, int angle_cutoff);

  static Series constant(int dim, int degree, std::vector<double> center, Complex value);
  /// The polynomial I_var - center_var.
  static Series action_coordinate(int dim, int degree, std::vector<double> center, int var);
  /// A single term c * x^alpha * e^{i(<k,theta> + l t)}.
  static Series monomial(int dim, int degree, std::vector<double> center, const ModeIndex& mode,
                         const Exponent& alpha, Complex c);

  int dim() const noexcept { return dim_; }
  int degree() const noexcept { return degree_; }
  int angle_cutoff() const noexcept { return cutoff_; }
  const std::vector<double>& center() const noexcept { return center_; }
  const MonomialBasis& basis() const { return monomial_basis(dim_, degree_); }
  std::size_t basis_size() const noexcept { return nb_; }

  std::size_t size() const noexcept { return modes_.size(); }
  bool empty() const noexcept { return modes_.empty(); }
  const ModeIndex& mode(std::size_t pos) const { return modes_[pos]; }
  std::span<const Complex> coeffs(std::size_t pos) const {
    return {coeffs_.data() + pos * nb_, nb_};
  }
  /// Polynomial stored at `mode`, or an empty span when the mode is absent.
  std::span<const Complex> find(const ModeIndex& mode) const;
  Complex coefficient(const ModeIndex& mode, const Exponent& alpha) const;
  int max_order() const noexcept;

  Series with_cutoff(int cutoff) const;
  Series with_degree(int degree) const;
  /// Exact re-expansion of every coefficient about a new action center.
  Series rebased(const std::vector<double>& new_center) const;
  /// Applies `fn(mode)` as a multiplier to each mode; zero results are dropped.
  Series mode_multiplied(const std::function<Complex(const ModeIndex&)>& fn) const;
  /// Keeps the modes accepted by `keep`.
  Series filtered(const std::function<bool(const ModeIndex&)>& keep) const;
  /// Zero-order Taylor slice: the coefficient of x^alpha, as a function of (theta, t) only.
  Series taylor_slice(const Exponent& alpha) const;

  Complex evaluate(std::span<const Complex> theta, Complex t, std::span<const Complex> action) const;
  /// Real part of the value at a real point; the imaginary part is rounding for real series.
  double evaluate(std::span<const double> theta, double t, std::span<const double> action) const;

  /// Conjugate symmetry: c(-k,-l) == conj(c(k,l)) within `tol` for every stored mode.
  bool is_real(double tol = 0.0) const;

 private:
  friend class SeriesAccumulator;

  int dim_ = 1;
  int degree_ = 0;
  int cutoff_ = 0;
  std::size_t nb_ = 1;
  std::vector<double> center_{0.0};
  std::vector<ModeIndex> modes_;
  std::vector<Complex> coeffs_;
};

/// Scatter-add builder for series; `finish` sorts the modes and drops exact zeros.
class SeriesAccumulator {
 public:
  SeriesAccumulator(int dim, int degree, std::vector<double> center, int cutoff);
  explicit SeriesAccumulator(const Series& like);

  /// Coefficient block for `mode`, created zero-filled on first use.
  std::span<Complex> slot(const ModeIndex& mode);
  void add(const ModeIndex& mode, std::span<const Complex> poly, Complex scale = 1.0);
  Series finish();

 private:
  Series proto_;
  std::unordered_map<ModeIndex, std::size_t, ModeIndexHash> index_;
  std::vector<ModeIndex> modes_;
  std::vector<Complex> coeffs_;
};

Series operator+(const Series& a, const Series& b);
Series operator-(const Series& a, const Series& b);
Series operator-(const Series& a);
Series operator*(Complex c, const Series& a);
inline Series operator*(const Series& a, Complex c) { return c * a; }
/// Product truncated to the larger cutoff and larger Taylor degree.
Series operator*(const Series& a, const Series& b);

Series derive(const Series& f, Variable var);
/// Inverse of d/dt on series without l = 0 content.
Series antiderive_time(const Series& f);

struct CutoffSplit {
  Series low;
  Series high;
};
CutoffSplit split_by_cutoff(const Series& f, int cutoff);

Series zero_mode(const Series& f, AverageOver over);

/// Coefficient majorant sum |p_{k,l}|_r e^{(|k|+|l|) s}; an upper bound of sup |f| on D(s, r).
double majorant_norm(const Series& f, const Domain& dom);

/// f(theta, t, rho + shift(theta, t, rho)); exact up to the Taylor degree and cutoff.
Series substitute_action(const Series& f, std::span<const Series> shift);

/// f(phi + shift(phi, t, rho), t, rho) by Taylor expansion in the angle shift.
/// Stops when the majorant of the newest order is below `tol`. With a non-empty
/// `action_shift` u the result is f(phi + shift, t, rho + u(phi, t, rho)).
Series substitute_angle(const Series& f, std::span<const Series> shift, double tol,
                        const Domain& measure, int max_order = 80,
                        std::span<const Series> action_shift = {});

}  // namespace finkam
