#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "finkam/series.hpp"

namespace finkam {

struct DioParams {
  double a = 0.0;
  double b = 0.0;
  int d = 1;
  double mu = 0.0;
  double eps = 0.0;

  double B = 0.0;
  double ell = 0.0;
  double mu_term = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double gamma = 0.0;
  double cutoff = 0.0;
  double eps_a = 0.0;
  double log_inv_eps = 0.0;

  /// Divisor lower bound for |k| + |l| <= cutoff.
  double low_bound(double k_norm) const;
  /// Divisor lower bound for |k| + |l| > cutoff.
  double high_bound(double k_norm) const;
};

DioParams derive_params(double a, double b, int d, double mu, double eps);

/// <k, omega>/eps_a + l, evaluated through the integer/fractional split of omega/eps_a so
/// that the rounding error does not grow with the size of the integer part.
double small_divisor(std::span<const double> omega, double eps_a, std::span<const int> k, std::int64_t l);

/// The l that minimizes |<k, omega>/eps_a + l|.
std::int64_t nearest_l(std::span<const double> omega, double eps_a, std::span<const int> k);

struct DivisorWitness {
  std::vector<int> k;
  std::int64_t l = 0;
  double value = 0.0;
  double bound = 0.0;
};

struct DioCheck {
  bool passed = true;
  bool truncated = false;       // the k-range was cut short (enumeration cap or resolution)
  double verified_up_to = 0.0;  // largest |k|_1 actually covered
  std::uint64_t tested = 0;
  std::optional<DivisorWitness> worst;  // smallest value/bound ratio seen
};

/// Largest |k| for which gamma/|k|^tau2 is still above the resolution of <k, omega>/eps_a mod 1.
double resolution_limit(const DioParams& p);

DioCheck check_low(std::span<const double> omega0, const DioParams& p, std::uint64_t max_vectors = 50'000'000);
DioCheck check_high(std::span<const double> omega0, const DioParams& p, double k_max,
                    std::uint64_t max_vectors = 50'000'000);

/// omega(I) = dH0/dI for an action-only polynomial H0.
class FrequencyMap {
 public:
  explicit FrequencyMap(Series h0);

  int dim() const noexcept { return h0_.dim(); }
  const Series& hamiltonian() const noexcept { return h0_; }
  std::vector<double> omega(std::span<const double> action) const;
  /// Row-major d x d Hessian of H0.
  std::vector<double> hessian(std::span<const double> action) const;

 private:
  Series h0_;
  std::vector<Series> grad_;
  std::vector<Series> hess_;
};

struct MeasureResult {
  double fraction = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t passed = 0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  double c5 = 0.0;
  double k_max = 0.0;
  bool truncated = false;
  std::vector<DivisorWitness> worst_witnesses;
};

/// 95% Wilson score interval for `successes` out of `n`.
std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t n, double z = 1.959963984540054);

/// SplitMix64 step; also used to derive independent per-sample streams from one seed.
std::uint64_t splitmix64(std::uint64_t& state);
double uniform01(std::uint64_t& state);

/// Fraction of I0 uniform in [1,2]^d whose frequency passes check_low and check_high
/// (k_max = k_max_factor * cutoff).
MeasureResult measure_estimate(const FrequencyMap& h0, const DioParams& p, std::uint64_t n_samples,
                               std::uint64_t seed, double k_max_factor = 10.0);

}  // namespace finkam
