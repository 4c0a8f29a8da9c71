#include "finkam/diophantine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "finkam/errors.hpp"

namespace finkam {

namespace {

// Calls fn(k) for every k in Z^d with |k|_1 == n whose first nonzero entry is positive.
// Stops early when fn returns false.
bool for_each_half_k(int d, int n, const std::function<bool(std::span<const int>)>& fn) {
  std::vector<int> k(d, 0);
  std::function<bool(int, int)> rec = [&](int var, int remaining) {
    if (var == d - 1) {
      for (int value : {remaining, -remaining}) {
        k[var] = value;
        auto lead = std::find_if(k.begin(), k.end(), [](int v) { return v != 0; });
        if (lead != k.end() && *lead > 0 && !fn(k)) return false;
        if (remaining == 0) break;
      }
      return true;
    }
    for (int mag = remaining; mag >= 0; --mag)
      for (int value : {mag, -mag}) {
        k[var] = value;
        if (!rec(var + 1, remaining - mag)) return false;
        if (mag == 0) break;
      }
    return true;
  };
  return rec(0, n);
}

struct Split {
  std::vector<std::int64_t> whole;
  std::vector<double> frac;
};

Split split_frequency(std::span<const double> omega, double eps_a) {
  Split s;
  for (double w : omega) {
    const double x = w / eps_a;
    if (!std::isfinite(x) || std::abs(x) > 9.0e15) throw InvalidArgument("small_divisor: omega/eps^a out of range");
    const double n = std::floor(x);
    s.whole.push_back(static_cast<std::int64_t>(n));
    s.frac.push_back(x - n);
  }
  return s;
}

double divisor_from_split(const Split& s, std::span<const int> k, std::int64_t l) {
  std::int64_t whole = l;
  double frac = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    whole += static_cast<std::int64_t>(k[j]) * s.whole[j];
    frac += k[j] * s.frac[j];
  }
  return static_cast<double>(whole) + frac;
}

std::int64_t nearest_from_split(const Split& s, std::span<const int> k) {
  std::int64_t whole = 0;
  double frac = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    whole += static_cast<std::int64_t>(k[j]) * s.whole[j];
    frac += k[j] * s.frac[j];
  }
  return -(whole + static_cast<std::int64_t>(std::llround(frac)));
}

void record(DioCheck& out, std::span<const int> k, std::int64_t l, double value, double bound) {
  const double ratio = value / bound;
  if (!out.worst || ratio < out.worst->value / out.worst->bound)
    out.worst = DivisorWitness{{k.begin(), k.end()}, l, value, bound};
  if (value < bound) out.passed = false;
}

}  // namespace

double DioParams::low_bound(double k_norm) const {
  return std::pow(eps, -a + B / ell) * gamma / std::pow(k_norm, tau1);
}

double DioParams::high_bound(double k_norm) const { return gamma / std::pow(k_norm, tau2); }

DioParams derive_params(double a, double b, int d, double mu, double eps) {
  if (!(a > b)) throw InvalidArgument("parameters violate a>b (a=" + std::to_string(a) + ", b=" + std::to_string(b) + ")");
  if (!(b > 0.0)) throw InvalidArgument("parameters violate b>0");
  if (d < 1 || d > kMaxAngles) throw InvalidArgument("parameters violate 1 <= d <= 4");
  if (!(mu > 0.0) || mu >= 1.0) throw InvalidArgument("parameters violate 0 < mu < 1");
  if (!(eps > 0.0) || !(eps < 1.0)) throw InvalidArgument("parameters violate 0 < eps < 1");
  DioParams p;
  p.a = a;
  p.b = b;
  p.d = d;
  p.mu = mu;
  p.eps = eps;
  p.B = 5 * a - b + 2 * a * d;
  p.ell = 2 * (d + 1) * p.B / (a - b) + mu;
  p.mu_term = (a - b) * (a - b) * mu / (1000 * (a + b + 1) * (d + 3) * p.B);
  p.tau1 = d - 1 + p.mu_term;
  p.tau2 = d + p.mu_term;
  p.log_inv_eps = std::log(1.0 / eps);
  p.gamma = std::pow(p.log_inv_eps, -4.0);
  p.cutoff = std::pow(eps, -p.B / p.ell) * p.log_inv_eps * p.log_inv_eps;
  p.eps_a = std::pow(eps, a);
  return p;
}

double small_divisor(std::span<const double> omega, double eps_a, std::span<const int> k, std::int64_t l) {
  if (omega.size() != k.size()) throw InvalidArgument("small_divisor: omega and k lengths differ");
  return divisor_from_split(split_frequency(omega, eps_a), k, l);
}

std::int64_t nearest_l(std::span<const double> omega, double eps_a, std::span<const int> k) {
  if (omega.size() != k.size()) throw InvalidArgument("nearest_l: omega and k lengths differ");
  return nearest_from_split(split_frequency(omega, eps_a), k);
}

double resolution_limit(const DioParams& p) {
  // Rounding in <k, frac(omega/eps^a)> grows like |k| * 2^-52.
  return std::pow(p.gamma * std::ldexp(1.0, 52), 1.0 / (p.tau2 + 1.0));
}

DioCheck check_low(std::span<const double> omega0, const DioParams& p, std::uint64_t max_vectors) {
  if (static_cast<int>(omega0.size()) != p.d) throw InvalidArgument("check_low: omega length != d");
  DioCheck out;
  const Split s = split_frequency(omega0, p.eps_a);
  const auto total = static_cast<std::int64_t>(std::floor(p.cutoff));
  for (std::int64_t n = 1; n <= total && !out.truncated; ++n) {
    const std::int64_t lmax = total - n;
    const double bound = p.low_bound(static_cast<double>(n));
    for_each_half_k(p.d, static_cast<int>(n), [&](std::span<const int> k) {
      if (out.tested >= max_vectors) {
        out.truncated = true;
        return false;
      }
      ++out.tested;
      const std::int64_t l0 = std::clamp(nearest_from_split(s, k), -lmax, lmax);
      for (std::int64_t l = l0 - 1; l <= l0 + 1; ++l) {
        if (std::abs(l) > lmax) continue;
        record(out, k, l, std::abs(divisor_from_split(s, k, l)), bound);
      }
      return true;
    });
    if (!out.truncated) out.verified_up_to = static_cast<double>(n);
  }
  return out;
}

DioCheck check_high(std::span<const double> omega0, const DioParams& p, double k_max, std::uint64_t max_vectors) {
  if (static_cast<int>(omega0.size()) != p.d) throw InvalidArgument("check_high: omega length != d");
  if (k_max < p.cutoff) throw InvalidArgument("check_high: k_max must be at least the cutoff");
  DioCheck out;
  const Split s = split_frequency(omega0, p.eps_a);
  const double limit = std::min(k_max, resolution_limit(p));
  if (limit < k_max) out.truncated = true;
  const auto top = static_cast<std::int64_t>(std::floor(limit));
  for (std::int64_t n = 1; n <= top; ++n) {
    bool capped = false;
    const double bound = p.high_bound(static_cast<double>(n));
    for_each_half_k(p.d, static_cast<int>(n), [&](std::span<const int> k) {
      if (out.tested >= max_vectors) {
        capped = true;
        return false;
      }
      ++out.tested;
      const std::int64_t l0 = nearest_from_split(s, k);
      for (std::int64_t l = l0 - 1; l <= l0 + 1; ++l) {
        if (static_cast<double>(n + std::abs(l)) <= p.cutoff) continue;
        record(out, k, l, std::abs(divisor_from_split(s, k, l)), bound);
      }
      return true;
    });
    if (capped) {
      out.truncated = true;
      break;
    }
    out.verified_up_to = static_cast<double>(n);
  }
  return out;
}

FrequencyMap::FrequencyMap(Series h0) : h0_(std::move(h0)) {
  for (std::size_t p = 0; p < h0_.size(); ++p)
    if (!h0_.mode(p).is_zero()) throw InvalidArgument("frequency map: H0 must not depend on angles or time");
  if (h0_.degree() < 2) throw InvalidArgument("frequency map: H0 needs Taylor degree >= 2");
  for (int j = 0; j < h0_.dim(); ++j) grad_.push_back(derive(h0_, Variable::action(j)));
  for (int i = 0; i < h0_.dim(); ++i)
    for (int j = 0; j < h0_.dim(); ++j) hess_.push_back(derive(grad_[i], Variable::action(j)));
}

std::vector<double> FrequencyMap::omega(std::span<const double> action) const {
  std::vector<double> zero(h0_.dim(), 0.0), out;
  for (const auto& g : grad_) out.push_back(g.evaluate(zero, 0.0, action));
  return out;
}

std::vector<double> FrequencyMap::hessian(std::span<const double> action) const {
  std::vector<double> zero(h0_.dim(), 0.0), out;
  for (const auto& h : hess_) out.push_back(h.evaluate(zero, 0.0, action));
  return out;
}

std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double ph = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double centre = (ph + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(ph * (1 - ph) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) { return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53; }

MeasureResult measure_estimate(const FrequencyMap& h0, const DioParams& p, std::uint64_t n_samples,
                               std::uint64_t seed, double k_max_factor) {
  if (n_samples < 100) throw InvalidArgument("measure_estimate: need at least 100 samples");
  if (h0.dim() != p.d) throw InvalidArgument("measure_estimate: H0 dimension != d");
  if (k_max_factor < 1.0) throw InvalidArgument("measure_estimate: k_max_factor must be >= 1");
  MeasureResult res;
  res.samples = n_samples;
  res.seed = seed;
  res.k_max = k_max_factor * p.cutoff;
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    std::uint64_t mix = seed ^ (0xD1B54A32D192ED03ull * (i + 1));
    std::uint64_t stream = splitmix64(mix);
    std::vector<double> action(p.d);
    for (auto& v : action) v = 1.0 + uniform01(stream);
    const auto omega = h0.omega(action);
    double norm1 = 0.0;
    for (double w : omega) norm1 += std::abs(w);
    res.c5 = std::max(res.c5, norm1);
    const DioCheck low = check_low(omega, p);
    const DioCheck high = check_high(omega, p, res.k_max);
    res.truncated = res.truncated || low.truncated || high.truncated;
    if (low.passed && high.passed) {
      ++res.passed;
    } else if (res.worst_witnesses.size() < 5) {
      res.worst_witnesses.push_back(!low.passed ? *low.worst : *high.worst);
    }
  }
  res.fraction = static_cast<double>(res.passed) / static_cast<double>(n_samples);
  std::tie(res.ci_low, res.ci_high) = wilson_interval(res.passed, n_samples);
  return res;
}

}  // namespace finkam
