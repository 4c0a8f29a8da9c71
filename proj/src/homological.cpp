#include <cmath>
#include <limits>

#include "finkam/errors.hpp"
#include "finkam/kam.hpp"

namespace finkam {

namespace {

// Truncated product of two coefficient polynomials on a shared graded basis.
void poly_mul(const MonomialBasis& b, std::span<const Complex> x, std::span<const Complex> y, std::span<Complex> out) {
  std::fill(out.begin(), out.end(), Complex(0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == Complex(0.0)) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const int ij = b.product_index(i, j);
      if (ij >= 0) out[ij] += x[i] * y[j];
    }
  }
}

// 1/D for D = d0 + n(x), n without constant term: (1/d0) sum_k (-n/d0)^k up to the degree.
std::vector<Complex> reciprocal(const MonomialBasis& b, double d0, std::span<const Complex> n) {
  const std::size_t nb = b.size();
  std::vector<Complex> q(nb), term(nb), tmp(nb);
  for (std::size_t a = 1; a < nb; ++a) q[a] = -n[a] / d0;
  term[0] = 1.0;
  std::vector<Complex> sum(term);
  for (int k = 1; k <= b.degree(); ++k) {
    poly_mul(b, term, q, tmp);
    term.swap(tmp);
    for (std::size_t a = 0; a < nb; ++a) sum[a] += term[a];
  }
  for (auto& c : sum) c /= d0;
  return sum;
}

bool excluded(const ModeIndex& m, HomologicalMode mode) {
  return mode == HomologicalMode::ThetaOnly ? m.angle_free() : m.is_zero();
}

std::vector<Series> aligned(std::span<const Series> omega, const Series& like) {
  if (static_cast<int>(omega.size()) != like.dim())
    throw InvalidArgument("homological: need one frequency component per angle");
  std::vector<Series> out;
  for (const auto& w : omega) {
    for (std::size_t p = 0; p < w.size(); ++p)
      if (!w.mode(p).is_zero()) throw InvalidArgument("homological: frequency must depend on the actions only");
    Series x = w.center() == like.center() ? w : w.rebased(like.center());
    out.push_back(x.with_degree(like.degree()));
  }
  return out;
}

}  // namespace

std::vector<Series> constant_frequency(int dim, int degree, const std::vector<double>& center,
                                       std::span<const double> omega) {
  std::vector<Series> out;
  for (int j = 0; j < dim; ++j) out.push_back(Series::constant(dim, degree, center, omega[j]));
  return out;
}

GeneratingFunction solve_homological(const Series& p_low, std::span<const Series> omega, double eps_a, double scale,
                                     HomologicalMode mode, const DivisorBound& bound, double safety) {
  if (!(eps_a > 0)) throw InvalidArgument("homological: eps^a must be positive");
  const int d = p_low.dim();
  const auto w = aligned(omega, p_low);
  const MonomialBasis& b = p_low.basis();
  const std::size_t nb = p_low.basis_size();

  std::vector<double> w0(d);
  // Nonconstant part of omega_j / eps^a.
  std::vector<std::vector<Complex>> slope(d, std::vector<Complex>(nb));
  for (int j = 0; j < d; ++j) {
    auto c = w[j].find(ModeIndex{});
    if (c.empty()) continue;
    w0[j] = c[0].real();
    for (std::size_t a = 1; a < nb; ++a) slope[j][a] = c[a] / eps_a;
  }

  GeneratingFunction out;
  out.min_divisor_ratio = std::numeric_limits<double>::infinity();
  SeriesAccumulator acc(p_low);
  std::vector<Complex> n(nb), shat(nb);
  const Complex I(0.0, 1.0);
  for (std::size_t p = 0; p < p_low.size(); ++p) {
    const ModeIndex& m = p_low.mode(p);
    if (excluded(m, mode)) continue;
    const std::span<const int> k(m.k.data(), d);
    const double d0 = small_divisor(w0, eps_a, k, m.l);
    double knorm = 0.0;
    for (int j = 0; j < d; ++j) knorm += std::abs(k[j]);
    if (knorm > 0) {
      const double need = safety * bound(knorm);
      const double ratio = std::abs(d0) / need;
      if (!(std::abs(d0) >= need)) throw SmallDivisorViolation({k.begin(), k.end()}, m.l, std::abs(d0), need);
      if (ratio < out.min_divisor_ratio) {
        out.min_divisor_ratio = ratio;
        out.tightest = DivisorWitness{{k.begin(), k.end()}, m.l, std::abs(d0), need};
      }
    } else if (m.l == 0) {
      continue;
    }
    std::fill(n.begin(), n.end(), Complex(0.0));
    for (int j = 0; j < d; ++j)
      if (k[j] != 0)
        for (std::size_t a = 1; a < nb; ++a) n[a] += static_cast<double>(k[j]) * slope[j][a];
    const auto inv = reciprocal(b, d0, n);
    poly_mul(b, p_low.coeffs(p), inv, shat);
    acc.add(m, shat, scale * I);
  }
  out.S = acc.finish();
  return out;
}

GeneratingFunction solve_homological(const Series& p_low, std::span<const double> omega, double eps_a, double scale,
                                     HomologicalMode mode, const DivisorBound& bound, double safety) {
  const auto w = constant_frequency(p_low.dim(), p_low.degree(), p_low.center(), omega);
  return solve_homological(p_low, w, eps_a, scale, mode, bound, safety);
}

double homological_residual(const Series& S, const Series& p_low, std::span<const Series> omega, double eps_a,
                            double scale, HomologicalMode mode, const Domain& dom) {
  const auto w = aligned(omega, p_low);
  Series lhs = derive(S, Variable::time());
  for (int j = 0; j < S.dim(); ++j) lhs = lhs + (1.0 / eps_a) * (w[j] * derive(S, Variable::theta(j)));
  Series kept = p_low.filtered([&](const ModeIndex& m) { return !excluded(m, mode); });
  return majorant_norm(lhs + scale * kept, dom);
}

}  // namespace finkam
