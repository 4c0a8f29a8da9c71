#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "finkam/errors.hpp"
#include "finkam/json_io.hpp"
#include "finkam/series.hpp"

using namespace finkam;

namespace {

const std::vector<double> kC1{0.0};

ModeIndex mode1(int k, int l) {
  ModeIndex m;
  m.k[0] = k;
  m.l = l;
  return m;
}

Series wave(int k, int l, Complex c, int degree = 2) {
  return Series::monomial(1, degree, kC1, mode1(k, l), Exponent{}, c);
}

Series cos_mode(int k, int l, double amp = 1.0) {
  return wave(k, l, 0.5 * amp) + wave(-k, -l, 0.5 * amp);
}

double sampled_sup(const Series& f, int n, double r) {
  double sup = 0.0;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (double x : {-r, 0.0, r}) {
        const double th = two_pi * i / n, t = two_pi * j / n;
        std::vector<Complex> a{Complex(f.center()[0] + x)}, tt{Complex(th)};
        sup = std::max(sup, std::abs(f.evaluate(tt, Complex(t), a)));
      }
  return sup;
}

Series random_real_series(std::mt19937_64& rng, int cutoff, int degree) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> pick(0, 2);
  const auto& basis = monomial_basis(1, degree);
  SeriesAccumulator acc(1, degree, kC1, cutoff);
  for (int k = -cutoff; k <= cutoff; ++k)
    for (int l = -cutoff; l <= cutoff; ++l) {
      ModeIndex m = mode1(k, l);
      if (m.order() > cutoff || m < -m || pick(rng) == 0) continue;
      for (std::size_t a = 0; a < basis.size(); ++a) {
        Complex c(g(rng), m == -m ? 0.0 : g(rng));
        acc.slot(m)[a] += c;
        if (m != -m) acc.slot(-m)[a] += std::conj(c);
      }
    }
  return acc.finish();
}

double max_abs_diff(const Series& a, const Series& b) {
  Series d = a - b;
  return majorant_norm(d, {0.0, 0.0, d.center()});
}

}  // namespace

TEST_CASE("majorant norm examples") {
  Series one = Series::constant(1, 2, kC1, 1.0);
  CHECK(majorant_norm(one, {0.3, 0.1, kC1}) == doctest::Approx(1.0));

  Series w = wave(1, 1, 1.0);
  const double n = majorant_norm(w, {0.1, 0.0, kC1});
  CHECK(n == doctest::Approx(std::exp(0.2)).epsilon(1e-15));
  // Dense sampling on the complex torus |Im| <= s never exceeds the majorant.
  double sup = 0.0;
  for (int i = 0; i < 32; ++i)
    for (double y1 : {-0.1, 0.0, 0.1})
      for (double y2 : {-0.1, 0.0, 0.1}) {
        std::vector<Complex> th{Complex(0.2 * i, y1)}, a{Complex(0.0)};
        sup = std::max(sup, std::abs(w.evaluate(th, Complex(0.1 * i, y2), a)));
      }
  CHECK(sup <= n + 1e-14);
  CHECK(sup == doctest::Approx(n).epsilon(1e-12));

  CHECK(majorant_norm(cos_mode(1, 0, 2.0), {0.0, 0.0, kC1}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(majorant_norm(one, {0.1, 0.1, {1.0}}), DomainMismatch);
}

TEST_CASE("majorant is monotone in s and r") {
  std::mt19937_64 rng(3);
  Series f = random_real_series(rng, 5, 2);
  double prev = 0.0;
  for (double s : {0.0, 0.1, 0.2, 0.4}) {
    const double v = majorant_norm(f, {s, 0.05, kC1});
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(majorant_norm(f, {0.1, 0.2, kC1}) >= majorant_norm(f, {0.1, 0.1, kC1}));
}

TEST_CASE("majorant dominates sampled sup over 100 random series") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Series f = random_real_series(rng, 4, 2);
    const double r = 0.05;
    CHECK(majorant_norm(f, {0.0, r, kC1}) >= sampled_sup(f, 24, r) - 1e-12);
  }
}

TEST_CASE("arithmetic identities") {
  std::mt19937_64 rng(5);
  Series f = random_real_series(rng, 4, 2);
  Series zero(1, 2, kC1, 0);
  CHECK(max_abs_diff(f + zero, f) == 0.0);

  Series prod = wave(1, 0, 1.0) * wave(-1, 0, 1.0);
  REQUIRE(prod.size() == 1);
  CHECK(prod.coefficient(ModeIndex{}, Exponent{}) == Complex(1.0));

  // Products truncate at the larger input cutoff, so widen it to hold the 2-theta mode.
  Series c = cos_mode(1, 0).with_cutoff(2);
  Series c2 = c * c;
  Series expected = Series::constant(1, 2, kC1, 0.5) + cos_mode(2, 0, 0.5);
  CHECK(max_abs_diff(c2, expected) < 1e-16);
  for (int i = 0; i < 20; ++i) {
    const double th = 0.37 * i;
    std::vector<double> tt{th}, a{0.0};
    CHECK(c2.evaluate(tt, 0.0, a) == doctest::Approx(std::cos(th) * std::cos(th)).epsilon(1e-15));
  }
}

TEST_CASE("product is submultiplicative and preserves reality") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Series f = random_real_series(rng, 3, 2), g = random_real_series(rng, 3, 2);
    Domain dom{0.2, 0.1, kC1};
    Series fg = f * g;
    CHECK(majorant_norm(fg, dom) <= majorant_norm(f, dom) * majorant_norm(g, dom) * (1 + 1e-14));
    CHECK(fg.is_real(1e-12));
    CHECK((f + g).is_real(0.0));
  }
}

TEST_CASE("centers must match") {
  Series a = Series::constant(1, 2, {0.0}, 1.0);
  Series b = Series::constant(1, 2, {1.0}, 1.0);
  CHECK_THROWS_AS(a + b, DomainMismatch);
  CHECK_THROWS_AS(a * b, DomainMismatch);
}

TEST_CASE("derivatives") {
  Series one = Series::constant(1, 2, kC1, 1.0);
  CHECK(derive(one, Variable::time()).empty());

  Series w = wave(2, 1, 1.0);
  Series dw = derive(w, Variable::theta(0));
  CHECK(dw.coefficient(mode1(2, 1), Exponent{}) == Complex(0.0, 2.0));

  Series x = Series::action_coordinate(1, 2, kC1, 0);
  Series x2 = x * x;
  CHECK(derive(x2, Variable::action(0)).coefficient(ModeIndex{}, Exponent{1}) == Complex(2.0));
  CHECK_THROWS_AS(derive(Series::constant(1, 0, kC1, 1.0), Variable::action(0)), InvalidArgument);
}

TEST_CASE("Cauchy estimate for the angle derivative") {
  SeriesAccumulator acc(1, 0, kC1, 10);
  for (int k = -10; k <= 10; ++k) acc.slot(mode1(k, 0))[0] = std::exp(-std::abs(k));
  Series f = acc.finish();
  Series df = derive(f, Variable::theta(0));
  for (double delta : {0.1, 0.25, 0.5, 0.75}) {
    const double lhs = majorant_norm(df, {1.0 - delta, 0.0, kC1});
    const double rhs = majorant_norm(f, {1.0, 0.0, kC1}) / (std::numbers::e * delta);
    CHECK(lhs <= rhs);
  }
}

TEST_CASE("split by cutoff") {
  Series f = Series::constant(1, 2, kC1, 1.0) + wave(5, 0, 1.0);
  auto whole = split_by_cutoff(f, 10);
  CHECK(whole.high.empty());
  auto parts = split_by_cutoff(f, 2);
  CHECK(parts.low.size() == 1);
  CHECK(parts.high.size() == 1);
  CHECK(parts.high.coefficient(mode1(5, 0), Exponent{}) == Complex(1.0));
  CHECK(max_abs_diff(parts.low + parts.high, f) == 0.0);
}

TEST_CASE("tail norm follows the K^{d+1} e^{-K s0/2} pattern") {
  const double s0 = 0.5;
  const int big = 120;
  SeriesAccumulator acc(1, 0, kC1, big);
  for (int k = -big; k <= big; ++k)
    for (int l = -big; l <= big; ++l) {
      ModeIndex m = mode1(k, l);
      if (m.order() <= big) acc.slot(m)[0] = std::exp(-m.order() * s0);
    }
  Series f = acc.finish();
  double cmax = 0.0, cmin = 1e300;
  for (int K = 10; K <= 60; K += 10) {
    const double tail = majorant_norm(split_by_cutoff(f, K).high, {s0 / 2, 0.0, kC1});
    const double shape = std::pow(K, 2) * std::exp(-K * s0 / 2);
    cmax = std::max(cmax, tail / shape);
    cmin = std::min(cmin, tail / shape);
  }
  CHECK(cmax / cmin < 10.0);
}

TEST_CASE("zero modes") {
  Series f = Series::constant(1, 2, kC1, 3.0) + cos_mode(1, 0);
  Series avg = zero_mode(f, AverageOver::Theta);
  CHECK(max_abs_diff(avg, Series::constant(1, 2, kC1, 3.0)) == 0.0);
  Series ct = cos_mode(0, 1);
  CHECK(max_abs_diff(zero_mode(ct, AverageOver::Theta), ct) == 0.0);
  CHECK(zero_mode(cos_mode(1, -1), AverageOver::ThetaAndTime).empty());
}

TEST_CASE("time antiderivative round trip") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Series f = random_real_series(rng, 4, 2).filtered([](const ModeIndex& m) { return m.l != 0; });
    Series back = derive(antiderive_time(f), Variable::time());
    CHECK(max_abs_diff(back, f) <= 1e-15 * (1 + majorant_norm(f, {0.0, 0.0, kC1})));
  }
  CHECK_THROWS_AS(antiderive_time(Series::constant(1, 2, kC1, 1.0)), InvalidArgument);
}

TEST_CASE("rebase is an exact re-expansion") {
  std::mt19937_64 rng(4);
  Series f = random_real_series(rng, 3, 3);
  Series g = f.rebased({0.3});
  CHECK(g.center()[0] == 0.3);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> th{0.4 * i}, a{0.2 + 0.03 * i};
    CHECK(g.evaluate(th, 0.1 * i, a) == doctest::Approx(f.evaluate(th, 0.1 * i, a)).epsilon(1e-12));
  }
  CHECK(g.is_real(1e-14));
}

TEST_CASE("action substitution agrees with pointwise evaluation") {
  std::mt19937_64 rng(8);
  Series f = random_real_series(rng, 2, 2).with_cutoff(12);
  Series w = (1e-2 * cos_mode(1, -1)).with_degree(2);
  std::vector<Series> shift{w};
  Series g = substitute_action(f.with_cutoff(12), shift);
  for (int i = 0; i < 10; ++i) {
    const double th = 0.7 * i, t = 0.3 * i, rho = 0.01 * i;
    std::vector<double> tt{th}, rr{rho}, moved{rho + w.evaluate(tt, t, rr)};
    CHECK(g.evaluate(tt, t, rr) == doctest::Approx(f.evaluate(tt, t, moved)).epsilon(1e-13));
  }
}

TEST_CASE("angle substitution reproduces a shifted cosine") {
  Series f = cos_mode(1, 0);
  const double delta = 1e-3;
  std::vector<Series> shift{Series::constant(1, 2, kC1, delta)};
  Series g = substitute_angle(f, shift, 1e-18, {0.0, 0.0, kC1});
  for (int i = 0; i < 10; ++i) {
    std::vector<double> tt{0.6 * i}, rr{0.0};
    CHECK(std::abs(g.evaluate(tt, 0.0, rr) - std::cos(0.6 * i + delta)) < 1e-15);
  }
}

TEST_CASE("json round trip is bit exact") {
  std::mt19937_64 rng(1);
  Series f = random_real_series(rng, 4, 2).rebased({0.1234567890123});
  const std::string text = dump_json(series_to_json(f));
  Series g = series_from_json(Json::parse(text));
  REQUIRE(g.size() == f.size());
  CHECK(g.center() == f.center());
  for (std::size_t p = 0; p < f.size(); ++p) {
    CHECK(g.mode(p) == f.mode(p));
    for (std::size_t a = 0; a < f.basis_size(); ++a) CHECK(g.coeffs(p)[a] == f.coeffs(p)[a]);
  }
  CHECK(dump_json(series_to_json(g)) == text);
}
