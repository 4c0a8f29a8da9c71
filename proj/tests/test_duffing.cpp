#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "finkam/duffing.hpp"
#include "finkam/errors.hpp"

using namespace finkam;

namespace {

using Modes = std::vector<std::pair<int, std::complex<double>>>;

Modes cosine(double amp) { return {{1, amp / 2}, {-1, amp / 2}}; }

DuffingNetwork single(int n) {
  DuffingNetwork net;
  net.n = n;
  return net;
}

DuffingNetwork forced_pair(double delta) {
  DuffingNetwork net;
  net.m = 2;
  net.terms.push_back({{1, 1}, cosine(delta)});
  net.terms.push_back({{2, 1}, cosine(delta)});
  net.terms.push_back({{1, 0}, cosine(delta)});
  return net;
}

// Largest |x| + |xdot| on the level set 2 xdot^2 + x^4 = 1.
double level_set_sup() {
  double best = 0.0;
  for (int k = 0; k <= 2000000; ++k) {
    const double x = k / 2000000.0;
    best = std::max(best, x + std::sqrt((1 - x * x * x * x) / 2));
  }
  return best;
}

}  // namespace

TEST_CASE("action of a state") {
  CHECK(action_of(1.0, 0.0, 1) == 1.0);
  CHECK(action_of(0.0, 1.0, 1) == 2.0);
  CHECK(action_of(0.0, 0.0, 3) == 0.0);
  CHECK(action_of(0.5, -0.25, 2) == doctest::Approx(3 * 0.0625 + std::pow(0.5, 6)).epsilon(1e-15));
  CHECK(amplitude_of_action(16.0, 1) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("exact period and orbit parameterization") {
  // Quarter period of x'' + x^3 = 0 at amplitude 1 is K(1/sqrt 2).
  const double K = 1.8540746773013719;
  CHECK(exact_period(1.0, 1) == doctest::Approx(4 * K).epsilon(1e-14));
  CHECK(exact_period(2.0, 1) == doctest::Approx(exact_period(1.0, 1) / 2).epsilon(1e-14));
  CHECK(exact_period(2.0, 3) == doctest::Approx(exact_period(1.0, 3) / 8).epsilon(1e-14));
  CHECK_THROWS_AS(exact_period(0.0, 1), InvalidArgument);

  for (int n : {1, 2}) {
    for (double phase : {0.0, 0.125, 0.5, 0.9}) {
      const double I = 3.7;
      const auto [x, v] = point_on_orbit(I, phase, n);
      CHECK(action_of(x, v, n) == doctest::Approx(I).epsilon(1e-12));
    }
    const auto [xh, vh] = point_on_orbit(5.0, 0.5, n);
    CHECK(xh == doctest::Approx(-amplitude_of_action(5.0, n)).epsilon(1e-10));
    CHECK(std::abs(vh) < 1e-9);
  }
  const auto [x0, v0] = point_on_orbit(0.0, 0.3, 1);
  CHECK(x0 == 0.0);
  CHECK(v0 == 0.0);
}

TEST_CASE("network validation") {
  DuffingNetwork net;
  net.m = 2;
  net.terms.push_back({{2, 2}, cosine(0.1)});
  CHECK_THROWS_AS(net.validate(), InvalidArgument);
  net.terms = {{{1, 1}, cosine(0.1)}};
  CHECK_NOTHROW(net.validate());
  net.terms = {{{1}, cosine(0.1)}};
  CHECK_THROWS_AS(net.validate(), InvalidArgument);
  net.terms = {{{1, 0}, {{1, {0.0, 0.5}}}}};
  CHECK_THROWS_AS(net.validate(), InvalidArgument);
  net.terms = {{{1, 0}, {{1, {0.0, 0.5}}, {-1, {0.0, -0.5}}}}};
  CHECK_NOTHROW(net.validate());
  CHECK(net.terms[0].value(std::numbers::pi / 2) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("forces match the coupling gradient") {
  const auto net = forced_pair(0.3);
  const std::vector<double> x{0.7, -1.1};
  const double t = 0.4, h = 1e-6;
  std::vector<double> a(2);
  net.acceleration(x, t, a);
  for (int i = 0; i < 2; ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double dF = (net.coupling(xp, t) - net.coupling(xm, t)) / (2 * h);
    CHECK(a[i] == doctest::Approx(-std::pow(x[i], 3) - dF).epsilon(1e-8));
  }
}

TEST_CASE("unforced single oscillator") {
  const auto net = single(1);
  const double P = exact_period(1.0, 1);
  const std::vector<double> x0{1.0}, v0{0.0};

  SUBCASE("secular action drift over 1e3 periods at dt = period / 1000") {
    const auto tr = simulate(net, x0, v0, 1000 * P, P / 1000, Integrator::Verlet);
    const std::size_t per = 1000;
    double first = 0.0, last = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      first += tr.action_at(k, 0);
      last += tr.action_at(tr.size() - 1 - k, 0);
    }
    CHECK(std::abs(first - last) / per <= 1e-8);
  }

  SUBCASE("pointwise action deviation over 1e3 periods at dt = period / 50000") {
    SimOptions opt;
    opt.sample_every = 50;
    const auto tr = simulate(net, x0, v0, 1000 * P, P / 50000, Integrator::Verlet, opt);
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::abs(tr.action_at(k, 0) - 1.0));
    CHECK(worst <= 1e-8);
    const auto f = frequency_extract(tr, 0);
    CHECK(std::abs(f.frequency - exact_frequency(1.0, 1)) <= 1e-6);
  }

  SUBCASE("energy drift over 1e4 steps") {
    const auto tr = simulate(net, x0, v0, P, P / 10000, Integrator::Verlet);
    double worst = 0.0;
    for (double e : tr.energy) worst = std::max(worst, std::abs(e - tr.energy.front()));
    CHECK(worst / tr.energy.front() <= 1e-6);
  }

  SUBCASE("time reversibility") {
    const double dt = P / 2000;
    const auto fwd = simulate(net, x0, v0, 50 * P, dt, Integrator::Verlet);
    const std::vector<double> x1{fwd.x.back()}, v1{fwd.v.back()};
    const auto back = simulate(net, x1, v1, 50 * P, -dt, Integrator::Verlet);
    CHECK(std::abs(back.x.back() - 1.0) <= 1e-6);
    CHECK(std::abs(back.v.back()) <= 1e-6);
  }

  SUBCASE("verlet and rk4 reference agree over 100 periods") {
    const double dt = P / 50000;
    SimOptions ov, orr;
    ov.sample_every = 10000;
    orr.sample_every = 100000;
    const auto a = simulate(net, x0, v0, 100 * P, dt, Integrator::Verlet, ov);
    const auto b = simulate(net, x0, v0, 100 * P, dt / 10, Integrator::Rk4Reference, orr);
    CHECK(a.times.back() == doctest::Approx(b.times.back()).epsilon(1e-12));
    CHECK(std::abs(a.x.back() - b.x.back()) <= 1e-6);
    CHECK(std::abs(a.v.back() - b.v.back()) <= 1e-6);
  }

  SUBCASE("bounded by the level set") {
    const auto tr = simulate(net, x0, v0, 20 * P, P / 20000, Integrator::Verlet);
    const double sup = boundedness_sup(tr);
    CHECK(sup <= 1.0 + std::sqrt(0.5));
    CHECK(sup == doctest::Approx(level_set_sup()).epsilon(1e-6));
  }

  SUBCASE("frequency matches the period integral and scales like A^n") {
    for (int n : {1, 2}) {
      const auto netn = single(n);
      double f[2];
      for (int q = 0; q < 2; ++q) {
        const double A = q == 0 ? 1.0 : 2.0;
        const double Pa = exact_period(A, n);
        const std::vector<double> xa{A}, va{0.0};
        const auto tr = simulate(netn, xa, va, 200 * Pa, Pa / 2000, Integrator::Verlet);
        const auto est = frequency_extract(tr, 0);
        CHECK(est.quasi_periodic);
        CHECK(std::abs(est.frequency - exact_frequency(A, n)) <= 1e-6 * exact_frequency(A, n));
        f[q] = est.frequency;
      }
      CHECK(std::abs(f[1] / f[0] - std::pow(2.0, n)) <= 1e-3);
    }
  }
}

TEST_CASE("period ratio at tiny amplitude") {
  for (int n : {1, 2, 3}) {
    const auto net = single(n);
    double T[2];
    for (int q = 0; q < 2; ++q) {
      const double A = q == 0 ? 1e-4 : 5e-5;
      const double Pa = exact_period(A, n);
      const std::vector<double> x0{A}, v0{0.0};
      const auto tr = simulate(net, x0, v0, 120 * Pa, Pa / 500, Integrator::Verlet);
      T[q] = 2 * std::numbers::pi / frequency_extract(tr, 0).frequency;
    }
    CHECK(T[1] / T[0] == doctest::Approx(std::pow(2.0, n)).epsilon(0.02));
  }
}

TEST_CASE("simulate preconditions and escapes") {
  const auto net = single(1);
  const std::vector<double> x0{10.0}, v0{0.0};
  CHECK_THROWS_AS(simulate(net, x0, v0, 1.0, 0.1, Integrator::Verlet), InvalidArgument);
  CHECK_THROWS_AS(simulate(net, std::vector<double>{1.0, 2.0}, v0, 1.0, 0.01, Integrator::Verlet), InvalidArgument);
  SimOptions opt;
  opt.escape_bound = 5.0;
  const auto tr = simulate(net, x0, v0, 10.0, 1e-3, Integrator::Verlet, opt);
  CHECK(tr.escaped);
  CHECK(tr.finite);
  CHECK(tr.stop_time < 10.0);

  const std::vector<double> z{0.0, 0.0};
  DuffingNetwork coupled;
  coupled.m = 2;
  coupled.terms.push_back({{1, 1}, cosine(0.5)});
  coupled.terms.push_back({{2, 1}, cosine(0.5)});
  CHECK(boundedness_sup(simulate(coupled, z, z, 100.0, 0.01, Integrator::Verlet)) == 0.0);
}

TEST_CASE("autonomous coupling conserves energy") {
  DuffingNetwork net;
  net.m = 2;
  net.terms.push_back({{1, 1}, {{0, 0.2}}});
  const std::vector<double> x0{1.0, 0.5}, v0{0.0, 0.3};
  const double T = 1e4 * exact_period(1.0, 1);
  auto error_profile = [&](double dt) {
    SimOptions opt;
    opt.sample_every = 7;
    const auto tr = simulate(net, x0, v0, T, dt, Integrator::Verlet, opt);
    const std::size_t third = tr.size() / 3;
    double early = 0.0, late = 0.0;
    for (std::size_t k = 0; k < third; ++k) {
      early = std::max(early, std::abs(tr.energy[k] - tr.energy.front()));
      late = std::max(late, std::abs(tr.energy[tr.size() - 1 - k] - tr.energy.front()));
    }
    return std::pair{early, late};
  };
  const auto [e1, l1] = error_profile(0.02);
  const auto [e2, l2] = error_profile(0.01);
  MESSAGE("energy error dt=0.02: " << e1 << " / " << l1 << ", dt=0.01: " << e2 << " / " << l2);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
  CHECK(l1 < 1.5 * e1);
  CHECK(l2 < 1.5 * e2);
}

TEST_CASE("forced run stays near its unforced sup") {
  const std::vector<double> x0{1.0, 0.8}, v0{0.0, 0.0};
  const auto free = simulate(forced_pair(0.0), x0, v0, 1e4, 0.02, Integrator::Verlet);
  const auto forced = simulate(forced_pair(0.01), x0, v0, 1e4, 0.02, Integrator::Verlet);
  MESSAGE("unforced sup " << boundedness_sup(free) << ", forced sup " << boundedness_sup(forced));
  CHECK(boundedness_sup(forced) < 10 * boundedness_sup(free));
}

TEST_CASE("weighted Birkhoff rotation numbers") {
  SUBCASE("constant rotation") {
    std::vector<double> th(20000);
    for (std::size_t k = 0; k < th.size(); ++k) th[k] = 0.37 * 0.05 * k;
    const auto est = rotation_frequency(th, 0.05, 1e-6, 10);
    CHECK(std::abs(est.frequency - 0.37) <= 1e-10);
    CHECK(est.quasi_periodic);
  }

  SUBCASE("two-frequency signal") {
    const double w1 = 1.0, w2 = std::sqrt(2.0), dt = 0.1;
    std::vector<double> a1(10000), a2(10000);
    for (std::size_t k = 0; k < a1.size(); ++k) {
      const double t = dt * k;
      const auto z1 = std::polar(1.0, w1 * t) * (1.0 + 0.3 * std::polar(1.0, w2 * t));
      const auto z2 = std::polar(1.0, w2 * t) * (1.0 + 0.3 * std::polar(1.0, w1 * t));
      a1[k] = std::arg(z1);
      a2[k] = std::arg(z2);
    }
    CHECK(std::abs(rotation_frequency(a1, dt).frequency - w1) <= 1e-8);
    CHECK(std::abs(rotation_frequency(a2, dt).frequency - w2) <= 1e-8);
  }

  SUBCASE("error decays faster than 1/N") {
    const double w1 = 1.0, w2 = std::sqrt(2.0), dt = 0.1;
    auto err = [&](std::size_t N) {
      std::vector<double> a(N);
      for (std::size_t k = 0; k < N; ++k) {
        const double t = dt * k;
        a[k] = std::arg(std::polar(1.0, w1 * t) * (1.0 + 0.3 * std::polar(1.0, w2 * t)));
      }
      return std::abs(rotation_frequency(a, dt, 1e-6, 1).frequency - w1);
    };
    const double e1 = err(500), e2 = err(1000), e4 = err(2000);
    MESSAGE("errors " << e1 << " " << e2 << " " << e4);
    CHECK(e2 < e1 / 4);
    CHECK(e4 < std::max(e2 / 4, 1e-13));
  }

  SUBCASE("insufficient winding") {
    std::vector<double> th(1000);
    for (std::size_t k = 0; k < th.size(); ++k) th[k] = 0.01 * k;
    CHECK_THROWS_AS(rotation_frequency(th, 0.1), InsufficientWinding);
    std::vector<double> jumpy{0.0, 3.0, 0.0, 3.0, 0.0};
    CHECK_THROWS_AS(rotation_frequency(jumpy, 0.1, 1e-6, 0), InsufficientWinding);
    TrajectoryRecord still;
    still.m = 1;
    still.dt = 0.1;
    still.times = {0.0, 0.1, 0.2, 0.3};
    still.x = still.v = still.action = {0, 0, 0, 0};
    CHECK_THROWS_AS(frequency_extract(still, 0), InsufficientWinding);
  }

  CHECK(weighted_birkhoff_mean(std::vector<double>{2.0, 2.0, 2.0}) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("stability fraction") {
  ShellOptions opt;
  opt.T = 2000;
  opt.n_samples = 50;

  SUBCASE("unforced shells are fully stable") {
    const auto res = stability_fraction(forced_pair(0.0), 10.0, opt, 3);
    CHECK(res.fraction == 1.0);
    for (const auto& s : res.samples) {
      double total = 0.0;
      for (double I : s.actions) total += I;
      CHECK(total >= 10.0 * (1 - 1e-12));
      CHECK(total <= 20.0 * (1 + 1e-12));
    }
  }

  SUBCASE("seed reproducibility") {
    opt.n_samples = 10;
    const auto a = stability_fraction(forced_pair(0.01), 10.0, opt, 11);
    const auto b = stability_fraction(forced_pair(0.01), 10.0, opt, 11);
    const auto c = stability_fraction(forced_pair(0.01), 10.0, opt, 12);
    CHECK(a.fraction == b.fraction);
    for (std::size_t s = 0; s < a.samples.size(); ++s) {
      CHECK(a.samples[s].x0 == b.samples[s].x0);
      CHECK(a.samples[s].sup == b.samples[s].sup);
    }
    CHECK(a.samples[0].x0 != c.samples[0].x0);
  }

  SUBCASE("invalid shells") {
    CHECK_THROWS_AS(stability_fraction(forced_pair(0.0), -1.0, opt, 1), InvalidArgument);
    opt.c4 = 1.0;
    CHECK_THROWS_AS(stability_fraction(forced_pair(0.0), 10.0, opt, 1), InvalidArgument);
  }
}
