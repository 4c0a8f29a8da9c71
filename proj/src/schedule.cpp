#include "finkam/schedule.hpp"

#include <cmath>
#include <string>

#include "finkam/errors.hpp"

namespace finkam {

namespace {

void require_index(std::int64_t j) {
  if (j < 0) throw InvalidArgument("schedule index must be nonnegative, got " + std::to_string(j));
}

// (1 + mu3)^n without overflow concerns for the step counts we meet.
double growth(double mu3, std::int64_t n) { return std::exp(static_cast<double>(n) * std::log1p(mu3)); }

}  // namespace

double ScheduleParams::log_eps(std::int64_t j) const {
  require_index(j);
  const double log_e = -dio.log_inv_eps;
  if (j <= m0) return static_cast<double>(j) * dio.B / static_cast<double>(m0) * log_e;
  return dio.B * log_e * growth(mu3, j - m0);
}

double ScheduleParams::eps(std::int64_t j) const { return std::exp(log_eps(j)); }

double ScheduleParams::s(std::int64_t j) const { return std::exp(log_eps(j + 1) / dio.ell); }

double ScheduleParams::log_r(std::int64_t j) const {
  require_index(j);
  const double log_e = -dio.log_inv_eps;
  auto phase_one = [&](std::int64_t i) {
    return log_e * (static_cast<double>(i + 1) * (dio.tau1 + 1) * dio.B / (dio.ell * static_cast<double>(m0)) +
                    mu1 + dio.B / dio.ell);
  };
  if (j <= m0) return phase_one(j);
  return phase_one(m0) * growth(mu3, j - m0);
}

double ScheduleParams::r(std::int64_t j) const { return std::exp(log_r(j)); }

double ScheduleParams::K(std::int64_t j) const { return 2 * dio.B / s(j) * dio.log_inv_eps; }

double ScheduleParams::log_eps_tilde(std::int64_t j) const {
  require_index(j);
  return -dio.B * dio.log_inv_eps * growth(mu3, j);
}

double ScheduleParams::eps_tilde(std::int64_t j) const { return std::exp(log_eps_tilde(j)); }

double ScheduleParams::log_s_tilde(std::int64_t j) const {
  require_index(j);
  return log_s_tilde0 * growth(mu3, j);
}

double ScheduleParams::s_tilde(std::int64_t j) const { return std::exp(log_s_tilde(j)); }

double ScheduleParams::log_r_tilde(std::int64_t j) const {
  require_index(j);
  return log_r_tilde0 * growth(mu3, j);
}

double ScheduleParams::r_tilde(std::int64_t j) const { return std::exp(log_r_tilde(j)); }

double ScheduleParams::K_tilde(std::int64_t j) const { return 2.0 / s_tilde(j) * -log_eps_tilde(j); }

double ScheduleParams::h_cap(std::int64_t j) const { return h0 * (2 - std::ldexp(1.0, -static_cast<int>(std::min<std::int64_t>(j, 1000)))); }

double ScheduleParams::M_cap(std::int64_t j) const { return M0 * (2 - std::ldexp(1.0, -static_cast<int>(std::min<std::int64_t>(j, 1000)))); }

ScheduleParams make_schedule(const DioParams& p) {
  ScheduleParams s;
  s.dio = p;
  const double a = p.a, b = p.b, B = p.B, ell = p.ell, t1 = p.tau1, t2 = p.tau2;
  s.mu1 = p.mu_term;
  s.mu2 = 2 * s.mu1;
  s.mu3 = (a - b) * p.mu / (10 * B);

  const double den1 = a - b - 2 * (t1 + 2) * B / ell - 2 * s.mu1;
  const double den2 = B - 2 * a - 2 * (t2 + 1) * b - 2 * (2 * t1 + 5) * (t2 + 1) * B / ell -
                      8 * s.mu1 * (t2 + 1) - 2 * s.mu2;
  if (!(den1 > 0) || !(den2 > 0))
    throw InvalidArgument("schedule: the parameters leave the admissible regime (E has a denominator " +
                          std::to_string(den1 > 0 ? den2 : den1) + " <= 0)");
  s.E = std::max(4 * B / den1, 2 * (2 * t1 + 3) * (t2 + 1) * B / den2);
  if (!(s.E < 9e18)) throw InvalidArgument("schedule: m0 is not representable");
  s.m0 = 10 + static_cast<std::int64_t>(std::floor(s.E));

  const double log_e = -p.log_inv_eps;
  const double m0 = static_cast<double>(s.m0);
  s.log_s_tilde0 = log_e * (b + (m0 + 1) * (2 * t1 + 3) * B / (ell * m0) + 4 * s.mu1 + 2 * B / ell);
  s.log_r_tilde0 = log_e * (a + (t2 + 1) * b + (m0 + 1) * (2 * t1 + 3) * (t2 + 1) * B / (m0 * ell) +
                            4 * s.mu1 * (t2 + 1) + s.mu2 + 2 * B * (t2 + 1) / ell);

  for (std::int64_t j : {std::int64_t{0}, std::int64_t{1}, s.m0 - 1, s.m0, s.m0 + 1, s.m0 + 2}) {
    if (!(s.log_eps(j + 1) < s.log_eps(j) && s.s(j + 1) < s.s(j) && s.log_r(j + 1) < s.log_r(j) &&
          s.r(j) < s.s(j)))
      throw InvalidArgument("schedule: phase-one ladders are not strictly decreasing at j=" + std::to_string(j));
    if (!(s.log_eps_tilde(j + 1) < s.log_eps_tilde(j) && s.log_s_tilde(j + 1) < s.log_s_tilde(j) &&
          s.log_r_tilde(j + 1) < s.log_r_tilde(j)))
      throw InvalidArgument("schedule: phase-two ladders are not strictly decreasing at j=" + std::to_string(j));
  }
  return s;
}

}  // namespace finkam
