#pragma once

#include <cstdint>

#include "finkam/diophantine.hpp"

namespace finkam {

/// Parameter ladders of the two iteration phases. Every sequence is kept in
/// logarithmic form so that values like eps^B with B in the tens stay representable.
struct ScheduleParams {
  DioParams dio;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu3 = 0.0;
  double E = 0.0;
  std::int64_t m0 = 0;
  double log_s_tilde0 = 0.0;
  double log_r_tilde0 = 0.0;
  double h0 = 1.0;
  double M0 = 1.0;

  double log_eps(std::int64_t j) const;
  double eps(std::int64_t j) const;
  double s(std::int64_t j) const;
  double log_r(std::int64_t j) const;
  double r(std::int64_t j) const;
  double K(std::int64_t j) const;

  double log_eps_tilde(std::int64_t j) const;
  double eps_tilde(std::int64_t j) const;
  double log_s_tilde(std::int64_t j) const;
  double s_tilde(std::int64_t j) const;
  double log_r_tilde(std::int64_t j) const;
  double r_tilde(std::int64_t j) const;
  double K_tilde(std::int64_t j) const;

  double h_cap(std::int64_t j) const;
  double M_cap(std::int64_t j) const;
};

/// Throws InvalidArgument when a denominator of E is not positive.
ScheduleParams make_schedule(const DioParams& p);

}  // namespace finkam
