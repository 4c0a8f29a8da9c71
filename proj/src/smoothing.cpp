#include "finkam/smoothing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "finkam/errors.hpp"

namespace finkam {

namespace {

double psi(double x) { return x <= 0.0 ? 0.0 : std::exp(-1.0 / x); }

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 8> kGLx{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                     -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                     0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGLw{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                     0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                     0.2223810344533745, 0.1012285362903763};

std::complex<double> integrate_kernel(const SmoothingKernel& kernel, int beta, std::complex<double> z, int panels) {
  const std::complex<double> I(0.0, 1.0);
  // The integrand is smooth on each of [-a1,-plateau], [-plateau,plateau], [plateau,a1].
  const std::array<double, 4> cuts{-kernel.a1, -kernel.plateau, kernel.plateau, kernel.a1};
  std::complex<double> total = 0.0;
  for (int seg = 0; seg < 3; ++seg) {
    const double h = (cuts[seg + 1] - cuts[seg]) / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = cuts[seg] + (p + 0.5) * h;
      for (std::size_t q = 0; q < kGLx.size(); ++q) {
        const double xi = mid + 0.5 * h * kGLx[q];
        total += 0.5 * h * kGLw[q] * kernel.multiplier(std::abs(xi)) * std::pow(I * xi, beta) * std::exp(I * xi * z);
      }
    }
  }
  return total / (2.0 * std::numbers::pi);
}

// Off-grid peaks of the oscillating kernel may exceed the grid-fitted envelope slightly.
constexpr double kGridMargin = 1.05;

}  // namespace

void SmoothingKernel::validate() const {
  if (!(plateau > 0.0) || !(a1 > plateau)) throw InvalidArgument("smoothing kernel: need 0 < plateau < a1");
}

double SmoothingKernel::multiplier(double xi_norm) const {
  if (xi_norm <= plateau) return 1.0;
  if (xi_norm >= a1) return 0.0;
  const double x = (xi_norm - plateau) / (a1 - plateau);
  const double up = psi(x);
  return 1.0 - up / (up + psi(1.0 - x));
}

double SmoothingKernel::multiplier(const ModeIndex& mode, double s) const {
  double sq = static_cast<double>(mode.l) * mode.l;
  for (int v : mode.k) sq += static_cast<double>(v) * v;
  return multiplier(s * std::sqrt(sq));
}

DecompositionSchedule DecompositionSchedule::geometric(double s0, double ratio, int levels, double ell) {
  DecompositionSchedule sched;
  sched.target_ell = ell;
  double s = s0;
  for (int i = 0; i < levels; ++i, s *= ratio) sched.s_list.push_back(s);
  sched.validate();
  return sched;
}

void DecompositionSchedule::validate() const {
  if (s_list.empty()) throw InvalidArgument("decomposition schedule: empty s_list");
  if (!(s_list.front() > 0.0) || s_list.front() > 0.25) throw InvalidArgument("decomposition schedule: need 0 < s_0 <= 1/4");
  for (std::size_t i = 1; i < s_list.size(); ++i)
    if (!(s_list[i] > 0.0) || !(s_list[i] < s_list[i - 1]))
      throw InvalidArgument("decomposition schedule: s_nu must be positive and strictly decreasing");
}

Series smooth(const Series& f, double s, const SmoothingKernel& kernel) {
  if (!(s > 0.0) || s > 1.0) throw InvalidArgument("smooth: need 0 < s <= 1");
  kernel.validate();
  return f.mode_multiplied([&](const ModeIndex& m) { return Complex(kernel.multiplier(m, s)); });
}

std::vector<DecompositionPiece> decompose(const Series& f, const DecompositionSchedule& sched,
                                          const SmoothingKernel& kernel) {
  sched.validate();
  kernel.validate();
  const double last = 2.0 * sched.s_list.back();
  for (std::size_t p = 0; p < f.size(); ++p)
    if (kernel.multiplier(f.mode(p), last) != 1.0)
      throw ScheduleTooShort("decompose: the last level 2*s = " + std::to_string(last) +
                             " does not pass every stored mode; supply more levels");
  std::vector<DecompositionPiece> pieces;
  std::vector<double> prev(f.size(), 0.0);
  for (double s : sched.s_list) {
    SeriesAccumulator acc(f);
    for (std::size_t p = 0; p < f.size(); ++p) {
      const double cur = kernel.multiplier(f.mode(p), 2.0 * s);
      const double diff = cur - prev[p];
      if (diff != 0.0) acc.add(f.mode(p), f.coeffs(p), diff);
      prev[p] = cur;
    }
    pieces.push_back({acc.finish(), 2.0 * s});
  }
  return pieces;
}

std::complex<double> kernel_derivative(const SmoothingKernel& kernel, int beta, std::complex<double> z) {
  kernel.validate();
  if (beta < 0) throw InvalidArgument("kernel_derivative: negative derivative order");
  const double scale = 1.0 + std::abs(z) + std::exp(kernel.a1 * std::abs(z.imag()));
  std::complex<double> prev = integrate_kernel(kernel, beta, z, 16);
  for (int panels = 32; panels <= 4096; panels *= 2) {
    const std::complex<double> next = integrate_kernel(kernel, beta, z, panels);
    if (std::abs(next - prev) <= 1e-13 * scale) return next;
    prev = next;
  }
  throw QuadratureNonConvergence("kernel quadrature did not settle at z = (" + std::to_string(z.real()) + ", " +
                                 std::to_string(z.imag()) + ")");
}

std::string KernelDecayReport::csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,abs_K,bound\n";
  for (const auto& r : rows) out << r.x << ',' << r.y << ',' << r.abs_k << ',' << r.bound << '\n';
  return out.str();
}

KernelDecayReport validate_kernel_decay(const SmoothingKernel& kernel, int beta, int p) {
  if (beta < 0 || beta > 4 || p < 0 || p > 4) throw InvalidArgument("validate_kernel_decay: need 0 <= beta, p <= 4");
  KernelDecayReport report;
  report.beta = beta;
  report.p = p;
  auto envelope = [&](double x, double y) { return std::pow(1.0 + std::abs(x), -p) * std::exp(kernel.a1 * std::abs(y)); };

  // The Gevrey-type kernel decays slowly at first, so the fitting window must reach
  // well past the maximum of |K| (1+|x|)^p; the check grid is offset from it.
  const std::vector<double> fit_y{0.0, 0.5, 1.0, 2.0, 4.0};
  const std::vector<double> wide_y{0.0, 0.75, 3.0, 6.0, 8.0};
  std::vector<KernelDecayRow> fit, wide;
  for (double y : fit_y)
    for (int i = 0; i <= 600; ++i) fit.push_back({0.25 * i, y, 0.0, 0.0});
  for (double y : wide_y)
    for (int i = 0; i <= 300; ++i) wide.push_back({0.1 + 1.3 * i, y, 0.0, 0.0});

  for (auto& row : fit) {
    row.abs_k = std::abs(kernel_derivative(kernel, beta, {row.x, row.y}));
    report.c = std::max(report.c, row.abs_k / envelope(row.x, row.y));
  }
  report.passed = true;
  for (auto& row : wide) {
    row.abs_k = std::abs(kernel_derivative(kernel, beta, {row.x, row.y}));
    row.bound = report.c * envelope(row.x, row.y);
    if (row.abs_k > kGridMargin * row.bound + 1e-15) report.passed = false;
  }
  for (auto& row : fit) row.bound = report.c * envelope(row.x, row.y);
  report.rows = std::move(fit);
  report.rows.insert(report.rows.end(), wide.begin(), wide.end());
  return report;
}

Series algebraic_decay_series(int dim, int degree, std::vector<double> center, double ell, int cutoff,
                              double amplitude) {
  if (cutoff < 0) throw InvalidArgument("algebraic_decay_series: negative cutoff");
  SeriesAccumulator acc(dim, degree, std::move(center), cutoff);
  ModeIndex m;
  // Odometer over the box [-cutoff, cutoff]^{dim+1}, keeping the 1-norm ball.
  std::vector<int> idx(dim + 1, -cutoff);
  while (true) {
    for (int j = 0; j < dim; ++j) m.k[j] = idx[j];
    m.l = idx[dim];
    if (m.order() <= cutoff) acc.slot(m)[0] = amplitude * std::pow(1.0 + m.order(), -ell - 2.0);
    int j = 0;
    while (j <= dim && ++idx[j] > cutoff) idx[j++] = -cutoff;
    if (j > dim) break;
  }
  return acc.finish();
}

DecayFit fit_decay_law(const std::vector<DecompositionPiece>& pieces, const DecompositionSchedule& sched,
                       int levels) {
  if (levels < 2 || static_cast<std::size_t>(levels) >= pieces.size())
    throw InvalidArgument("fit_decay_law: need 2 <= levels < number of pieces");
  DecayFit fit;
  std::vector<double> xs, ys;
  double cmin = 1e300, cmax = 0.0;
  for (int nu = 0; nu < levels; ++nu) {
    const auto& next = pieces[nu + 1];
    const double norm = majorant_norm(next.piece, {next.width, 0.0, next.piece.center()});
    fit.norms.push_back(norm);
    xs.push_back(std::log(sched.s_list[nu]));
    ys.push_back(std::log(norm));
    const double c = norm / std::pow(sched.s_list[nu], sched.target_ell);
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  fit.slope = sxy / sxx;
  fit.c_spread = cmax / cmin;
  return fit;
}

}  // namespace finkam
