#include "finkam/series.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "finkam/errors.hpp"

namespace finkam {

int ModeIndex::order() const noexcept {
  int s = std::abs(l);
  for (int v : k) s += std::abs(v);
  return s;
}

bool ModeIndex::angle_free() const noexcept {
  return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

ModeIndex operator+(const ModeIndex& a, const ModeIndex& b) noexcept {
  ModeIndex r;
  for (int j = 0; j < kMaxAngles; ++j) r.k[j] = a.k[j] + b.k[j];
  r.l = a.l + b.l;
  return r;
}

ModeIndex operator-(const ModeIndex& a) noexcept {
  ModeIndex r;
  for (int j = 0; j < kMaxAngles; ++j) r.k[j] = -a.k[j];
  r.l = -a.l;
  return r;
}

std::size_t ModeIndexHash::operator()(const ModeIndex& m) const noexcept {
  std::size_t h = static_cast<std::size_t>(m.l) * 0x9E3779B97F4A7C15ull;
  for (int v : m.k) h = (h ^ static_cast<std::size_t>(v + 0x5bd1e995)) * 0x100000001B3ull;
  return h;
}

namespace {

void require_compatible(const Series& a, const Series& b, const char* op) {
  if (a.dim() != b.dim()) throw DomainMismatch(std::string(op) + ": dimension mismatch");
  if (a.center() != b.center()) throw DomainMismatch(std::string(op) + ": action centers differ");
}

bool all_zero(std::span<const Complex> p) {
  return std::all_of(p.begin(), p.end(), [](const Complex& c) { return c == Complex(0.0); });
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Values of every basis monomial at the offset x.
std::vector<Complex> monomial_values(const MonomialBasis& basis, std::span<const Complex> x) {
  std::vector<Complex> out(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    Complex v = 1.0;
    const Exponent& e = basis.exponent(i);
    for (int j = 0; j < basis.dim(); ++j)
      for (int p = 0; p < e[j]; ++p) v *= x[j];
    out[i] = v;
  }
  return out;
}

}  // namespace

Series::Series(int dim, int degree, std::vector<double> center, int angle_cutoff)
    : dim_(dim), degree_(degree), cutoff_(angle_cutoff), center_(std::move(center)) {
  if (dim < 1 || dim > kMaxAngles) throw InvalidArgument("series: dimension must be in 1..4");
  if (degree < 0) throw InvalidArgument("series: negative Taylor degree");
  if (angle_cutoff < 0) throw InvalidArgument("series: negative angle cutoff");
  if (static_cast<int>(center_.size()) != dim) throw InvalidArgument("series: center length != dim");
  nb_ = monomial_basis(dim, degree).size();
}

Series Series::constant(int dim, int degree, std::vector<double> center, Complex value) {
  return monomial(dim, degree, std::move(center), ModeIndex{}, Exponent{}, value);
}

Series Series::action_coordinate(int dim, int degree, std::vector<double> center, int var) {
  if (var < 0 || var >= dim) throw InvalidArgument("series: action index out of range");
  Exponent e{};
  e[var] = 1;
  return monomial(dim, degree, std::move(center), ModeIndex{}, e, 1.0);
}

Series Series::monomial(int dim, int degree, std::vector<double> center, const ModeIndex& mode,
                        const Exponent& alpha, Complex c) {
  SeriesAccumulator acc(dim, degree, std::move(center), mode.order());
  const int idx = monomial_basis(dim, degree).index_of(alpha);
  if (idx < 0) throw InvalidArgument("series: monomial exceeds the Taylor degree");
  for (int j = dim; j < kMaxAngles; ++j)
    if (mode.k[j] != 0) throw InvalidArgument("series: mode has entries beyond dim");
  acc.slot(mode)[idx] += c;
  return acc.finish();
}

std::span<const Complex> Series::find(const ModeIndex& mode) const {
  auto it = std::lower_bound(modes_.begin(), modes_.end(), mode);
  if (it == modes_.end() || *it != mode) return {};
  return coeffs(static_cast<std::size_t>(it - modes_.begin()));
}

Complex Series::coefficient(const ModeIndex& mode, const Exponent& alpha) const {
  auto p = find(mode);
  if (p.empty()) return 0.0;
  const int idx = basis().index_of(alpha);
  return idx < 0 ? Complex(0.0) : p[idx];
}

int Series::max_order() const noexcept {
  int m = 0;
  for (const auto& md : modes_) m = std::max(m, md.order());
  return m;
}

Series Series::with_cutoff(int cutoff) const {
  SeriesAccumulator acc(dim_, degree_, center_, cutoff);
  for (std::size_t p = 0; p < size(); ++p)
    if (modes_[p].order() <= cutoff) acc.add(modes_[p], coeffs(p));
  return acc.finish();
}

Series Series::with_degree(int degree) const {
  SeriesAccumulator acc(dim_, degree, center_, cutoff_);
  const std::size_t n = std::min(nb_, monomial_basis(dim_, degree).size());
  for (std::size_t p = 0; p < size(); ++p) acc.add(modes_[p], coeffs(p).first(n));
  return acc.finish();
}

Series Series::rebased(const std::vector<double>& new_center) const {
  if (static_cast<int>(new_center.size()) != dim_) throw DomainMismatch("rebase: center length != dim");
  const MonomialBasis& b = basis();
  std::vector<double> delta(dim_);
  for (int j = 0; j < dim_; ++j) delta[j] = new_center[j] - center_[j];
  // shift[a * nb + c]: weight of old monomial a in new monomial c.
  std::vector<double> shift(nb_ * nb_, 0.0);
  for (std::size_t a = 0; a < nb_; ++a) {
    const Exponent& ea = b.exponent(a);
    for (std::size_t c = 0; c < nb_; ++c) {
      const Exponent& ec = b.exponent(c);
      double w = 1.0;
      for (int j = 0; j < dim_ && w != 0.0; ++j) {
        if (ec[j] > ea[j]) { w = 0.0; break; }
        w *= binomial(ea[j], ec[j]) * std::pow(delta[j], ea[j] - ec[j]);
      }
      shift[a * nb_ + c] = w;
    }
  }
  SeriesAccumulator acc(dim_, degree_, new_center, cutoff_);
  for (std::size_t p = 0; p < size(); ++p) {
    auto src = coeffs(p);
    auto dst = acc.slot(modes_[p]);
    for (std::size_t a = 0; a < nb_; ++a) {
      if (src[a] == Complex(0.0)) continue;
      for (std::size_t c = 0; c < nb_; ++c) dst[c] += src[a] * shift[a * nb_ + c];
    }
  }
  return acc.finish();
}

Series Series::mode_multiplied(const std::function<Complex(const ModeIndex&)>& fn) const {
  SeriesAccumulator acc(*this);
  for (std::size_t p = 0; p < size(); ++p) {
    const Complex m = fn(modes_[p]);
    if (m != Complex(0.0)) acc.add(modes_[p], coeffs(p), m);
  }
  return acc.finish();
}

Series Series::filtered(const std::function<bool(const ModeIndex&)>& keep) const {
  SeriesAccumulator acc(*this);
  for (std::size_t p = 0; p < size(); ++p)
    if (keep(modes_[p])) acc.add(modes_[p], coeffs(p));
  return acc.finish();
}

Series Series::taylor_slice(const Exponent& alpha) const {
  const int idx = basis().index_of(alpha);
  SeriesAccumulator acc(*this);
  if (idx < 0) return acc.finish();
  for (std::size_t p = 0; p < size(); ++p) acc.slot(modes_[p])[0] = coeffs(p)[idx];
  return acc.finish();
}

Complex Series::evaluate(std::span<const Complex> theta, Complex t, std::span<const Complex> action) const {
  if (static_cast<int>(theta.size()) < dim_ || static_cast<int>(action.size()) < dim_)
    throw InvalidArgument("evaluate: point has too few coordinates");
  std::vector<Complex> x(dim_);
  for (int j = 0; j < dim_; ++j) x[j] = action[j] - center_[j];
  const auto mono = monomial_values(basis(), x);
  Complex total = 0.0;
  for (std::size_t p = 0; p < size(); ++p) {
    const ModeIndex& m = modes_[p];
    Complex phase = static_cast<double>(m.l) * t;
    for (int j = 0; j < dim_; ++j) phase += static_cast<double>(m.k[j]) * theta[j];
    auto c = coeffs(p);
    Complex poly = 0.0;
    for (std::size_t a = 0; a < nb_; ++a) poly += c[a] * mono[a];
    total += poly * std::exp(Complex(0.0, 1.0) * phase);
  }
  return total;
}

double Series::evaluate(std::span<const double> theta, double t, std::span<const double> action) const {
  std::vector<Complex> th(theta.begin(), theta.end()), ac(action.begin(), action.end());
  return evaluate(th, Complex(t), ac).real();
}

bool Series::is_real(double tol) const {
  for (std::size_t p = 0; p < size(); ++p) {
    auto mine = coeffs(p);
    auto other = find(-modes_[p]);
    for (std::size_t a = 0; a < nb_; ++a) {
      const Complex partner = other.empty() ? Complex(0.0) : std::conj(other[a]);
      if (std::abs(mine[a] - partner) > tol) return false;
    }
  }
  return true;
}

SeriesAccumulator::SeriesAccumulator(int dim, int degree, std::vector<double> center, int cutoff)
    : proto_(dim, degree, std::move(center), cutoff) {}

SeriesAccumulator::SeriesAccumulator(const Series& like)
    : SeriesAccumulator(like.dim(), like.degree(), like.center(), like.angle_cutoff()) {}

std::span<Complex> SeriesAccumulator::slot(const ModeIndex& mode) {
  const std::size_t nb = proto_.nb_;
  auto [it, inserted] = index_.try_emplace(mode, modes_.size());
  if (inserted) {
    modes_.push_back(mode);
    coeffs_.resize(coeffs_.size() + nb, Complex(0.0));
  }
  return {coeffs_.data() + it->second * nb, nb};
}

void SeriesAccumulator::add(const ModeIndex& mode, std::span<const Complex> poly, Complex scale) {
  auto dst = slot(mode);
  const std::size_t n = std::min(dst.size(), poly.size());
  for (std::size_t a = 0; a < n; ++a) dst[a] += scale * poly[a];
}

Series SeriesAccumulator::finish() {
  const std::size_t nb = proto_.nb_;
  std::vector<std::size_t> order(modes_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return modes_[x] < modes_[y]; });
  Series out = proto_;
  for (std::size_t idx : order) {
    std::span<const Complex> block(coeffs_.data() + idx * nb, nb);
    if (modes_[idx].order() > proto_.cutoff_ || all_zero(block)) continue;
    out.modes_.push_back(modes_[idx]);
    out.coeffs_.insert(out.coeffs_.end(), block.begin(), block.end());
  }
  index_.clear();
  modes_.clear();
  coeffs_.clear();
  return out;
}

namespace {

Series combine(const Series& a, const Series& b, Complex sb, const char* op) {
  require_compatible(a, b, op);
  SeriesAccumulator acc(a.dim(), std::max(a.degree(), b.degree()), a.center(),
                        std::max(a.angle_cutoff(), b.angle_cutoff()));
  for (std::size_t p = 0; p < a.size(); ++p) acc.add(a.mode(p), a.coeffs(p));
  for (std::size_t p = 0; p < b.size(); ++p) acc.add(b.mode(p), b.coeffs(p), sb);
  return acc.finish();
}

}  // namespace

Series operator+(const Series& a, const Series& b) { return combine(a, b, 1.0, "add"); }
Series operator-(const Series& a, const Series& b) { return combine(a, b, -1.0, "subtract"); }
Series operator-(const Series& a) { return Complex(-1.0) * a; }

Series operator*(Complex c, const Series& a) {
  SeriesAccumulator acc(a);
  if (c == Complex(0.0)) return acc.finish();
  for (std::size_t p = 0; p < a.size(); ++p) acc.add(a.mode(p), a.coeffs(p), c);
  return acc.finish();
}

Series operator*(const Series& a, const Series& b) {
  require_compatible(a, b, "multiply");
  const int degree = std::max(a.degree(), b.degree());
  const int cutoff = std::max(a.angle_cutoff(), b.angle_cutoff());
  const MonomialBasis& basis = monomial_basis(a.dim(), degree);
  SeriesAccumulator acc(a.dim(), degree, a.center(), cutoff);
  const std::size_t na = a.basis_size(), nb = b.basis_size();
  for (std::size_t p = 0; p < a.size(); ++p) {
    auto ca = a.coeffs(p);
    for (std::size_t q = 0; q < b.size(); ++q) {
      const ModeIndex m = a.mode(p) + b.mode(q);
      if (m.order() > cutoff) continue;
      auto cb = b.coeffs(q);
      auto dst = acc.slot(m);
      for (std::size_t i = 0; i < na; ++i) {
        if (ca[i] == Complex(0.0)) continue;
        for (std::size_t j = 0; j < nb; ++j) {
          const int k = basis.product_index(i, j);
          if (k >= 0) dst[k] += ca[i] * cb[j];
        }
      }
    }
  }
  return acc.finish();
}

Series derive(const Series& f, Variable var) {
  const Complex I(0.0, 1.0);
  switch (var.kind) {
    case Variable::Kind::Theta:
      if (var.index < 0 || var.index >= f.dim()) throw InvalidArgument("derive: angle index out of range");
      return f.mode_multiplied([&](const ModeIndex& m) { return I * static_cast<double>(m.k[var.index]); });
    case Variable::Kind::Time:
      return f.mode_multiplied([&](const ModeIndex& m) { return I * static_cast<double>(m.l); });
    case Variable::Kind::Action: {
      if (var.index < 0 || var.index >= f.dim()) throw InvalidArgument("derive: action index out of range");
      if (f.degree() == 0) throw InvalidArgument("derive: Taylor degree 0 cannot be differentiated in I");
      const MonomialBasis& b = f.basis();
      SeriesAccumulator acc(f);
      for (std::size_t p = 0; p < f.size(); ++p) {
        auto src = f.coeffs(p);
        auto dst = acc.slot(f.mode(p));
        for (std::size_t a = 0; a < f.basis_size(); ++a) {
          const int lower = b.lower(a, var.index);
          if (lower >= 0) dst[lower] += static_cast<double>(b.exponent(a)[var.index]) * src[a];
        }
      }
      return acc.finish();
    }
  }
  throw InvalidArgument("derive: unknown variable");
}

Series antiderive_time(const Series& f) {
  for (std::size_t p = 0; p < f.size(); ++p)
    if (f.mode(p).l == 0) throw InvalidArgument("antiderive_time: series has l = 0 content");
  const Complex I(0.0, 1.0);
  return f.mode_multiplied([&](const ModeIndex& m) { return 1.0 / (I * static_cast<double>(m.l)); });
}

CutoffSplit split_by_cutoff(const Series& f, int cutoff) {
  if (cutoff < 0) throw InvalidArgument("split_by_cutoff: negative cutoff");
  SeriesAccumulator low(f.dim(), f.degree(), f.center(), std::min(cutoff, f.angle_cutoff()));
  SeriesAccumulator high(f);
  for (std::size_t p = 0; p < f.size(); ++p) {
    if (f.mode(p).order() <= cutoff)
      low.add(f.mode(p), f.coeffs(p));
    else
      high.add(f.mode(p), f.coeffs(p));
  }
  return {low.finish(), high.finish()};
}

Series zero_mode(const Series& f, AverageOver over) {
  if (over == AverageOver::Theta) return f.filtered([](const ModeIndex& m) { return m.angle_free(); });
  return f.filtered([](const ModeIndex& m) { return m.is_zero(); });
}

double majorant_norm(const Series& f, const Domain& dom) {
  if (dom.center != f.center()) throw DomainMismatch("majorant_norm: domain center differs from series center");
  if (dom.s < 0.0 || dom.r < 0.0) throw InvalidArgument("majorant_norm: negative domain size");
  const MonomialBasis& b = f.basis();
  std::vector<double> rpow(f.basis_size());
  for (std::size_t a = 0; a < rpow.size(); ++a) rpow[a] = std::pow(dom.r, b.total_degree(a));
  double total = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    auto c = f.coeffs(p);
    double poly = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a) poly += std::abs(c[a]) * rpow[a];
    total += poly * std::exp(f.mode(p).order() * dom.s);
  }
  return total;
}

Series substitute_action(const Series& f, std::span<const Series> shift) {
  if (static_cast<int>(shift.size()) != f.dim()) throw InvalidArgument("substitute_action: need one shift per action");
  int cutoff = f.angle_cutoff();
  for (const auto& w : shift) {
    require_compatible(f, w, "substitute_action");
    cutoff = std::max(cutoff, w.angle_cutoff());
  }
  const int d = f.dim(), D = f.degree();
  // powers[j][n] = (x_j + w_j)^n
  std::vector<std::vector<Series>> powers(d);
  for (int j = 0; j < d; ++j) {
    Series base = (Series::action_coordinate(d, D, f.center(), j) + shift[j].with_degree(D)).with_cutoff(cutoff);
    powers[j].push_back(Series::constant(d, D, f.center(), 1.0).with_cutoff(cutoff));
    for (int n = 1; n <= D; ++n) powers[j].push_back(powers[j].back() * base);
  }
  Series result(d, D, f.center(), cutoff);
  const MonomialBasis& b = f.basis();
  for (std::size_t a = 0; a < f.basis_size(); ++a) {
    Series slice = f.taylor_slice(b.exponent(a));
    if (slice.empty()) continue;
    Series term = slice;
    for (int j = 0; j < d; ++j)
      if (b.exponent(a)[j] > 0) term = term * powers[j][b.exponent(a)[j]];
    result = result + term;
  }
  return result.with_cutoff(cutoff);
}

Series substitute_angle(const Series& f, std::span<const Series> shift, double tol, const Domain& measure,
                        int max_order, std::span<const Series> action_shift) {
  if (static_cast<int>(shift.size()) != f.dim()) throw InvalidArgument("substitute_angle: need one shift per angle");
  for (const auto& v : shift) require_compatible(f, v, "substitute_angle");
  const int d = f.dim();
  const bool moved = !action_shift.empty();
  auto at_action = [&](const Series& g) { return moved ? substitute_action(g, action_shift) : g; };
  struct Branch {
    Exponent beta;
    int last;       // highest variable raised so far, for canonical generation
    Series deriv;   // d^beta f
    Series weight;  // v^beta / beta!
  };
  std::vector<Branch> layer{{Exponent{}, 0, f, Series::constant(d, f.degree(), f.center(), 1.0)}};
  Series result = at_action(f);
  for (int n = 1; n <= max_order; ++n) {
    std::vector<Branch> next;
    Series order_sum(d, f.degree(), f.center(), f.angle_cutoff());
    for (const auto& br : layer) {
      for (int j = br.last; j < d; ++j) {
        Series deriv = derive(br.deriv, Variable::theta(j));
        if (deriv.empty() || shift[j].empty()) continue;
        Exponent beta = br.beta;
        ++beta[j];
        Series weight = (1.0 / beta[j]) * (br.weight * shift[j]);
        order_sum = order_sum + at_action(deriv) * weight;
        next.push_back({beta, j, std::move(deriv), std::move(weight)});
      }
    }
    result = result + order_sum;
    if (next.empty() || majorant_norm(order_sum, measure) < tol) return result;
    layer = std::move(next);
  }
  throw StepTooLarge("substitute_angle: Taylor expansion in the angle shift did not converge");
}

}  // namespace finkam
