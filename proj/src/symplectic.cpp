#include <algorithm>
#include <cmath>
#include <numbers>

#include "finkam/errors.hpp"
#include "finkam/kam.hpp"

namespace finkam {

namespace {

Series action_derivative(const Series& f, int j) {
  if (f.degree() == 0) return Series(f.dim(), 0, f.center(), f.angle_cutoff());
  return derive(f, Variable::action(j));
}

Series centered(const Series& f, const std::vector<double>& c) { return f.center() == c ? f : f.rebased(c); }

double max_norm(std::span<const Series> fs, const Domain& dom) {
  double m = 0.0;
  for (const auto& f : fs) m = std::max(m, majorant_norm(f, dom));
  return m;
}

}  // namespace

SymplecticStep SymplecticStep::averaging(const Series& S_tilde, const Domain& dom) {
  for (std::size_t p = 0; p < S_tilde.size(); ++p)
    if (!S_tilde.mode(p).angle_free()) throw InvalidArgument("averaging: generator must not depend on the angles");
  SymplecticStep step;
  step.kind_ = Kind::Averaging;
  step.dom_ = dom;
  step.S_ = centered(S_tilde, dom.center);
  for (int j = 0; j < step.S_.dim(); ++j) {
    step.dS_daction_.push_back(action_derivative(step.S_, j));
    step.dS_dangle_.push_back(Series(step.S_.dim(), step.S_.degree(), dom.center, step.S_.angle_cutoff()));
    step.v_.push_back(-step.dS_daction_.back());
    step.u_.push_back(step.dS_dangle_.back());
  }
  return step;
}

SymplecticStep invert_generating(const Series& S_in, const Domain& dom, double tol) {
  SymplecticStep step;
  step.kind_ = SymplecticStep::Kind::Generating;
  step.dom_ = dom;
  step.S_ = centered(S_in, dom.center);
  const Series& S = step.S_;
  const int d = S.dim();
  for (int j = 0; j < d; ++j) {
    step.dS_dangle_.push_back(derive(S, Variable::theta(j)));
    step.dS_daction_.push_back(action_derivative(S, j));
  }

  double contraction = 0.0;
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    for (int j = 0; j < d; ++j) row += majorant_norm(derive(step.dS_daction_[i], Variable::theta(j)), dom);
    contraction = std::max(contraction, row);
  }
  if (!(contraction < 0.5))
    throw StepTooLarge("generating function is not contracting: ||d2S/dtheta drho|| = " + std::to_string(contraction));

  std::vector<Series> v;
  for (int i = 0; i < d; ++i) v.push_back(-step.dS_daction_[i]);
  const double sub_tol = tol * 1e-3;
  bool converged = false;
  for (int iter = 0; iter < 200 && !converged; ++iter) {
    std::vector<Series> next;
    for (int i = 0; i < d; ++i) next.push_back(-substitute_angle(step.dS_daction_[i], v, sub_tol, dom));
    double diff = 0.0;
    for (int i = 0; i < d; ++i) diff = std::max(diff, majorant_norm(next[i] - v[i], dom));
    converged = diff < tol * (1.0 + max_norm(next, dom));
    v = std::move(next);
  }
  if (!converged) throw StepTooLarge("fixed-point inversion of the generating relation did not converge");

  double residual = 0.0;
  for (int i = 0; i < d; ++i)
    residual = std::max(residual, majorant_norm(v[i] + substitute_angle(step.dS_daction_[i], v, sub_tol, dom), dom));
  if (!(residual < 10 * tol * (1.0 + max_norm(v, dom))))
    throw StepTooLarge("generating relation back-substitution residual " + std::to_string(residual));
  step.inversion_residual = residual;

  for (int j = 0; j < d; ++j) step.u_.push_back(substitute_angle(step.dS_dangle_[j], v, sub_tol, dom));
  step.v_ = std::move(v);
  return step;
}

PhasePoint SymplecticStep::map(const PhasePoint& z) const {
  if (is_identity()) return z;
  const int d = S_.dim();
  PhasePoint out = z;
  if (kind_ == Kind::Averaging) {
    for (int j = 0; j < d; ++j) out.angle[j] = z.angle[j] - dS_daction_[j].evaluate(z.angle, z.t, z.action);
    return out;
  }
  std::vector<double> theta = z.angle;
  for (int iter = 0; iter < 500; ++iter) {
    double delta = 0.0;
    std::vector<double> next(d);
    for (int j = 0; j < d; ++j) {
      next[j] = z.angle[j] - dS_daction_[j].evaluate(theta, z.t, z.action);
      delta = std::max(delta, std::abs(next[j] - theta[j]));
    }
    theta = std::move(next);
    if (delta <= 4e-16 * (1.0 + std::abs(theta[0]))) break;
  }
  out.angle = theta;
  for (int j = 0; j < d; ++j) out.action[j] = z.action[j] + dS_dangle_[j].evaluate(theta, z.t, z.action);
  return out;
}

Series SymplecticStep::pull_back(const Series& f, double tol) const {
  Series g = centered(f, dom_.center);
  if (is_identity()) return g;
  g = g.with_cutoff(std::max(g.angle_cutoff(), S_.angle_cutoff()));
  if (kind_ == Kind::Averaging) return substitute_angle(g, v_, tol, dom_);
  return substitute_angle(g, v_, tol, dom_, 80, u_);
}

Series SymplecticStep::pull_back_angles(const Series& f, double tol) const {
  Series g = centered(f, dom_.center);
  if (is_identity()) return g;
  g = g.with_cutoff(std::max(g.angle_cutoff(), S_.angle_cutoff()));
  return substitute_angle(g, v_, tol, dom_);
}

JacobianReport check_symplectic(const SymplecticStep& step, int n, std::uint64_t seed) {
  JacobianReport rep;
  if (step.is_identity()) return rep;
  const int d = step.generator().dim();
  const int m = 2 * d;
  const double h = 1e-5;
  std::uint64_t state = seed;
  auto coords = [&](const PhasePoint& p) {
    std::vector<double> x(m);
    for (int j = 0; j < d; ++j) {
      x[j] = p.angle[j];
      x[d + j] = p.action[j];
    }
    return x;
  };
  for (int s = 0; s < n; ++s) {
    PhasePoint z;
    z.angle.resize(d);
    z.action.resize(d);
    for (int j = 0; j < d; ++j) z.angle[j] = 2 * std::numbers::pi * uniform01(state);
    z.t = 2 * std::numbers::pi * uniform01(state);
    for (int j = 0; j < d; ++j) z.action[j] = step.center()[j] + step.domain().r * (2 * uniform01(state) - 1);

    std::vector<double> J(m * m);  // J[row * m + col] = d out_row / d in_col
    for (int c = 0; c < m; ++c) {
      PhasePoint zp = z, zm = z;
      if (c < d) {
        zp.angle[c] += h;
        zm.angle[c] -= h;
      } else {
        zp.action[c - d] += h;
        zm.action[c - d] -= h;
      }
      const auto xp = coords(step.map(zp)), xm = coords(step.map(zm));
      for (int r = 0; r < m; ++r) J[r * m + c] = (xp[r] - xm[r]) / (2 * h);
    }
    // Omega = [[0, Id], [-Id, 0]] in (angle, action) ordering.
    auto omega = [&](int r, int c) {
      if (r < d && c == r + d) return 1.0;
      if (r >= d && c == r - d) return -1.0;
      return 0.0;
    };
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i)
          for (int k = 0; k < m; ++k) acc += J[i * m + r] * omega(i, k) * J[k * m + c];
        rep.symplectic_error = std::max(rep.symplectic_error, std::abs(acc - omega(r, c)));
      }
    for (int r = 0; r < m; ++r) {
      double row = 0.0;
      for (int c = 0; c < m; ++c) row += std::abs(J[r * m + c] - (r == c ? 1.0 : 0.0));
      rep.derivative_bound = std::max(rep.derivative_bound, row);
    }
  }
  return rep;
}

PhasePoint apply_chain(std::span<const SymplecticStep> chain, const PhasePoint& z) {
  PhasePoint p = z;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) p = it->map(p);
  return p;
}

double HamiltonianState::energy(const PhasePoint& z) const {
  double e = 0.0;
  if (!h0.empty()) e += h0.evaluate(z.angle, z.t, z.action) / eps_a;
  if (!h.empty()) e += h.evaluate(z.angle, z.t, z.action) / eps_b;
  if (!p.empty()) e += p.evaluate(z.angle, z.t, z.action) / eps_b;
  return e;
}

PhasePoint HamiltonianState::to_original(const PhasePoint& z) const { return apply_chain(chain, z); }

}  // namespace finkam
