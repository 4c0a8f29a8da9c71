#include "finkam/monomials.hpp"

#include <map>
#include <memory>
#include <mutex>

#include "finkam/errors.hpp"

namespace finkam {

namespace {

void enumerate(int dim, int remaining, int var, Exponent& cur, std::vector<Exponent>& out) {
  if (var == dim) {
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[var] = e;
    enumerate(dim, remaining - e, var + 1, cur, out);
  }
  cur[var] = 0;
}

}  // namespace

MonomialBasis::MonomialBasis(int dim, int degree) : dim_(dim), degree_(degree) {
  if (dim < 1 || dim > kMaxAngles) throw InvalidArgument("monomial basis: dimension out of range");
  if (degree < 0) throw InvalidArgument("monomial basis: negative degree");
  for (int total = 0; total <= degree; ++total) {
    Exponent cur{};
    std::vector<Exponent> layer;
    enumerate(dim, total, 0, cur, layer);
    for (auto& e : layer) {
      int sum = 0;
      for (int v = 0; v < dim; ++v) sum += e[v];
      if (sum == total) {
        exps_.push_back(e);
        total_.push_back(total);
      }
    }
  }
  const std::size_t n = exps_.size();
  product_.assign(n * n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Exponent sum{};
      for (int v = 0; v < dim; ++v) sum[v] = exps_[i][v] + exps_[j][v];
      product_[i * n + j] = index_of(sum);
    }
  }
}

int MonomialBasis::index_of(const Exponent& alpha) const {
  int total = 0;
  for (int v = 0; v < dim_; ++v) {
    if (alpha[v] < 0) return -1;
    total += alpha[v];
  }
  if (total > degree_) return -1;
  // Graded order: binary search is unnecessary at these sizes.
  for (std::size_t i = 0; i < exps_.size(); ++i) {
    if (total_[i] != total) continue;
    bool same = true;
    for (int v = 0; v < dim_ && same; ++v) same = exps_[i][v] == alpha[v];
    if (same) return static_cast<int>(i);
  }
  return -1;
}

int MonomialBasis::raise(std::size_t i, int var) const {
  Exponent e = exps_[i];
  ++e[var];
  return index_of(e);
}

int MonomialBasis::lower(std::size_t i, int var) const {
  Exponent e = exps_[i];
  if (e[var] == 0) return -1;
  --e[var];
  return index_of(e);
}

const MonomialBasis& monomial_basis(int dim, int degree) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<MonomialBasis>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{dim, degree}];
  if (!slot) slot = std::make_unique<MonomialBasis>(dim, degree);
  return *slot;
}

}  // namespace finkam
