#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace finkam {

inline constexpr int kMaxAngles = 4;

using Exponent = std::array<int, kMaxAngles>;

/// Graded enumeration of the monomials x^alpha in `dim` variables with |alpha| <= degree.
/// Index 0 is the constant monomial, indices 1..dim are x_1..x_dim.
class MonomialBasis {
 public:
  MonomialBasis(int dim, int degree);

  int dim() const noexcept { return dim_; }
  int degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return exps_.size(); }
  const Exponent& exponent(std::size_t i) const { return exps_[i]; }
  int total_degree(std::size_t i) const { return total_[i]; }

  /// Index of alpha, or -1 when |alpha| exceeds the degree.
  int index_of(const Exponent& alpha) const;
  /// Index of alpha_i + alpha_j, or -1 when truncated away.
  int product_index(std::size_t i, std::size_t j) const { return product_[i * size() + j]; }
  /// Index of alpha_i + e_var, or -1.
  int raise(std::size_t i, int var) const;
  /// Index of alpha_i - e_var, or -1 when alpha_i[var] == 0.
  int lower(std::size_t i, int var) const;

 private:
  int dim_;
  int degree_;
  std::vector<Exponent> exps_;
  std::vector<int> total_;
  std::vector<int> product_;
};

/// Shared immutable basis for (dim, degree); safe to call concurrently.
const MonomialBasis& monomial_basis(int dim, int degree);

}  // namespace finkam
