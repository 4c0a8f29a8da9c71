#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace finkam {

/// Base of every error raised by the library. `family()` selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Family { Input = 2, Numeric = 3, Convergence = 4, Io = 5 };

  Error(Family family, const std::string& what)
      : std::runtime_error(what), family_(family), message_(what) {}
  Family family() const noexcept { return family_; }
  const char* what() const noexcept override { return message_.c_str(); }

  /// Prefixes the message, e.g. with the step index and phase where the error surfaced.
  void add_context(const std::string& context) { message_ = context + ": " + message_; }

 private:
  Family family_;
  std::string message_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(Family::Input, what) {}
};

class DomainMismatch : public Error {
 public:
  explicit DomainMismatch(const std::string& what) : Error(Family::Input, what) {}
};

class ScheduleTooShort : public Error {
 public:
  explicit ScheduleTooShort(const std::string& what) : Error(Family::Input, what) {}
};

class QuadratureNonConvergence : public Error {
 public:
  explicit QuadratureNonConvergence(const std::string& what) : Error(Family::Numeric, what) {}
};

class GridTooCoarse : public Error {
 public:
  explicit GridTooCoarse(const std::string& what) : Error(Family::Numeric, what) {}
};

/// A retained divisor <k,omega>/eps^a + l fell below the admissible bound.
class SmallDivisorViolation : public Error {
 public:
  SmallDivisorViolation(std::vector<int> k, int l, double value, double bound)
      : Error(Family::Convergence, describe(k, l, value, bound)),
        k_(std::move(k)), l_(l), value_(value), bound_(bound) {}

  const std::vector<int>& k() const noexcept { return k_; }
  int l() const noexcept { return l_; }
  double value() const noexcept { return value_; }
  double bound() const noexcept { return bound_; }

 private:
  static std::string describe(const std::vector<int>& k, int l, double value, double bound) {
    std::string s = "small divisor at k=(";
    for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
    char buf[96];
    std::snprintf(buf, sizeof buf, "), l=%d: |divisor|=%.6g < bound %.6g", l, value, bound);
    return s + buf;
  }

  std::vector<int> k_;
  int l_;
  double value_;
  double bound_;
};

class StepTooLarge : public Error {
 public:
  explicit StepTooLarge(const std::string& what) : Error(Family::Convergence, what) {}
};

class NormBlowup : public Error {
 public:
  NormBlowup(std::string inequality, const std::string& what)
      : Error(Family::Convergence, inequality + ": " + what), inequality_(std::move(inequality)) {}
  const std::string& inequality() const noexcept { return inequality_; }

 private:
  std::string inequality_;
};

class AnchorLost : public Error {
 public:
  explicit AnchorLost(const std::string& what) : Error(Family::Convergence, what) {}
};

class InsufficientWinding : public Error {
 public:
  explicit InsufficientWinding(const std::string& what) : Error(Family::Numeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Family::Io, what) {}
};

}  // namespace finkam
