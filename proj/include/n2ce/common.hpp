#ifndef N2CE_COMMON_HPP
#define N2CE_COMMON_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace n2ce {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
// Sample sets and particle clouds are stored one sample per row.
using Matrix = Eigen::MatrixXd;

/// Raised when an operation is asked for a dimension it cannot handle
/// (e.g. quadrature above two dimensions).
class UnsupportedDimension : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised by iterative procedures when a non-finite quantity appears.
/// `step()` is the iteration at which it was detected.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace n2ce

#endif  // N2CE_COMMON_HPP
