#include "n2ce/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace n2ce {

namespace {

constexpr double kBoxHalfWidth = 10.0;
constexpr double kAbsTolerance = 1e-6;

struct Box {
  Vector lo;
  Vector hi;
};

Box bounding_box(const Vector& a, const Vector& b) {
  return {a.cwiseMin(b).array() - kBoxHalfWidth, a.cwiseMax(b).array() + kBoxHalfWidth};
}

void check_dims(const Vector& mean1, const Vector& mean0) {
  require(mean1.size() == mean0.size(), "quadrature: mean dimension mismatch");
  if (mean1.size() < 1 || mean1.size() > 2)
    throw UnsupportedDimension("quadrature supports dimension 1 or 2, got " + std::to_string(mean1.size()));
}

double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Tensor-grid rule with per-axis weights; `rule(n)` returns weights for n
// intervals (n + 1 nodes).
double tensor_integrate(const std::function<double(const Vector&)>& f, const Box& box, Index intervals,
                        const std::function<Vector(Index)>& rule) {
  const Index dim = box.lo.size();
  const Vector w = rule(intervals);
  const Vector step = (box.hi - box.lo) / static_cast<double>(intervals);
  Vector x(dim);
  double total = 0.0;
  if (dim == 1) {
    for (Index i = 0; i <= intervals; ++i) {
      x(0) = box.lo(0) + step(0) * i;
      total += w(i) * f(x);
    }
    return total * step(0);
  }
  for (Index i = 0; i <= intervals; ++i) {
    x(0) = box.lo(0) + step(0) * i;
    double row = 0.0;
    for (Index j = 0; j <= intervals; ++j) {
      x(1) = box.lo(1) + step(1) * j;
      row += w(j) * f(x);
    }
    total += w(i) * row;
  }
  return total * step(0) * step(1);
}

Vector trapezoid_weights(Index n) {
  Vector w = Vector::Ones(n + 1);
  w(0) = w(n) = 0.5;
  return w;
}

Vector simpson_weights(Index n) {
  Vector w(n + 1);
  for (Index i = 0; i <= n; ++i) w(i) = (i == 0 || i == n) ? 1.0 / 3.0 : (i % 2 ? 4.0 / 3.0 : 2.0 / 3.0);
  return w;
}

double adaptive_trapezoid(const std::function<double(const Vector&)>& f, const Box& box) {
  const Index max_intervals = box.lo.size() == 1 ? (Index(1) << 16) : (Index(1) << 11);
  Index n = 64;
  double previous = tensor_integrate(f, box, n, trapezoid_weights);
  while (n < max_intervals) {
    n *= 2;
    const double current = tensor_integrate(f, box, n, trapezoid_weights);
    // Trapezoid on these smooth, rapidly decaying integrands converges
    // geometrically, so the change between levels bounds the error.
    if (std::abs(current - previous) < 0.1 * kAbsTolerance) return current;
    previous = current;
  }
  return previous;
}

double log_unit_gaussian(const Vector& x, const Vector& mean) {
  return -0.5 * ((x - mean).squaredNorm() + static_cast<double>(x.size()) * std::log(2.0 * EIGEN_PI));
}

}  // namespace

double scaled_binary_entropy(double m) {
  require(m > 0.0 && std::isfinite(m), "scaled_binary_entropy: M must be positive");
  const double p = 1.0 / (1.0 + m);  // 1 - alpha
  const double alpha = m / (1.0 + m);
  // M * [-alpha log alpha - p log p] with M p = alpha.
  return -m * alpha * std::log1p(-p) - alpha * std::log(p);
}

double d_alpha_quadrature_oracle(const Vector& mean1, const Vector& mean0, double m) {
  check_dims(mean1, mean0);
  require(m > 0.0 && std::isfinite(m), "d_alpha_quadrature_oracle: M must be positive");
  const double p = 1.0 / (1.0 + m);
  const double alpha = m / (1.0 + m);
  const double log_alpha = std::log1p(-p);
  const double log_p = std::log(p);
  auto integrand = [&](const Vector& x) {
    const double log_q1 = log_unit_gaussian(x, mean1);
    const double log_q0 = log_unit_gaussian(x, mean0);
    const double log_r = log_q1 - log_q0;
    // log(m / q0) = log(alpha + p r)
    double log_mix_over_q0;
    const double shift = p * std::expm1(log_r);  // p (r - 1)
    if (std::abs(shift) < 0.5)
      log_mix_over_q0 = std::log1p(shift);
    else
      log_mix_over_q0 = log_sum_exp(log_alpha, log_p + log_r);
    const double q1 = std::exp(log_q1);
    const double q0 = std::exp(log_q0);
    // M [p q1 log(q1/m) + alpha q0 log(q0/m)],  M p = alpha.
    return alpha * q1 * (log_r - log_mix_over_q0) - m * alpha * q0 * log_mix_over_q0;
  };
  return adaptive_trapezoid(integrand, bounding_box(mean1, mean0));
}

double js_divergence_quadrature(const Vector& mean1, const Vector& mean0) {
  check_dims(mean1, mean0);
  const Index dim = mean1.size();
  const Index intervals = dim == 1 ? 8000 : 1000;
  auto neg_mix_entropy_integrand = [&](const Vector& x) {
    const double log_mix = log_sum_exp(log_unit_gaussian(x, mean1), log_unit_gaussian(x, mean0)) - std::log(2.0);
    return std::exp(log_mix) * log_mix;
  };
  const double mixture_entropy =
      -tensor_integrate(neg_mix_entropy_integrand, bounding_box(mean1, mean0), intervals, simpson_weights);
  const double gaussian_entropy = 0.5 * static_cast<double>(dim) * std::log(2.0 * EIGEN_PI * std::exp(1.0));
  return mixture_entropy - gaussian_entropy;
}

}  // namespace n2ce
