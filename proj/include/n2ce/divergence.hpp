#ifndef N2CE_DIVERGENCE_HPP
#define N2CE_DIVERGENCE_HPP

#include <cmath>

#include "n2ce/objectives.hpp"

namespace n2ce {

// The divergence family indexed by alpha = M / (1 + M) is reported in the
// scaled form
//   D_M = M * [ (1-alpha) KL(q* || m) + alpha KL(q0 || m) ],  m = alpha q0 + (1-alpha) q*,
// which equals JS at M = 1 and tends to KL(q* || q0) as M -> infinity. Its
// variational form is
//   D_M = M h(alpha) + M/(1+M) * sup_r L_M(r),
// with L_M the noisier-NCE objective.

struct DivergenceEstimate {
  double value = 0.0;
  double stderr = 0.0;
};

/// M * h(M / (1 + M)), evaluated without cancellation for large M.
double scaled_binary_entropy(double m);

/// Monte-Carlo value of the variational form at the model's ratio; a lower
/// bound on D_M for any ratio, tight at the true one.
template <RatioModel Model>
DivergenceEstimate d_alpha_variational_estimate(const Model& model, const Matrix& pos, const Matrix& neg, double m) {
  detail::check_samples(pos, neg);
  detail::check_magnitude(m);
  const double log_m = std::log(m);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  const Vector a = fp.unaryExpr([&](double f) { return -softplus(log_m - f); });
  const Vector b = fn.unaryExpr([&](double f) { return -m * softplus(f - log_m); });
  auto variance = [](const Vector& v) {
    if (v.size() < 2) return 0.0;
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
  };
  const double scale = m / (1.0 + m);
  DivergenceEstimate est;
  est.value = scaled_binary_entropy(m) + scale * (a.mean() + b.mean());
  est.stderr = scale * std::sqrt(variance(a) / a.size() + variance(b) / b.size());
  return est;
}

template <RatioModel Model>
double d_alpha_variational_value(const Model& model, const Matrix& pos, const Matrix& neg, double m) {
  return d_alpha_variational_estimate(model, pos, neg, m).value;
}

/// D_M between N(mean1, I) and N(mean0, I) by adaptive tensor-grid
/// trapezoid quadrature over a +-10 sigma box. Dimension must be 1 or 2.
double d_alpha_quadrature_oracle(const Vector& mean1, const Vector& mean0, double m);

/// JS(N(mean1, I) || N(mean0, I)) via the entropy form H(mix) - (H1 + H0)/2,
/// integrated with composite Simpson's rule. Dimension 1 or 2.
double js_divergence_quadrature(const Vector& mean1, const Vector& mean0);

/// KL between unit-covariance Gaussians: ||mean1 - mean0||^2 / 2.
inline double kl_unit_gaussians(const Vector& mean1, const Vector& mean0) {
  return 0.5 * (mean1 - mean0).squaredNorm();
}

}  // namespace n2ce

#endif  // N2CE_DIVERGENCE_HPP
