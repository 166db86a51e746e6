#ifndef N2CE_OBJECTIVES_HPP
#define N2CE_OBJECTIVES_HPP

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>

#include "n2ce/common.hpp"
#include "n2ce/gaussian_location.hpp"
#include "n2ce/mlp_ratio.hpp"

namespace n2ce {

/// Anything exposing a batched log-ratio and the weighted sum of its
/// parameter gradients.
template <typename M>
concept RatioModel = requires(const M& m, const Matrix& x, const Vector& w) {
  { m.log_ratios(x) } -> std::convertible_to<Vector>;
  { m.weighted_grad(x, w) } -> std::convertible_to<Vector>;
  { m.num_params() } -> std::convertible_to<Index>;
};

enum class ObjectiveTag { Nce, N2ce, Nwj, NegReweight, MleExact };

std::string to_string(ObjectiveTag tag);
ObjectiveTag objective_tag_from_string(const std::string& name);

struct ObjectiveKind {
  ObjectiveTag tag = ObjectiveTag::N2ce;
  double noise_magnitude = 1.0;

  static ObjectiveKind nce() { return {ObjectiveTag::Nce, 1.0}; }
  static ObjectiveKind n2ce(double m) { return {ObjectiveTag::N2ce, m}; }
  static ObjectiveKind nwj() { return {ObjectiveTag::Nwj, 1.0}; }
  static ObjectiveKind neg_reweight(double m) { return {ObjectiveTag::NegReweight, m}; }
  static ObjectiveKind mle_exact() { return {ObjectiveTag::MleExact, 1.0}; }

  /// Throws std::invalid_argument when the magnitude does not fit the tag.
  void validate() const;
  /// Short label such as "N2CE(100)" or "NWJ".
  std::string label() const;

  friend bool operator==(const ObjectiveKind&, const ObjectiveKind&) = default;
};

struct GradEstimate {
  Vector vector;
  Index n_pos = 0;
  Index n_neg = 0;
};

struct ObjectiveOptions {
  /// Weight of the ratio penalty rho * mean(f^2) over both sample sets.
  double ratio_penalty = 0.0;
  /// NWJ exponentiates f; values above this cap raise std::range_error.
  double nwj_log_ratio_cap = 30.0;
};

/// M / (M + r).
double weight_fn(double noise_magnitude, double ratio);

namespace detail {

inline void check_samples(const Matrix& pos, const Matrix& neg) {
  require(pos.rows() > 0 && neg.rows() > 0, "objective: empty sample set");
  require(pos.cols() == neg.cols(), "objective: positive/negative dimension mismatch");
}

inline void check_magnitude(double m) { require(m > 0.0 && std::isfinite(m), "objective: M must be positive"); }

inline double penalty_value(const Vector& fp, const Vector& fn, double rho) {
  if (rho == 0.0) return 0.0;
  return rho * (fp.squaredNorm() + fn.squaredNorm()) / static_cast<double>(fp.size() + fn.size());
}

template <RatioModel Model>
Vector penalty_grad(const Model& model, const Matrix& pos, const Matrix& neg, const Vector& fp, const Vector& fn,
                    double rho) {
  const double scale = 2.0 * rho / static_cast<double>(fp.size() + fn.size());
  return scale * (model.weighted_grad(pos, fp) + model.weighted_grad(neg, fn));
}

}  // namespace detail

/// Noisier-NCE objective, log domain:
///   mean_pos[-softplus(log M - f)] + M * mean_neg[-softplus(f - log M)].
template <RatioModel Model>
double n2ce_objective(const Model& model, const Matrix& pos, const Matrix& neg, double m,
                      const ObjectiveOptions& opts = {}) {
  detail::check_samples(pos, neg);
  detail::check_magnitude(m);
  const double log_m = std::log(m);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  double pos_term = 0.0;
  for (Index i = 0; i < fp.size(); ++i) pos_term -= softplus(log_m - fp(i));
  double neg_term = 0.0;
  for (Index i = 0; i < fn.size(); ++i) neg_term -= softplus(fn(i) - log_m);
  return pos_term / fp.size() + m * neg_term / fn.size() - detail::penalty_value(fp, fn, opts.ratio_penalty);
}

template <RatioModel Model>
GradEstimate n2ce_gradient(const Model& model, const Matrix& pos, const Matrix& neg, double m,
                           const ObjectiveOptions& opts = {}) {
  detail::check_samples(pos, neg);
  detail::check_magnitude(m);
  const double log_m = std::log(m);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  // M/(M+r) on positives, r/(M+r) on negatives.
  const Vector wp = fp.unaryExpr([&](double f) { return sigmoid(log_m - f); }) / static_cast<double>(fp.size());
  const Vector wn = fn.unaryExpr([&](double f) { return sigmoid(f - log_m); }) * (m / static_cast<double>(fn.size()));
  Vector g = model.weighted_grad(pos, wp) - model.weighted_grad(neg, wn);
  if (opts.ratio_penalty != 0.0) g -= detail::penalty_grad(model, pos, neg, fp, fn, opts.ratio_penalty);
  return {std::move(g), pos.rows(), neg.rows()};
}

/// Standard NCE objective: E_pos log(r/(1+r)) + E_neg log(1/(1+r)),
/// evaluated directly from r.
template <RatioModel Model>
double nce_objective(const Model& model, const Matrix& pos, const Matrix& neg) {
  detail::check_samples(pos, neg);
  const Vector rp = model.log_ratios(pos).array().exp();
  const Vector rn = model.log_ratios(neg).array().exp();
  return (rp.array() / (1.0 + rp.array())).log().mean() + (1.0 / (1.0 + rn.array())).log().mean();
}

namespace detail {

inline Vector capped_ratios(const Vector& f, double cap) {
  for (Index i = 0; i < f.size(); ++i) {
    if (!(f(i) <= cap))
      throw std::range_error("NWJ: log-ratio " + std::to_string(f(i)) + " exceeds cap " + std::to_string(cap));
  }
  return f.array().exp();
}

}  // namespace detail

/// E_pos[log r] - E_neg[r] (maximized; the +1 of the KL bound is left out).
template <RatioModel Model>
double nwj_objective(const Model& model, const Matrix& pos, const Matrix& neg, const ObjectiveOptions& opts = {}) {
  detail::check_samples(pos, neg);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  return fp.mean() - detail::capped_ratios(fn, opts.nwj_log_ratio_cap).mean() -
         detail::penalty_value(fp, fn, opts.ratio_penalty);
}

template <RatioModel Model>
GradEstimate nwj_gradient(const Model& model, const Matrix& pos, const Matrix& neg, const ObjectiveOptions& opts = {}) {
  detail::check_samples(pos, neg);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  const Vector wp = Vector::Constant(fp.size(), 1.0 / static_cast<double>(fp.size()));
  const Vector wn = detail::capped_ratios(fn, opts.nwj_log_ratio_cap) / static_cast<double>(fn.size());
  Vector g = model.weighted_grad(pos, wp) - model.weighted_grad(neg, wn);
  if (opts.ratio_penalty != 0.0) g -= detail::penalty_grad(model, pos, neg, fp, fn, opts.ratio_penalty);
  return {std::move(g), pos.rows(), neg.rows()};
}

/// E_pos[log(r/(1+r))] + M E_neg[log(M/(M+r))]: NCE positives, noisier negatives.
template <RatioModel Model>
double neg_reweight_objective(const Model& model, const Matrix& pos, const Matrix& neg, double m) {
  detail::check_samples(pos, neg);
  detail::check_magnitude(m);
  const double log_m = std::log(m);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  double pos_term = 0.0;
  for (Index i = 0; i < fp.size(); ++i) pos_term -= softplus(-fp(i));
  double neg_term = 0.0;
  for (Index i = 0; i < fn.size(); ++i) neg_term -= softplus(fn(i) - log_m);
  return pos_term / fp.size() + m * neg_term / fn.size();
}

template <RatioModel Model>
GradEstimate neg_reweight_gradient(const Model& model, const Matrix& pos, const Matrix& neg, double m) {
  detail::check_samples(pos, neg);
  detail::check_magnitude(m);
  const double log_m = std::log(m);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  const Vector wp = fp.unaryExpr([](double f) { return sigmoid(-f); }) / static_cast<double>(fp.size());
  const Vector wn = fn.unaryExpr([&](double f) { return sigmoid(f - log_m); }) * (m / static_cast<double>(fn.size()));
  return {model.weighted_grad(pos, wp) - model.weighted_grad(neg, wn), pos.rows(), neg.rows()};
}

/// Exact population MLE gradient for the Gaussian location family.
template <typename Scalar>
typename GaussianLocationModel<Scalar>::VectorType mle_gradient_oracle(
    const GaussianLocationModel<Scalar>& model, const typename GaussianLocationModel<Scalar>::VectorType& target_mean) {
  require(target_mean.size() == model.dim(), "mle_gradient_oracle: dimension mismatch");
  return target_mean - model.mean();
}

/// Gradient of the per-kind objective on the given samples. MLE_EXACT is
/// not sample-based and is rejected here.
template <RatioModel Model>
GradEstimate estimator_gradient(const ObjectiveKind& kind, const Model& model, const Matrix& pos, const Matrix& neg,
                                const ObjectiveOptions& opts = {}) {
  kind.validate();
  switch (kind.tag) {
    case ObjectiveTag::Nce:
      return n2ce_gradient(model, pos, neg, 1.0, opts);
    case ObjectiveTag::N2ce:
      return n2ce_gradient(model, pos, neg, kind.noise_magnitude, opts);
    case ObjectiveTag::Nwj:
      return nwj_gradient(model, pos, neg, opts);
    case ObjectiveTag::NegReweight:
      return neg_reweight_gradient(model, pos, neg, kind.noise_magnitude);
    case ObjectiveTag::MleExact:
      break;
  }
  throw std::invalid_argument("estimator_gradient: MLE_EXACT has no sample-based gradient");
}

/// Sigmoid-form objective for one stage of the telescoping network:
///   E_pos[log s(f - log M)] + M E_neg[log(1 - s(f - log M))].
double sigmoid_form_stage_objective(const MlpRatioModel& model, const Matrix& pos, const Matrix& neg, int stage,
                                    double m);

/// Gradient of sigmoid_form_stage_objective, derived through the sigmoid:
/// d/df log s(u) = 1 - s(u), d/df log(1 - s(u)) = -s(u), with u = f - log M.
GradEstimate sigmoid_form_stage_gradient(const MlpRatioModel& model, const Matrix& pos, const Matrix& neg, int stage,
                                         double m);

/// Natural-log binary entropy. Endpoints are rejected unless
/// `allow_endpoints`, in which case they return 0.
double binary_entropy(double a, bool allow_endpoints = false);

}  // namespace n2ce

#endif  // N2CE_OBJECTIVES_HPP
