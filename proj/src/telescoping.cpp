#include "n2ce/telescoping.hpp"

#include <algorithm>
#include <cmath>

#include "n2ce/objectives.hpp"

namespace n2ce {

namespace {

void check_squared(const std::vector<double>& sq) {
  require(!sq.empty(), "SigmaSchedule: need at least one value");
  for (std::size_t i = 0; i < sq.size(); ++i) {
    require(sq[i] > 0.0 && sq[i] <= 1.0, "SigmaSchedule: values must lie in (0, 1]");
    if (i > 0) require(sq[i] > sq[i - 1], "SigmaSchedule: values must be strictly increasing");
  }
}

double linear_end_value(int K, double first, double beta_last) {
  double keep = 1.0;
  for (int i = 0; i <= K; ++i) keep *= 1.0 - (first + (beta_last - first) * i / K);
  return 1.0 - keep;
}

}  // namespace

SigmaSchedule SigmaSchedule::preset(SigmaPreset which) {
  if (which == SigmaPreset::K3) return SigmaSchedule({0.01, 0.69175489, 0.92238785, 0.99974058});
  return SigmaSchedule({0.01, 0.3237, 0.5165, 0.6322, 0.7132, 0.7734, 0.9997});
}

SigmaSchedule SigmaSchedule::from_squared(std::vector<double> sigma_squared) {
  check_squared(sigma_squared);
  return SigmaSchedule(std::move(sigma_squared));
}

SigmaSchedule SigmaSchedule::linear(int K, double first, double last) {
  require(K >= 0, "SigmaSchedule::linear: K must be >= 0");
  require(first > 0.0 && first < 1.0, "SigmaSchedule::linear: first must lie in (0, 1)");
  if (K == 0) return SigmaSchedule({first});
  require(last > first && last < 1.0, "SigmaSchedule::linear: need first < last < 1");
  double lo = first, hi = 1.0;
  require(linear_end_value(K, first, lo) < last, "SigmaSchedule::linear: endpoint below the first value");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (linear_end_value(K, first, mid) < last ? lo : hi) = mid;
  }
  const double beta_last = 0.5 * (lo + hi);
  std::vector<double> sq;
  double keep = 1.0;
  for (int i = 0; i <= K; ++i) {
    keep *= 1.0 - (first + (beta_last - first) * i / K);
    sq.push_back(1.0 - keep);
  }
  sq.back() = last;
  check_squared(sq);
  return SigmaSchedule(std::move(sq));
}

double SigmaSchedule::sigma(int k) const {
  require(k >= 0 && k <= K(), "SigmaSchedule: stage index out of range");
  return std::sqrt(squared_[k]);
}

Vector stage_weights(const SigmaSchedule& schedule) {
  const int K = schedule.K();
  Vector w(K + 1);
  double tail = 1.0;
  for (int k = K; k >= 0; --k) {
    tail *= schedule.sigma(k);
    w(k) = std::sqrt(schedule.sigma(K) / tail);
  }
  return w;
}

Vector interpolate_stage(const Vector& z0, const Vector& zK1, double sigma) {
  require(z0.size() == zK1.size(), "interpolate_stage: dimension mismatch");
  require(sigma >= 0.0 && sigma <= 1.0, "interpolate_stage: sigma must lie in [0, 1]");
  return std::sqrt(1.0 - sigma * sigma) * z0 + sigma * zK1;
}

Matrix interpolate_stage(const Matrix& z0, const Matrix& zK1, double sigma) {
  require(z0.rows() == zK1.rows() && z0.cols() == zK1.cols(), "interpolate_stage: shape mismatch");
  require(sigma >= 0.0 && sigma <= 1.0, "interpolate_stage: sigma must lie in [0, 1]");
  return std::sqrt(1.0 - sigma * sigma) * z0 + sigma * zK1;
}

double telescoping_log_ratio(const MlpRatioModel& model, const Vector& z) {
  return telescoping_log_ratios(model, z.transpose())(0);
}

Vector telescoping_log_ratios(const MlpRatioModel& model, const Matrix& z) {
  Vector total = Vector::Zero(z.rows());
  for (int k = 0; k < model.num_stages(); ++k) {
    const int stage[] = {k};
    total += model.forward_batch(z, stage);
  }
  return total;
}

Matrix telescoping_input_grad(const MlpRatioModel& model, const Matrix& z) {
  Matrix total = Matrix::Zero(z.rows(), z.cols());
  const Vector ones = Vector::Ones(z.rows());
  for (int k = 0; k < model.num_stages(); ++k) {
    const int stage[] = {k};
    total += model.weighted_input_grad(z, stage, ones);
  }
  return total;
}

std::vector<double> gaussian_stage_kl(const SigmaSchedule& schedule, const Vector& mean) {
  // Every stage is N(sigma_k * mean, I), so each KL is a mean-shift term.
  std::vector<double> kl;
  const double norm_sq = mean.squaredNorm();
  for (int k = 0; k <= schedule.K(); ++k) {
    const double upper = k == schedule.K() ? 1.0 : schedule.sigma(k + 1);
    const double gap = upper - schedule.sigma(k);
    kl.push_back(0.5 * gap * gap * norm_sq);
  }
  return kl;
}

void TelescopingConfig::validate() const {
  require(noise_magnitude >= 1.0 && std::isfinite(noise_magnitude), "telescoping: M must be >= 1");
  require(iterations >= 0, "telescoping: iterations must be >= 0");
  require(batch_size >= 1, "telescoping: batch_size must be >= 1");
  require(max_negatives >= 1, "telescoping: max_negatives must be >= 1");
  require(grad_clip > 0.0, "telescoping: grad_clip must be positive");
}

TelescopingFit fit_telescoping(const TargetSampler& target, const SigmaSchedule& schedule, MlpRatioModel model,
                               const TelescopingConfig& config) {
  config.validate();
  require(model.num_stages() == schedule.K() + 1, "fit_telescoping: model stage count must equal K + 1");
  const int K = schedule.K();
  const Index d = model.input_dim();
  const Index n1 = config.batch_size;
  Index n_neg = n1;
  if (config.negatives == NegativeSizing::Scaled) {
    const double scaled = std::ceil(config.noise_magnitude * static_cast<double>(n1));
    n_neg = static_cast<Index>(std::min(scaled, static_cast<double>(config.max_negatives)));
    n_neg = std::max(n_neg, n1);
  }
  const Vector weights = stage_weights(schedule);

  auto draw_target = [&](Index count, Rng& rng) {
    Matrix z = target(count, rng);
    require(z.rows() == count && z.cols() == d, "fit_telescoping: target sampler returned the wrong shape");
    return z;
  };

  Rng rng = derive_rng(config.seed);
  std::uniform_int_distribution<int> pick_stage(0, K);
  AdamState adam = AdamState::fresh(model.num_params(), config.adam);
  TelescopingFit fit{model, {}, {}};
  fit.loss_trace.reserve(config.iterations);
  fit.stage_trace.reserve(config.iterations);

  for (Index it = 0; it < config.iterations; ++it) {
    const int k = pick_stage(rng);
    const Matrix top = draw_target(n1, rng);
    const Matrix base = standard_normal(n1, d, rng);
    const Matrix pos = k == K ? top : interpolate_stage(base, top, schedule.sigma(k + 1));

    Matrix neg(n_neg, d);
    const Index reused = config.coupled ? n1 : 0;
    if (reused > 0) neg.topRows(reused) = interpolate_stage(base, top, schedule.sigma(k));
    if (n_neg > reused) {
      const Matrix extra_top = draw_target(n_neg - reused, rng);
      const Matrix extra_base = standard_normal(n_neg - reused, d, rng);
      neg.bottomRows(n_neg - reused) = interpolate_stage(extra_base, extra_top, schedule.sigma(k));
    }

    fit.loss_trace.push_back(sigmoid_form_stage_objective(fit.model, pos, neg, k, config.noise_magnitude));
    fit.stage_trace.push_back(k);
    Vector grad = sigmoid_form_stage_gradient(fit.model, pos, neg, k, config.noise_magnitude).vector;
    if (config.stage_weighting) grad *= weights(k);
    if (!grad.allFinite()) throw NumericFailure("fit_telescoping: non-finite gradient", static_cast<long>(it));
    clip_grad_norm(grad, config.grad_clip);
    adam_step(adam, fit.model.mutable_params(), grad, true);
  }
  return fit;
}

}  // namespace n2ce
