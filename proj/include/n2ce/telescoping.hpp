#ifndef N2CE_TELESCOPING_HPP
#define N2CE_TELESCOPING_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "n2ce/adam.hpp"
#include "n2ce/mlp_ratio.hpp"
#include "n2ce/rng.hpp"

namespace n2ce {

enum class SigmaPreset { K3, K6 };

/// Increasing sequence sigma_0^2 < ... < sigma_K^2 <= 1 defining the
/// intermediate distributions z_k = sqrt(1 - sigma_k^2) z_0 + sigma_k z_{K+1}.
class SigmaSchedule {
 public:
  static SigmaSchedule preset(SigmaPreset which);
  /// Custom squared values; throws std::invalid_argument unless strictly
  /// increasing inside (0, 1].
  static SigmaSchedule from_squared(std::vector<double> sigma_squared);
  /// K + 1 values from linearly spaced betas, sigma_k^2 = 1 - prod_{i<=k}(1 - beta_i),
  /// with beta_0 = first and the last beta solved so sigma_K^2 = last.
  static SigmaSchedule linear(int K, double first = 0.01, double last = 0.9997);

  int K() const { return static_cast<int>(squared_.size()) - 1; }
  Index size() const { return static_cast<Index>(squared_.size()); }
  const std::vector<double>& sigma_squared() const { return squared_; }
  double sigma(int k) const;

 private:
  explicit SigmaSchedule(std::vector<double> sq) : squared_(std::move(sq)) {}
  std::vector<double> squared_;
};

/// w_k = sqrt(sigma_K / prod_{i=k}^{K} sigma_i).
Vector stage_weights(const SigmaSchedule& schedule);

/// sqrt(1 - sigma^2) z0 + sigma zK1.
Vector interpolate_stage(const Vector& z0, const Vector& zK1, double sigma);
/// Row-wise version for sample matrices.
Matrix interpolate_stage(const Matrix& z0, const Matrix& zK1, double sigma);

/// Sum over stages of f(z, k): the log of the telescoped ratio.
double telescoping_log_ratio(const MlpRatioModel& model, const Vector& z);
Vector telescoping_log_ratios(const MlpRatioModel& model, const Matrix& z);
/// Row i holds d/dz of the summed log-ratio at z_i.
Matrix telescoping_input_grad(const MlpRatioModel& model, const Matrix& z);

/// KL(q_{k+1} || q_k) for each stage when the target is N(mean, I) and the
/// base is N(0, I); stage k+1 = K+1 is the target itself.
std::vector<double> gaussian_stage_kl(const SigmaSchedule& schedule, const Vector& mean);

enum class NegativeSizing {
  Symmetric,  // n_neg = n1
  Scaled      // n_neg = M * n1, capped by max_negatives
};

struct TelescopingConfig {
  double noise_magnitude = 100.0;
  Index iterations = 2000;
  Index batch_size = 256;
  NegativeSizing negatives = NegativeSizing::Symmetric;
  Index max_negatives = 1000000;
  /// Stage-k negatives reuse the (z0, z_{K+1}) pairs behind the positives.
  bool coupled = true;
  bool stage_weighting = false;
  AdamConfig adam{5e-4, 0.9, 0.999, 1e-8};
  double grad_clip = 100.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Draws `count` rows from the target q_{K+1}.
using TargetSampler = std::function<Matrix(Index count, Rng& rng)>;

struct TelescopingFit {
  MlpRatioModel model;
  std::vector<double> loss_trace;  // stage objective before each update
  std::vector<int> stage_trace;
};

/// Trains the shared stage network. Each iteration picks a stage k
/// uniformly; positives come from q_{k+1} (raw target when k = K) and
/// negatives from q_k, both through interpolate_stage.
TelescopingFit fit_telescoping(const TargetSampler& target, const SigmaSchedule& schedule, MlpRatioModel model,
                               const TelescopingConfig& config);

}  // namespace n2ce

#endif  // N2CE_TELESCOPING_HPP
