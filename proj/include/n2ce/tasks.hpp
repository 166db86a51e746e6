#ifndef N2CE_TASKS_HPP
#define N2CE_TASKS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "n2ce/mlp_ratio.hpp"
#include "n2ce/samplers.hpp"
#include "n2ce/telescoping.hpp"

namespace n2ce {

/// Negated Branin: -a (x2 - b x1^2 + c x1 - r)^2 - s (1 - t) cos x1 - s.
double branin_value(double x1, double x2);

struct BraninTask {
  static constexpr double lo1 = -5.0, hi1 = 10.0, lo2 = 0.0, hi2 = 15.0;
  static constexpr double optimum_value = -0.39788735772973816;

  Matrix x;  // N x 2
  Vector y;
  double y_max = 0.0;

  /// The three global maximizers.
  static Matrix maximizers();
};

/// N uniform draws over the domain box with the top fraction (by value)
/// removed. y_max is the largest surviving value.
BraninTask branin_dataset(Index n, double remove_top_fraction, std::uint64_t seed);

/// Headered CSV with columns x1, x2, y.
void write_dataset_csv(const BraninTask& task, std::ostream& out);
BraninTask read_dataset_csv(std::istream& in);

/// Isotropic Gaussian mixture with a shared variance.
struct GmmTarget {
  std::vector<Vector> means;
  double variance = 1.0;
  Vector weights;

  void validate() const;
  Index dim() const { return means.front().size(); }

  /// Equal-weight components of variance 0.25 at the Branin maximizers.
  static GmmTarget branin_optima();
};

double gmm_logdensity(const GmmTarget& target, const Vector& z);
Vector gmm_logdensity_grad(const GmmTarget& target, const Vector& z);
Matrix gmm_sample(const GmmTarget& target, Index count, Rng& rng);

/// Latent-space energy
///   -lambda1 (y_target - g(z))^2 + lambda2 (sum_k f_k(z) - ||z||^2 / 2).
/// All callables act on a batch of rows. Gradient callables are optional;
/// when missing, central differences with step 1e-5 are used instead.
struct ConditionalEnergy {
  double lambda1 = 20.0;
  double lambda2 = 1.0;
  double y_target = 1.0;
  std::function<Vector(const Matrix&)> predictor;
  std::function<Matrix(const Matrix&)> predictor_grad;
  std::function<Vector(const Matrix&)> prior_logratio;
  std::function<Matrix(const Matrix&)> prior_logratio_grad;

  void validate() const;
};

struct EnergyGradient {
  Matrix grad;
  bool finite_difference = false;
};

Vector conditional_logdensity(const ConditionalEnergy& energy, const Matrix& z);
EnergyGradient conditional_logdensity_grad(const ConditionalEnergy& energy, const Matrix& z);
Vector conditional_logdensity_grad(const ConditionalEnergy& energy, const Vector& z);

enum class SamplerKind { Langevin, Svgd };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

struct BboConfig {
  Index dataset_size = 5000;
  double remove_top_fraction = 0.1;
  /// The prior is fit on this top fraction of the surviving design points.
  double prior_quantile = 0.1;
  /// Std of the Gaussian jitter added to resampled prior points (latent units).
  double prior_jitter = 0.05;
  double noise_magnitude = 100.0;
  SigmaPreset schedule = SigmaPreset::K6;
  MlpShape prior_shape{2, 64, 2, 7};
  TelescopingConfig telescoping{100.0, 1500, 128, NegativeSizing::Symmetric, 1000000, true, true,
                                {1e-3, 0.9, 0.999, 1e-8}, 100.0, 0};
  MlpShape regressor_shape{2, 64, 2, 1};
  Index regressor_iterations = 3000;
  Index regressor_batch = 256;
  double regressor_learning_rate = 1e-3;
  double regressor_rmse_gate = 0.05;
  double lambda1 = 20.0;
  double lambda2 = 1.0;
  SamplerKind sampler = SamplerKind::Svgd;
  SvgdConfig svgd{};
  LangevinConfig langevin{};
  Index query_budget = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Design box <-> latent coordinates: x = center + 3.75 z, so the box maps
/// to [-2, 2]^2.
Matrix design_to_latent(const Matrix& x);
Matrix latent_to_design(const Matrix& z);

struct RegressorFit {
  MlpRatioModel model;
  double y_min = 0.0;
  double y_max = 0.0;
  double holdout_rmse = 0.0;  // normalized units
};

/// Squared-loss MLP regressor on (latent x, min-max normalized y), with a
/// 10% holdout. Throws std::runtime_error if the holdout RMSE exceeds the gate.
RegressorFit fit_regressor(const BraninTask& task, const BboConfig& config);

struct BboResult {
  double best_value = 0.0;
  Matrix candidates;  // Q x 2, design space
  Vector values;      // branin value of each candidate
  double y_max_dataset = 0.0;
  double regressor_rmse = 0.0;
  Index queries = 0;
};

/// Prior fit, regressor fit, latent sampling, then exactly Q evaluations.
BboResult bbo_run(const BraninTask& task, const BboConfig& config);
/// Same with an already fitted regressor.
BboResult bbo_run(const BraninTask& task, const BboConfig& config, const RegressorFit& regressor);

}  // namespace n2ce

#endif  // N2CE_TASKS_HPP
