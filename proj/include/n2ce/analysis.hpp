#ifndef N2CE_ANALYSIS_HPP
#define N2CE_ANALYSIS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "n2ce/objectives.hpp"

namespace n2ce {

/// Where sample-based estimators draw their negatives from. `Noise` is the
/// base N(0, I); `Model` draws from the current p_alpha = N(alpha, I), which
/// is available in closed form for the Gaussian family and turns the
/// negative term into a plain expectation under the model.
enum class NegativeSource { Noise, Model };

std::string to_string(NegativeSource source);
NegativeSource negative_source_from_string(const std::string& name);

struct TrajectoryConfig {
  Vector target_mean;
  Vector init_mean;
  ObjectiveKind estimator = ObjectiveKind::n2ce(1000.0);
  Index samples_per_iter = 4000;
  double step_size = 0.2;
  Index iterations = 150;
  std::uint64_t seed = 0;
  bool common_random_numbers = true;
  NegativeSource negatives = NegativeSource::Noise;
  ObjectiveOptions objective_options{};

  /// 2-D setting: alpha* = (1.5, -0.8), alpha0 = (-2, 1), n = 4000.
  static TrajectoryConfig two_dim();
  /// 5-D setting: alpha* = (-1.5, -0.75, 0, 0.75, 1.5), alpha0 = -alpha*.
  static TrajectoryConfig five_dim(Index samples_per_iter);

  void validate() const;
};

struct TrajectoryRecord {
  std::vector<double> distance;    // ||alpha_t - alpha*||, t = 0..T-1
  std::vector<double> grad_error;  // ||g_t - (alpha* - alpha_t)||
  double final_distance = 0.0;     // ||alpha_T - alpha*||
  double mse = 0.0;                // (1/T) sum_t ||alpha_t - alpha*||^2
  Vector final_mean;
  Matrix path;  // row t = alpha_t, t = 0..T
};

/// Plain gradient ascent alpha_{t+1} = alpha_t + eta * g_t with fresh
/// samples each iteration. Standard-normal innovations are drawn the same
/// way for every estimator, so two runs sharing a seed see common random
/// numbers.
TrajectoryRecord trajectory_run(const TrajectoryConfig& config);

/// Runs `config` once per estimator in `kinds`.
std::vector<TrajectoryRecord> trajectory_compare(const TrajectoryConfig& config, std::span<const ObjectiveKind> kinds,
                                                 int threads = 1);

struct BiasPoint {
  double noise_magnitude = 0.0;
  double error_mean = 0.0;
  double error_stderr = 0.0;
};

/// ||N2CE gradient - (target - alpha)|| at a fixed alpha, averaged over
/// repeats. Each repeat draws one sample set shared by every M.
std::vector<BiasPoint> gradient_error_vs_M(const Vector& alpha, const Vector& target, std::span<const double> m_grid,
                                           Index n, Index repeats, std::uint64_t seed, int threads = 1);

/// Per-coordinate-summed variance of the N2CE gradient estimate at `alpha`
/// across independent batches of n positives and n negatives.
double gradient_estimate_variance(const Vector& alpha, const Vector& target, double m, Index n, Index batches,
                                  std::uint64_t seed);

struct SweepRow {
  ObjectiveKind estimator;
  Index n = 0;
  Index repeats = 0;
  double mse_mean = 0.0;
  double mse_std = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  /// Index of the row with the smallest mse_mean among `tags`.
  std::size_t argmin(std::initializer_list<ObjectiveTag> tags = {ObjectiveTag::N2ce, ObjectiveTag::Nce}) const;
  const SweepRow& find(ObjectiveKind kind) const;
};

struct SweepConfig {
  Index dim = 5;
  Index n = 500;
  std::vector<ObjectiveKind> entries;
  Index repeats = 100;
  std::uint64_t seed = 0;
  /// When set, run r of every entry uses the same stream.
  bool common_random_numbers = true;
  int threads = 1;

  /// Grid of the n = 500 sweep: NWJ, M = 1, 10, 50, 100, 1e3, 1e4, 2e4, 1e9.
  static SweepConfig large_sample();
  /// Grid of the n = 2 sweep: NWJ, M = 1, 1.5, 2, 5, 10, 100, 1e3, 1e9.
  static SweepConfig small_sample();
};

SweepTable mse_sweep(const SweepConfig& config);

struct OptimalMResult {
  Index n = 0;
  double argmin_m = 0.0;
  double lower = 0.0;  // sqrt(n)
  double upper = 0.0;  // 10 sqrt(n)
  bool in_bracket = false;
  bool vacuous = false;  // single-entry grid
  SweepTable table;
};

/// Default geometric grid of M values used by the scaling check.
std::vector<double> default_m_grid();

std::vector<OptimalMResult> optimal_m_scaling_check(std::span<const Index> ns, std::span<const double> m_grid,
                                                    Index repeats, std::uint64_t seed, int threads = 1);

struct ConvergeConfig {
  Vector init_mean;
  Vector target_mean;
  double noise_magnitude = 1000.0;
  double delta = 0.05;
  double step = 0.025;
  Index samples_per_iter = 100000;
  Index kappa_samples = 1000000;
  double budget_constant = 10.0;
  /// Hard stop when the theoretical budget is astronomically large.
  Index iteration_cap = 200000;
  std::uint64_t seed = 0;

  static ConvergeConfig two_dim();
};

struct ConvergeResult {
  bool success = false;
  long first_hit_iteration = -1;
  long bound = 0;
  double kappa = 0.0;
  long stall_events = 0;
  long iterations_run = 0;
};

/// Condition number of E[T(x) T(x)^T], T(x) = [x, -1], under N(mean, I),
/// estimated from `samples` draws.
double extended_moment_condition_number(const Vector& mean, Index samples, Rng& rng);

/// Normalized gradient ascent on the noisier-NCE objective until an iterate
/// lands within delta of the target or the budget runs out.
ConvergeResult normalized_ascent_converge(const ConvergeConfig& config);

/// Least-squares slope of ln y against ln x.
double loglog_slope(std::span<const double> xs, std::span<const double> ys);

}  // namespace n2ce

#endif  // N2CE_ANALYSIS_HPP
