#ifndef N2CE_CONFIG_HPP
#define N2CE_CONFIG_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "n2ce/analysis.hpp"
#include "n2ce/samplers.hpp"
#include "n2ce/tasks.hpp"
#include "n2ce/telescoping.hpp"

namespace n2ce {

/// One problem found while reading a config document. `location` is a
/// JSON pointer such as "/trajectory/step_size".
struct ConfigIssue {
  std::string location;
  std::string message;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

struct TrajectorySection {
  Index dim = 2;
  Index samples_per_iter = 4000;
  double step_size = 0.2;
  Index iterations = 150;
  Index repeats = 20;
  NegativeSource negatives = NegativeSource::Model;
  bool common_random_numbers = true;
  std::vector<ObjectiveKind> estimators{ObjectiveKind::mle_exact(), ObjectiveKind::n2ce(1000.0),
                                        ObjectiveKind::n2ce(100.0), ObjectiveKind::n2ce(10.0), ObjectiveKind::nce()};
};

struct SweepSection {
  Index dim = 5;
  Index n = 500;
  Index repeats = 100;
  bool common_random_numbers = true;
  std::vector<ObjectiveKind> entries = SweepConfig::large_sample().entries;
};

struct BiasDecaySection {
  std::vector<double> alpha{-2.0, 1.0};
  std::vector<double> target{1.5, -0.8};
  std::vector<double> m_grid{10.0, 30.0, 100.0, 300.0, 1000.0};
  Index n = 1000000;
  Index repeats = 10;
};

struct OptimalMSection {
  std::vector<Index> ns{2, 50, 500};
  std::vector<double> m_grid = default_m_grid();
  Index repeats = 100;
};

struct ConvergeSection {
  std::vector<double> init_mean{-2.0, 1.0};
  std::vector<double> target_mean{1.5, -0.8};
  double noise_magnitude = 1000.0;
  double delta = 0.05;
  double step = 0.025;
  Index samples_per_iter = 100000;
  Index kappa_samples = 1000000;
  double budget_constant = 10.0;
  Index iteration_cap = 200000;
};

struct DivergenceSection {
  std::vector<double> mean1{1.0};
  std::vector<double> mean0{0.0};
  std::vector<double> m_grid{1.0, 10.0, 100.0, 1000.0, 1e9};
  Index n = 100000;
};

struct GradcheckSection {
  Index dim = 2;
  Index samples = 64;
  std::vector<double> m_grid{1.0, 10.0, 1000.0};
  Index mlp_hidden_width = 16;
  Index mlp_resblocks = 2;
  Index mlp_coordinates = 100;
};

struct TelescopingSection {
  std::string target = "gaussian";  // gaussian | gmm
  std::vector<double> target_mean{2.0, 2.0};
  std::string schedule = "K3";      // K3 | K6 | custom
  std::vector<double> sigma_squared;  // used when schedule == custom
  Index hidden_width = 64;
  Index num_resblocks = 2;
  double noise_magnitude = 100.0;
  Index iterations = 4000;
  Index batch_size = 256;
  std::string negatives = "symmetric";  // symmetric | scaled
  Index max_negatives = 1000000;
  bool coupled = true;
  bool stage_weighting = false;
  double learning_rate = 1e-3;
  double grad_clip = 100.0;
  Index grid_size = 50;
  double grid_half_width = 3.0;
};

struct SamplerSection {
  std::string target = "standard_normal";  // standard_normal | gmm
  std::vector<std::vector<double>> gmm_means{{2.5, 0.0}, {-1.25, 2.1650635094610964}, {-1.25, -2.1650635094610964}};
  double gmm_variance = 0.25;
  Index dim = 2;
  Index particles = 128;
  double init_scale = 1.0;
  Index svgd_steps = 500;
  double svgd_initial_step = 0.4;
  double bandwidth_floor = 1e-6;
  Index langevin_steps = 100;
  double langevin_step_size = 0.4;
};

struct BboSection {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  Index dataset_size = 5000;
  double remove_top_fraction = 0.1;
  double prior_quantile = 0.1;
  double prior_jitter = 0.05;
  double noise_magnitude = 100.0;
  std::string schedule = "K6";
  Index prior_hidden_width = 64;
  Index prior_resblocks = 2;
  Index prior_iterations = 1500;
  Index prior_batch = 128;
  bool stage_weighting = true;
  double prior_learning_rate = 1e-3;
  Index regressor_hidden_width = 64;
  Index regressor_resblocks = 2;
  Index regressor_iterations = 3000;
  double regressor_learning_rate = 1e-3;
  double regressor_rmse_gate = 0.05;
  double lambda1 = 20.0;
  double lambda2 = 1.0;
  std::string sampler = "svgd";
  Index svgd_steps = 500;
  double svgd_initial_step = 0.4;
  Index langevin_steps = 100;
  double langevin_step_size = 0.4;
  Index query_budget = 128;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  TrajectorySection trajectory;
  SweepSection sweep;
  BiasDecaySection bias_decay;
  OptimalMSection optimal_m;
  ConvergeSection converge;
  DivergenceSection divergence;
  GradcheckSection gradcheck;
  TelescopingSection telescoping;
  SamplerSection sampler;
  BboSection bbo;
};

/// Parses a JSON document. Missing keys keep their defaults; unknown keys,
/// wrong types and invalid values are all collected into one ConfigError.
ExperimentConfig parse_config(const std::string& text);
/// Pretty-printed JSON with every field present; floats keep 17 digits.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace n2ce

#endif  // N2CE_CONFIG_HPP
