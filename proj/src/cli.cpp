#include "n2ce/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "n2ce/analysis.hpp"
#include "n2ce/config.hpp"
#include "n2ce/divergence.hpp"
#include "n2ce/gradcheck.hpp"
#include "n2ce/parallel.hpp"
#include "n2ce/samplers.hpp"
#include "n2ce/tasks.hpp"
#include "n2ce/telescoping.hpp"

namespace fs = std::filesystem;

namespace n2ce {

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Cell {
  std::string text;
  Cell(double v) : text(format_double(v)) {}
  Cell(long v) : text(std::to_string(v)) {}
  Cell(long long v) : text(std::to_string(v)) {}
  Cell(int v) : text(std::to_string(v)) {}
  Cell(unsigned long v) : text(std::to_string(v)) {}
  Cell(bool v) : text(v ? "true" : "false") {}
  Cell(const char* v) : text(csv_field(v)) {}
  Cell(const std::string& v) : text(csv_field(v)) {}
};

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write(std::vector<Cell>(header.begin(), header.end()));
  }
  void row(std::initializer_list<Cell> cells) { write(std::vector<Cell>(cells)); }

 private:
  void write(const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i].text;
    out_ << '\n';
  }
  std::ofstream out_;
};

struct Run {
  std::string subcommand;
  ExperimentConfig config;
  fs::path dir;
  int threads = 1;
  std::ostream* console = nullptr;
  std::ofstream log;

  void say(const std::string& line) {
    *console << line << '\n';
    log << line << '\n';
  }
  fs::path file(const std::string& name) const { return dir / name; }
};

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())); }

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double pearson(const Vector& a, const Vector& b) {
  const Vector x = a.array() - a.mean();
  const Vector y = b.array() - b.mean();
  const double denom = std::sqrt(x.squaredNorm() * y.squaredNorm());
  return denom > 0.0 ? x.dot(y) / denom : 0.0;
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------- gradcheck

void cmd_gradcheck(Run& run) {
  const auto& s = run.config.gradcheck;
  GradCheckOptions o;
  o.dim = s.dim;
  o.samples = s.samples;
  o.m_grid = s.m_grid;
  o.mlp_hidden_width = s.mlp_hidden_width;
  o.mlp_resblocks = s.mlp_resblocks;
  o.mlp_coordinates = s.mlp_coordinates;
  o.seed = run.config.seed;
  const auto rows = run_gradient_checks(o);
  CsvWriter csv(run.file("gradcheck.csv"), {"check", "error", "tolerance", "pass"});
  int failed = 0;
  for (const auto& r : rows) {
    csv.row({r.check, r.error, r.tolerance, r.pass});
    if (!r.pass) ++failed;
  }
  run.say("gradcheck: " + std::to_string(rows.size() - failed) + "/" + std::to_string(rows.size()) + " checks pass");
}

// --------------------------------------------------------------- trajectory

void cmd_trajectory(Run& run) {
  const auto& s = run.config.trajectory;
  TrajectoryConfig base = s.dim == 5 ? TrajectoryConfig::five_dim(s.samples_per_iter) : TrajectoryConfig::two_dim();
  base.samples_per_iter = s.samples_per_iter;
  base.step_size = s.step_size;
  base.iterations = s.iterations;
  base.negatives = s.negatives;
  base.common_random_numbers = s.common_random_numbers;

  const long n_est = static_cast<long>(s.estimators.size());
  const long jobs = n_est * static_cast<long>(s.repeats);
  std::vector<TrajectoryRecord> records(jobs);
  parallel_for(jobs, run.threads, [&](long job) {
    const long e = job / s.repeats;
    const long r = job % s.repeats;
    TrajectoryConfig c = base;
    c.estimator = s.estimators[e];
    c.seed = derive_rng(run.config.seed, {static_cast<std::uint64_t>(r)})();
    records[job] = trajectory_run(c);
  });

  CsvWriter csv(run.file("trajectory.csv"), {"run_id", "iter", "distance", "grad_error"});
  for (long job = 0; job < jobs; ++job) {
    const std::string id = s.estimators[job / s.repeats].label() + "/" + std::to_string(job % s.repeats);
    const auto& rec = records[job];
    for (std::size_t t = 0; t < rec.distance.size(); ++t)
      csv.row({id, static_cast<long>(t), rec.distance[t], rec.grad_error[t]});
  }

  long mle = -1;
  for (long e = 0; e < n_est; ++e)
    if (s.estimators[e].tag == ObjectiveTag::MleExact) mle = e;
  CsvWriter summary(run.file("trajectory_summary.csv"),
                    {"estimator", "M", "repeats", "final_distance_mean", "final_distance_stderr", "mse_mean",
                     "gap_to_mle_mean"});
  for (long e = 0; e < n_est; ++e) {
    std::vector<double> finals, mses, gaps;
    for (long r = 0; r < s.repeats; ++r) {
      const auto& rec = records[e * s.repeats + r];
      finals.push_back(rec.final_distance);
      mses.push_back(rec.mse);
      if (mle >= 0) {
        const Matrix diff = rec.path - records[mle * s.repeats + r].path;
        gaps.push_back(diff.rowwise().norm().mean());
      }
    }
    const auto& kind = s.estimators[e];
    summary.row({to_string(kind.tag), kind.noise_magnitude, static_cast<long>(s.repeats), mean_of(finals),
                 stderr_of(finals), mean_of(mses), mle >= 0 ? Cell(mean_of(gaps)) : Cell("")});
    run.say("trajectory: " + kind.label() + " final distance " + fmt(mean_of(finals)) + " +- " +
            fmt(stderr_of(finals)));
  }
}

// --------------------------------------------------------------- bias-decay

void cmd_bias_decay(Run& run) {
  const auto& s = run.config.bias_decay;
  const auto points = gradient_error_vs_M(to_vector(s.alpha), to_vector(s.target), s.m_grid, s.n, s.repeats,
                                          run.config.seed, run.threads);
  CsvWriter csv(run.file("bias_decay.csv"), {"M", "grad_error_mean", "grad_error_stderr"});
  std::vector<double> ms, errs, sq;
  for (const auto& p : points) {
    csv.row({p.noise_magnitude, p.error_mean, p.error_stderr});
    ms.push_back(p.noise_magnitude);
    errs.push_back(p.error_mean);
    sq.push_back(p.error_mean * p.error_mean);
  }
  if (ms.size() >= 2) {
    run.say("bias-decay: log-log slope of grad_error_mean vs M = " + fmt(loglog_slope(ms, errs)));
    run.say("bias-decay: log-log slope of squared error vs M = " + fmt(loglog_slope(ms, sq)));
  }
}

// ---------------------------------------------------------------- mse-sweep

void cmd_mse_sweep(Run& run) {
  const auto& s = run.config.sweep;
  SweepConfig c;
  c.dim = s.dim;
  c.n = s.n;
  c.repeats = s.repeats;
  c.entries = s.entries;
  c.common_random_numbers = s.common_random_numbers;
  c.seed = run.config.seed;
  c.threads = run.threads;
  const SweepTable table = mse_sweep(c);
  CsvWriter csv(run.file("mse_sweep.csv"), {"estimator", "M", "n", "repeats", "mse_mean", "mse_std"});
  for (const auto& row : table.rows)
    csv.row({to_string(row.estimator.tag), row.estimator.noise_magnitude, static_cast<long>(row.n),
             static_cast<long>(row.repeats), row.mse_mean, row.mse_std});
  bool has_n2ce = false;
  for (const auto& row : table.rows) has_n2ce |= row.estimator.tag == ObjectiveTag::N2ce;
  if (has_n2ce) run.say("mse-sweep: argmin " + table.rows[table.argmin()].estimator.label());
}

// ---------------------------------------------------------------- optimal-m

void cmd_optimal_m(Run& run) {
  const auto& s = run.config.optimal_m;
  const auto results = optimal_m_scaling_check(s.ns, s.m_grid, s.repeats, run.config.seed, run.threads);
  CsvWriter csv(run.file("optimal_m.csv"), {"n", "argmin_M", "lower", "upper", "in_bracket"});
  CsvWriter table(run.file("optimal_m_table.csv"), {"n", "M", "mse_mean", "mse_std"});
  for (const auto& r : results) {
    csv.row({static_cast<long>(r.n), r.argmin_m, r.lower, r.upper, r.in_bracket});
    for (const auto& row : r.table.rows)
      table.row({static_cast<long>(r.n), row.estimator.noise_magnitude, row.mse_mean, row.mse_std});
    run.say("optimal-m: n = " + std::to_string(r.n) + " argmin M = " + fmt(r.argmin_m) +
            (r.in_bracket ? " (inside" : " (outside") + " [sqrt(n), 10 sqrt(n)])" + (r.vacuous ? " vacuous grid" : ""));
  }
}

// ---------------------------------------------------------- converge-expfam

void cmd_converge(Run& run) {
  const auto& s = run.config.converge;
  ConvergeConfig c;
  c.init_mean = to_vector(s.init_mean);
  c.target_mean = to_vector(s.target_mean);
  c.noise_magnitude = s.noise_magnitude;
  c.delta = s.delta;
  c.step = s.step;
  c.samples_per_iter = s.samples_per_iter;
  c.kappa_samples = s.kappa_samples;
  c.budget_constant = s.budget_constant;
  c.iteration_cap = s.iteration_cap;
  c.seed = run.config.seed;
  const ConvergeResult r = normalized_ascent_converge(c);
  CsvWriter csv(run.file("converge.csv"), {"kappa", "delta", "bound", "first_hit", "success"});
  csv.row({r.kappa, s.delta, r.bound, r.first_hit_iteration, r.success});
  run.say("converge-expfam: kappa = " + fmt(r.kappa) + ", bound = " + std::to_string(r.bound) +
          ", first hit = " + std::to_string(r.first_hit_iteration) + (r.success ? ", success" : ", no hit") +
          ", stalls = " + std::to_string(r.stall_events));
}

// --------------------------------------------------------- divergence-check

void cmd_divergence(Run& run) {
  const auto& s = run.config.divergence;
  const Vector mean1 = to_vector(s.mean1);
  const Vector mean0 = to_vector(s.mean0);
  // The true ratio between N(mean1, I) and N(mean0, I) is a location model
  // after shifting both by mean0.
  const GaussianLocation model(mean1 - mean0);
  Rng rng = derive_rng(run.config.seed);
  const Matrix pos = sample_gaussian_location(mean1 - mean0, s.n, rng);
  const Matrix neg = sample_gaussian_location(Vector::Zero(mean0.size()), s.n, rng);
  CsvWriter csv(run.file("divergence.csv"), {"M", "alpha", "mc_bound", "quadrature", "stderr"});
  const bool quadrature = mean1.size() <= 2;
  for (double m : s.m_grid) {
    const auto est = d_alpha_variational_estimate(model, pos, neg, m);
    const double quad = quadrature ? d_alpha_quadrature_oracle(mean1, mean0, m) : std::nan("");
    csv.row({m, m / (1.0 + m), est.value, quad, est.stderr});
    run.say("divergence-check: M = " + fmt(m) + " mc " + fmt(est.value) + " +- " + fmt(est.stderr) +
            " quadrature " + fmt(quad));
  }
  if (quadrature) {
    run.say("divergence-check: JS quadrature " + fmt(js_divergence_quadrature(mean1, mean0)) + ", KL " +
            fmt(kl_unit_gaussians(mean1, mean0)));
  }
}

// ----------------------------------------------------------- telescope-fit

SigmaSchedule schedule_from(const std::string& name, const std::vector<double>& custom) {
  if (name == "K3") return SigmaSchedule::preset(SigmaPreset::K3);
  if (name == "K6") return SigmaSchedule::preset(SigmaPreset::K6);
  return SigmaSchedule::from_squared(custom);
}

GmmTarget sampler_gmm(const SamplerSection& s) {
  GmmTarget g;
  for (const auto& m : s.gmm_means) g.means.push_back(to_vector(m));
  g.variance = s.gmm_variance;
  g.weights = Vector::Constant(static_cast<Index>(g.means.size()), 1.0 / static_cast<double>(g.means.size()));
  g.validate();
  return g;
}

void cmd_telescope_fit(Run& run) {
  const auto& s = run.config.telescoping;
  const SigmaSchedule schedule = schedule_from(s.schedule, s.sigma_squared);
  TelescopingConfig c;
  c.noise_magnitude = s.noise_magnitude;
  c.iterations = s.iterations;
  c.batch_size = s.batch_size;
  c.negatives = s.negatives == "scaled" ? NegativeSizing::Scaled : NegativeSizing::Symmetric;
  c.max_negatives = s.max_negatives;
  c.coupled = s.coupled;
  c.stage_weighting = s.stage_weighting;
  c.adam.learning_rate = s.learning_rate;
  c.grad_clip = s.grad_clip;
  c.seed = derive_rng(run.config.seed, {1})();

  const Vector mean = to_vector(s.target_mean);
  GmmTarget gmm;
  TargetSampler target;
  std::function<double(const Vector&)> reference;
  if (s.target == "gmm") {
    require(run.config.sampler.dim == 2, "telescope-fit: the GMM target must be 2-D");
    gmm = sampler_gmm(run.config.sampler);
    target = [&gmm](Index count, Rng& rng) { return gmm_sample(gmm, count, rng); };
    reference = [&gmm](const Vector& z) { return gmm_logdensity(gmm, z) - log_normal_density<double>(z, Vector::Zero(2)); };
  } else {
    target = [mean](Index count, Rng& rng) { return sample_gaussian_location(mean, count, rng); };
    reference = [mean](const Vector& z) { return mean.dot(z) - 0.5 * mean.squaredNorm(); };
  }

  Rng init = derive_rng(run.config.seed, {0});
  const MlpShape shape{2, s.hidden_width, s.num_resblocks, schedule.K() + 1};
  const TelescopingFit fit = fit_telescoping(target, schedule, MlpRatioModel::initialized(shape, init), c);

  {
    CsvWriter csv(run.file("telescope_trace.csv"), {"iter", "stage", "loss"});
    for (std::size_t i = 0; i < fit.loss_trace.size(); ++i)
      csv.row({static_cast<long>(i), fit.stage_trace[i], fit.loss_trace[i]});
  }
  const Index g = s.grid_size;
  Matrix grid(g * g, 2);
  for (Index i = 0; i < g; ++i)
    for (Index j = 0; j < g; ++j) {
      grid(i * g + j, 0) = -s.grid_half_width + 2.0 * s.grid_half_width * static_cast<double>(i) / (g - 1);
      grid(i * g + j, 1) = -s.grid_half_width + 2.0 * s.grid_half_width * static_cast<double>(j) / (g - 1);
    }
  const Vector f = telescoping_log_ratios(fit.model, grid);
  Vector truth(grid.rows());
  CsvWriter csv(run.file("telescope_grid.csv"), {"z1", "z2", "log_ratio", "reference"});
  for (Index i = 0; i < grid.rows(); ++i) {
    truth(i) = reference(grid.row(i).transpose());
    csv.row({grid(i, 0), grid(i, 1), f(i), truth(i)});
  }
  run.say("telescope-fit: grid pearson " + fmt(pearson(f, truth)) + ", mean |sum f| " + fmt(f.cwiseAbs().mean()));
}

// ------------------------------------------------------ svgd / langevin

struct SamplerTarget {
  CloudGradient grad;
  bool gmm = false;
  GmmTarget mixture;
};

SamplerTarget sampler_target(const SamplerSection& s) {
  SamplerTarget t;
  if (s.target == "gmm") {
    t.gmm = true;
    t.mixture = sampler_gmm(s);
    require(t.mixture.dim() == s.dim, "sampler: GMM dimension must equal sampler.dim");
    const GmmTarget copy = t.mixture;
    t.grad = per_particle([copy](const Vector& z) { return gmm_logdensity_grad(copy, z); });
  } else {
    t.grad = [](const Matrix& z) { return Matrix(-z); };
  }
  return t;
}

void write_samples(Run& run, const Matrix& z, const SamplerTarget& t) {
  std::vector<std::string> header{"particle"};
  for (Index j = 0; j < z.cols(); ++j) header.push_back("z" + std::to_string(j + 1));
  // The column count depends on the dimension, so rows are written directly.
  std::ofstream out(run.file("samples.csv"), std::ios::binary);
  for (std::size_t h = 0; h < header.size(); ++h) out << (h ? "," : "") << header[h];
  out << '\n';
  for (Index i = 0; i < z.rows(); ++i) {
    out << i;
    for (Index j = 0; j < z.cols(); ++j) out << ',' << format_double(z(i, j));
    out << '\n';
  }

  CsvWriter summary(run.file("sampler_summary.csv"), {"statistic", "value"});
  const Vector mean = z.colwise().mean();
  summary.row({"mean_norm", mean.norm()});
  if (z.rows() >= 2) {
    const Matrix centered = z.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(z.rows() - 1);
    summary.row({"cov_identity_frobenius", (cov - Matrix::Identity(z.cols(), z.cols())).norm()});
  }
  if (t.gmm) {
    for (std::size_t c = 0; c < t.mixture.means.size(); ++c) {
      long count = 0;
      for (Index i = 0; i < z.rows(); ++i) count += (z.row(i).transpose() - t.mixture.means[c]).norm() < 0.5;
      summary.row({"mode_" + std::to_string(c) + "_within_0.5", static_cast<double>(count) / z.rows()});
    }
  }
  run.say("sampler: mean norm " + fmt(mean.norm()));
}

void cmd_svgd(Run& run) {
  const auto& s = run.config.sampler;
  const SamplerTarget t = sampler_target(s);
  Rng rng = derive_rng(run.config.seed);
  const Matrix init = s.init_scale * standard_normal(s.particles, s.dim, rng);
  SvgdConfig c;
  c.steps = s.svgd_steps;
  c.initial_step = s.svgd_initial_step;
  c.bandwidth_floor = s.bandwidth_floor;
  const SvgdResult res = svgd_run(t.grad, init, c);
  if (res.trace.single_particle) run.say("svgd: single particle, no kernel interaction (plain adaptive ascent)");
  write_samples(run, res.particles, t);
  CsvWriter trace(run.file("svgd_trace.csv"), {"step", "bandwidth", "phi_norm"});
  for (std::size_t i = 0; i < res.trace.bandwidth.size(); ++i)
    trace.row({static_cast<long>(i), res.trace.bandwidth[i], res.trace.phi_norm[i]});
}

void cmd_langevin(Run& run) {
  const auto& s = run.config.sampler;
  const SamplerTarget t = sampler_target(s);
  Rng rng = derive_rng(run.config.seed);
  const Matrix init = s.init_scale * standard_normal(s.particles, s.dim, rng);
  LangevinConfig c;
  c.steps = s.langevin_steps;
  c.step_size = s.langevin_step_size;
  c.seed = derive_rng(run.config.seed, {1})();
  write_samples(run, langevin_run(t.grad, init, c), t);
}

// ------------------------------------------------------------------ branin

void cmd_branin(Run& run) {
  const auto& s = run.config.bbo;
  BboConfig base;
  base.dataset_size = s.dataset_size;
  base.remove_top_fraction = s.remove_top_fraction;
  base.prior_quantile = s.prior_quantile;
  base.prior_jitter = s.prior_jitter;
  base.noise_magnitude = s.noise_magnitude;
  base.schedule = s.schedule == "K3" ? SigmaPreset::K3 : SigmaPreset::K6;
  base.prior_shape = MlpShape{2, s.prior_hidden_width, s.prior_resblocks, 1};
  base.telescoping.iterations = s.prior_iterations;
  base.telescoping.batch_size = s.prior_batch;
  base.telescoping.stage_weighting = s.stage_weighting;
  base.telescoping.adam.learning_rate = s.prior_learning_rate;
  base.regressor_shape = MlpShape{2, s.regressor_hidden_width, s.regressor_resblocks, 1};
  base.regressor_iterations = s.regressor_iterations;
  base.regressor_learning_rate = s.regressor_learning_rate;
  base.regressor_rmse_gate = s.regressor_rmse_gate;
  base.lambda1 = s.lambda1;
  base.lambda2 = s.lambda2;
  base.sampler = sampler_kind_from_string(s.sampler);
  base.svgd.steps = s.svgd_steps;
  base.svgd.initial_step = s.svgd_initial_step;
  base.langevin.steps = s.langevin_steps;
  base.langevin.step_size = s.langevin_step_size;
  base.query_budget = s.query_budget;

  const long runs = static_cast<long>(s.seeds.size());
  std::vector<BraninTask> tasks(runs);
  std::vector<BboResult> results(runs);
  parallel_for(runs, run.threads, [&](long i) {
    BboConfig c = base;
    c.seed = derive_rng(run.config.seed, {s.seeds[i]})();
    tasks[i] = branin_dataset(c.dataset_size, c.remove_top_fraction, c.seed);
    results[i] = bbo_run(tasks[i], c);
  });

  CsvWriter csv(run.file("branin.csv"), {"seed", "Q", "best_value", "y_max_dataset"});
  CsvWriter cand(run.file("branin_candidates.csv"), {"seed", "x1", "x2", "value"});
  for (long i = 0; i < runs; ++i) {
    const auto& r = results[i];
    csv.row({static_cast<unsigned long>(s.seeds[i]), static_cast<long>(s.query_budget), r.best_value,
             r.y_max_dataset});
    for (Index q = 0; q < r.candidates.rows(); ++q)
      cand.row({static_cast<unsigned long>(s.seeds[i]), r.candidates(q, 0), r.candidates(q, 1), r.values(q)});
    std::ofstream data(run.file("branin_dataset_seed" + std::to_string(s.seeds[i]) + ".csv"), std::ios::binary);
    write_dataset_csv(tasks[i], data);
    run.say("branin: seed " + std::to_string(s.seeds[i]) + " best " + fmt(r.best_value) + " dataset max " +
            fmt(r.y_max_dataset) + " regressor rmse " + fmt(r.regressor_rmse) + " queries " +
            std::to_string(r.queries));
  }
}

// ------------------------------------------------------------------- driver

using Handler = void (*)(Run&);

const std::vector<std::pair<std::string, Handler>>& handlers() {
  static const std::vector<std::pair<std::string, Handler>> table{
      {"gradcheck", cmd_gradcheck},        {"trajectory", cmd_trajectory},
      {"bias-decay", cmd_bias_decay},      {"mse-sweep", cmd_mse_sweep},
      {"optimal-m", cmd_optimal_m},        {"converge-expfam", cmd_converge},
      {"divergence-check", cmd_divergence}, {"telescope-fit", cmd_telescope_fit},
      {"svgd-sample", cmd_svgd},           {"langevin-sample", cmd_langevin},
      {"branin", cmd_branin}};
  return table;
}

std::string usage_text() {
  std::ostringstream os;
  os << "usage: n2ce <subcommand> [--config FILE] [--out DIR] [--seed N]\n\nsubcommands:\n";
  for (const auto& [name, fn] : handlers()) {
    (void)fn;
    os << "  " << name << '\n';
  }
  os << "\nenvironment: N2CE_OUT (output directory), N2CE_THREADS (worker threads)\n"
     << "Langevin steps use z <- z + (s^2/2) grad log p(z) + s eps.\n";
  return os.str();
}

void emit_error(std::ostream& err, const std::string& kind, const std::string& subcommand, const std::string& message,
                const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j{{"error", kind}, {"subcommand", subcommand}, {"message", message}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  err << j.dump() << '\n';
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : handlers()) {
      (void)fn;
      out.push_back(name);
    }
    return out;
  }();
  return names;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << usage_text();
    emit_error(err, "usage", "", "missing subcommand");
    return 2;
  }
  const std::string name = args.front();
  if (name == "--help" || name == "-h" || name == "help") {
    out << usage_text();
    return 0;
  }
  Handler handler = nullptr;
  for (const auto& [n, fn] : handlers())
    if (n == name) handler = fn;
  if (!handler) {
    err << usage_text();
    emit_error(err, "usage", name, "unknown subcommand '" + name + "'");
    return 2;
  }

  CLI::App app("n2ce " + name);
  std::string config_path, out_dir;
  std::uint64_t seed_override = 0;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--out", out_dir, "output directory (default: $N2CE_OUT or ./n2ce_out)");
  auto* seed_opt = app.add_option("--seed", seed_override, "override the config seed");
  std::vector<std::string> argv_store{"n2ce " + name};
  argv_store.insert(argv_store.end(), args.begin() + 1, args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help() << '\n' << usage_text();
    emit_error(err, "usage", name, e.what());
    return 2;
  }

  Run run;
  run.subcommand = name;
  run.console = &out;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot read config file " + config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      run.config = parse_config(buf.str());
    }
    if (seed_opt->count() > 0) run.config.seed = seed_override;
    if (out_dir.empty()) {
      const char* env = std::getenv("N2CE_OUT");
      out_dir = env && *env ? env : "n2ce_out";
    }
    run.dir = out_dir;
    fs::create_directories(run.dir);
    run.threads = default_thread_count();
    {
      std::ofstream sidecar(run.file("resolved_config.json"), std::ios::binary);
      sidecar << serialize_config(run.config);
    }
    run.log.open(run.file("run.log"), std::ios::binary);
    run.say(name + ": seed " + std::to_string(run.config.seed) + ", output " + run.dir.string());
    handler(run);
    return 0;
  } catch (const ConfigError& e) {
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& i : e.issues()) issues.push_back({{"location", i.location}, {"message", i.message}});
    emit_error(err, "config", name, e.what(), {{"issues", issues}});
    return 3;
  } catch (const NumericFailure& e) {
    emit_error(err, "numeric", name, e.what(), {{"step", e.step()}});
    return 4;
  } catch (const std::exception& e) {
    emit_error(err, "runtime", name, e.what());
    return 1;
  }
}

}  // namespace n2ce
