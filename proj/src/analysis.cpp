#include "n2ce/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "n2ce/gaussian_location.hpp"
#include "n2ce/parallel.hpp"
#include "n2ce/rng.hpp"

namespace n2ce {

std::string to_string(NegativeSource source) { return source == NegativeSource::Noise ? "noise" : "model"; }

NegativeSource negative_source_from_string(const std::string& name) {
  if (name == "noise") return NegativeSource::Noise;
  if (name == "model") return NegativeSource::Model;
  throw std::invalid_argument("unknown negative source '" + name + "' (expected noise or model)");
}

TrajectoryConfig TrajectoryConfig::two_dim() {
  TrajectoryConfig c;
  c.target_mean = (Vector(2) << 1.5, -0.8).finished();
  c.init_mean = (Vector(2) << -2.0, 1.0).finished();
  return c;
}

TrajectoryConfig TrajectoryConfig::five_dim(Index samples_per_iter) {
  TrajectoryConfig c;
  c.target_mean = (Vector(5) << -1.5, -0.75, 0.0, 0.75, 1.5).finished();
  c.init_mean = -c.target_mean;
  c.samples_per_iter = samples_per_iter;
  return c;
}

void TrajectoryConfig::validate() const {
  require(target_mean.size() > 0 && target_mean.size() == init_mean.size(),
          "trajectory: target and init dimensions must agree");
  require(samples_per_iter >= 1, "trajectory: samples_per_iter must be >= 1");
  require(step_size > 0.0, "trajectory: step_size must be positive");
  require(iterations >= 1, "trajectory: iterations must be >= 1");
  estimator.validate();
}

namespace {

std::uint64_t estimator_stream(const ObjectiveKind& kind) {
  return (static_cast<std::uint64_t>(kind.tag) << 56) ^ std::bit_cast<std::uint64_t>(kind.noise_magnitude);
}

// Gradient with negatives drawn from p_alpha: the q0-weight w(x) becomes w(x)/r(x).
Vector model_negative_gradient(const ObjectiveKind& kind, const GaussianLocation& model, const Matrix& pos,
                               const Matrix& neg) {
  const double m = kind.tag == ObjectiveTag::Nwj ? 1.0 : kind.noise_magnitude;
  const double log_m = std::log(m);
  const Vector fp = model.log_ratios(pos);
  const Vector fn = model.log_ratios(neg);
  const double np = static_cast<double>(pos.rows());
  const double nn = static_cast<double>(neg.rows());
  Vector wp, wn;
  switch (kind.tag) {
    case ObjectiveTag::Nce:
    case ObjectiveTag::N2ce:
      wp = fp.unaryExpr([&](double f) { return sigmoid(log_m - f); }) / np;
      wn = fn.unaryExpr([&](double f) { return sigmoid(log_m - f); }) / nn;
      break;
    case ObjectiveTag::NegReweight:
      wp = fp.unaryExpr([](double f) { return sigmoid(-f); }) / np;
      wn = fn.unaryExpr([&](double f) { return sigmoid(log_m - f); }) / nn;
      break;
    case ObjectiveTag::Nwj:
      wp = Vector::Constant(fp.size(), 1.0 / np);
      wn = Vector::Constant(fn.size(), 1.0 / nn);
      break;
    case ObjectiveTag::MleExact:
      throw std::invalid_argument("model_negative_gradient: MLE_EXACT is not sample-based");
  }
  return model.weighted_grad(pos, wp) - model.weighted_grad(neg, wn);
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TrajectoryRecord trajectory_run(const TrajectoryConfig& config) {
  config.validate();
  const Index dim = config.target_mean.size();
  const Index n = config.samples_per_iter;
  Rng rng = config.common_random_numbers ? derive_rng(config.seed)
                                         : derive_rng(config.seed, {estimator_stream(config.estimator)});
  GaussianLocation model(config.init_mean);
  TrajectoryRecord rec;
  rec.distance.reserve(config.iterations);
  rec.grad_error.reserve(config.iterations);
  rec.path.resize(config.iterations + 1, dim);
  double sq_sum = 0.0;
  for (Index t = 0; t < config.iterations; ++t) {
    rec.path.row(t) = model.mean().transpose();
    const Vector exact = config.target_mean - model.mean();
    const double dist = exact.norm();
    rec.distance.push_back(dist);
    sq_sum += dist * dist;
    Vector grad;
    if (config.estimator.tag == ObjectiveTag::MleExact) {
      grad = mle_gradient_oracle(model, config.target_mean);
    } else {
      Matrix pos = standard_normal(n, dim, rng);
      pos.rowwise() += config.target_mean.transpose();
      Matrix neg = standard_normal(n, dim, rng);
      if (config.negatives == NegativeSource::Model) {
        neg.rowwise() += model.mean().transpose();
        grad = model_negative_gradient(config.estimator, model, pos, neg);
      } else {
        grad = estimator_gradient(config.estimator, model, pos, neg, config.objective_options).vector;
      }
    }
    if (!grad.allFinite()) throw NumericFailure("trajectory: non-finite gradient", static_cast<long>(t));
    rec.grad_error.push_back((grad - exact).norm());
    model.set_params(model.mean() + config.step_size * grad);
  }
  rec.path.row(config.iterations) = model.mean().transpose();
  rec.final_mean = model.mean();
  rec.final_distance = (model.mean() - config.target_mean).norm();
  rec.mse = sq_sum / static_cast<double>(config.iterations);
  return rec;
}

std::vector<TrajectoryRecord> trajectory_compare(const TrajectoryConfig& config, std::span<const ObjectiveKind> kinds,
                                                 int threads) {
  std::vector<TrajectoryRecord> out(kinds.size());
  parallel_for(static_cast<long>(kinds.size()), threads, [&](long i) {
    TrajectoryConfig c = config;
    c.estimator = kinds[i];
    out[i] = trajectory_run(c);
  });
  return out;
}

std::vector<BiasPoint> gradient_error_vs_M(const Vector& alpha, const Vector& target, std::span<const double> m_grid,
                                           Index n, Index repeats, std::uint64_t seed, int threads) {
  require(!m_grid.empty(), "gradient_error_vs_M: empty M grid");
  require(std::is_sorted(m_grid.begin(), m_grid.end()), "gradient_error_vs_M: M grid must be ascending");
  require(alpha.size() == target.size(), "gradient_error_vs_M: dimension mismatch");
  require(n >= 1 && repeats >= 1, "gradient_error_vs_M: n and repeats must be positive");
  const GaussianLocation model(alpha);
  const Vector exact = target - alpha;
  std::vector<std::vector<double>> errors(repeats, std::vector<double>(m_grid.size()));
  parallel_for(static_cast<long>(repeats), threads, [&](long r) {
    Rng rng = derive_rng(seed, {static_cast<std::uint64_t>(r)});
    const Matrix pos = sample_gaussian_location(target, n, rng);
    const Matrix neg = sample_gaussian_location(Vector::Zero(alpha.size()), n, rng);
    for (std::size_t j = 0; j < m_grid.size(); ++j)
      errors[r][j] = (n2ce_gradient(model, pos, neg, m_grid[j]).vector - exact).norm();
  });
  std::vector<BiasPoint> out;
  for (std::size_t j = 0; j < m_grid.size(); ++j) {
    std::vector<double> column;
    for (const auto& row : errors) column.push_back(row[j]);
    out.push_back({m_grid[j], mean_of(column), sample_std(column) / std::sqrt(static_cast<double>(repeats))});
  }
  return out;
}

double gradient_estimate_variance(const Vector& alpha, const Vector& target, double m, Index n, Index batches,
                                  std::uint64_t seed) {
  require(batches >= 2, "gradient_estimate_variance: need at least two batches");
  const GaussianLocation model(alpha);
  Rng rng = derive_rng(seed);
  Matrix grads(batches, alpha.size());
  for (Index b = 0; b < batches; ++b) {
    const Matrix pos = sample_gaussian_location(target, n, rng);
    const Matrix neg = sample_gaussian_location(Vector::Zero(alpha.size()), n, rng);
    grads.row(b) = n2ce_gradient(model, pos, neg, m).vector.transpose();
  }
  const Eigen::RowVectorXd mean = grads.colwise().mean();
  return (grads.rowwise() - mean).squaredNorm() / static_cast<double>(batches - 1);
}

std::size_t SweepTable::argmin(std::initializer_list<ObjectiveTag> tags) const {
  std::size_t best = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::find(tags.begin(), tags.end(), rows[i].estimator.tag) == tags.end()) continue;
    if (best == rows.size() || rows[i].mse_mean < rows[best].mse_mean) best = i;
  }
  require(best < rows.size(), "SweepTable::argmin: no matching rows");
  return best;
}

const SweepRow& SweepTable::find(ObjectiveKind kind) const {
  for (const auto& row : rows)
    if (row.estimator == kind) return row;
  throw std::invalid_argument("SweepTable: no row for " + kind.label());
}

SweepConfig SweepConfig::large_sample() {
  SweepConfig c;
  c.n = 500;
  c.entries = {ObjectiveKind::nwj()};
  for (double m : {1.0, 10.0, 50.0, 100.0, 1e3, 1e4, 2e4, 1e9}) c.entries.push_back(ObjectiveKind::n2ce(m));
  return c;
}

SweepConfig SweepConfig::small_sample() {
  SweepConfig c;
  c.n = 2;
  c.entries = {ObjectiveKind::nwj()};
  for (double m : {1.0, 1.5, 2.0, 5.0, 10.0, 100.0, 1e3, 1e9}) c.entries.push_back(ObjectiveKind::n2ce(m));
  return c;
}

SweepTable mse_sweep(const SweepConfig& config) {
  require(config.repeats >= 2, "mse_sweep: repeats must be >= 2");
  require(!config.entries.empty(), "mse_sweep: empty grid");
  require(config.dim == 2 || config.dim == 5, "mse_sweep: dim must be 2 or 5");
  for (const auto& e : config.entries) {
    e.validate();
    require(e.tag != ObjectiveTag::MleExact || config.entries.size() > 0, "mse_sweep: invalid entry");
  }
  TrajectoryConfig base = config.dim == 5 ? TrajectoryConfig::five_dim(config.n) : TrajectoryConfig::two_dim();
  base.samples_per_iter = config.n;
  base.negatives = NegativeSource::Noise;
  base.common_random_numbers = true;

  const long entries = static_cast<long>(config.entries.size());
  const long total = entries * static_cast<long>(config.repeats);
  std::vector<double> mse(total);
  parallel_for(total, config.threads, [&](long job) {
    const long entry = job / config.repeats;
    const long run = job % config.repeats;
    Rng stream = config.common_random_numbers
                     ? derive_rng(config.seed, {static_cast<std::uint64_t>(run)})
                     : derive_rng(config.seed, {static_cast<std::uint64_t>(entry), static_cast<std::uint64_t>(run)});
    TrajectoryConfig c = base;
    c.estimator = config.entries[entry];
    c.seed = stream();
    mse[job] = trajectory_run(c).mse;
  });

  SweepTable table;
  for (long e = 0; e < entries; ++e) {
    std::vector<double> v(mse.begin() + e * config.repeats, mse.begin() + (e + 1) * config.repeats);
    table.rows.push_back({config.entries[e], config.n, config.repeats, mean_of(v), sample_std(v)});
  }
  return table;
}

std::vector<double> default_m_grid() {
  return {1.0, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0, 70.0, 100.0, 150.0, 200.0, 300.0, 500.0, 1000.0};
}

std::vector<OptimalMResult> optimal_m_scaling_check(std::span<const Index> ns, std::span<const double> m_grid,
                                                    Index repeats, std::uint64_t seed, int threads) {
  require(!m_grid.empty(), "optimal_m_scaling_check: empty M grid");
  std::vector<OptimalMResult> out;
  for (Index n : ns) {
    require(n >= 2, "optimal_m_scaling_check: each n must be >= 2");
    SweepConfig sc;
    sc.dim = 5;
    sc.n = n;
    sc.repeats = repeats;
    sc.seed = seed;
    sc.threads = threads;
    for (double m : m_grid) sc.entries.push_back(ObjectiveKind::n2ce(m));
    OptimalMResult res;
    res.n = n;
    res.table = mse_sweep(sc);
    res.argmin_m = res.table.rows[res.table.argmin()].estimator.noise_magnitude;
    res.lower = std::sqrt(static_cast<double>(n));
    res.upper = 10.0 * res.lower;
    res.in_bracket = res.argmin_m >= res.lower && res.argmin_m <= res.upper;
    res.vacuous = m_grid.size() == 1;
    out.push_back(std::move(res));
  }
  return out;
}

ConvergeConfig ConvergeConfig::two_dim() {
  ConvergeConfig c;
  c.init_mean = (Vector(2) << -2.0, 1.0).finished();
  c.target_mean = (Vector(2) << 1.5, -0.8).finished();
  return c;
}

double extended_moment_condition_number(const Vector& mean, Index samples, Rng& rng) {
  require(samples >= 2, "extended_moment_condition_number: need samples");
  const Index d = mean.size();
  const Matrix x = sample_gaussian_location(mean, samples, rng);
  Matrix t(samples, d + 1);
  t.leftCols(d) = x;
  t.col(d).setConstant(-1.0);
  const Matrix second = (t.transpose() * t) / static_cast<double>(samples);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(second, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
}

ConvergeResult normalized_ascent_converge(const ConvergeConfig& config) {
  require(config.init_mean.size() == config.target_mean.size() && config.init_mean.size() > 0,
          "converge: dimension mismatch");
  require(config.delta > 0.0 && config.step > 0.0, "converge: delta and step must be positive");
  require(config.noise_magnitude >= 100.0, "converge: M must be >= 100");
  require(config.samples_per_iter >= 1, "converge: samples_per_iter must be >= 1");

  ConvergeResult res;
  Rng kappa_rng = derive_rng(config.seed, {0});
  res.kappa = extended_moment_condition_number(config.target_mean, config.kappa_samples, kappa_rng);
  const double gap = (config.init_mean - config.target_mean).squaredNorm();
  const double bound =
      std::ceil(config.budget_constant * std::pow(res.kappa, 3) * gap / (config.delta * config.delta));
  res.bound = bound > 9.0e18 ? std::numeric_limits<long>::max() : static_cast<long>(bound);
  const long budget = std::min<long>(res.bound, static_cast<long>(config.iteration_cap));

  Rng rng = derive_rng(config.seed, {1});
  GaussianLocation model(config.init_mean);
  const Index dim = config.init_mean.size();
  for (long t = 0; t <= budget; ++t) {
    res.iterations_run = t;
    if ((model.mean() - config.target_mean).norm() <= config.delta) {
      res.success = true;
      res.first_hit_iteration = t;
      return res;
    }
    if (t == budget) break;
    const Matrix pos = sample_gaussian_location(config.target_mean, config.samples_per_iter, rng);
    const Matrix neg = sample_gaussian_location(Vector::Zero(dim), config.samples_per_iter, rng);
    const Vector g = n2ce_gradient(model, pos, neg, config.noise_magnitude).vector;
    if (!g.allFinite()) throw NumericFailure("converge: non-finite gradient", t);
    const double norm = g.norm();
    if (norm == 0.0) {
      ++res.stall_events;
      continue;
    }
    model.set_params(model.mean() + config.step * g / norm);
  }
  return res;
}

double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), "loglog_slope: length mismatch");
  require(xs.size() >= 2, "loglog_slope: need at least two points");
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    require(xs[i] > 0.0 && ys[i] > 0.0, "loglog_slope: values must be positive");
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  require(sxx > 0.0, "loglog_slope: xs must not all be equal");
  return sxy / sxx;
}

}  // namespace n2ce
