#include "n2ce/tasks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "n2ce/adam.hpp"
#include "n2ce/gaussian_location.hpp"

namespace n2ce {

double branin_value(double x1, double x2) {
  constexpr double pi = EIGEN_PI;
  const double a = 1.0;
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double r = 6.0;
  const double s = 10.0;
  const double t = 1.0 / (8.0 * pi);
  const double inner = x2 - b * x1 * x1 + c * x1 - r;
  return -a * inner * inner - s * (1.0 - t) * std::cos(x1) - s;
}

Matrix BraninTask::maximizers() {
  return (Matrix(3, 2) << -EIGEN_PI, 12.275, EIGEN_PI, 2.275, 9.42478, 2.475).finished();
}

BraninTask branin_dataset(Index n, double remove_top_fraction, std::uint64_t seed) {
  require(n >= 1, "branin_dataset: N must be >= 1");
  require(remove_top_fraction >= 0.0 && remove_top_fraction < 1.0,
          "branin_dataset: remove_top_fraction must lie in [0, 1)");
  Rng rng = derive_rng(seed);
  Matrix x(n, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = uniform(BraninTask::lo1, BraninTask::hi1, rng);
    x(i, 1) = uniform(BraninTask::lo2, BraninTask::hi2, rng);
    y(i) = branin_value(x(i, 0), x(i, 1));
  }
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return y(a) > y(b); });
  const Index removed = static_cast<Index>(std::floor(remove_top_fraction * static_cast<double>(n)));
  std::vector<Index> keep(order.begin() + removed, order.end());
  std::sort(keep.begin(), keep.end());

  BraninTask task;
  task.x.resize(static_cast<Index>(keep.size()), 2);
  task.y.resize(static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    task.x.row(i) = x.row(keep[i]);
    task.y(i) = y(keep[i]);
  }
  task.y_max = task.y.maxCoeff();
  return task;
}

void write_dataset_csv(const BraninTask& task, std::ostream& out) {
  out << "x1,x2,y\n" << std::setprecision(17);
  for (Index i = 0; i < task.y.size(); ++i) out << task.x(i, 0) << ',' << task.x(i, 1) << ',' << task.y(i) << '\n';
}

BraninTask read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "x1,x2,y")
    throw std::runtime_error("read_dataset_csv: expected header 'x1,x2,y'");
  std::vector<std::array<double, 3>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<double, 3> row{};
    std::istringstream fields(line);
    std::string cell;
    for (int c = 0; c < 3; ++c) {
      if (!std::getline(fields, cell, ','))
        throw std::runtime_error("read_dataset_csv: line " + std::to_string(line_no) + " has fewer than 3 fields");
      try {
        std::size_t used = 0;
        row[c] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("read_dataset_csv: line " + std::to_string(line_no) + " has a bad number '" + cell +
                                 "'");
      }
    }
    if (std::getline(fields, cell, ','))
      throw std::runtime_error("read_dataset_csv: line " + std::to_string(line_no) + " has extra fields");
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error("read_dataset_csv: no data rows");
  BraninTask task;
  task.x.resize(static_cast<Index>(rows.size()), 2);
  task.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    task.x(i, 0) = rows[i][0];
    task.x(i, 1) = rows[i][1];
    task.y(i) = rows[i][2];
  }
  task.y_max = task.y.maxCoeff();
  return task;
}

void GmmTarget::validate() const {
  require(!means.empty(), "GmmTarget: need at least one component");
  require(variance > 0.0, "GmmTarget: variance must be positive");
  require(weights.size() == static_cast<Index>(means.size()), "GmmTarget: one weight per component");
  require((weights.array() >= 0.0).all(), "GmmTarget: weights must be nonnegative");
  require(std::abs(weights.sum() - 1.0) <= 1e-12, "GmmTarget: weights must sum to 1");
  for (const auto& m : means) require(m.size() == means.front().size(), "GmmTarget: component dimensions differ");
}

GmmTarget GmmTarget::branin_optima() {
  GmmTarget g;
  const Matrix opt = BraninTask::maximizers();
  for (Index i = 0; i < opt.rows(); ++i) g.means.push_back(opt.row(i).transpose());
  g.variance = 0.25;
  g.weights = Vector::Constant(3, 1.0 / 3.0);
  return g;
}

namespace {

// log(w_c) + log N(z; mu_c, v I) for every component.
Vector component_logs(const GmmTarget& target, const Vector& z) {
  target.validate();
  require(z.size() == target.dim(), "gmm: dimension mismatch");
  const double v = target.variance;
  const double norm = -0.5 * static_cast<double>(z.size()) * std::log(2.0 * EIGEN_PI * v);
  Vector logs(static_cast<Index>(target.means.size()));
  for (std::size_t c = 0; c < target.means.size(); ++c)
    logs(c) = std::log(target.weights(c)) + norm - 0.5 * (z - target.means[c]).squaredNorm() / v;
  return logs;
}

}  // namespace

double gmm_logdensity(const GmmTarget& target, const Vector& z) {
  const Vector logs = component_logs(target, z);
  const double hi = logs.maxCoeff();
  return hi + std::log((logs.array() - hi).exp().sum());
}

Vector gmm_logdensity_grad(const GmmTarget& target, const Vector& z) {
  const Vector logs = component_logs(target, z);
  const Vector resp = (logs.array() - logs.maxCoeff()).exp();
  Vector grad = Vector::Zero(z.size());
  for (std::size_t c = 0; c < target.means.size(); ++c) grad += resp(c) * (target.means[c] - z);
  return grad / (resp.sum() * target.variance);
}

Matrix gmm_sample(const GmmTarget& target, Index count, Rng& rng) {
  target.validate();
  std::discrete_distribution<int> pick(target.weights.data(), target.weights.data() + target.weights.size());
  Matrix out(count, target.dim());
  const double sd = std::sqrt(target.variance);
  for (Index i = 0; i < count; ++i) {
    const int c = pick(rng);
    out.row(i) = (target.means[c] + sd * standard_normal(target.dim(), 1, rng)).transpose();
  }
  return out;
}

void ConditionalEnergy::validate() const {
  require(lambda1 >= 0.0 && lambda2 > 0.0, "ConditionalEnergy: lambda1 must be >= 0 and lambda2 positive");
  require(static_cast<bool>(predictor) && static_cast<bool>(prior_logratio),
          "ConditionalEnergy: predictor and prior_logratio are required");
}

Vector conditional_logdensity(const ConditionalEnergy& energy, const Matrix& z) {
  energy.validate();
  const Vector g = energy.predictor(z);
  const Vector f = energy.prior_logratio(z);
  return (-energy.lambda1 * (energy.y_target - g.array()).square() +
          energy.lambda2 * (f.array() - 0.5 * z.rowwise().squaredNorm().array()))
      .matrix();
}

namespace {

Matrix central_difference(const std::function<Vector(const Matrix&)>& fn, const Matrix& z) {
  constexpr double h = 1e-5;
  Matrix grad(z.rows(), z.cols());
  for (Index j = 0; j < z.cols(); ++j) {
    Matrix up = z, down = z;
    up.col(j).array() += h;
    down.col(j).array() -= h;
    grad.col(j) = (fn(up) - fn(down)) / (2.0 * h);
  }
  return grad;
}

}  // namespace

EnergyGradient conditional_logdensity_grad(const ConditionalEnergy& energy, const Matrix& z) {
  energy.validate();
  EnergyGradient out;
  const Vector g = energy.predictor(z);
  Matrix dg, df;
  if (energy.predictor_grad) {
    dg = energy.predictor_grad(z);
  } else {
    dg = central_difference(energy.predictor, z);
    out.finite_difference = true;
  }
  if (energy.prior_logratio_grad) {
    df = energy.prior_logratio_grad(z);
  } else {
    df = central_difference(energy.prior_logratio, z);
    out.finite_difference = true;
  }
  out.grad = (2.0 * energy.lambda1 * (energy.y_target - g.array())).matrix().asDiagonal() * dg +
             energy.lambda2 * (df - z);
  for (Index i = 0; i < z.rows(); ++i) {
    if (!out.grad.row(i).allFinite() || !std::isfinite(g(i))) {
      std::ostringstream os;
      os << "conditional_logdensity_grad: non-finite value at z = [" << z.row(i) << "]";
      throw std::runtime_error(os.str());
    }
  }
  return out;
}

Vector conditional_logdensity_grad(const ConditionalEnergy& energy, const Vector& z) {
  return conditional_logdensity_grad(energy, Matrix(z.transpose())).grad.row(0).transpose();
}

std::string to_string(SamplerKind kind) { return kind == SamplerKind::Svgd ? "svgd" : "langevin"; }

SamplerKind sampler_kind_from_string(const std::string& name) {
  if (name == "svgd") return SamplerKind::Svgd;
  if (name == "langevin" || name == "ld") return SamplerKind::Langevin;
  throw std::invalid_argument("unknown sampler '" + name + "' (expected svgd or langevin)");
}

void BboConfig::validate() const {
  require(dataset_size >= 1, "bbo: dataset_size must be >= 1");
  require(prior_quantile > 0.0 && prior_quantile <= 1.0, "bbo: prior_quantile must lie in (0, 1]");
  require(prior_jitter >= 0.0, "bbo: prior_jitter must be >= 0");
  require(noise_magnitude >= 1.0, "bbo: M must be >= 1");
  require(regressor_iterations >= 0 && regressor_batch >= 1, "bbo: invalid regressor settings");
  require(regressor_learning_rate > 0.0, "bbo: regressor learning rate must be positive");
  require(query_budget >= 1, "bbo: query_budget must be >= 1");
  require(lambda1 >= 0.0 && lambda2 > 0.0, "bbo: lambda1 must be >= 0 and lambda2 positive");
  telescoping.validate();
  svgd.validate();
  langevin.validate();
}

namespace {

const Eigen::RowVector2d kCenter(2.5, 7.5);
constexpr double kScale = 3.75;

}  // namespace

Matrix design_to_latent(const Matrix& x) {
  require(x.cols() == 2, "design_to_latent: expected two columns");
  return (x.rowwise() - kCenter) / kScale;
}

Matrix latent_to_design(const Matrix& z) {
  require(z.cols() == 2, "latent_to_design: expected two columns");
  return (z * kScale).rowwise() + kCenter;
}

RegressorFit fit_regressor(const BraninTask& task, const BboConfig& config) {
  config.validate();
  const Index n = task.y.size();
  require(n >= 1, "fit_regressor: empty dataset");
  RegressorFit fit{MlpRatioModel(MlpShape{2, config.regressor_shape.hidden_width,
                                          config.regressor_shape.num_resblocks, 1}),
                   task.y.minCoeff(), task.y.maxCoeff(), 0.0};
  const double span = fit.y_max > fit.y_min ? fit.y_max - fit.y_min : 1.0;
  const Matrix z = design_to_latent(task.x);
  const Vector y = (task.y.array() - fit.y_min) / span;

  Rng rng = derive_rng(config.seed, {1});
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  const Index holdout = n >= 10 ? n / 10 : 0;
  std::vector<Index> train(order.begin() + holdout, order.end());
  std::vector<Index> test(order.begin(), order.begin() + holdout);
  if (test.empty()) test = train;

  fit.model = MlpRatioModel::initialized(fit.model.shape(), rng);
  AdamState adam =
      AdamState::fresh(fit.model.num_params(), {config.regressor_learning_rate, 0.9, 0.999, 1e-8});
  const int stage[] = {0};
  const Index batch = std::min<Index>(config.regressor_batch, static_cast<Index>(train.size()));
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  Matrix zb(batch, 2);
  Vector yb(batch);
  for (Index it = 0; it < config.regressor_iterations; ++it) {
    for (Index i = 0; i < batch; ++i) {
      const Index row = train[pick(rng)];
      zb.row(i) = z.row(row);
      yb(i) = y(row);
    }
    const Vector residual = fit.model.forward_batch(zb, stage) - yb;
    Vector grad = fit.model.weighted_param_grad(zb, stage, 2.0 * residual / static_cast<double>(batch));
    if (!grad.allFinite()) throw NumericFailure("fit_regressor: non-finite gradient", static_cast<long>(it));
    adam_step(adam, fit.model.mutable_params(), grad, false);
  }

  Matrix zt(static_cast<Index>(test.size()), 2);
  Vector yt(static_cast<Index>(test.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    zt.row(i) = z.row(test[i]);
    yt(i) = y(test[i]);
  }
  fit.holdout_rmse = std::sqrt((fit.model.forward_batch(zt, stage) - yt).squaredNorm() / static_cast<double>(yt.size()));
  if (fit.holdout_rmse > config.regressor_rmse_gate) {
    std::ostringstream os;
    os << "fit_regressor: holdout RMSE " << fit.holdout_rmse << " exceeds gate " << config.regressor_rmse_gate;
    throw std::runtime_error(os.str());
  }
  return fit;
}

BboResult bbo_run(const BraninTask& task, const BboConfig& config) {
  return bbo_run(task, config, fit_regressor(task, config));
}

BboResult bbo_run(const BraninTask& task, const BboConfig& config, const RegressorFit& regressor) {
  config.validate();
  const Index n = task.y.size();
  require(n >= 1, "bbo_run: empty dataset");

  // Prior: telescoping fit on the top-quantile design points, as latents.
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return task.y(a) > task.y(b); });
  const Index top = std::max<Index>(1, static_cast<Index>(std::ceil(config.prior_quantile * static_cast<double>(n))));
  Matrix top_x(top, 2);
  for (Index i = 0; i < top; ++i) top_x.row(i) = task.x.row(order[i]);
  const Matrix top_z = design_to_latent(top_x);
  const double jitter = config.prior_jitter;
  TargetSampler target = [&top_z, jitter](Index count, Rng& rng) {
    std::uniform_int_distribution<Index> pick(0, top_z.rows() - 1);
    Matrix out(count, 2);
    for (Index i = 0; i < count; ++i) out.row(i) = top_z.row(pick(rng));
    if (jitter > 0.0) out += jitter * standard_normal(count, 2, rng);
    return out;
  };

  const SigmaSchedule schedule = SigmaSchedule::preset(config.schedule);
  MlpShape prior_shape = config.prior_shape;
  prior_shape.input_dim = 2;
  prior_shape.num_stages = schedule.K() + 1;
  Rng init_rng = derive_rng(config.seed, {2});
  TelescopingConfig tc = config.telescoping;
  tc.noise_magnitude = config.noise_magnitude;
  tc.seed = derive_rng(config.seed, {3})();
  const MlpRatioModel prior =
      fit_telescoping(target, schedule, MlpRatioModel::initialized(prior_shape, init_rng), tc).model;

  const int stage0[] = {0};
  ConditionalEnergy energy;
  energy.lambda1 = config.lambda1;
  energy.lambda2 = config.lambda2;
  energy.y_target = 1.0;  // dataset maximum after min-max normalization
  energy.predictor = [&](const Matrix& z) { return regressor.model.forward_batch(z, stage0); };
  energy.predictor_grad = [&](const Matrix& z) {
    return regressor.model.weighted_input_grad(z, stage0, Vector::Ones(z.rows()));
  };
  energy.prior_logratio = [&](const Matrix& z) { return telescoping_log_ratios(prior, z); };
  energy.prior_logratio_grad = [&](const Matrix& z) { return telescoping_input_grad(prior, z); };
  const CloudGradient grad = [&](const Matrix& z) { return conditional_logdensity_grad(energy, z).grad; };

  Rng start_rng = derive_rng(config.seed, {4});
  const Matrix init = standard_normal(config.query_budget, 2, start_rng);
  Matrix latent;
  if (config.sampler == SamplerKind::Svgd) {
    latent = svgd_run(grad, init, config.svgd).particles;
  } else {
    LangevinConfig lc = config.langevin;
    lc.seed = derive_rng(config.seed, {5})();
    latent = langevin_run(grad, init, lc);
  }

  BboResult res;
  res.candidates = latent_to_design(latent);
  res.candidates.col(0) = res.candidates.col(0).cwiseMax(BraninTask::lo1).cwiseMin(BraninTask::hi1);
  res.candidates.col(1) = res.candidates.col(1).cwiseMax(BraninTask::lo2).cwiseMin(BraninTask::hi2);
  res.values.resize(res.candidates.rows());
  for (Index i = 0; i < res.candidates.rows(); ++i) {
    res.values(i) = branin_value(res.candidates(i, 0), res.candidates(i, 1));
    ++res.queries;
  }
  require(res.queries <= config.query_budget, "bbo_run: query budget exceeded");
  res.best_value = res.values.maxCoeff();
  res.y_max_dataset = task.y_max;
  res.regressor_rmse = regressor.holdout_rmse;
  return res;
}

}  // namespace n2ce
