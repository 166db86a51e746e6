#include "n2ce/samplers.hpp"

#include <algorithm>
#include <cmath>

#include "n2ce/rng.hpp"

namespace n2ce {

CloudGradient per_particle(PointGradient grad) {
  return [grad = std::move(grad)](const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i) {
      const Vector g = grad(z.row(i).transpose());
      require(g.size() == z.cols(), "gradient callable returned the wrong dimension");
      out.row(i) = g.transpose();
    }
    return out;
  };
}

namespace {

Matrix checked_gradient(const CloudGradient& grad, const Matrix& z, long step, const char* who) {
  Matrix g = grad(z);
  require(g.rows() == z.rows() && g.cols() == z.cols(), std::string(who) + ": gradient has the wrong shape");
  if (!g.allFinite()) throw NumericFailure(std::string(who) + ": non-finite gradient", step);
  return g;
}

}  // namespace

void LangevinConfig::validate() const {
  require(steps >= 1, "langevin: steps must be >= 1");
  require(step_size > 0.0, "langevin: step_size must be positive");
}

Matrix langevin_run(const CloudGradient& grad_log_density, const Matrix& init, const LangevinConfig& config) {
  config.validate();
  require(init.rows() >= 1 && init.cols() >= 1, "langevin: empty particle set");
  Rng rng = derive_rng(config.seed);
  const double s = config.step_size;
  Matrix z = init;
  for (Index t = 0; t < config.steps; ++t) {
    const Matrix g = checked_gradient(grad_log_density, z, static_cast<long>(t), "langevin");
    z += 0.5 * s * s * g + s * standard_normal(z.rows(), z.cols(), rng);
  }
  return z;
}

void SvgdConfig::validate() const {
  require(steps >= 1, "svgd: steps must be >= 1");
  require(initial_step > 0.0, "svgd: initial_step must be positive");
  require(bandwidth_floor > 0.0, "svgd: bandwidth_floor must be positive");
}

double svgd_bandwidth(const Matrix& particles, double floor) {
  const Index q = particles.rows();
  require(q >= 2, "svgd_bandwidth: need at least two particles");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(q * (q - 1) / 2));
  for (Index i = 0; i < q; ++i)
    for (Index j = i + 1; j < q; ++j) dist.push_back((particles.row(i) - particles.row(j)).norm());
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + mid, dist.end());
  double med = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + mid);
    med = 0.5 * (med + lower);
  }
  return std::max(med * med / (2.0 * std::log(static_cast<double>(q) + 1.0)), floor);
}

Matrix svgd_direction(const Matrix& particles, const Matrix& grads, double h2) {
  const Index q = particles.rows();
  Matrix kernel(q, q);
  for (Index i = 0; i < q; ++i) {
    kernel(i, i) = 1.0;
    for (Index j = i + 1; j < q; ++j)
      kernel(i, j) = kernel(j, i) = std::exp(-(particles.row(i) - particles.row(j)).squaredNorm() / (2.0 * h2));
  }
  // d/dz_j k(z_j, z_i) = k (z_i - z_j) / h^2.
  const Vector row_sums = kernel.rowwise().sum();
  const Matrix repulsion = (row_sums.asDiagonal() * particles - kernel * particles) / h2;
  return (kernel * grads + repulsion) / static_cast<double>(q);
}

SvgdResult svgd_run(const CloudGradient& grad_log_density, const Matrix& init, const SvgdConfig& config) {
  config.validate();
  require(init.rows() >= 1 && init.cols() >= 1, "svgd: empty particle set");
  SvgdResult res{init, {}};
  res.trace.single_particle = init.rows() == 1;
  AdamState adam = AdamState::fresh(init.size(), {config.initial_step, config.beta1, config.beta2, 1e-8});
  Eigen::Map<Vector> flat(res.particles.data(), res.particles.size());
  for (Index t = 0; t < config.steps; ++t) {
    const Matrix g = checked_gradient(grad_log_density, res.particles, static_cast<long>(t), "svgd");
    const double h2 = res.trace.single_particle ? config.bandwidth_floor
                                                : svgd_bandwidth(res.particles, config.bandwidth_floor);
    Matrix phi = svgd_direction(res.particles, g, h2);
    if (!phi.allFinite()) throw NumericFailure("svgd: non-finite update direction", static_cast<long>(t));
    res.trace.bandwidth.push_back(h2);
    res.trace.phi_norm.push_back(phi.norm());
    adam_step(adam, flat, Eigen::Map<const Vector>(phi.data(), phi.size()), true);
  }
  return res;
}

}  // namespace n2ce
