#ifndef N2CE_SAMPLERS_HPP
#define N2CE_SAMPLERS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "n2ce/adam.hpp"
#include "n2ce/common.hpp"

namespace n2ce {

/// Gradient of a log-density at a single point.
using PointGradient = std::function<Vector(const Vector&)>;
/// Gradients for a whole particle cloud; row i is the gradient at row i.
using CloudGradient = std::function<Matrix(const Matrix&)>;

/// Lifts a single-point gradient to a cloud gradient.
CloudGradient per_particle(PointGradient grad);

struct LangevinConfig {
  Index steps = 100;
  double step_size = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// z <- z + (s^2 / 2) grad log p(z) + s * eps, eps ~ N(0, I), applied
/// `steps` times to every row of `init`.
Matrix langevin_run(const CloudGradient& grad_log_density, const Matrix& init, const LangevinConfig& config);

struct SvgdConfig {
  Index steps = 500;
  double initial_step = 0.4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double bandwidth_floor = 1e-6;

  void validate() const;
};

struct SvgdTrace {
  std::vector<double> bandwidth;  // h^2 at each step
  std::vector<double> phi_norm;   // Frobenius norm of the update direction
  bool single_particle = false;   // no kernel interaction took place
};

struct SvgdResult {
  Matrix particles;
  SvgdTrace trace;
};

/// max(med^2 / (2 ln(Q + 1)), floor) with med the median pairwise distance.
double svgd_bandwidth(const Matrix& particles, double floor = 1e-6);

/// The SVGD direction phi(z_i) = (1/Q) sum_j [k(z_j, z_i) grad_j + d/dz_j k(z_j, z_i)]
/// for an RBF kernel with squared bandwidth h2.
Matrix svgd_direction(const Matrix& particles, const Matrix& grads, double h2);

/// Adam-driven SVGD; the bandwidth is recomputed at every step.
SvgdResult svgd_run(const CloudGradient& grad_log_density, const Matrix& init, const SvgdConfig& config);

}  // namespace n2ce

#endif  // N2CE_SAMPLERS_HPP
