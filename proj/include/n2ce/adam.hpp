#ifndef N2CE_ADAM_HPP
#define N2CE_ADAM_HPP

#include <cmath>

#include "n2ce/common.hpp"

namespace n2ce {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter block. Moments always have the
/// length of the parameters they track.
struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double learning_rate = 1e-3;
  double epsilon = 1e-8;

  static AdamState fresh(Index size, const AdamConfig& config = {}) {
    require(config.beta1 > 0.0 && config.beta1 < 1.0, "AdamState: beta1 must lie in (0,1)");
    require(config.beta2 > 0.0 && config.beta2 < 1.0, "AdamState: beta2 must lie in (0,1)");
    require(config.learning_rate > 0.0, "AdamState: learning rate must be positive");
    require(config.epsilon > 0.0, "AdamState: epsilon must be positive");
    AdamState s;
    s.first_moment = Vector::Zero(size);
    s.second_moment = Vector::Zero(size);
    s.beta1 = config.beta1;
    s.beta2 = config.beta2;
    s.learning_rate = config.learning_rate;
    s.epsilon = config.epsilon;
    return s;
  }
};

/// One bias-corrected Adam update of `params` in place. With `maximize`
/// the step follows +grad.
inline void adam_step(AdamState& state, Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grad,
                      bool maximize) {
  require(params.size() == grad.size(), "adam_step: params/grad length mismatch");
  require(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
          "adam_step: moment length mismatch");
  const double sign = maximize ? -1.0 : 1.0;
  state.step_count += 1;
  // Moments are kept for the descent direction g = sign * grad.
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * (sign * grad);
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

/// Rescales `grad` in place so its norm is at most `max_norm`.
inline void clip_grad_norm(Eigen::Ref<Vector> grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
}

}  // namespace n2ce

#endif  // N2CE_ADAM_HPP
