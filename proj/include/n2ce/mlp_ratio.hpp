#ifndef N2CE_MLP_RATIO_HPP
#define N2CE_MLP_RATIO_HPP

#include <span>
#include <vector>

#include "n2ce/common.hpp"
#include "n2ce/rng.hpp"

namespace n2ce {

struct MlpShape {
  Index input_dim = 2;
  Index hidden_width = 128;
  Index num_resblocks = 3;
  Index num_stages = 1;  // K + 1
};

inline constexpr Index kStageEmbeddingDim = 128;
inline constexpr double kLeakySlope = 0.2;

/// Sinusoidal embedding of a stage index: sin/cos pairs over a geometric
/// frequency ladder (transformer convention).
Vector stage_embedding(int stage);

/// Residual MLP producing an unnormalized log-ratio f(z, k).
///
/// Layout, in parameter order:
///   input branch   z -> Linear(H) -> LReLU -> Linear(H)
///   stage branch   emb(k) -> Linear(H) -> LReLU -> Linear(H)
///   merge          LReLU(concat) -> Linear(H)
///   N resblocks    h <- h + Linear(LReLU(h))
///   head           LReLU -> Linear(1)
/// Weights of each Linear are stored column-major (out x in) followed by
/// the bias, all in one flat parameter vector.
class MlpRatioModel {
 public:
  explicit MlpRatioModel(const MlpShape& shape);

  /// PyTorch-style default initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  /// for weights and biases.
  static MlpRatioModel initialized(const MlpShape& shape, Rng& rng);

  static Index param_count(const MlpShape& shape);

  const MlpShape& shape() const { return shape_; }
  Index input_dim() const { return shape_.input_dim; }
  Index num_stages() const { return shape_.num_stages; }
  Index num_params() const { return params_.size(); }
  const Vector& params() const { return params_; }
  Vector& mutable_params() { return params_; }
  void set_params(const Vector& p);

  double forward(const Vector& z, int stage) const;
  /// f(z_i, stage_i) for every row of `z`. `stages` has one entry per row,
  /// or a single entry applied to all rows.
  Vector forward_batch(const Matrix& z, std::span<const int> stages) const;

  /// sum_i w_i * d f(z_i, stage_i) / d params.
  Vector weighted_param_grad(const Matrix& z, std::span<const int> stages, const Vector& weights) const;

  /// Row i holds w_i * d f(z_i, stage_i) / d z_i.
  Matrix weighted_input_grad(const Matrix& z, std::span<const int> stages, const Vector& weights) const;

 private:
  struct Layer {
    Index out = 0;
    Index in = 0;
    Index offset = 0;
  };
  struct Cache;

  void layout();
  void check_inputs(const Matrix& z, std::span<const int> stages) const;
  Cache run_forward(const Matrix& z, std::span<const int> stages) const;
  void backward(const Cache& cache, const Vector& weights, Vector* param_grad, Matrix* input_grad) const;

  Eigen::Map<const Matrix> weight(const Layer& l) const;
  Eigen::Map<const Vector> bias(const Layer& l) const;

  MlpShape shape_;
  Vector params_;
  Layer in1_, in2_, st1_, st2_, merge_, head_;
  std::vector<Layer> res_;
};

/// Evaluates the network at a fixed stage; satisfies the RatioModel
/// contract used by the objectives.
class StageView {
 public:
  StageView(const MlpRatioModel& model, int stage);

  Index num_params() const { return model_->num_params(); }
  const Vector& params() const { return model_->params(); }
  int stage() const { return stage_; }
  const MlpRatioModel& model() const { return *model_; }

  Vector log_ratios(const Matrix& samples) const;
  Vector weighted_grad(const Matrix& samples, const Vector& weights) const;

 private:
  const MlpRatioModel* model_;
  int stage_;
};

double mlp_forward(const MlpRatioModel& model, const Vector& z, int stage);
Vector mlp_param_grad(const MlpRatioModel& model, const Vector& z, int stage);

}  // namespace n2ce

#endif  // N2CE_MLP_RATIO_HPP
