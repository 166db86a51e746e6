#include "n2ce/mlp_ratio.hpp"

#include <cmath>
#include <map>
#include <string>

namespace n2ce {

namespace {

Matrix leaky(const Matrix& x) { return x.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; }); }

Vector leaky(const Vector& x) { return x.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; }); }

template <typename Derived>
auto leaky_slope_of(const Eigen::MatrixBase<Derived>& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

}  // namespace

Vector stage_embedding(int stage) {
  constexpr Index half = kStageEmbeddingDim / 2;
  Vector e(kStageEmbeddingDim);
  for (Index j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(j) / static_cast<double>(half));
    e(j) = std::sin(stage * freq);
    e(half + j) = std::cos(stage * freq);
  }
  return e;
}

struct MlpRatioModel::Cache {
  Matrix x0;                 // d x n
  Matrix a1;                 // pre-activation of input layer 1
  Matrix h1;                 // leaky(a1)
  Matrix uz;                 // input-branch output
  std::vector<int> stage_of;  // per column
  std::map<int, Index> slot;  // stage -> index into the per-stage arrays
  std::vector<Vector> emb, s1, hs1, uk;
  std::vector<Matrix> h;  // h[0] = merge output, h[i+1] after resblock i
  Vector out;
};

MlpRatioModel::MlpRatioModel(const MlpShape& shape) : shape_(shape) {
  require(shape.input_dim >= 1 && shape.hidden_width >= 1 && shape.num_resblocks >= 0 && shape.num_stages >= 1,
          "MlpRatioModel: invalid shape");
  layout();
  params_ = Vector::Zero(param_count(shape));
}

void MlpRatioModel::layout() {
  const Index d = shape_.input_dim;
  const Index hw = shape_.hidden_width;
  Index offset = 0;
  auto make = [&](Index out, Index in) {
    Layer l{out, in, offset};
    offset += out * in + out;
    return l;
  };
  in1_ = make(hw, d);
  in2_ = make(hw, hw);
  st1_ = make(hw, kStageEmbeddingDim);
  st2_ = make(hw, hw);
  merge_ = make(hw, 2 * hw);
  res_.clear();
  for (Index i = 0; i < shape_.num_resblocks; ++i) res_.push_back(make(hw, hw));
  head_ = make(1, hw);
}

Index MlpRatioModel::param_count(const MlpShape& s) {
  const Index hw = s.hidden_width;
  auto lin = [](Index out, Index in) { return out * in + out; };
  return lin(hw, s.input_dim) + lin(hw, hw) + lin(hw, kStageEmbeddingDim) + lin(hw, hw) + lin(hw, 2 * hw) +
         s.num_resblocks * lin(hw, hw) + lin(1, hw);
}

MlpRatioModel MlpRatioModel::initialized(const MlpShape& shape, Rng& rng) {
  MlpRatioModel m(shape);
  std::vector<Layer> layers{m.in1_, m.in2_, m.st1_, m.st2_, m.merge_};
  layers.insert(layers.end(), m.res_.begin(), m.res_.end());
  layers.push_back(m.head_);
  for (const Layer& l : layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index i = 0; i < l.out * l.in + l.out; ++i) m.params_(l.offset + i) = u(rng);
  }
  return m;
}

void MlpRatioModel::set_params(const Vector& p) {
  require(p.size() == params_.size(), "MlpRatioModel: parameter length mismatch");
  params_ = p;
}

Eigen::Map<const Matrix> MlpRatioModel::weight(const Layer& l) const {
  return Eigen::Map<const Matrix>(params_.data() + l.offset, l.out, l.in);
}

Eigen::Map<const Vector> MlpRatioModel::bias(const Layer& l) const {
  return Eigen::Map<const Vector>(params_.data() + l.offset + l.out * l.in, l.out);
}

void MlpRatioModel::check_inputs(const Matrix& z, std::span<const int> stages) const {
  require(z.cols() == shape_.input_dim, "MlpRatioModel: input dimension mismatch");
  require(stages.size() == 1 || static_cast<Index>(stages.size()) == z.rows(),
          "MlpRatioModel: need one stage per row or a single stage");
  for (int k : stages)
    require(k >= 0 && k < shape_.num_stages, "MlpRatioModel: stage " + std::to_string(k) + " out of range");
}

MlpRatioModel::Cache MlpRatioModel::run_forward(const Matrix& z, std::span<const int> stages) const {
  check_inputs(z, stages);
  const Index n = z.rows();
  const Index hw = shape_.hidden_width;
  Cache c;
  c.x0 = z.transpose();
  c.a1 = (weight(in1_) * c.x0).colwise() + bias(in1_);
  c.h1 = leaky(c.a1);
  c.uz = (weight(in2_) * c.h1).colwise() + bias(in2_);

  c.stage_of.resize(n);
  for (Index i = 0; i < n; ++i) c.stage_of[i] = stages.size() == 1 ? stages[0] : stages[i];
  for (int k : c.stage_of) c.slot.emplace(k, 0);
  Index next = 0;
  for (auto& [k, s] : c.slot) s = next++;

  const auto merge_w = weight(merge_);
  const auto merge_z = merge_w.leftCols(hw);
  const auto merge_s = merge_w.rightCols(hw);
  std::vector<Vector> stage_shift(c.slot.size());
  c.emb.resize(c.slot.size());
  c.s1.resize(c.slot.size());
  c.hs1.resize(c.slot.size());
  c.uk.resize(c.slot.size());
  for (const auto& [k, s] : c.slot) {
    c.emb[s] = stage_embedding(k);
    c.s1[s] = weight(st1_) * c.emb[s] + bias(st1_);
    c.hs1[s] = leaky(c.s1[s]);
    c.uk[s] = weight(st2_) * c.hs1[s] + bias(st2_);
    stage_shift[s] = merge_s * leaky(c.uk[s]) + bias(merge_);
  }

  Matrix h0 = merge_z * leaky(c.uz);
  for (Index i = 0; i < n; ++i) h0.col(i) += stage_shift[c.slot.at(c.stage_of[i])];
  c.h.push_back(std::move(h0));
  for (const Layer& l : res_) {
    Matrix next_h = c.h.back() + ((weight(l) * leaky(c.h.back())).colwise() + bias(l));
    c.h.push_back(std::move(next_h));
  }
  c.out = ((weight(head_) * leaky(c.h.back())).array() + bias(head_)(0)).transpose();
  return c;
}

void MlpRatioModel::backward(const Cache& c, const Vector& weights, Vector* param_grad, Matrix* input_grad) const {
  const Index n = c.x0.cols();
  const Index hw = shape_.hidden_width;
  require(weights.size() == n, "MlpRatioModel: weight count mismatch");

  Vector grad;
  auto gw = [&](const Layer& l) { return Eigen::Map<Matrix>(grad.data() + l.offset, l.out, l.in); };
  auto gb = [&](const Layer& l) { return Eigen::Map<Vector>(grad.data() + l.offset + l.out * l.in, l.out); };
  if (param_grad) grad = Vector::Zero(params_.size());

  const Eigen::RowVectorXd w = weights.transpose();
  // head: out = W_head * leaky(h_N) + b
  const Matrix& hn = c.h.back();
  if (param_grad) {
    gw(head_) = w * leaky(hn).transpose();
    gb(head_)(0) = weights.sum();
  }
  Matrix dh = (weight(head_).transpose() * w).cwiseProduct(leaky_slope_of(hn));

  for (Index b = static_cast<Index>(res_.size()) - 1; b >= 0; --b) {
    const Layer& l = res_[b];
    const Matrix& hin = c.h[b];
    if (param_grad) {
      gw(l) = dh * leaky(hin).transpose();
      gb(l) = dh.rowwise().sum();
    }
    dh += (weight(l).transpose() * dh).cwiseProduct(leaky_slope_of(hin));
  }

  // merge: h0 = Wz leaky(uz) + Ws leaky(uk) + b
  const auto merge_w = weight(merge_);
  if (param_grad) {
    gw(merge_).leftCols(hw) = dh * leaky(c.uz).transpose();
    gb(merge_) = dh.rowwise().sum();
  }
  const Matrix duz = (merge_w.leftCols(hw).transpose() * dh).cwiseProduct(leaky_slope_of(c.uz));

  if (param_grad) {
    std::vector<Vector> per_stage(c.slot.size(), Vector::Zero(hw));
    for (Index i = 0; i < n; ++i) per_stage[c.slot.at(c.stage_of[i])] += dh.col(i);
    for (const auto& [k, s] : c.slot) {
      gw(merge_).rightCols(hw) += per_stage[s] * leaky(c.uk[s]).transpose();
      const Vector duk = (merge_w.rightCols(hw).transpose() * per_stage[s]).cwiseProduct(leaky_slope_of(c.uk[s]));
      gw(st2_) += duk * c.hs1[s].transpose();
      gb(st2_) += duk;
      const Vector ds1 = (weight(st2_).transpose() * duk).cwiseProduct(leaky_slope_of(c.s1[s]));
      gw(st1_) += ds1 * c.emb[s].transpose();
      gb(st1_) += ds1;
    }
    gw(in2_) = duz * c.h1.transpose();
    gb(in2_) = duz.rowwise().sum();
  }
  const Matrix da1 = (weight(in2_).transpose() * duz).cwiseProduct(leaky_slope_of(c.a1));
  if (param_grad) {
    gw(in1_) = da1 * c.x0.transpose();
    gb(in1_) = da1.rowwise().sum();
    *param_grad = std::move(grad);
  }
  if (input_grad) *input_grad = (weight(in1_).transpose() * da1).transpose();
}

double MlpRatioModel::forward(const Vector& z, int stage) const {
  const int stages[] = {stage};
  return forward_batch(z.transpose(), stages)(0);
}

Vector MlpRatioModel::forward_batch(const Matrix& z, std::span<const int> stages) const {
  return run_forward(z, stages).out;
}

Vector MlpRatioModel::weighted_param_grad(const Matrix& z, std::span<const int> stages, const Vector& weights) const {
  const Cache c = run_forward(z, stages);
  Vector g;
  backward(c, weights, &g, nullptr);
  return g;
}

Matrix MlpRatioModel::weighted_input_grad(const Matrix& z, std::span<const int> stages, const Vector& weights) const {
  const Cache c = run_forward(z, stages);
  Matrix g;
  backward(c, weights, nullptr, &g);
  return g;
}

StageView::StageView(const MlpRatioModel& model, int stage) : model_(&model), stage_(stage) {
  require(stage >= 0 && stage < model.num_stages(), "StageView: stage out of range");
}

Vector StageView::log_ratios(const Matrix& samples) const {
  const int stages[] = {stage_};
  return model_->forward_batch(samples, stages);
}

Vector StageView::weighted_grad(const Matrix& samples, const Vector& weights) const {
  const int stages[] = {stage_};
  return model_->weighted_param_grad(samples, stages, weights);
}

double mlp_forward(const MlpRatioModel& model, const Vector& z, int stage) { return model.forward(z, stage); }

Vector mlp_param_grad(const MlpRatioModel& model, const Vector& z, int stage) {
  const int stages[] = {stage};
  return model.weighted_param_grad(z.transpose(), stages, Vector::Ones(1));
}

}  // namespace n2ce
