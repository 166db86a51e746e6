#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "n2ce/adam.hpp"
#include "n2ce/gaussian_location.hpp"
#include "n2ce/mlp_ratio.hpp"

using namespace n2ce;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("gaussian log ratio closed form") {
    CHECK(log_ratio_gaussian(GaussianLocation(vec({0, 0})), vec({3.7, -1.2})) == 0.0);
    CHECK(log_ratio_gaussian(GaussianLocation(vec({1, 0})), vec({2, 0})) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(log_ratio_gaussian(GaussianLocation(vec({1.5, -0.8})), vec({1.5, -0.8})) ==
          doctest::Approx(1.445).epsilon(1e-14));
  }

  TEST_CASE("gaussian log ratio equals the log density difference") {
    const Vector alpha = vec({0.3, -1.1, 2.0});
    const Vector x = vec({-0.4, 0.9, 1.7});
    const double direct = log_normal_density<double>(x, alpha) - log_normal_density<double>(x, Vector::Zero(3));
    CHECK(GaussianLocation(alpha).log_ratio(x) == doctest::Approx(direct).epsilon(1e-13));
  }

  TEST_CASE("gaussian parameter gradient") {
    CHECK(grad_logratio_gaussian(GaussianLocation(vec({1, 1})), vec({1, 1})).norm() == 0.0);
    const Vector g = grad_logratio_gaussian(GaussianLocation(vec({-2, 1})), vec({1.5, -0.8}));
    CHECK(g(0) == doctest::Approx(3.5));
    CHECK(g(1) == doctest::Approx(-1.8));

    Rng rng = derive_rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector alpha = standard_normal(3, 1, rng);
      const Vector x = standard_normal(3, 1, rng);
      Vector fd(3);
      const double h = 1e-6;
      for (Index i = 0; i < 3; ++i) {
        Vector up = alpha, down = alpha;
        up(i) += h;
        down(i) -= h;
        fd(i) = (GaussianLocation(up).log_ratio(x) - GaussianLocation(down).log_ratio(x)) / (2 * h);
      }
      const Vector analytic = GaussianLocation(alpha).grad_log_ratio(x);
      CHECK((analytic - fd).norm() / analytic.norm() <= 1e-8);
    }
  }

  TEST_CASE("gaussian sampling moments and determinism") {
    Rng a = derive_rng(5);
    const Matrix z = sample_gaussian_location(vec({0, 0}), 1000000, a);
    const Eigen::RowVectorXd mean = z.colwise().mean();
    CHECK(std::abs(mean(0)) < 0.01);
    CHECK(std::abs(mean(1)) < 0.01);

    Rng b = derive_rng(6);
    const Matrix w = sample_gaussian_location(vec({1.5, -0.8}), 1000000, b);
    const Eigen::RowVectorXd wm = w.colwise().mean();
    const Eigen::RowVectorXd var = (w.rowwise() - wm).array().square().colwise().sum() / (w.rows() - 1.0);
    CHECK(std::abs(var(0) - 1.0) < 0.01);
    CHECK(std::abs(var(1) - 1.0) < 0.01);

    Rng c1 = derive_rng(42, {3, 7});
    Rng c2 = derive_rng(42, {3, 7});
    CHECK(sample_gaussian_location(vec({0.5}), 100, c1) == sample_gaussian_location(vec({0.5}), 100, c2));
    CHECK_THROWS_AS(sample_gaussian_location(vec({0.0}), 0, c1), std::invalid_argument);
  }

  TEST_CASE("mlp with zero parameters outputs zero") {
    const MlpRatioModel model(MlpShape{2, 16, 2, 4});
    Rng rng = derive_rng(1);
    for (int s = 0; s < 4; ++s) CHECK(mlp_forward(model, standard_normal(2, 1, rng), s) == 0.0);
  }

  TEST_CASE("mlp parameter count depends only on the shape") {
    const MlpShape shape{3, 8, 2, 5};
    const Index d = 3, h = 8, e = kStageEmbeddingDim;
    const Index expected = (h * d + h) + (h * h + h) + (h * e + h) + (h * h + h) + (h * 2 * h + h) +
                           2 * (h * h + h) + (h + 1);
    CHECK(MlpRatioModel::param_count(shape) == expected);
    Rng a = derive_rng(1), b = derive_rng(2);
    CHECK(MlpRatioModel::initialized(shape, a).num_params() == MlpRatioModel::initialized(shape, b).num_params());
    // The number of stages changes only the embedding input, not the layout.
    CHECK(MlpRatioModel::param_count(MlpShape{3, 8, 2, 1}) == expected);
  }

  TEST_CASE("mlp forward is deterministic and separates stages") {
    Rng rng = derive_rng(3);
    const MlpRatioModel model = MlpRatioModel::initialized(MlpShape{2, 32, 2, 4}, rng);
    const Vector z = vec({0.3, -0.7});
    CHECK(mlp_forward(model, z, 2) == mlp_forward(model, z, 2));
    CHECK(mlp_forward(model, z, 0) != mlp_forward(model, z, 3));

    const Matrix batch = standard_normal(5, 2, rng);
    const std::array<int, 1> stage{1};
    const Vector f = model.forward_batch(batch, stage);
    for (Index i = 0; i < 5; ++i) CHECK(f(i) == doctest::Approx(model.forward(batch.row(i).transpose(), 1)).epsilon(1e-14));
  }

  TEST_CASE("stage embedding") {
    const Vector e0 = stage_embedding(0);
    CHECK(e0.size() == kStageEmbeddingDim);
    // sin(0) = 0 and cos(0) = 1 on every frequency.
    CHECK(e0.cwiseAbs().sum() == doctest::Approx(kStageEmbeddingDim / 2.0));
    CHECK((stage_embedding(1) - stage_embedding(2)).norm() > 0.1);
  }

  TEST_CASE("mlp parameter gradient against central differences") {
    Rng rng = derive_rng(4);
    const MlpRatioModel model = MlpRatioModel::initialized(MlpShape{2, 16, 2, 3}, rng);
    const Vector z = vec({0.4, -1.3});
    const Vector g = mlp_param_grad(model, z, 1);
    CHECK(g.size() == model.num_params());

    std::vector<Index> coords(model.num_params());
    std::iota(coords.begin(), coords.end(), Index(0));
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(100);
    Vector fd(100), picked(100);
    MlpRatioModel probe = model;
    const double h = 1e-5;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const Index c = coords[i];
      const double base = model.params()(c);
      probe.mutable_params()(c) = base + h;
      const double up = mlp_forward(probe, z, 1);
      probe.mutable_params()(c) = base - h;
      const double down = mlp_forward(probe, z, 1);
      probe.mutable_params()(c) = base;
      fd(static_cast<Index>(i)) = (up - down) / (2 * h);
      picked(static_cast<Index>(i)) = g(c);
    }
    CHECK((picked - fd).norm() / fd.norm() <= 1e-4);
  }

  TEST_CASE("mlp weighted gradients sum per-sample gradients") {
    Rng rng = derive_rng(8);
    const MlpRatioModel model = MlpRatioModel::initialized(MlpShape{2, 8, 1, 2}, rng);
    const Matrix z = standard_normal(4, 2, rng);
    const Vector w = vec({0.5, -1.0, 2.0, 0.25});
    const std::array<int, 4> stages{0, 1, 1, 0};
    Vector expected = Vector::Zero(model.num_params());
    for (Index i = 0; i < 4; ++i) expected += w(i) * mlp_param_grad(model, z.row(i).transpose(), stages[i]);
    CHECK((model.weighted_param_grad(z, stages, w) - expected).norm() <= 1e-12 * expected.norm());

    const Matrix gz = model.weighted_input_grad(z, stages, w);
    const double h = 1e-6;
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 2; ++j) {
        Vector up = z.row(i).transpose(), down = up;
        up(j) += h;
        down(j) -= h;
        const double fd = w(i) * (model.forward(up, stages[i]) - model.forward(down, stages[i])) / (2 * h);
        CHECK(gz(i, j) == doctest::Approx(fd).epsilon(1e-6));
      }
  }

  TEST_CASE("zero input and zero biases give zero first-layer weight gradient") {
    Rng rng = derive_rng(9);
    const MlpShape shape{2, 8, 1, 2};
    MlpRatioModel model = MlpRatioModel::initialized(shape, rng);
    const Vector g = mlp_param_grad(model, Vector::Zero(2), 0);
    // The input branch's first Linear holds H x d weights at the front.
    CHECK(g.head(shape.hidden_width * shape.input_dim).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("adam single step and zero gradient") {
    AdamState state = AdamState::fresh(1, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    Vector p = vec({1.0});
    adam_step(state, p, vec({1.0}), false);
    CHECK(p(0) == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(state.step_count == 1);

    AdamState still = AdamState::fresh(3);
    Vector q = vec({1, 2, 3});
    adam_step(still, q, Vector::Zero(3), true);
    CHECK(q == vec({1, 2, 3}));
    CHECK(still.first_moment.isZero());
    CHECK(still.second_moment.isZero());
  }

  TEST_CASE("adam moments accumulate") {
    AdamState state = AdamState::fresh(2, AdamConfig{0.01, 0.9, 0.999, 1e-8});
    Vector p = Vector::Zero(2);
    const Vector g = vec({1.0, -2.0});
    adam_step(state, p, g, true);
    const Vector first = p;
    adam_step(state, p, g, true);
    CHECK(state.step_count == 2);
    CHECK(state.first_moment.size() == 2);
    CHECK(first(0) > 0.0);  // maximize follows +grad
    CHECK(first(1) < 0.0);
    CHECK((p - first).norm() > 0.0);
    CHECK_THROWS_AS(adam_step(state, p, vec({1.0}), true), std::invalid_argument);
  }

  TEST_CASE("gradient clipping") {
    Vector g = vec({3.0, 4.0});
    clip_grad_norm(g, 1.0);
    CHECK(g.norm() == doctest::Approx(1.0));
    Vector small = vec({0.1, 0.0});
    clip_grad_norm(small, 1.0);
    CHECK(small(0) == 0.1);
  }
}
