#include <doctest.h>

#include <array>
#include <cmath>

#include "n2ce/gaussian_location.hpp"
#include "n2ce/telescoping.hpp"

using namespace n2ce;

namespace {

TargetSampler gaussian_target(const Vector& mean) {
  return [mean](Index count, Rng& rng) { return sample_gaussian_location(mean, count, rng); };
}

}  // namespace

TEST_SUITE("telescoping") {
  TEST_CASE("schedule presets") {
    const auto k3 = SigmaSchedule::preset(SigmaPreset::K3);
    const std::vector<double> k3_expected{0.01, 0.69175489, 0.92238785, 0.99974058};
    CHECK(k3.sigma_squared() == k3_expected);
    CHECK(k3.K() == 3);
    const auto k6 = SigmaSchedule::preset(SigmaPreset::K6);
    const std::vector<double> k6_expected{0.01, 0.3237, 0.5165, 0.6322, 0.7132, 0.7734, 0.9997};
    CHECK(k6.sigma_squared() == k6_expected);
    CHECK(k6.K() == 6);
    CHECK(k3.sigma(1) == doctest::Approx(std::sqrt(0.69175489)));
  }

  TEST_CASE("custom schedules are validated") {
    CHECK_THROWS_AS(SigmaSchedule::from_squared({0.5, 0.4}), std::invalid_argument);
    CHECK_THROWS_AS(SigmaSchedule::from_squared({0.2, 1.5}), std::invalid_argument);
    CHECK_THROWS_AS(SigmaSchedule::from_squared({0.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(SigmaSchedule::from_squared({}), std::invalid_argument);
    CHECK(SigmaSchedule::from_squared({0.3, 1.0}).K() == 1);
  }

  TEST_CASE("linear schedule hits its endpoints") {
    for (int K : {1, 3, 6, 10}) {
      const auto s = SigmaSchedule::linear(K);
      REQUIRE(s.K() == K);
      CHECK(s.sigma_squared().front() == doctest::Approx(0.01));
      CHECK(s.sigma_squared().back() == doctest::Approx(0.9997).epsilon(1e-9));
      for (int k = 0; k < K; ++k) CHECK(s.sigma_squared()[k] < s.sigma_squared()[k + 1]);
    }
  }

  TEST_CASE("stage weights") {
    const auto s = SigmaSchedule::preset(SigmaPreset::K3);
    const Vector w = stage_weights(s);
    REQUIRE(w.size() == 4);
    for (int k = 0; k <= 3; ++k) {
      double prod = 1.0;
      for (int i = k; i <= 3; ++i) prod *= s.sigma(i);
      CHECK(w(k) == doctest::Approx(std::sqrt(s.sigma(3) / prod)));
      CHECK(w(k) > 0.0);
    }
    CHECK(w(3) == doctest::Approx(1.0));
  }

  TEST_CASE("interpolation endpoints and variance") {
    Rng rng = derive_rng(1);
    const Vector z0 = standard_normal(3, 1, rng);
    const Vector z1 = standard_normal(3, 1, rng);
    CHECK(interpolate_stage(z0, z1, 0.0) == z0);
    CHECK(interpolate_stage(z0, z1, 1.0) == z1);
    CHECK_THROWS_AS(interpolate_stage(z0, z1, 1.2), std::invalid_argument);

    const Matrix a = standard_normal(100000, 2, rng);
    const Matrix b = standard_normal(100000, 2, rng);
    for (double sigma : {0.1, 0.5, 0.9}) {
      const Matrix z = interpolate_stage(a, b, sigma);
      const Eigen::RowVectorXd mean = z.colwise().mean();
      const Eigen::RowVectorXd var = (z.rowwise() - mean).array().square().colwise().sum() / (z.rows() - 1.0);
      CHECK(std::abs(var(0) - 1.0) < 0.02);
      CHECK(std::abs(var(1) - 1.0) < 0.02);
    }
  }

  TEST_CASE("telescoped log ratio sums the stages") {
    const MlpRatioModel zero(MlpShape{2, 8, 1, 4});
    const Vector z = (Vector(2) << 0.3, -1.0).finished();
    CHECK(telescoping_log_ratio(zero, z) == 0.0);

    Rng rng = derive_rng(2);
    const MlpRatioModel single = MlpRatioModel::initialized(MlpShape{2, 8, 1, 1}, rng);
    CHECK(telescoping_log_ratio(single, z) == doctest::Approx(mlp_forward(single, z, 0)).epsilon(1e-14));

    const MlpRatioModel net = MlpRatioModel::initialized(MlpShape{2, 8, 1, 4}, rng);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) sum += mlp_forward(net, z, k);
    CHECK(telescoping_log_ratio(net, z) == doctest::Approx(sum).epsilon(1e-13));

    const Matrix batch = standard_normal(6, 2, rng);
    const Vector f = telescoping_log_ratios(net, batch);
    const Matrix g = telescoping_input_grad(net, batch);
    const double h = 1e-6;
    for (Index i = 0; i < 6; ++i) {
      CHECK(f(i) == doctest::Approx(telescoping_log_ratio(net, batch.row(i).transpose())).epsilon(1e-13));
      for (Index j = 0; j < 2; ++j) {
        Vector up = batch.row(i).transpose(), down = up;
        up(j) += h;
        down(j) -= h;
        CHECK(g(i, j) == doctest::Approx((telescoping_log_ratio(net, up) - telescoping_log_ratio(net, down)) / (2 * h))
                             .epsilon(1e-6));
      }
    }
  }

  TEST_CASE("stage KLs of a Gaussian target") {
    const auto s = SigmaSchedule::preset(SigmaPreset::K3);
    const Vector mean = (Vector(2) << 2.0, 2.0).finished();
    const auto kl = gaussian_stage_kl(s, mean);
    REQUIRE(kl.size() == 4);
    double total_gap = 0.0;
    for (int k = 0; k <= 3; ++k) {
      const double upper = k == 3 ? 1.0 : s.sigma(k + 1);
      CHECK(kl[k] == doctest::Approx(0.5 * std::pow(upper - s.sigma(k), 2) * 8.0));
      total_gap += upper - s.sigma(k);
    }
    // Every stage KL is far below the direct KL of 4 nats.
    for (double v : kl) CHECK(v < 4.0);
    CHECK(total_gap == doctest::Approx(1.0 - s.sigma(0)));
  }

  TEST_CASE("fit is deterministic and respects the stage count") {
    const auto schedule = SigmaSchedule::preset(SigmaPreset::K3);
    TelescopingConfig c;
    c.iterations = 30;
    c.batch_size = 32;
    c.seed = 5;
    Rng rng = derive_rng(3);
    const MlpRatioModel init = MlpRatioModel::initialized(MlpShape{2, 8, 1, 4}, rng);
    const Vector mean = (Vector(2) << 1.0, 1.0).finished();
    const TelescopingFit a = fit_telescoping(gaussian_target(mean), schedule, init, c);
    const TelescopingFit b = fit_telescoping(gaussian_target(mean), schedule, init, c);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.stage_trace == b.stage_trace);
    CHECK(a.model.params() == b.model.params());
    CHECK(a.loss_trace.size() == 30);
    for (int k : a.stage_trace) CHECK((k >= 0 && k <= 3));

    c.negatives = NegativeSizing::Scaled;
    c.max_negatives = 256;
    c.coupled = false;
    c.stage_weighting = true;
    const TelescopingFit scaled = fit_telescoping(gaussian_target(mean), schedule, init, c);
    CHECK(scaled.model.params().allFinite());

    const MlpRatioModel wrong = MlpRatioModel::initialized(MlpShape{2, 8, 1, 3}, rng);
    CHECK_THROWS_AS(fit_telescoping(gaussian_target(mean), schedule, wrong, c), std::invalid_argument);
  }

  TEST_CASE("short fit moves toward the closed-form ratio") {
    const auto schedule = SigmaSchedule::preset(SigmaPreset::K3);
    TelescopingConfig c;
    c.iterations = 600;
    c.batch_size = 128;
    c.adam.learning_rate = 1e-3;
    Rng rng = derive_rng(4);
    const Vector mean = (Vector(2) << 2.0, 2.0).finished();
    const TelescopingFit fit =
        fit_telescoping(gaussian_target(mean), schedule, MlpRatioModel::initialized(MlpShape{2, 32, 1, 4}, rng), c);
    Matrix grid(121, 2);
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) grid.row(i * 11 + j) << -2.0 + 0.4 * i, -2.0 + 0.4 * j;
    const Vector f = telescoping_log_ratios(fit.model, grid);
    const Vector truth = (grid * mean).array() - 4.0;
    const Vector x = f.array() - f.mean(), y = truth.array() - truth.mean();
    CHECK(x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm()) > 0.8);
  }
}
