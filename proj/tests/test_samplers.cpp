#include <doctest.h>

#include <cmath>

#include "n2ce/rng.hpp"
#include "n2ce/samplers.hpp"

using namespace n2ce;

namespace {

Matrix column_variance(const Matrix& z) {
  const Eigen::RowVectorXd mean = z.colwise().mean();
  return (z.rowwise() - mean).array().square().colwise().sum() / (z.rows() - 1.0);
}

}  // namespace

TEST_SUITE("samplers") {
  TEST_CASE("langevin with zero gradient is a random walk") {
    LangevinConfig c;
    c.seed = 3;
    const Matrix init = Matrix::Zero(10000, 2);
    const CloudGradient flat = [](const Matrix& z) { return Matrix(Matrix::Zero(z.rows(), z.cols())); };
    const Matrix out = langevin_run(flat, init, c);
    const Matrix var = column_variance(out);
    const double expected = static_cast<double>(c.steps) * c.step_size * c.step_size;
    CHECK(var(0) == doctest::Approx(expected).epsilon(0.1));
    CHECK(var(1) == doctest::Approx(expected).epsilon(0.1));
  }

  TEST_CASE("langevin reaches the standard normal") {
    LangevinConfig c;
    c.steps = 2000;
    c.step_size = 0.1;
    c.seed = 4;
    Rng rng = derive_rng(1);
    const Matrix init = 3.0 * standard_normal(2000, 2, rng);
    const Matrix out = langevin_run([](const Matrix& z) { return Matrix(-z); }, init, c);
    const Matrix var = column_variance(out);
    CHECK(std::abs(var(0) - 1.0) < 0.1);
    CHECK(std::abs(var(1) - 1.0) < 0.1);
  }

  TEST_CASE("langevin is deterministic per seed") {
    LangevinConfig c;
    c.steps = 20;
    c.seed = 8;
    const Matrix init = Matrix::Ones(5, 3);
    const auto grad = [](const Matrix& z) { return Matrix(-z); };
    CHECK(langevin_run(grad, init, c) == langevin_run(grad, init, c));
    c.step_size = -1.0;
    CHECK_THROWS_AS(langevin_run(grad, init, c), std::invalid_argument);
  }

  TEST_CASE("bandwidth heuristic") {
    CHECK(svgd_bandwidth(Matrix::Ones(4, 2), 1e-6) == 1e-6);
    Matrix two(2, 2);
    two << 0, 0, 2, 0;
    CHECK(svgd_bandwidth(two) == doctest::Approx(4.0 / (2.0 * std::log(3.0))).epsilon(1e-12));
    CHECK(4.0 / (2.0 * std::log(3.0)) == doctest::Approx(1.8205).epsilon(1e-4));

    Rng rng = derive_rng(2);
    const Matrix cloud = standard_normal(31, 2, rng);
    Matrix shifted = cloud;
    shifted.rowwise() += Eigen::RowVector2d(5.0, -3.0);
    CHECK(svgd_bandwidth(shifted) == doctest::Approx(svgd_bandwidth(cloud)).epsilon(1e-12));
  }

  TEST_CASE("svgd direction against the pairwise definition") {
    Rng rng = derive_rng(3);
    const Matrix z = standard_normal(7, 2, rng);
    const Matrix g = standard_normal(7, 2, rng);
    const double h2 = 0.7;
    const Matrix phi = svgd_direction(z, g, h2);
    for (Index i = 0; i < z.rows(); ++i) {
      Eigen::RowVector2d expected = Eigen::RowVector2d::Zero();
      for (Index j = 0; j < z.rows(); ++j) {
        const Eigen::RowVector2d diff = z.row(j) - z.row(i);
        const double k = std::exp(-diff.squaredNorm() / (2 * h2));
        expected += k * g.row(j) - k * diff / h2;
      }
      expected /= static_cast<double>(z.rows());
      CHECK((phi.row(i) - expected).norm() <= 1e-13);
    }
  }

  TEST_CASE("single particle reduces to gradient ascent") {
    Matrix one(1, 2);
    one << 0.3, -0.4;
    const Matrix g = (Matrix(1, 2) << 1.5, 2.0).finished();
    CHECK((svgd_direction(one, g, 1.0) - g).norm() == 0.0);

    SvgdConfig c;
    c.steps = 400;
    c.initial_step = 0.05;
    const Eigen::RowVector2d mode(1.0, -2.0);
    const auto res = svgd_run([&](const Matrix& z) { return Matrix(-(z.rowwise() - mode)); }, one, c);
    CHECK(res.trace.single_particle);
    CHECK((res.particles.row(0) - mode).norm() < 0.05);
  }

  TEST_CASE("svgd recovers standard normal moments") {
    Rng rng = derive_rng(0);
    const Matrix init = standard_normal(128, 2, rng);
    const auto res = svgd_run([](const Matrix& z) { return Matrix(-z); }, init, SvgdConfig{});
    const Eigen::RowVectorXd mean = res.particles.colwise().mean();
    const Matrix centered = res.particles.rowwise() - mean;
    const Matrix cov = centered.transpose() * centered / 127.0;
    CHECK(mean.norm() < 0.1);
    CHECK((cov - Matrix::Identity(2, 2)).norm() < 0.15);
    CHECK(res.trace.bandwidth.size() == 500);
    CHECK(res.trace.phi_norm.size() == 500);
  }

  TEST_CASE("svgd reports the failing step on non-finite gradients") {
    SvgdConfig c;
    c.steps = 10;
    int calls = 0;
    const CloudGradient bad = [&](const Matrix& z) {
      Matrix g = -z;
      if (++calls == 4) g(0, 0) = std::nan("");
      return g;
    };
    try {
      svgd_run(bad, Matrix::Ones(3, 2), c);
      FAIL("expected NumericFailure");
    } catch (const NumericFailure& e) {
      CHECK(e.step() == 3);
    }
  }
}
