#include <doctest.h>

#include <array>
#include <cmath>

#include "n2ce/analysis.hpp"

using namespace n2ce;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

double path_gap(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  return (a.path - b.path).rowwise().norm().mean();
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("trajectory presets") {
    const TrajectoryConfig two = TrajectoryConfig::two_dim();
    CHECK(two.target_mean == vec({1.5, -0.8}));
    CHECK(two.init_mean == vec({-2.0, 1.0}));
    CHECK(two.samples_per_iter == 4000);
    CHECK(two.step_size == 0.2);
    CHECK(two.iterations == 150);
    const TrajectoryConfig five = TrajectoryConfig::five_dim(500);
    CHECK(five.target_mean == vec({-1.5, -0.75, 0.0, 0.75, 1.5}));
    CHECK(five.init_mean == -five.target_mean);
    CHECK(five.samples_per_iter == 500);
  }

  TEST_CASE("exact MLE contracts geometrically") {
    TrajectoryConfig c = TrajectoryConfig::two_dim();
    c.estimator = ObjectiveKind::mle_exact();
    const TrajectoryRecord rec = trajectory_run(c);
    REQUIRE(rec.distance.size() == 150);
    CHECK(rec.path.rows() == 151);
    const double d0 = (c.init_mean - c.target_mean).norm();
    for (std::size_t t = 0; t < rec.distance.size(); t += 10)
      CHECK(rec.distance[t] == doctest::Approx(d0 * std::pow(0.8, static_cast<double>(t))).epsilon(1e-9));
    CHECK(rec.final_distance <= 1e-10);
    for (double d : rec.distance) CHECK(d >= 0.0);
  }

  TEST_CASE("large-M trajectory tracks the MLE trajectory") {
    TrajectoryConfig c = TrajectoryConfig::two_dim();
    c.seed = 3;
    c.estimator = ObjectiveKind::mle_exact();
    const TrajectoryRecord mle = trajectory_run(c);
    for (NegativeSource source : {NegativeSource::Noise, NegativeSource::Model}) {
      c.negatives = source;
      c.estimator = ObjectiveKind::n2ce(1000.0);
      const TrajectoryRecord n2ce = trajectory_run(c);
      CHECK(n2ce.final_distance <= 0.1);
      CHECK(path_gap(n2ce, mle) <= 0.05);
    }
  }

  TEST_CASE("simple negative reweighting does not reach the MLE fixed point") {
    TrajectoryConfig c = TrajectoryConfig::two_dim();
    c.seed = 4;
    c.negatives = NegativeSource::Noise;
    const std::array<ObjectiveKind, 2> kinds{ObjectiveKind::n2ce(1000.0), ObjectiveKind::neg_reweight(1000.0)};
    const auto recs = trajectory_compare(c, kinds);
    CHECK(recs[1].final_distance >= 2.0 * recs[0].final_distance);
  }

  TEST_CASE("trajectory-averaged error decreases with M") {
    TrajectoryConfig c = TrajectoryConfig::two_dim();
    c.seed = 5;
    const std::array<ObjectiveKind, 4> kinds{ObjectiveKind::n2ce(1000.0), ObjectiveKind::n2ce(100.0),
                                             ObjectiveKind::n2ce(10.0), ObjectiveKind::nce()};
    const auto recs = trajectory_compare(c, kinds);
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) CHECK(recs[i].mse < recs[i + 1].mse);
  }

  TEST_CASE("common random numbers and determinism") {
    TrajectoryConfig c = TrajectoryConfig::two_dim();
    c.iterations = 20;
    c.seed = 9;
    c.estimator = ObjectiveKind::n2ce(50.0);
    const TrajectoryRecord a = trajectory_run(c);
    const TrajectoryRecord b = trajectory_run(c);
    CHECK(a.path == b.path);
    // Under common random numbers, two nearly identical estimators stay close;
    // with independent streams they do not share the noise.
    c.estimator = ObjectiveKind::n2ce(50.0001);
    const TrajectoryRecord shared = trajectory_run(c);
    CHECK(path_gap(a, shared) <= 1e-4);
    c.common_random_numbers = false;
    const TrajectoryRecord independent = trajectory_run(c);
    CHECK(path_gap(a, independent) > 1e-3);
  }

  TEST_CASE("trajectory config validation") {
    TrajectoryConfig c = TrajectoryConfig::two_dim();
    c.estimator = ObjectiveKind{ObjectiveTag::N2ce, 0.5};
    CHECK_THROWS_AS(trajectory_run(c), std::invalid_argument);
    c = TrajectoryConfig::two_dim();
    c.init_mean = vec({0.0});
    CHECK_THROWS_AS(trajectory_run(c), std::invalid_argument);
  }

  TEST_CASE("gradient error decreases with M in the bias-dominated regime") {
    const std::array<double, 5> grid{10, 30, 100, 300, 1000};
    const auto points = gradient_error_vs_M(vec({-2, 1}), vec({1.5, -0.8}), grid, 200000, 2, 1);
    REQUIRE(points.size() == grid.size());
    for (std::size_t i = 0; i + 1 < points.size(); ++i) CHECK(points[i].error_mean > points[i + 1].error_mean);
    const std::array<double, 1> empty_check{1.0};
    CHECK_THROWS_AS(gradient_error_vs_M(vec({0}), vec({0}), std::span<const double>(empty_check.data(), 0), 10, 1, 0),
                    std::invalid_argument);
  }

  TEST_CASE("gradient error at the optimum is sampling noise") {
    const std::array<double, 3> grid{10, 100, 1000};
    const Index n = 100000;
    const auto points = gradient_error_vs_M(vec({0.5, -0.2}), vec({0.5, -0.2}), grid, n, 4, 2);
    for (const auto& p : points) CHECK(p.error_mean <= 10.0 / std::sqrt(static_cast<double>(n)));
  }

  TEST_CASE("gradient estimate variance shrinks with n") {
    const double small = gradient_estimate_variance(vec({0.2, 0.1}), vec({0.5, -0.2}), 10.0, 100, 200, 3);
    const double large = gradient_estimate_variance(vec({0.2, 0.1}), vec({0.5, -0.2}), 10.0, 1000, 200, 3);
    CHECK(large < small / 5.0);
  }

  TEST_CASE("mse sweep presets and determinism") {
    const SweepConfig big = SweepConfig::large_sample();
    CHECK(big.n == 500);
    CHECK(big.entries.size() == 9);
    CHECK(big.entries.front() == ObjectiveKind::nwj());
    const SweepConfig small = SweepConfig::small_sample();
    CHECK(small.n == 2);
    CHECK(small.entries[2] == ObjectiveKind::n2ce(1.5));

    SweepConfig c = small;
    c.repeats = 2;
    c.seed = 12;
    const SweepTable a = mse_sweep(c);
    c.threads = 2;
    const SweepTable b = mse_sweep(c);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].mse_mean == b.rows[i].mse_mean);
      CHECK(a.rows[i].mse_std == b.rows[i].mse_std);
      CHECK(a.rows[i].mse_mean >= 0.0);
    }
  }

  TEST_CASE("optimal M with a single-entry grid is vacuous") {
    const std::array<Index, 1> ns{50};
    const std::array<double, 1> grid{20.0};
    const auto res = optimal_m_scaling_check(ns, grid, 2, 0);
    REQUIRE(res.size() == 1);
    CHECK(res[0].argmin_m == 20.0);
    CHECK(res[0].vacuous);
    CHECK(res[0].lower == doctest::Approx(std::sqrt(50.0)));
    CHECK(res[0].upper == doctest::Approx(10 * std::sqrt(50.0)));
    CHECK(res[0].in_bracket);
  }

  TEST_CASE("normalized ascent starting inside the tolerance") {
    ConvergeConfig c = ConvergeConfig::two_dim();
    c.kappa_samples = 10000;
    c.samples_per_iter = 1000;
    c.init_mean = c.target_mean;
    ConvergeResult r = normalized_ascent_converge(c);
    CHECK(r.success);
    CHECK(r.first_hit_iteration == 0);

    c = ConvergeConfig::two_dim();
    c.kappa_samples = 10000;
    c.samples_per_iter = 1000;
    c.delta = 10.0;
    r = normalized_ascent_converge(c);
    CHECK(r.success);
    CHECK(r.first_hit_iteration == 0);
  }

  TEST_CASE("extended moment condition number") {
    Rng rng = derive_rng(0);
    // Zero mean: E[T T^T] is the identity.
    CHECK(extended_moment_condition_number(vec({0, 0}), 200000, rng) == doctest::Approx(1.0).epsilon(0.02));
    // Mean (a, 0): the block [[1 + a^2, -a], [-a, 1]] plus a unit direction.
    const double a = 2.0;
    const double tr = 2.0 + a * a, det = 1.0;
    const double hi = 0.5 * (tr + std::sqrt(tr * tr - 4 * det));
    const double lo = 0.5 * (tr - std::sqrt(tr * tr - 4 * det));
    CHECK(extended_moment_condition_number(vec({a, 0}), 400000, rng) == doctest::Approx(hi / lo).epsilon(0.03));
  }

  TEST_CASE("log-log slope") {
    const std::array<double, 5> xs{1, 3, 10, 30, 100};
    std::array<double, 5> inv_sq{}, flat{}, power{};
    for (std::size_t i = 0; i < xs.size(); ++i) {
      inv_sq[i] = 1.0 / (xs[i] * xs[i]);
      flat[i] = 4.2;
      power[i] = 0.3 * std::pow(xs[i], 1.5);
    }
    CHECK(std::abs(loglog_slope(xs, inv_sq) + 2.0) <= 1e-12);
    CHECK(std::abs(loglog_slope(xs, flat)) <= 1e-12);
    CHECK(loglog_slope(xs, power) == doctest::Approx(1.5).epsilon(1e-12));
  }

  TEST_CASE("negative source names round-trip") {
    CHECK(negative_source_from_string(to_string(NegativeSource::Model)) == NegativeSource::Model);
    CHECK_THROWS(negative_source_from_string("elsewhere"));
  }
}
