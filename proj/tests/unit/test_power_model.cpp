#include <Eigen/Dense>

#include "coretherm/common.hpp"
#include "coretherm/power_model.hpp"
#include "doctest.h"

using namespace coretherm;

namespace {

// Rescaled frame with seeded metric content and power generated from a
// known linear ground truth plus optional gaussian noise.
struct TruthFixture {
  TelemetryFrame frame;
  Eigen::Vector2d alpha;
  Eigen::VectorXd beta;
  double intercept;
};

TruthFixture make_truth_frame(int n_cores, Eigen::Index n, double noise_w,
                              std::uint64_t seed) {
  Rng rng(seed);
  TruthFixture fx;
  fx.alpha << rng.uniform(5.0, 9.0), rng.uniform(-3.0, -1.0);
  fx.beta.resize(n_cores);
  for (int c = 0; c < n_cores; ++c) fx.beta(c) = rng.uniform(10.0, 16.0);
  fx.intercept = rng.uniform(8.0, 14.0);

  TelemetryFrame& f = fx.frame;
  f.sample_period = 2.0;
  f.timestamps = Eigen::VectorXd::LinSpaced(n, 0.0, 2.0 * double(n - 1));
  f.core_freq_c0.resize(n_cores, n);
  f.pkg_freq_c0.resize(n);
  f.idle_frac_pkg.resize(n);
  f.core_temps = Eigen::MatrixXd::Constant(n_cores, n, 40.0);
  for (Eigen::Index t = 0; t < n; ++t) {
    f.pkg_freq_c0(t) = rng.u01();
    f.idle_frac_pkg(t) = rng.u01();
    for (int c = 0; c < n_cores; ++c) f.core_freq_c0(c, t) = rng.u01();
  }
  f.pkg_power = (fx.alpha(0) * f.pkg_freq_c0 +
                 fx.alpha(1) * f.idle_frac_pkg).array() + fx.intercept;
  for (int c = 0; c < n_cores; ++c)
    f.pkg_power += fx.beta(c) * f.core_freq_c0.row(c).transpose();
  if (noise_w > 0.0)
    for (Eigen::Index t = 0; t < n; ++t)
      f.pkg_power(t) += rng.normal(0.0, noise_w);
  return fx;
}

}  // namespace

TEST_SUITE("power_model") {

TEST_CASE("noise-free fit recovers the generator coefficients") {
  const TruthFixture fx = make_truth_frame(4, 2000, 0.0, 11);
  const PowerModel m = fit_power_model({fx.frame});
  CHECK((m.alpha - fx.alpha).cwiseAbs().maxCoeff() /
            fx.alpha.cwiseAbs().maxCoeff() <=
        1e-8);
  CHECK((m.beta - fx.beta).cwiseAbs().maxCoeff() / fx.beta.maxCoeff() <= 1e-8);
  CHECK(m.intercept == doctest::Approx(fx.intercept).epsilon(1e-8));
  CHECK(m.deficient_columns.empty());
}

TEST_CASE("gaussian noise keeps errors inside the paper thresholds") {
  const TruthFixture fx = make_truth_frame(8, 6000, 1.0, 5);
  const PowerModel m = fit_power_model({fx.frame});
  const Eigen::VectorXd err =
      (predict_package(m, fx.frame) - fx.frame.pkg_power).cwiseAbs();
  const double n = double(err.size());
  CHECK(double((err.array() < 9.68).count()) / n >= 0.90);
  CHECK(double((err.array() < 3.23).count()) / n >= 0.60);
}

TEST_CASE("degenerate all-zero metrics: error by default, zero-column report on request") {
  TruthFixture fx = make_truth_frame(2, 400, 0.0, 3);
  fx.frame.core_freq_c0.setZero();
  fx.frame.pkg_freq_c0.setZero();
  fx.frame.idle_frac_pkg.setZero();
  fx.frame.pkg_power.setConstant(33.5);

  CHECK_THROWS_WITH_AS(static_cast<void>(fit_power_model({fx.frame})),
                       doctest::Contains("core_0"), DataError);

  PowerFitOptions opts;
  opts.allow_rank_deficient = true;
  const PowerModel m = fit_power_model({fx.frame}, opts);
  CHECK(m.intercept == doctest::Approx(33.5));
  CHECK(m.alpha.cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.deficient_columns.size() == 4);  // both uncore and both core columns
}

TEST_CASE("too few samples for the coefficient count") {
  const TruthFixture fx = make_truth_frame(4, 30, 0.0, 7);
  CHECK_THROWS_AS(static_cast<void>(fit_power_model({fx.frame})), DataError);
}

TEST_CASE("unrescaled metrics are rejected") {
  TruthFixture fx = make_truth_frame(2, 400, 0.0, 9);
  fx.frame.core_freq_c0.setConstant(1800.0);  // native MHz, not rescaled
  CHECK_THROWS_AS(static_cast<void>(fit_power_model({fx.frame})), DataError);
}

TEST_CASE("prediction is affine: zero metrics give the intercept") {
  TruthFixture fx = make_truth_frame(3, 500, 0.0, 13);
  const PowerModel m = fit_power_model({fx.frame});
  TelemetryFrame zero = fx.frame;
  zero.core_freq_c0.setZero();
  zero.pkg_freq_c0.setZero();
  zero.idle_frac_pkg.setZero();
  const Eigen::VectorXd p = predict_package(m, zero);
  CHECK(p(0) == doctest::Approx(m.intercept));
  const PartialPowers parts = partition_powers(m, zero);
  CHECK(parts.uncore(0) == doctest::Approx(m.intercept));
  CHECK(parts.per_core.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("doubling one beta row adds exactly that row's contribution") {
  TruthFixture fx = make_truth_frame(3, 300, 0.0, 17);
  PowerModel m = fit_power_model({fx.frame});
  const Eigen::VectorXd base = predict_package(m, fx.frame);
  const Eigen::VectorXd row1 =
      m.beta(1) * fx.frame.core_freq_c0.row(1).transpose();
  m.beta(1) *= 2.0;
  const Eigen::VectorXd doubled = predict_package(m, fx.frame);
  CHECK((doubled - base - row1).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("partition identity holds bit for bit before clamping") {
  const TruthFixture fx = make_truth_frame(5, 800, 1.0, 19);
  const PowerModel m = fit_power_model({fx.frame});
  const PartialPowers raw = partition_powers(m, fx.frame, false);
  const Eigen::VectorXd pred = predict_package(m, fx.frame);
  Eigen::VectorXd sum = raw.uncore;
  for (int c = 0; c < raw.n_cores(); ++c)
    sum += raw.per_core.row(c).transpose();
  CHECK((sum - pred).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("negative shares clamp to zero with a count") {
  TruthFixture fx = make_truth_frame(2, 300, 0.0, 23);
  PowerModel m = fit_power_model({fx.frame});
  m.beta(0) = -4.0;  // force a negative share
  const PartialPowers p = partition_powers(m, fx.frame);
  CHECK(p.per_core.minCoeff() >= 0.0);
  CHECK(p.uncore.minCoeff() >= 0.0);
  CHECK(p.clamped_count > 0);
}

TEST_CASE("scale equivariance: scaling power scales every coefficient") {
  TruthFixture fx = make_truth_frame(3, 900, 0.5, 29);
  const PowerModel m1 = fit_power_model({fx.frame});
  TelemetryFrame scaled = fx.frame;
  scaled.pkg_power *= 3.0;
  const PowerModel m3 = fit_power_model({scaled});
  CHECK((m3.alpha - 3.0 * m1.alpha).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((m3.beta - 3.0 * m1.beta).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(m3.intercept == doctest::Approx(3.0 * m1.intercept).epsilon(1e-8));
}

TEST_CASE("least-squares optimality against coefficient nudges") {
  const TruthFixture fx = make_truth_frame(2, 700, 1.0, 31);
  const PowerModel m = fit_power_model({fx.frame});
  const auto sse = [&](const PowerModel& pm) {
    return (predict_package(pm, fx.frame) - fx.frame.pkg_power).squaredNorm();
  };
  const double best = sse(m);
  for (int coef = 0; coef < 5; ++coef) {
    for (double delta : {-1e-3, 1e-3}) {
      PowerModel p = m;
      if (coef < 2) p.alpha(coef) += delta;
      else if (coef < 4) p.beta(coef - 2) += delta;
      else p.intercept += delta;
      CHECK(sse(p) >= best);
    }
  }
}

TEST_CASE("core-count mismatch is rejected") {
  const TruthFixture fx = make_truth_frame(3, 400, 0.0, 37);
  const PowerModel m = fit_power_model({fx.frame});
  const TruthFixture other = make_truth_frame(5, 400, 0.0, 37);
  CHECK_THROWS_AS(static_cast<void>(predict_package(m, other.frame)),
                  DataError);
  CHECK_THROWS_AS(static_cast<void>(partition_powers(m, other.frame)),
                  DataError);
}

}  // TEST_SUITE
