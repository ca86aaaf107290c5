#include <Eigen/Dense>

#include "coretherm/telemetry.hpp"
#include "doctest.h"

using namespace coretherm;

namespace {

TelemetryFrame make_frame(int n_cores, Eigen::Index n) {
  TelemetryFrame f;
  f.sample_period = 2.0;
  f.timestamps = Eigen::VectorXd::LinSpaced(n, 0.0, 2.0 * double(n - 1));
  f.core_freq_c0 = Eigen::MatrixXd::Constant(n_cores, n, 1200.0);
  f.pkg_freq_c0 = Eigen::VectorXd::Constant(n, 1800.0);
  f.idle_frac_pkg = Eigen::VectorXd::Constant(n, 0.25);
  f.pkg_power = Eigen::VectorXd::Constant(n, 50.0);
  f.core_temps = Eigen::MatrixXd::Constant(n_cores, n, 42.0);
  return f;
}

}  // namespace

TEST_SUITE("telemetry") {

TEST_CASE("rescale maps bounds to the unit interval") {
  TelemetryFrame f = make_frame(2, 10);
  ScalingBounds b;
  b.core_freq = {0.0, 2400.0};
  b.pkg_freq = {0.0, 3600.0};
  b.idle_frac = {0.0, 1.0};

  f.core_freq_c0.setConstant(0.0);
  CHECK(rescale_metrics(f, b).core_freq_c0(0, 0) == doctest::Approx(0.0));
  f.core_freq_c0.setConstant(2400.0);
  CHECK(rescale_metrics(f, b).core_freq_c0(0, 0) == doctest::Approx(1.0));
  // Hand-computed affine map: 1200 MHz on (0, 2400) sits at one half.
  f.core_freq_c0.setConstant(1200.0);
  const TelemetryFrame r = rescale_metrics(f, b);
  CHECK(r.core_freq_c0(1, 5) == doctest::Approx(0.5));
  // Power and temperatures pass through untouched.
  CHECK(r.pkg_power(3) == 50.0);
  CHECK(r.core_temps(0, 3) == 42.0);
}

TEST_CASE("rescale clamps out-of-range values") {
  TelemetryFrame f = make_frame(1, 5);
  ScalingBounds b = ScalingBounds::defaults();
  f.core_freq_c0.setConstant(9999.0);
  f.idle_frac_pkg.setConstant(-0.5);
  const TelemetryFrame r = rescale_metrics(f, b);
  CHECK(r.core_freq_c0.maxCoeff() == doctest::Approx(1.0));
  CHECK(r.idle_frac_pkg.minCoeff() == doctest::Approx(0.0));
}

TEST_CASE("rescale is idempotent on already-rescaled data") {
  TelemetryFrame f = make_frame(2, 16);
  f.core_freq_c0.setRandom();
  f.core_freq_c0 = f.core_freq_c0.cwiseAbs().cwiseMin(1.0);
  ScalingBounds unit;
  unit.core_freq = {0.0, 1.0};
  unit.pkg_freq = {0.0, 1.0};
  unit.idle_frac = {0.0, 1.0};
  TelemetryFrame g = f;
  g.pkg_freq_c0.setConstant(0.37);
  const TelemetryFrame once = rescale_metrics(g, unit);
  const TelemetryFrame twice = rescale_metrics(once, unit);
  CHECK((once.core_freq_c0 - twice.core_freq_c0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((once.pkg_freq_c0 - twice.pkg_freq_c0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("missing bound is a configuration error") {
  TelemetryFrame f = make_frame(1, 5);
  ScalingBounds b = ScalingBounds::defaults();
  b.pkg_freq.reset();
  CHECK_THROWS_AS(static_cast<void>(rescale_metrics(f, b)), ConfigError);
}

TEST_CASE("inverted bound is rejected") {
  TelemetryFrame f = make_frame(1, 5);
  ScalingBounds b = ScalingBounds::defaults();
  b.core_freq = {{2400.0, 100.0}};
  CHECK_THROWS_AS(static_cast<void>(rescale_metrics(f, b)), ConfigError);
}

TEST_CASE("slice_windows splits exactly and in order") {
  TelemetryFrame f = make_frame(2, 10);
  for (Eigen::Index t = 0; t < 10; ++t) f.pkg_power(t) = double(t);

  const auto one = slice_windows(f, 10, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].length_samples() == 10);
  CHECK(one[0].window_index == 0);

  const auto two = slice_windows(f, 4, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].frame.pkg_power(0) == 0.0);
  CHECK(two[1].frame.pkg_power(0) == 4.0);
  // Concatenated windows reproduce the first count*len samples exactly.
  Eigen::VectorXd cat(8);
  cat << two[0].frame.pkg_power, two[1].frame.pkg_power;
  CHECK((cat - f.pkg_power.head(8)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("slice_windows names required vs available length") {
  TelemetryFrame f = make_frame(1, 25);
  CHECK_THROWS_WITH_AS(static_cast<void>(slice_windows(f, 10, 3)),
                       doctest::Contains("need 30"), DataError);
}

TEST_CASE("25-window framing") {
  TelemetryFrame f = make_frame(1, 25 * 216);
  const auto w = slice_windows(f, 216, 25);
  CHECK(w.size() == 25);
  CHECK(w.back().window_index == 24);
}

TEST_CASE("quantize rounds half away from zero and is idempotent") {
  TelemetryFrame f = make_frame(1, 4);
  f.core_temps << 54.4, 54.5, -3.5, 17.0;
  const TelemetryFrame q = quantize_temps(f, 1.0);
  CHECK(q.core_temps(0, 0) == 54.0);
  CHECK(q.core_temps(0, 1) == 55.0);
  CHECK(q.core_temps(0, 2) == -4.0);
  CHECK(q.core_temps(0, 3) == 17.0);
  CHECK(q.temps_quantized);
  const TelemetryFrame qq = quantize_temps(q, 1.0);
  CHECK((qq.core_temps - q.core_temps).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frame validation catches misaligned series") {
  TelemetryFrame f = make_frame(2, 8);
  f.pkg_power = Eigen::VectorXd::Constant(7, 1.0);
  CHECK_THROWS_AS(f.validate(), DataError);
}

TEST_CASE("quantized flag demands on-grid temperatures") {
  TelemetryFrame f = make_frame(1, 4);
  f.temps_quantized = true;
  f.core_temps.setConstant(41.25);
  CHECK_THROWS_AS(f.validate(), DataError);
}

}  // TEST_SUITE
