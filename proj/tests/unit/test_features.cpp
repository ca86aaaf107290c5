#include <Eigen/Dense>
#include <complex>

#include "coretherm/features.hpp"
#include "coretherm/fft.hpp"
#include "coretherm/synth.hpp"
#include "doctest.h"

using namespace coretherm;

namespace {

Window make_window(const Eigen::MatrixXd& temps, const Eigen::VectorXd& pkg) {
  Window w;
  TelemetryFrame& f = w.frame;
  const Eigen::Index n = temps.cols();
  f.sample_period = 2.0;
  f.timestamps = Eigen::VectorXd::LinSpaced(n, 0.0, 2.0 * double(n - 1));
  f.core_freq_c0 = Eigen::MatrixXd::Constant(temps.rows(), n, 0.5);
  f.pkg_freq_c0 = Eigen::VectorXd::Constant(n, 0.5);
  f.idle_frac_pkg = Eigen::VectorXd::Constant(n, 0.2);
  f.pkg_power = pkg;
  f.core_temps = temps;
  return w;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("dft agrees with the direct definition on awkward lengths") {
  Rng rng(7);
  for (std::size_t n : {8u, 12u, 21u, 60u, 97u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal(0.0, 1.0);
    const auto fast = dft(x);
    for (std::size_t k = 0; k < n; k += std::max<std::size_t>(n / 7, 1)) {
      std::complex<double> direct(0.0, 0.0);
      for (std::size_t t = 0; t < n; ++t)
        direct += x[t] * std::exp(std::complex<double>(
                             0.0, -2.0 * M_PI * double(k) * double(t) /
                                      double(n)));
      CHECK(std::abs(fast[k] - direct) <= 1e-9 * (1.0 + std::abs(direct)));
    }
  }
}

TEST_CASE("constant signal: flat lowpass features, flagged autocorrelation") {
  const Eigen::Index n = 2000;
  Eigen::MatrixXd temps = Eigen::MatrixXd::Constant(1, n, 55.0);
  Eigen::VectorXd pkg = Eigen::VectorXd::Constant(n, 40.0);
  const Window w = make_window(temps, pkg);
  PartialPowers pp;
  pp.uncore = Eigen::VectorXd::Constant(n, 12.0);
  pp.per_core = Eigen::MatrixXd::Constant(1, n, 7.0);

  const TraceFeatures f = trace_features(w, pp, 0);
  const auto names = trace_feature_names(1);
  REQUIRE(f.values.size() == Eigen::Index(names.size()));
  REQUIRE(f.values.size() == (1 + 3) * 5);
  // Every signal is constant: std and span of the low-passed series vanish,
  // and the autocorrelation feature takes its 1.0 convention.
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].find("std_lowpass") != std::string::npos ||
        names[i].find("span_lowpass") != std::string::npos)
      CHECK(f.values(Eigen::Index(i)) == 0.0);
    if (names[i].find("mean_abs_autocorr") != std::string::npos)
      CHECK(f.values(Eigen::Index(i)) == 1.0);
  }
  CHECK(f.zero_variance);
}

TEST_CASE("white noise has a tiny mean absolute autocorrelation") {
  Rng rng(11);
  Eigen::VectorXd x(21600);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal(0.0, 1.0);
  bool flagged = false;
  CHECK(mean_abs_autocorr(x, 100, &flagged) <= 0.02);
  CHECK_FALSE(flagged);
}

TEST_CASE("prbs versus constant power separates the advertised features") {
  WorkloadSpec prbs;
  prbs.kind = WorkloadKind::prbs;
  prbs.duration = 4096;
  prbs.prbs_hold = 12.0;
  const Eigen::VectorXd p_prbs =
      gen_workload(prbs, 1, 3).row(0).transpose();
  bool flag = false;
  const double ac_prbs = mean_abs_autocorr(p_prbs, 100, &flag);

  // The low-passed span of the prbs strictly beats the constant's zero and
  // its mean autocorrelation stays below the constant's 1.0 convention.
  Eigen::VectorXd p_const = Eigen::VectorXd::Constant(4096, 9.0);
  const double ac_const = mean_abs_autocorr(p_const, 100, &flag);
  CHECK(ac_prbs < ac_const);
  CHECK(flag);
}

TEST_CASE("trace feature vector is deterministic") {
  ThermalTruthOptions topt;
  const GroundTruthThermal t = gen_thermal_truth(2, 51, topt);
  WorkloadSpec ws;
  ws.kind = WorkloadKind::prbs;
  ws.duration = 2048;
  const Eigen::MatrixXd p = gen_workload(ws, 2, 53);
  const SynthDataset ds = simulate(t, p, SynthConfig{}, 55);
  Window w;
  w.frame = ds.frame;
  PartialPowers pp;
  pp.uncore = ds.true_powers.row(0).transpose();
  pp.per_core = ds.true_powers.bottomRows(2);
  const TraceFeatures a = trace_features(w, pp, 0);
  const TraceFeatures b = trace_features(w, pp, 0);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("short windows are refused") {
  Eigen::MatrixXd temps = Eigen::MatrixXd::Constant(1, 150, 50.0);
  Eigen::VectorXd pkg = Eigen::VectorXd::Constant(150, 30.0);
  const Window w = make_window(temps, pkg);
  PartialPowers pp;
  pp.uncore = Eigen::VectorXd::Constant(150, 10.0);
  pp.per_core = Eigen::MatrixXd::Constant(1, 150, 6.0);
  CHECK_THROWS_AS(static_cast<void>(trace_features(w, pp, 0)), DataError);
}

TEST_CASE("ident feature vector layout and saturation") {
  const auto names = ident_feature_names(2);
  CHECK(names.size() == 2 * 2 + 2 + 4 + 2);

  IdentDiagnostics diag;
  diag.poles = {{0.9, 0.0}, {0.8, 0.0}};
  diag.residual_autocorr = {0.1, -0.05, 0.02, 0.01};
  diag.cond_r = 1234.5;
  diag.min_sv_r = 1e-6;
  diag.sigma_w = 0.05;
  diag.sigma_v = 0.29;
  ArxModel m;
  const IdentFeatures f = ident_features(diag, m);
  REQUIRE(f.values.size() == Eigen::Index(names.size()));
  CHECK(f.values(0) == 0.9);
  CHECK(f.values(1) == 0.8);
  CHECK(f.values(2) == 0.0);
  CHECK(f.values(3) == 0.0);
  CHECK(f.values(4) == 0.05);
  CHECK(f.values(5) == 0.29);
  CHECK(f.values(10) == doctest::Approx(std::log10(1234.5)));
  CHECK(f.values(11) == doctest::Approx(-6.0));

  IdentDiagnostics inf_diag = diag;
  inf_diag.cond_r = std::numeric_limits<double>::infinity();
  const IdentFeatures g = ident_features(inf_diag, m);
  CHECK(g.values(10) == doctest::Approx(18.0));

  const IdentFeatures d = ident_features_deficient(2);
  CHECK(d.values(10) == doctest::Approx(18.0));
  CHECK(d.values.allFinite());
}

TEST_CASE("collinear inputs saturate the condition feature") {
  ThermalTruthOptions topt;
  const GroundTruthThermal t = gen_thermal_truth(2, 61, topt);
  WorkloadSpec ws;
  ws.kind = WorkloadKind::prbs;
  ws.duration = 3000;
  Eigen::MatrixXd p = gen_workload(ws, 2, 63);
  p.row(1) = p.row(0);  // duplicate input
  const SynthDataset ds = simulate(t, p, SynthConfig{}, 65);
  Window w;
  w.frame = ds.frame;
  PartialPowers pp;
  pp.uncore = ds.true_powers.row(0).transpose();
  pp.per_core = ds.true_powers.bottomRows(2);
  const RegressorSet reg = build_regressors(w, pp, 0, 2, 8);
  const CovarianceEstimates cov = sample_covariances(reg);
  IdentDiagnostics diag;
  diag.poles = {{0.9, 0.0}, {0.8, 0.0}};
  diag.cond_r = cov.cond_r;
  diag.min_sv_r = cov.min_sv_r;
  ArxModel m;
  const IdentFeatures f = ident_features(diag, m);
  CHECK(f.values(10) >= 8.0);  // log10 cond of a collinear construction
}

TEST_CASE("labeling thresholds") {
  const std::vector<std::complex<double>> good_poles = {{0.95, 0.0},
                                                        {0.85, 0.0}};
  const std::vector<std::complex<double>> complex_poles = {{0.9, 0.2},
                                                           {0.9, -0.2}};
  const std::vector<std::complex<double>> low_pole = {{0.95, 0.0},
                                                      {0.55, 0.0}};
  const std::vector<std::complex<double>> unstable = {{1.02, 0.0},
                                                      {0.9, 0.0}};

  CHECK(label_window(0.9, 1.1, good_poles).label == LabelClass::good);
  CHECK(label_window(1.3, 1.0, good_poles).label == LabelClass::excluded);
  CHECK(label_window(0.9, 1.0, complex_poles).label == LabelClass::bad);
  CHECK(label_window(0.9, 1.0, low_pole).label == LabelClass::bad);
  CHECK(label_window(0.9, 1.0, unstable).label == LabelClass::bad);
  CHECK(label_window(2.3, 2.4, good_poles).label == LabelClass::bad);
  CHECK(label_window(0.9, 1.7, good_poles).label == LabelClass::excluded);
  CHECK(label_window(1.45, 1.2, good_poles).label == LabelClass::excluded);
  CHECK(label_window(1.55, 1.2, good_poles).label == LabelClass::bad);

  const WindowLabel l = label_window(0.9, 1.1, good_poles);
  CHECK(l.poles_real_stable);
  CHECK(l.max_pole_modulus == doctest::Approx(0.95));
}

TEST_CASE("label monotonicity in the mean error") {
  const std::vector<std::complex<double>> poles = {{0.93, 0.0}, {0.86, 0.0}};
  bool seen_good = false;
  LabelClass prev = LabelClass::bad;
  for (double err = 3.0; err >= 0.05; err -= 0.05) {
    const LabelClass cur = label_window(err, 1.0, poles).label;
    if (prev == LabelClass::good) CHECK(cur == LabelClass::good);
    if (cur == LabelClass::good) seen_good = true;
    prev = cur;
  }
  CHECK(seen_good);
}

TEST_CASE("near-real pole tolerance") {
  const std::vector<std::complex<double>> nearly_real = {{0.95, 5e-10},
                                                         {0.85, -5e-10}};
  CHECK(label_window(0.9, 1.0, nearly_real).label == LabelClass::good);
  const std::vector<std::complex<double>> not_real = {{0.95, 1e-3},
                                                      {0.85, -1e-3}};
  CHECK(label_window(0.9, 1.0, not_real).label == LabelClass::bad);
}

}  // TEST_SUITE
