#include <Eigen/Dense>

#include "coretherm/arx.hpp"
#include "coretherm/synth.hpp"
#include "doctest.h"

using namespace coretherm;

namespace {

struct Oracle {
  GroundTruthThermal truth;
  SynthDataset ds;
  Window window;
  PartialPowers powers;  // true powers
};

// Generate-then-identify fixture with controllable noise content.
Oracle make_oracle(int n_cores, Eigen::Index n_samples, double quant,
                   double sigma_w2, std::uint64_t seed, double prbs_hold = 8.0,
                   double virus_w = 18.0, double pole_lo = 0.86,
                   double pole_hi = 0.965) {
  ThermalTruthOptions topt;
  topt.pole_lo = pole_lo;
  topt.pole_hi = pole_hi;
  topt.pole_sep_min = 0.06;
  topt.gain_lo = 0.6;
  topt.sigma_w2 = sigma_w2;
  Oracle o;
  o.truth = gen_thermal_truth(n_cores, seed, topt);

  Rng rng(seed * 7919 + 1);
  Eigen::MatrixXd powers(n_cores, n_samples);
  for (int c = 0; c < n_cores; ++c) {
    WorkloadSpec ws;
    ws.kind = WorkloadKind::prbs;
    ws.duration = n_samples;
    ws.prbs_hold = prbs_hold;
    ws.virus_w = virus_w;
    powers.row(c) = gen_workload(ws, 1, rng.next_seed());
  }
  SynthConfig cfg;
  cfg.quant_step = quant;
  cfg.metric_jitter = 0.0;
  cfg.pkg_noise_w = 0.0;
  o.ds = simulate(o.truth, powers, cfg, seed * 13 + 5);
  o.window.frame = o.ds.frame;
  o.window.node_id = o.ds.frame.node_id;
  o.powers.uncore = o.ds.true_powers.row(0).transpose();
  o.powers.per_core = o.ds.true_powers.bottomRows(n_cores);
  return o;
}

double max_rel_coef_err(const ArxModel& m, const CoreThermalTruth& truth) {
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    worst = std::max(worst,
                     std::abs(m.a(i) - truth.a(i)) / std::abs(truth.a(i)));
  for (Eigen::Index k = 0; k < truth.b.rows(); ++k)
    for (int i = 0; i < 2; ++i)
      worst = std::max(worst, std::abs(m.b(k, i) - truth.b(k, i)) /
                                  std::abs(truth.b(k, i)));
  return worst;
}

}  // namespace

TEST_SUITE("arx_ident") {

TEST_CASE("regressor dimensions follow the lag layout") {
  const Oracle o = make_oracle(8, 600, 0.0, 0.0, 2);
  const RegressorSet reg = build_regressors(o.window, o.powers, 0, 2, 4);
  CHECK(reg.phi.rows() == 1 + 2 + 9 * 2);  // 21 rows for n=2, Nc=8
  CHECK(reg.phi.cols() == 600 - 2);
  CHECK(reg.phi_q.rows() == 9 * 4);  // 36 instrumental rows >= 20 unknowns
  CHECK(reg.phi_q.cols() == 600 - 2 - 4);
}

TEST_CASE("window too short is a data error") {
  const Oracle o = make_oracle(2, 600, 0.0, 0.0, 3);
  Window tiny = o.window;
  tiny.frame = o.window.frame.slice(0, 6);
  CHECK_THROWS_AS(
      static_cast<void>(build_regressors(tiny, o.powers.slice(0, 6), 0, 2, 4)),
      DataError);
}

TEST_CASE("instrument budget below the unknown count is rejected") {
  const Oracle o = make_oracle(2, 600, 0.0, 0.0, 4);
  // (Nc+1) q = 3 < (Nc+2) n = 8
  CHECK_THROWS_AS(
      static_cast<void>(build_regressors(o.window, o.powers, 0, 2, 1)),
      ConfigError);
}

TEST_CASE("sample covariance is symmetric and consistent") {
  const Oracle o = make_oracle(3, 4000, 1.0, 0.0, 5);
  const RegressorSet reg = build_regressors(o.window, o.powers, 0, 2, 8);
  const CovarianceEstimates cov = sample_covariances(reg);
  CHECK((cov.sigma_hat - cov.sigma_hat.transpose()).cwiseAbs().maxCoeff() <=
        1e-12 * cov.sigma_hat.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.sigma_hat);
  CHECK(es.eigenvalues().minCoeff() >=
        -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());
  CHECK(cov.cond_r >= 1.0);
  CHECK(cov.min_sv_r > 0.0);
}

TEST_CASE("white-noise regressors give a near-diagonal covariance") {
  // Monte Carlo with a known generator: all signals iid, so off-diagonal
  // entries shrink like 1/sqrt(N).
  Rng rng(99);
  const Eigen::Index n = 20000;
  TelemetryFrame f;
  f.sample_period = 2.0;
  f.timestamps = Eigen::VectorXd::LinSpaced(n, 0.0, 2.0 * double(n - 1));
  f.core_freq_c0.resize(1, n);
  f.core_temps.resize(1, n);
  f.pkg_freq_c0.resize(n);
  f.idle_frac_pkg.resize(n);
  f.pkg_power.resize(n);
  PartialPowers pp;
  pp.uncore.resize(n);
  pp.per_core.resize(1, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    f.core_freq_c0(0, t) = 0.5;
    f.core_temps(0, t) = rng.normal(50.0, 1.0);
    f.pkg_freq_c0(t) = 0.5;
    f.idle_frac_pkg(t) = 0.1;
    f.pkg_power(t) = 30.0;
    pp.uncore(t) = rng.normal(10.0, 1.0);
    pp.per_core(0, t) = rng.normal(8.0, 1.0);
  }
  Window w;
  w.frame = f;
  const RegressorSet reg = build_regressors(w, pp, 0, 2, 4);
  const CovarianceEstimates cov = sample_covariances(reg);
  const Eigen::MatrixXd off =
      cov.sigma_hat - cov.sigma_hat.diagonal().asDiagonal().toDenseMatrix();
  CHECK(off.cwiseAbs().maxCoeff() <= 6.0 / std::sqrt(double(n)));
}

TEST_CASE("duplicated power input collapses the smallest singular value") {
  Oracle o = make_oracle(2, 3000, 0.0, 0.0, 6);
  PartialPowers dup = o.powers;
  dup.per_core.row(1) = dup.per_core.row(0);
  const RegressorSet reg = build_regressors(o.window, dup, 0, 2, 4);
  const CovarianceEstimates cov = sample_covariances(reg);
  const double max_sv = cov.min_sv_r * cov.cond_r;
  CHECK(cov.min_sv_r <= 1e-8 * max_sv);
}

TEST_CASE("constant power raises ExcitationDeficient") {
  Oracle o = make_oracle(2, 2000, 1.0, 0.0, 7);
  PartialPowers flat;
  flat.uncore = Eigen::VectorXd::Constant(2000, 9.0);
  flat.per_core = Eigen::MatrixXd::Constant(2, 2000, 6.0);
  const RegressorSet reg = build_regressors(o.window, flat, 0, 2, 4);
  const CovarianceEstimates cov = sample_covariances(reg);
  CHECK_THROWS_AS(static_cast<void>(solve_theta(cov)), ExcitationDeficient);
  CHECK_THROWS_AS(
      static_cast<void>(identify(o.window, flat, 0, 2, 4)),
      ExcitationDeficient);
}

TEST_CASE("constant power has a far larger condition number than prbs") {
  const Oracle o = make_oracle(2, 4000, 1.0, 0.0, 8);
  const CovarianceEstimates prbs_cov =
      sample_covariances(build_regressors(o.window, o.powers, 0, 2, 8));
  PartialPowers flatish = o.powers;
  // Tiny jitter stands in for counter noise so the solve stays finite.
  Rng rng(123);
  for (Eigen::Index t = 0; t < flatish.n_samples(); ++t) {
    flatish.uncore(t) = 9.0 + rng.normal(0.0, 0.001);
    for (int c = 0; c < 2; ++c)
      flatish.per_core(c, t) = 6.0 + rng.normal(0.0, 0.001);
  }
  const CovarianceEstimates flat_cov =
      sample_covariances(build_regressors(o.window, flatish, 0, 2, 8));
  CHECK(flat_cov.cond_r >= 100.0 * prbs_cov.cond_r);
}

TEST_CASE("noise-free identification is exact to machine levels") {
  const Oracle o = make_oracle(4, 12000, 0.0, 0.0, 9);
  for (int core = 0; core < 2; ++core) {
    const auto [model, diag] = identify(o.window, o.powers, core, 2, 32);
    CHECK(max_rel_coef_err(model, o.truth.cores[std::size_t(core)]) <= 1e-6);
    CHECK(model.sigma_v2 <= 1e-8);
    CHECK(model.sigma_w2 <= 1e-8);
  }
}

TEST_CASE("quantization-only data recovers a within 5 percent") {
  const Oracle o = make_oracle(4, 21600, 1.0, 0.0, 10);
  const auto [model, diag] = identify(o.window, o.powers, 0, 2, 32);
  const auto& tc = o.truth.cores[0];
  CHECK(std::abs(model.a(0) - tc.a(0)) / std::abs(tc.a(0)) <= 0.05);
  CHECK(std::abs(model.a(1) - tc.a(1)) / std::abs(tc.a(1)) <= 0.05);
}

TEST_CASE("quantization-only noise variance sits near one twelfth") {
  int in_band = 0;
  for (std::uint64_t seed : {11, 12, 13}) {
    const Oracle o = make_oracle(4, 21600, 1.0, 0.0, seed, 12.0, 25.0);
    const auto [model, diag] = identify(o.window, o.powers, 0, 2, 32);
    if (model.sigma_v2 >= 0.04 && model.sigma_v2 <= 0.17) ++in_band;
  }
  CHECK(in_band >= 2);
}

TEST_CASE("injected process noise is recovered, measurement noise stays low") {
  // sigma_w^2 = 0.25 with no measurement noise; faster poles keep the
  // noise-driven wander bounded.
  int sw_ok = 0, sv_ok = 0;
  for (std::uint64_t seed : {14, 15, 16}) {
    const Oracle o =
        make_oracle(4, 21600, 0.0, 0.25, seed, 12.0, 25.0, 0.72, 0.90);
    const auto [model, diag] = identify(o.window, o.powers, 0, 2, 32);
    if (std::abs(model.sigma_w2 - 0.25) / 0.25 <= 0.2) ++sw_ok;
    if (model.sigma_v2 <= 0.02) ++sv_ok;
  }
  CHECK(sw_ok >= 2);
  CHECK(sv_ok >= 3);
}

TEST_CASE("identified poles land near the truth") {
  const Oracle o = make_oracle(4, 21600, 1.0, 0.0, 17);
  const auto [model, diag] = identify(o.window, o.powers, 1, 2, 32);
  const auto true_poles = arx_poles(o.truth.cores[1].a);
  REQUIRE(diag.poles.size() == 2);  // n = 2 gives exactly two poles
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(diag.poles[i].imag()) <= 1e-9);
    CHECK(std::abs(diag.poles[i].real() - true_poles[i].real()) <= 0.02);
  }
}

TEST_CASE("solve residual shrinks as the window grows") {
  // Consistency: || sigma_q_hat * theta_bar_true || roughly halves when N
  // quadruples. White process noise keeps the residual purely statistical.
  double norms[2];
  Eigen::Index lens[2] = {4000, 16000};
  for (int i = 0; i < 2; ++i) {
    const Oracle o = make_oracle(2, lens[i], 0.0, 0.09, 18);
    const RegressorSet reg = build_regressors(o.window, o.powers, 0, 2, 8);
    const CovarianceEstimates cov = sample_covariances(reg);
    const auto& tc = o.truth.cores[0];
    Eigen::VectorXd theta_bar(1 + 2 + 3 * 2);
    theta_bar(0) = 1.0;
    theta_bar.segment(1, 2) = tc.a;
    for (int k = 0; k < 3; ++k)
      theta_bar.segment(3 + 2 * k, 2) = tc.b.row(k).transpose();
    norms[i] = (cov.sigma_q_hat * theta_bar).norm();
  }
  CHECK(norms[1] <= 1.5 * 0.5 * norms[0]);
}

TEST_CASE("input scaling moves b inversely and leaves poles alone") {
  const Oracle o = make_oracle(3, 8000, 0.0, 0.0, 19);
  const auto [m1, d1] = identify(o.window, o.powers, 0, 2, 16);
  PartialPowers scaled = o.powers;
  const double c = 3.0;
  scaled.uncore *= c;
  scaled.per_core *= c;
  const auto [m2, d2] = identify(o.window, scaled, 0, 2, 16);
  CHECK((m2.a - m1.a).cwiseAbs().maxCoeff() <= 1e-8 * m1.a.cwiseAbs().maxCoeff());
  CHECK((m2.b * c - m1.b).cwiseAbs().maxCoeff() <=
        1e-8 * m1.b.cwiseAbs().maxCoeff());
  for (std::size_t i = 0; i < d1.poles.size(); ++i)
    CHECK(std::abs(d1.poles[i] - d2.poles[i]) <= 1e-8);
}

TEST_CASE("theta packing round-trips through the model") {
  const Oracle o = make_oracle(2, 5000, 0.0, 0.0, 20);
  const auto [model, diag] = identify(o.window, o.powers, 0, 2, 8);
  const Eigen::VectorXd tb = model.theta_bar();
  CHECK(tb(0) == 1.0);
  CHECK(tb(1) == model.a(0));
  CHECK(tb(2) == model.a(1));
  CHECK(tb(3) == model.b(0, 0));   // uncore lag 1
  CHECK(tb(4) == model.b(0, 1));   // uncore lag 2
  CHECK(tb(5) == model.b(1, 0));   // core 0 lag 1
  CHECK(tb(tb.size() - 1) == model.b(2, 1));
}

TEST_CASE("residual autocorrelations are normalized") {
  const Oracle o = make_oracle(2, 9000, 1.0, 0.01, 21);
  const auto [model, diag] = identify(o.window, o.powers, 0, 2, 16);
  for (double rho : diag.residual_autocorr) {
    CHECK(rho <= 1.0);
    CHECK(rho >= -1.0);
  }
}

TEST_CASE("variance estimates clamp at zero with a flag") {
  CovarianceEstimates cov;
  cov.n = 2;
  cov.q = 4;
  cov.n_cores = 1;
  cov.sigma_hat = Eigen::MatrixXd::Identity(7, 7);
  // Row 0 forced negative through the first column.
  cov.sigma_hat(0, 0) = -1.0;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(6);
  theta(0) = -1.5;
  theta(1) = 0.6;
  const NoiseEstimate est = estimate_noise_variances(cov, theta);
  CHECK(est.sigma_w2 >= 0.0);
  CHECK(est.sigma_v2 >= 0.0);
  CHECK(est.clamped);
}

TEST_CASE("vanishing AR part flags the variance split as impossible") {
  CovarianceEstimates cov;
  cov.n = 2;
  cov.q = 4;
  cov.n_cores = 1;
  cov.sigma_hat = Eigen::MatrixXd::Identity(7, 7);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(6);
  const NoiseEstimate est = estimate_noise_variances(cov, theta);
  CHECK_FALSE(est.separable);
}

}  // TEST_SUITE
