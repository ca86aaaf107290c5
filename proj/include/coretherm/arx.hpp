#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <vector>

#include "coretherm/power_model.hpp"
#include "coretherm/telemetry.hpp"

namespace coretherm {

// MISO ARX model with additive output noise for one core:
//
//   Tbar(t) + sum_i a_i Tbar(t-i) = sum_k sum_i b_ki P_k(t-i) + w(t)
//   T(t) = Tbar(t) + v(t)
//
// Inputs are the uncore power (k = 0) and the per-core powers (k = 1..Nc).
// The coefficient vector packs as theta_bar = [1, a_1..a_n,
// b_01..b_0n, ..., b_Nc1..b_Ncn].
//
// Signals are demeaned per identification window, which absorbs the ambient
// temperature exactly. The window means are kept so the one-step predictor
// can run on raw signals.
struct ArxModel {
  int order_n = 2;
  int n_cores = 0;
  Eigen::VectorXd a;             // n
  Eigen::MatrixXd b;             // (n_cores + 1) x n, row 0 = uncore
  double sigma_w2 = 0.0;         // process-noise variance
  double sigma_v2 = 0.0;         // measurement-noise variance
  bool variance_clamped = false;   // a variance estimate went negative
  bool variance_separable = true;  // false when all a_i ~ 0

  double temp_mean = 0.0;        // identification-window means
  Eigen::VectorXd power_means;   // n_cores + 1

  Eigen::VectorXd theta_bar() const;
  std::vector<std::complex<double>> poles() const;
};

// Stacked regressor columns for one window.
//   phi(t)   = [-T(t) .. -T(t-n), P_0(t-1)..P_0(t-n), ..., P_Nc(t-1)..P_Nc(t-n)]
//   phi_q(t) = [P_0(t-1)..P_0(t-q), ..., P_Nc(t-1)..P_Nc(t-q)]
struct RegressorSet {
  Eigen::MatrixXd phi;    // (1 + n + (Nc+1) n) x (N - n)
  Eigen::MatrixXd phi_q;  // ((Nc+1) q) x (N - n - q)
  int n = 2;
  int q = 4;
  int n_cores = 0;
  Eigen::Index n_samples = 0;
  double temp_mean = 0.0;
  Eigen::VectorXd power_means;

  int phi_dim() const { return 1 + n + (n_cores + 1) * n; }
};

struct CovarianceEstimates {
  Eigen::MatrixXd sigma_hat;    // phi_dim x phi_dim, symmetric
  Eigen::MatrixXd sigma_q_hat;  // (Nc+1) q x phi_dim
  Eigen::MatrixXd r_hat;        // [sigma_hat; sigma_q_hat]
  double cond_r = 0.0;          // max / min singular value of r_hat
  double min_sv_r = 0.0;
  int n = 2;
  int q = 4;
  int n_cores = 0;
  double temp_mean = 0.0;
  Eigen::VectorXd power_means;
};

struct NoiseEstimate {
  double sigma_v2 = 0.0;
  double sigma_w2 = 0.0;
  bool clamped = false;    // a negative estimate was clipped to zero
  bool separable = true;   // false when all a_i ~ 0
};

struct IdentDiagnostics {
  std::vector<std::complex<double>> poles;
  std::array<double, 4> residual_autocorr{};  // lags 1..4, normalized
  double cond_r = 0.0;
  double min_sv_r = 0.0;
  double sigma_w = 0.0;
  double sigma_v = 0.0;
};

struct IdentOptions {
  // Relative singular-value cutoff for rank decisions in the theta solve.
  double rank_tol = 1e-10;
};

// Demeans the window's target temperature and every input power, then
// assembles the regressor columns.
RegressorSet build_regressors(const Window& window, const PartialPowers& powers,
                              int core_id, int n, int q);

// Normalized outer-product sums; one SVD of the stacked matrix yields the
// condition number and minimum singular value.
CovarianceEstimates sample_covariances(const RegressorSet& reg);

// With theta_bar = [1; theta], the instrumental equations read
// sigma_q_hat[:,0] + sigma_q_hat[:,1:] theta = 0; returns the least-squares
// theta ((Nc+2) n entries). Raises ExcitationDeficient when the coefficient
// block is numerically rank deficient.
Eigen::VectorXd solve_theta(const CovarianceEstimates& cov,
                            const IdentOptions& opts = {});

// Joint bias-compensated pass over both covariance systems: the temperature
// rows of sigma_hat enter with their diagonal noise term sigma_v^2 removed,
// stacked with the instrumental rows, and the noise variances are re-fit
// until the fixed point. Started from the pure instrumental solution, this
// uses the full covariance information instead of the power lags alone.
Eigen::VectorXd bias_compensated_solve(const CovarianceEstimates& cov,
                                       const Eigen::VectorXd& theta0,
                                       const IdentOptions& opts = {});

// Residual r = sigma_hat * theta_bar satisfies r_0 = sigma_v^2 + sigma_w^2
// and r_i = sigma_v^2 a_i for i = 1..n; both variances are backed out and
// clipped at zero.
NoiseEstimate estimate_noise_variances(const CovarianceEstimates& cov,
                                       const Eigen::VectorXd& theta);

std::pair<ArxModel, IdentDiagnostics> identify(const Window& window,
                                               const PartialPowers& powers,
                                               int core_id, int n, int q,
                                               const IdentOptions& opts = {});

// Companion-matrix eigenvalues of an AR coefficient vector.
std::vector<std::complex<double>> arx_poles(const Eigen::VectorXd& a);

}  // namespace coretherm
