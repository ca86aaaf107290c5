#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "coretherm/arx.hpp"

namespace coretherm {

// Observer-canonical state space of an ArxModel:
//   x(t+1) = A x(t) + B u(t) + G w(t+1)
//   T(t)   = C x(t) + v(t)
// with A the companion matrix (first column -a, superdiagonal ones),
// B(i-1, k) = b_ki, C = [1 0 .. 0], G = C'. The filter runs in deviation
// coordinates around the identification-window means, which stands in for
// the ambient offset.
struct StateSpace {
  Eigen::MatrixXd A;     // n x n
  Eigen::MatrixXd B;     // n x (Nc + 1)
  Eigen::RowVectorXd C;  // 1 x n
  Eigen::VectorXd G;     // n
  Eigen::MatrixXd Q;     // sigma_w^2 G G'
  double R = 0.0;        // sigma_v^2
  double temp_mean = 0.0;
  Eigen::VectorXd power_means;

  int order() const { return static_cast<int>(A.rows()); }
  int n_inputs() const { return static_cast<int>(B.cols()); }
};

struct PredictionResult {
  Eigen::VectorXd predicted;    // T_hat(t | t-1), degC; index 0 is the init
  Eigen::VectorXd innovations;  // measured - predicted, exact
  double mean_abs_error = 0.0;  // degC, burn-in excluded
  double error_std = 0.0;       // degC, burn-in excluded
  Eigen::Index scored_samples = 0;
};

struct KalmanOptions {
  Eigen::Index burn_in = 60;  // innovations excluded from the statistics
  double r_floor = 1e-6;      // keeps the update nonsingular at sigma_v2 = 0
  // Floor on the process-noise variance. A sigma_w2 estimate clamped to
  // zero would otherwise drive the gain to zero and leave the predictor
  // running open loop on its model errors.
  double q_floor = 3e-4;
  double p0 = 10.0;           // initial covariance scale
  Eigen::Index psd_check_every = 1024;
};

StateSpace build_state_space(const ArxModel& model);

// One-step predictor with Joseph-form covariance updates. The state starts
// at [T(0), 0, ...] (in deviations) with P = p0 I; predicted(0) therefore
// equals the first measurement and innovation 0 is zero.
PredictionResult run_kalman(const StateSpace& ss, const PartialPowers& powers,
                            const Eigen::VectorXd& temps,
                            const KalmanOptions& opts = {});

// Innovation statistics concatenated across evaluation windows, with the
// filter re-initialized per window. Returns (mean_abs_error, error_std).
std::pair<double, double> score_model(const ArxModel& model,
                                      std::span<const Window> eval_windows,
                                      std::span<const PartialPowers> powers,
                                      int core_id,
                                      const KalmanOptions& opts = {});

}  // namespace coretherm
