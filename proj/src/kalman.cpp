#include "coretherm/kalman.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace coretherm {

StateSpace build_state_space(const ArxModel& model) {
  const int n = model.order_n;
  StateSpace ss;
  ss.A = Eigen::MatrixXd::Zero(n, n);
  ss.A.col(0) = -model.a;
  for (int i = 0; i + 1 < n; ++i) ss.A(i, i + 1) = 1.0;
  ss.B = model.b.transpose();  // row i-1 holds b_{k,i} across inputs k
  ss.C = Eigen::RowVectorXd::Zero(n);
  ss.C(0) = 1.0;
  ss.G = ss.C.transpose();
  ss.Q = model.sigma_w2 * (ss.G * ss.G.transpose());
  ss.R = model.sigma_v2;
  ss.temp_mean = model.temp_mean;
  ss.power_means = model.power_means;
  if (ss.power_means.size() == 0)
    ss.power_means = Eigen::VectorXd::Zero(model.n_cores + 1);
  return ss;
}

namespace {

void psd_check(const Eigen::MatrixXd& p, Eigen::Index step) {
  if (!p.allFinite())
    throw NumericalError("kalman: covariance non-finite at step " +
                         std::to_string(step));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw NumericalError("kalman: covariance lost positivity at step " +
                         std::to_string(step));
}

}  // namespace

PredictionResult run_kalman(const StateSpace& ss, const PartialPowers& powers,
                            const Eigen::VectorXd& temps,
                            const KalmanOptions& opts) {
  const Eigen::Index N = temps.size();
  if (N < 2) throw DataError("run_kalman: need at least 2 samples");
  if (powers.n_samples() != N)
    throw DataError("run_kalman: powers not aligned to temperatures");
  if (powers.n_cores() + 1 != ss.n_inputs())
    throw DataError("run_kalman: input count mismatch");
  if (!temps.allFinite()) throw DataError("run_kalman: non-finite temperature");

  const int n = ss.order();
  const double r = std::max(ss.R, opts.r_floor);
  Eigen::MatrixXd q_eff = ss.Q;
  if (q_eff(0, 0) < opts.q_floor)
    q_eff += (opts.q_floor - q_eff(0, 0)) * (ss.G * ss.G.transpose());

  // Deviation coordinates around the identification-window means.
  Eigen::MatrixXd u = powers.input_matrix();
  for (int k = 0; k < ss.n_inputs(); ++k) u.row(k).array() -= ss.power_means(k);

  PredictionResult res;
  res.predicted.resize(N);
  res.innovations.resize(N);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  x(0) = temps(0) - ss.temp_mean;
  Eigen::MatrixXd p = opts.p0 * Eigen::MatrixXd::Identity(n, n);

  res.predicted(0) = ss.temp_mean + x(0);
  res.innovations(0) = temps(0) - res.predicted(0);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x_pred(n);
  Eigen::MatrixXd p_pred(n, n), ikc(n, n);

  for (Eigen::Index t = 1; t < N; ++t) {
    // Predict with u(t-1), record before updating on T(t).
    x_pred.noalias() = ss.A * x;
    x_pred.noalias() += ss.B * u.col(t - 1);
    p_pred.noalias() = ss.A * p * ss.A.transpose();
    p_pred += q_eff;

    res.predicted(t) = ss.temp_mean + x_pred(0);
    const double innov = temps(t) - res.predicted(t);
    res.innovations(t) = innov;

    const double s = p_pred(0, 0) + r;  // C p C' with C = e_1'
    if (!(s > 0.0) || !std::isfinite(s))
      throw NumericalError("kalman: innovation variance invalid at step " +
                           std::to_string(t));
    const Eigen::VectorXd gain = p_pred.col(0) / s;

    x = x_pred + gain * innov;
    ikc = eye;
    ikc.col(0) -= gain;  // I - K C
    p.noalias() = ikc * p_pred * ikc.transpose();
    p.noalias() += (r * gain) * gain.transpose();
    p = 0.5 * (p + p.transpose());

    if (opts.psd_check_every > 0 && t % opts.psd_check_every == 0)
      psd_check(p, t);
  }
  psd_check(p, N - 1);

  const Eigen::Index start = std::min<Eigen::Index>(
      std::max<Eigen::Index>(opts.burn_in, 1), N - 1);
  const auto scored = res.innovations.segment(start, N - start);
  res.scored_samples = scored.size();
  res.mean_abs_error = scored.array().abs().mean();
  const double mean = scored.mean();
  res.error_std = std::sqrt((scored.array() - mean).square().sum() /
                            static_cast<double>(scored.size()));
  return res;
}

std::pair<double, double> score_model(const ArxModel& model,
                                      std::span<const Window> eval_windows,
                                      std::span<const PartialPowers> powers,
                                      int core_id,
                                      const KalmanOptions& opts) {
  if (eval_windows.empty())
    throw DataError("score_model: no evaluation windows");
  if (powers.size() != eval_windows.size())
    throw DataError("score_model: powers/windows count mismatch");

  const StateSpace ss = build_state_space(model);
  double abs_sum = 0.0, sum = 0.0, sq_sum = 0.0;
  Eigen::Index count = 0;
  for (std::size_t i = 0; i < eval_windows.size(); ++i) {
    const Eigen::VectorXd temps =
        eval_windows[i].frame.core_temps.row(core_id).transpose();
    const PredictionResult r = run_kalman(ss, powers[i], temps, opts);
    const Eigen::Index start = std::min<Eigen::Index>(
        std::max<Eigen::Index>(opts.burn_in, 1), temps.size() - 1);
    const auto scored = r.innovations.segment(start, temps.size() - start);
    abs_sum += scored.array().abs().sum();
    sum += scored.sum();
    sq_sum += scored.squaredNorm();
    count += scored.size();
  }
  const double mean_abs = abs_sum / static_cast<double>(count);
  const double mean = sum / static_cast<double>(count);
  const double var = sq_sum / static_cast<double>(count) - mean * mean;
  return {mean_abs, std::sqrt(std::max(var, 0.0))};
}

}  // namespace coretherm
