#include "coretherm/arx.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace coretherm {

Eigen::VectorXd ArxModel::theta_bar() const {
  Eigen::VectorXd th(1 + order_n + (n_cores + 1) * order_n);
  th(0) = 1.0;
  th.segment(1, order_n) = a;
  for (int k = 0; k <= n_cores; ++k)
    th.segment(1 + order_n + k * order_n, order_n) = b.row(k).transpose();
  return th;
}

std::vector<std::complex<double>> ArxModel::poles() const {
  return arx_poles(a);
}

std::vector<std::complex<double>> arx_poles(const Eigen::VectorXd& a) {
  const int n = static_cast<int>(a.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  companion.col(0) = -a;
  for (int i = 0; i + 1 < n; ++i) companion(i, i + 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> poles(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) poles[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  // Deterministic ordering: descending real part, then descending imaginary.
  std::sort(poles.begin(), poles.end(), [](const auto& x, const auto& y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  return poles;
}

RegressorSet build_regressors(const Window& window, const PartialPowers& powers,
                              int core_id, int n, int q) {
  if (n < 1 || q < 1) throw ConfigError("build_regressors: n and q must be >= 1");
  const TelemetryFrame& f = window.frame;
  const Eigen::Index N = f.n_samples();
  const int nc = f.n_cores();
  if (core_id < 0 || core_id >= nc)
    throw ConfigError("build_regressors: core_id out of range");
  if (powers.n_samples() != N || powers.n_cores() != nc)
    throw DataError("build_regressors: powers not aligned to window");
  if (N <= n + q + 1)
    throw DataError("build_regressors: window too short (" +
                    std::to_string(N) + " samples, need > " +
                    std::to_string(n + q + 1) + ")");
  // Enough instrumental equations for the unknown coefficients.
  if ((nc + 1) * q < (nc + 2) * n)
    throw ConfigError("build_regressors: (Nc+1) q must be >= (Nc+2) n");

  const Eigen::VectorXd temp = f.core_temps.row(core_id).transpose();
  const Eigen::MatrixXd u = powers.input_matrix();  // (nc+1) x N

  RegressorSet reg;
  reg.n = n;
  reg.q = q;
  reg.n_cores = nc;
  reg.n_samples = N;
  // Window means anchor the one-step predictor's ambient offset later on.
  reg.temp_mean = temp.mean();
  reg.power_means.resize(nc + 1);
  for (int k = 0; k <= nc; ++k) reg.power_means(k) = u.row(k).mean();

  const int dim = reg.phi_dim();
  reg.phi.resize(dim, N - n);
  for (Eigen::Index t = n; t < N; ++t) {
    const Eigen::Index col = t - n;
    for (int i = 0; i <= n; ++i) reg.phi(i, col) = -temp(t - i);
    for (int k = 0; k <= nc; ++k)
      for (int i = 1; i <= n; ++i)
        reg.phi(1 + n + k * n + (i - 1), col) = u(k, t - i);
  }

  reg.phi_q.resize((nc + 1) * q, N - n - q);
  for (Eigen::Index t = n + q; t < N; ++t) {
    const Eigen::Index col = t - n - q;
    for (int k = 0; k <= nc; ++k)
      for (int i = 1; i <= q; ++i)
        reg.phi_q(k * q + (i - 1), col) = u(k, t - i);
  }

  // Center every regressor row on its own sample mean. This removes the
  // ambient temperature term from the difference equation exactly (the
  // constant is the same in every column), which plain per-signal
  // demeaning only achieves up to O(1/N) edge effects.
  const Eigen::VectorXd phi_row_means = reg.phi.rowwise().mean();
  const Eigen::VectorXd phi_q_row_means = reg.phi_q.rowwise().mean();
  reg.phi.colwise() -= phi_row_means;
  reg.phi_q.colwise() -= phi_q_row_means;
  return reg;
}

CovarianceEstimates sample_covariances(const RegressorSet& reg) {
  if (!reg.phi.allFinite() || !reg.phi_q.allFinite())
    throw DataError("sample_covariances: non-finite regressor entries");

  const Eigen::Index N = reg.n_samples;
  CovarianceEstimates cov;
  cov.n = reg.n;
  cov.q = reg.q;
  cov.n_cores = reg.n_cores;
  cov.temp_mean = reg.temp_mean;
  cov.power_means = reg.power_means;

  cov.sigma_hat = (reg.phi * reg.phi.transpose()) /
                  static_cast<double>(N - reg.n);
  // phi_q(t) pairs with phi(t) for t past both lag horizons, i.e. the last
  // N - n - q phi columns.
  cov.sigma_q_hat = (reg.phi_q *
                     reg.phi.rightCols(N - reg.n - reg.q).transpose()) /
                    static_cast<double>(N - reg.q);

  cov.r_hat.resize(cov.sigma_hat.rows() + cov.sigma_q_hat.rows(),
                   cov.sigma_hat.cols());
  cov.r_hat.topRows(cov.sigma_hat.rows()) = cov.sigma_hat;
  cov.r_hat.bottomRows(cov.sigma_q_hat.rows()) = cov.sigma_q_hat;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov.r_hat);
  const auto& sv = svd.singularValues();
  const double max_sv = sv.size() ? sv(0) : 0.0;
  cov.min_sv_r = sv.size() ? sv(sv.size() - 1) : 0.0;
  cov.cond_r = (cov.min_sv_r > 0.0)
                   ? max_sv / cov.min_sv_r
                   : std::numeric_limits<double>::infinity();
  return cov;
}

Eigen::VectorXd solve_theta(const CovarianceEstimates& cov,
                            const IdentOptions& opts) {
  const int unknowns = (cov.n_cores + 2) * cov.n;
  const Eigen::MatrixXd lhs = cov.sigma_q_hat.rightCols(unknowns);
  const Eigen::VectorXd rhs = -cov.sigma_q_hat.col(0);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(lhs, Eigen::ComputeThinU |
                                                 Eigen::ComputeThinV);
  svd.setThreshold(opts.rank_tol);
  if (svd.rank() < unknowns)
    throw ExcitationDeficient(
        "solve_theta: instrumental covariance numerically rank deficient (" +
            std::to_string(svd.rank()) + " of " + std::to_string(unknowns) +
            ")",
        cov.cond_r);
  return svd.solve(rhs);
}

Eigen::VectorXd bias_compensated_solve(const CovarianceEstimates& cov,
                                       const Eigen::VectorXd& theta0,
                                       const IdentOptions& opts) {
  const int n = cov.n;
  const int unknowns = (cov.n_cores + 2) * n;
  const Eigen::Index dim = cov.sigma_hat.rows();
  const Eigen::Index q_rows = cov.sigma_q_hat.rows();

  // Stacked system: sigma_hat rows 1..dim-1 (row 0 belongs to the
  // sigma_w^2 budget) over the instrumental rows.
  Eigen::MatrixXd lhs(dim - 1 + q_rows, unknowns);
  Eigen::VectorXd rhs(dim - 1 + q_rows);
  lhs.topRows(dim - 1) = cov.sigma_hat.bottomRows(dim - 1).rightCols(unknowns);
  rhs.head(dim - 1) = -cov.sigma_hat.bottomRows(dim - 1).col(0);
  lhs.bottomRows(q_rows) = cov.sigma_q_hat.rightCols(unknowns);
  rhs.tail(q_rows) = -cov.sigma_q_hat.col(0);

  Eigen::VectorXd theta = theta0;
  double sigma_v2 = estimate_noise_variances(cov, theta).sigma_v2;
  Eigen::MatrixXd work = lhs;
  for (int iter = 0; iter < 50; ++iter) {
    work = lhs;
    // Temperature rows i = 1..n of Eq. (5) read sigma_hat[i,:] theta_bar =
    // sigma_v^2 a_i; moving the right side into the system subtracts
    // sigma_v^2 from the lag-i diagonal.
    for (int i = 0; i < n; ++i) work(i, i) -= sigma_v2;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(work, Eigen::ComputeThinU |
                                                    Eigen::ComputeThinV);
    svd.setThreshold(opts.rank_tol);
    if (svd.rank() < unknowns)
      throw ExcitationDeficient(
          "bias_compensated_solve: stacked covariance rank deficient",
          cov.cond_r);
    theta = svd.solve(rhs);
    const double next = estimate_noise_variances(cov, theta).sigma_v2;
    const bool converged = std::abs(next - sigma_v2) <=
                           1e-10 * std::max(1.0, std::abs(sigma_v2));
    sigma_v2 = next;
    if (converged) break;
  }
  return theta;
}

NoiseEstimate estimate_noise_variances(const CovarianceEstimates& cov,
                                       const Eigen::VectorXd& theta) {
  const int n = cov.n;
  Eigen::VectorXd theta_bar(theta.size() + 1);
  theta_bar(0) = 1.0;
  theta_bar.tail(theta.size()) = theta;

  const Eigen::VectorXd r = cov.sigma_hat * theta_bar;
  const Eigen::VectorXd a = theta.head(n);

  NoiseEstimate est;
  const double a_norm2 = a.squaredNorm();
  if (a_norm2 < 1e-18) {
    // All AR coefficients vanish: rows 1..n of the residual carry no
    // information about sigma_v^2 and the split is undefined.
    est.separable = false;
    est.sigma_v2 = 0.0;
    est.sigma_w2 = std::max(r(0), 0.0);
    est.clamped = r(0) < 0.0;
    return est;
  }

  double sv2 = a.dot(r.segment(1, n)) / a_norm2;
  if (sv2 < 0.0) {
    sv2 = 0.0;
    est.clamped = true;
  }
  double sw2 = r(0) - sv2;
  if (sw2 < 0.0) {
    sw2 = 0.0;
    est.clamped = true;
  }
  est.sigma_v2 = sv2;
  est.sigma_w2 = sw2;
  return est;
}

namespace {

// Equation residual e(t) = T(t) + sum a_i T(t-i) - sum_k sum_i b_ki P_k(t-i)
// over the demeaned window, and its first four normalized autocorrelations.
std::array<double, 4> residual_autocorr(const RegressorSet& reg,
                                        const Eigen::VectorXd& theta_bar) {
  // phi(t)' theta_bar = -(T + sum a T) + sum sum b P = -e(t).
  const Eigen::VectorXd e = -(reg.phi.transpose() * theta_bar);
  const Eigen::Index m = e.size();
  const double mean = e.mean();
  const Eigen::VectorXd ec = e.array() - mean;
  const double denom = ec.squaredNorm();
  std::array<double, 4> rho{};
  if (denom <= 0.0) return rho;
  for (int k = 1; k <= 4 && k < m; ++k)
    rho[static_cast<std::size_t>(k - 1)] =
        ec.head(m - k).dot(ec.tail(m - k)) / denom;
  return rho;
}

}  // namespace

std::pair<ArxModel, IdentDiagnostics> identify(const Window& window,
                                               const PartialPowers& powers,
                                               int core_id, int n, int q,
                                               const IdentOptions& opts) {
  const RegressorSet reg = build_regressors(window, powers, core_id, n, q);
  const CovarianceEstimates cov = sample_covariances(reg);
  // Coefficients come from the instrumental equations alone (noise-bias
  // free). The noise variances need a sharper theta than the instruments
  // deliver, so the variance bookkeeping runs through the bias-compensated
  // refinement; the refined coefficients are not what the model reports.
  const Eigen::VectorXd theta = solve_theta(cov, opts);
  const Eigen::VectorXd theta_refined =
      bias_compensated_solve(cov, theta, opts);
  const NoiseEstimate noise = estimate_noise_variances(cov, theta_refined);

  ArxModel model;
  model.order_n = n;
  model.n_cores = reg.n_cores;
  model.a = theta.head(n);
  model.b.resize(reg.n_cores + 1, n);
  for (int k = 0; k <= reg.n_cores; ++k)
    model.b.row(k) = theta.segment(n + k * n, n).transpose();
  model.sigma_w2 = noise.sigma_w2;
  model.sigma_v2 = noise.sigma_v2;
  model.variance_clamped = noise.clamped;
  model.variance_separable = noise.separable;
  model.temp_mean = reg.temp_mean;
  model.power_means = reg.power_means;

  IdentDiagnostics diag;
  diag.poles = model.poles();
  diag.residual_autocorr = residual_autocorr(reg, model.theta_bar());
  diag.cond_r = cov.cond_r;
  diag.min_sv_r = cov.min_sv_r;
  diag.sigma_w = std::sqrt(noise.sigma_w2);
  diag.sigma_v = std::sqrt(noise.sigma_v2);
  return {std::move(model), std::move(diag)};
}

}  // namespace coretherm
