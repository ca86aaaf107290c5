#include "coretherm/power_model.hpp"

#include <Eigen/QR>
#include <algorithm>

namespace coretherm {

Eigen::MatrixXd PartialPowers::input_matrix() const {
  Eigen::MatrixXd u(per_core.rows() + 1, uncore.size());
  u.row(0) = uncore.transpose();
  u.bottomRows(per_core.rows()) = per_core;
  return u;
}

PartialPowers PartialPowers::slice(Eigen::Index start, Eigen::Index len) const {
  if (start < 0 || len < 1 || start + len > n_samples())
    throw DataError("partial power slice out of range");
  PartialPowers out;
  out.uncore = uncore.segment(start, len);
  out.per_core = per_core.middleCols(start, len);
  out.clamped_count = clamped_count;
  return out;
}

std::vector<std::string> power_regressor_names(int n_cores) {
  std::vector<std::string> names = {"pkg_freq_c0", "one_minus_c0_pkg"};
  for (int c = 0; c < n_cores; ++c)
    names.push_back("core_" + std::to_string(c) + "_freq_c0");
  names.push_back("intercept");
  return names;
}

namespace {

void check_rescaled(const TelemetryFrame& f) {
  const double lo = -1e-9, hi = 1.0 + 1e-9;
  const auto in01 = [&](double v) { return v >= lo && v <= hi; };
  if (!(f.core_freq_c0.minCoeff() >= lo && f.core_freq_c0.maxCoeff() <= hi &&
        in01(f.pkg_freq_c0.minCoeff()) && in01(f.pkg_freq_c0.maxCoeff()) &&
        in01(f.idle_frac_pkg.minCoeff()) && in01(f.idle_frac_pkg.maxCoeff())))
    throw DataError("power model expects rescaled metrics in [0, 1]");
}

// Regressor rows for one frame: [pkg_freq, idle_frac, core_0..core_{Nc-1}, 1].
Eigen::MatrixXd regressor_rows(const TelemetryFrame& f) {
  const Eigen::Index n = f.n_samples();
  const int nc = f.n_cores();
  Eigen::MatrixXd x(n, 2 + nc + 1);
  x.col(0) = f.pkg_freq_c0;
  x.col(1) = f.idle_frac_pkg;
  for (int c = 0; c < nc; ++c) x.col(2 + c) = f.core_freq_c0.row(c).transpose();
  x.col(2 + nc).setOnes();
  return x;
}

}  // namespace

PowerModel fit_power_model(const std::vector<TelemetryFrame>& frames,
                           const PowerFitOptions& opts) {
  if (frames.empty()) throw DataError("fit_power_model: no frames");
  const int nc = frames.front().n_cores();
  Eigen::Index total = 0;
  for (const auto& f : frames) {
    f.validate();
    check_rescaled(f);
    if (f.n_cores() != nc)
      throw DataError("fit_power_model: frames disagree on core count");
    total += f.n_samples();
  }
  const int ncols = 2 + nc + 1;
  if (total < 10 * ncols)
    throw DataError("fit_power_model: need at least " +
                    std::to_string(10 * ncols) + " samples, got " +
                    std::to_string(total));

  Eigen::MatrixXd x(total, ncols);
  Eigen::VectorXd y(total);
  Eigen::Index at = 0;
  for (const auto& f : frames) {
    x.middleRows(at, f.n_samples()) = regressor_rows(f);
    y.segment(at, f.n_samples()) = f.pkg_power;
    at += f.n_samples();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(opts.rank_tol);
  const Eigen::Index rank = qr.rank();

  const auto names = power_regressor_names(nc);
  PowerModel model;
  model.n_cores = nc;
  model.beta = Eigen::VectorXd::Zero(nc);

  Eigen::VectorXd coef(ncols);
  if (rank == ncols) {
    coef = qr.solve(y);
  } else {
    // Columns pivoted past the numerical rank carry no information.
    const auto perm = qr.colsPermutation().indices();
    std::vector<Eigen::Index> keep(perm.data(), perm.data() + rank);
    std::sort(keep.begin(), keep.end());
    std::vector<bool> kept(static_cast<std::size_t>(ncols), false);
    for (auto k : keep) kept[static_cast<std::size_t>(k)] = true;
    std::string bad;
    for (int j = 0; j < ncols; ++j)
      if (!kept[static_cast<std::size_t>(j)])
        bad += (bad.empty() ? "" : ", ") + names[static_cast<std::size_t>(j)];
    if (!opts.allow_rank_deficient)
      throw DataError("fit_power_model: rank-deficient regressors, columns: " +
                      bad);
    Eigen::MatrixXd xs(total, rank);
    for (Eigen::Index j = 0; j < rank; ++j) xs.col(j) = x.col(keep[j]);
    const Eigen::VectorXd cs = xs.colPivHouseholderQr().solve(y);
    coef.setZero();
    for (Eigen::Index j = 0; j < rank; ++j) coef(keep[j]) = cs(j);
    for (int j = 0; j < ncols; ++j)
      if (!kept[static_cast<std::size_t>(j)])
        model.deficient_columns.push_back(names[static_cast<std::size_t>(j)]);
  }

  model.alpha << coef(0), coef(1);
  for (int c = 0; c < nc; ++c) model.beta(c) = coef(2 + c);
  model.intercept = coef(2 + nc);
  return model;
}

namespace {

void check_compatible(const PowerModel& model, const TelemetryFrame& frame) {
  frame.validate();
  check_rescaled(frame);
  if (frame.n_cores() != model.n_cores)
    throw DataError("power model fitted for " +
                    std::to_string(model.n_cores) + " cores, frame has " +
                    std::to_string(frame.n_cores()));
}

}  // namespace

PartialPowers partition_powers(const PowerModel& model,
                               const TelemetryFrame& frame,
                               bool clamp_negative) {
  check_compatible(model, frame);
  const Eigen::Index n = frame.n_samples();
  PartialPowers p;
  p.uncore = (model.alpha(0) * frame.pkg_freq_c0 +
              model.alpha(1) * frame.idle_frac_pkg).array() + model.intercept;
  p.per_core.resize(model.n_cores, n);
  for (int c = 0; c < model.n_cores; ++c)
    p.per_core.row(c) = model.beta(c) * frame.core_freq_c0.row(c);

  if (clamp_negative) {
    long clamped = 0;
    const auto clamp = [&clamped](double v) {
      if (v < 0.0) {
        ++clamped;
        return 0.0;
      }
      return v;
    };
    p.uncore = p.uncore.unaryExpr(clamp);
    p.per_core = p.per_core.unaryExpr(clamp);
    p.clamped_count = clamped;
  }
  return p;
}

Eigen::VectorXd predict_package(const PowerModel& model,
                                const TelemetryFrame& frame) {
  check_compatible(model, frame);
  // Evaluated as the sum of the partition shares (uncore first, then cores
  // in order) so the partition identity holds bit for bit before clamping.
  Eigen::VectorXd total = (model.alpha(0) * frame.pkg_freq_c0 +
                           model.alpha(1) * frame.idle_frac_pkg).array() +
                          model.intercept;
  for (int c = 0; c < model.n_cores; ++c)
    total += model.beta(c) * frame.core_freq_c0.row(c).transpose();
  return total;
}

}  // namespace coretherm
