#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "coretherm/telemetry.hpp"

namespace coretherm {

// Linear regression from rescaled metrics to package power. An intercept is
// included and assigned to the uncore share, so the partition still sums to
// the package prediction exactly.
struct PowerModel {
  Eigen::Vector2d alpha = Eigen::Vector2d::Zero();  // [pkg_freq_c0, idle_frac]
  Eigen::VectorXd beta;                             // per core, W per unit
  double intercept = 0.0;
  int n_cores = 0;
  // Column names zeroed out by a rank-deficient fit (empty on a clean fit).
  std::vector<std::string> deficient_columns;
};

// Package prediction split into uncore and per-core shares. Before clamping
// uncore + sum(per_core) equals predict_package bit for bit (same summation
// order); clamped_count reports how many negative entries were clipped.
struct PartialPowers {
  Eigen::VectorXd uncore;    // watts, N
  Eigen::MatrixXd per_core;  // n_cores x N, watts
  long clamped_count = 0;

  Eigen::Index n_samples() const { return uncore.size(); }
  int n_cores() const { return static_cast<int>(per_core.rows()); }
  // Inputs stacked in model order [P_0 (uncore), P_1 .. P_Nc].
  Eigen::MatrixXd input_matrix() const;
  PartialPowers slice(Eigen::Index start, Eigen::Index len) const;
};

struct PowerFitOptions {
  // When false a rank-deficient regressor matrix raises DataError naming the
  // deficient columns; when true those columns are zeroed and recorded.
  bool allow_rank_deficient = false;
  double rank_tol = 1e-10;
};

std::vector<std::string> power_regressor_names(int n_cores);

PowerModel fit_power_model(const std::vector<TelemetryFrame>& frames,
                           const PowerFitOptions& opts = {});

Eigen::VectorXd predict_package(const PowerModel& model,
                                const TelemetryFrame& frame);

// clamp_negative=false keeps the raw (possibly negative) shares, exposing
// the pre-clamp partition identity.
PartialPowers partition_powers(const PowerModel& model,
                               const TelemetryFrame& frame,
                               bool clamp_negative = true);

}  // namespace coretherm
