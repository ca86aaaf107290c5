#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coretherm/common.hpp"

namespace coretherm {

// The three performance-counter metrics the power model consumes.
// core_freq_times_c0 is per core, the other two are per package.
enum class MetricKind {
  core_freq_times_c0,  // MHz * fraction of time in C0
  pkg_freq_times_c0,   // MHz * fraction of time in C0, package level
  one_minus_c0_pkg,    // fraction of time outside C0, package level
};

const char* metric_name(MetricKind k);
constexpr bool is_per_core(MetricKind k) {
  return k == MetricKind::core_freq_times_c0;
}

// Native-unit (min, max) per metric, used to map everything into [0, 1].
// Bounds come from configuration (nominal hardware ranges), not from data.
struct ScalingBounds {
  std::optional<std::pair<double, double>> core_freq;
  std::optional<std::pair<double, double>> pkg_freq;
  std::optional<std::pair<double, double>> idle_frac;

  static ScalingBounds defaults();  // 0..3600 MHz, 0..1

  const std::optional<std::pair<double, double>>& range(MetricKind k) const;
  void validate() const;  // every present bound must satisfy max > min
};

// Time-aligned telemetry for one (node, socket). All series share one
// length and one sample period. Immutable by convention: operations return
// new frames.
struct TelemetryFrame {
  double sample_period = 2.0;   // seconds
  Eigen::VectorXd timestamps;   // epoch seconds, strictly increasing
  Eigen::MatrixXd core_freq_c0;   // n_cores x N
  Eigen::VectorXd pkg_freq_c0;    // N
  Eigen::VectorXd idle_frac_pkg;  // N
  Eigen::VectorXd pkg_power;      // watts, N
  Eigen::MatrixXd core_temps;     // n_cores x N, degC
  bool temps_quantized = false;
  double quant_step = 1.0;      // degC, meaningful when temps_quantized
  std::string node_id = "node";
  int socket_id = 0;

  int n_cores() const { return static_cast<int>(core_temps.rows()); }
  Eigen::Index n_samples() const { return timestamps.size(); }

  void validate() const;
  TelemetryFrame slice(Eigen::Index start, Eigen::Index len) const;
};

// A contiguous telemetry slice plus provenance. core_id is -1 until the
// window is bound to a per-core study cell.
struct Window {
  TelemetryFrame frame;
  std::string node_id;
  int socket_id = 0;
  int core_id = -1;
  int window_index = 0;

  Eigen::Index length_samples() const { return frame.n_samples(); }
  Window with_core(int core) const;
};

// Affine map of every metric into [0, 1], clamped. Power and temperature
// series pass through untouched.
TelemetryFrame rescale_metrics(const TelemetryFrame& frame,
                               const ScalingBounds& bounds);

// `count` non-overlapping, contiguous windows starting at sample 0.
// Trailing remainder is discarded.
std::vector<Window> slice_windows(const TelemetryFrame& frame,
                                  Eigen::Index window_len, int count);

// step * round(T / step), half away from zero.
TelemetryFrame quantize_temps(const TelemetryFrame& frame, double step);

}  // namespace coretherm
