#include "coretherm/telemetry.hpp"

#include <cmath>

namespace coretherm {

const char* metric_name(MetricKind k) {
  switch (k) {
    case MetricKind::core_freq_times_c0: return "core_freq_times_c0";
    case MetricKind::pkg_freq_times_c0: return "pkg_freq_times_c0";
    case MetricKind::one_minus_c0_pkg: return "one_minus_c0_pkg";
  }
  return "unknown";
}

ScalingBounds ScalingBounds::defaults() {
  ScalingBounds b;
  b.core_freq = {0.0, 3600.0};
  b.pkg_freq = {0.0, 3600.0};
  b.idle_frac = {0.0, 1.0};
  return b;
}

const std::optional<std::pair<double, double>>& ScalingBounds::range(
    MetricKind k) const {
  switch (k) {
    case MetricKind::core_freq_times_c0: return core_freq;
    case MetricKind::pkg_freq_times_c0: return pkg_freq;
    case MetricKind::one_minus_c0_pkg: return idle_frac;
  }
  return core_freq;
}

void ScalingBounds::validate() const {
  for (MetricKind k : {MetricKind::core_freq_times_c0,
                       MetricKind::pkg_freq_times_c0,
                       MetricKind::one_minus_c0_pkg}) {
    const auto& r = range(k);
    if (r && r->second <= r->first)
      throw ConfigError(std::string("scaling bounds for ") + metric_name(k) +
                        ": max must exceed min");
  }
}

void TelemetryFrame::validate() const {
  const Eigen::Index n = timestamps.size();
  if (n < 1) throw DataError("telemetry frame is empty");
  if (core_temps.rows() < 1) throw DataError("telemetry frame has no cores");
  if (core_freq_c0.rows() != core_temps.rows())
    throw DataError("per-core series disagree on core count");
  if (core_freq_c0.cols() != n || pkg_freq_c0.size() != n ||
      idle_frac_pkg.size() != n || pkg_power.size() != n ||
      core_temps.cols() != n)
    throw DataError("telemetry series disagree on length");
  for (Eigen::Index t = 1; t < n; ++t)
    if (timestamps(t) <= timestamps(t - 1))
      throw DataError("timestamps are not strictly increasing");
  if (temps_quantized) {
    for (Eigen::Index c = 0; c < core_temps.rows(); ++c)
      for (Eigen::Index t = 0; t < n; ++t) {
        const double v = core_temps(c, t) / quant_step;
        if (std::abs(v - std::round(v)) > 1e-9)
          throw DataError("temperatures flagged quantized but off-grid");
      }
  }
}

TelemetryFrame TelemetryFrame::slice(Eigen::Index start,
                                     Eigen::Index len) const {
  if (start < 0 || len < 1 || start + len > n_samples())
    throw DataError("telemetry slice out of range");
  TelemetryFrame out = *this;
  out.timestamps = timestamps.segment(start, len);
  out.core_freq_c0 = core_freq_c0.middleCols(start, len);
  out.pkg_freq_c0 = pkg_freq_c0.segment(start, len);
  out.idle_frac_pkg = idle_frac_pkg.segment(start, len);
  out.pkg_power = pkg_power.segment(start, len);
  out.core_temps = core_temps.middleCols(start, len);
  return out;
}

Window Window::with_core(int core) const {
  Window w = *this;
  w.core_id = core;
  return w;
}

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

void require_bound(const ScalingBounds& b, MetricKind k) {
  if (!b.range(k))
    throw ConfigError(std::string("no scaling bound configured for metric ") +
                      metric_name(k));
}

}  // namespace

TelemetryFrame rescale_metrics(const TelemetryFrame& frame,
                               const ScalingBounds& bounds) {
  require_bound(bounds, MetricKind::core_freq_times_c0);
  require_bound(bounds, MetricKind::pkg_freq_times_c0);
  require_bound(bounds, MetricKind::one_minus_c0_pkg);
  bounds.validate();

  const auto map = [](double v, const std::pair<double, double>& r) {
    return clamp01((v - r.first) / (r.second - r.first));
  };

  TelemetryFrame out = frame;
  const auto cf = *bounds.core_freq;
  const auto pf = *bounds.pkg_freq;
  const auto idle = *bounds.idle_frac;
  out.core_freq_c0 = frame.core_freq_c0.unaryExpr(
      [&](double v) { return map(v, cf); });
  out.pkg_freq_c0 = frame.pkg_freq_c0.unaryExpr(
      [&](double v) { return map(v, pf); });
  out.idle_frac_pkg = frame.idle_frac_pkg.unaryExpr(
      [&](double v) { return map(v, idle); });
  return out;
}

std::vector<Window> slice_windows(const TelemetryFrame& frame,
                                  Eigen::Index window_len, int count) {
  if (window_len < 1 || count < 1)
    throw ConfigError("slice_windows: window_len and count must be positive");
  const Eigen::Index needed = window_len * count;
  if (needed > frame.n_samples())
    throw DataError("slice_windows: need " + std::to_string(needed) +
                    " samples (" + std::to_string(count) + " windows x " +
                    std::to_string(window_len) + "), frame has " +
                    std::to_string(frame.n_samples()));
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Window w;
    w.frame = frame.slice(static_cast<Eigen::Index>(i) * window_len,
                          window_len);
    w.node_id = frame.node_id;
    w.socket_id = frame.socket_id;
    w.window_index = i;
    out.push_back(std::move(w));
  }
  return out;
}

TelemetryFrame quantize_temps(const TelemetryFrame& frame, double step) {
  if (step <= 0.0) throw ConfigError("quantize_temps: step must be positive");
  TelemetryFrame out = frame;
  out.core_temps = frame.core_temps.unaryExpr(
      [step](double v) { return step * std::round(v / step); });
  out.temps_quantized = true;
  out.quant_step = step;
  return out;
}

}  // namespace coretherm
