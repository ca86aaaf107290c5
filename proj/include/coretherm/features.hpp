#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "coretherm/arx.hpp"
#include "coretherm/power_model.hpp"
#include "coretherm/telemetry.hpp"

namespace coretherm {

// Raw-trace features for one (core, window) cell: five statistics per
// signal, signals ordered [pkg_power, core_temp, uncore_power,
// core_0_power .. core_{Nc-1}_power]. Per signal:
//   mean |autocorrelation| over lags 1..100,
//   mean / std / span of the 20-subwindow low-passed series,
//   mean DFT bin magnitude of the mean-removed signal (DFT scaled by 1/N).
struct TraceFeatures {
  Eigen::VectorXd values;       // (Nc + 3) * 5
  bool zero_variance = false;   // some signal had no variance
};

std::vector<std::string> trace_feature_names(int n_cores);

// Identification-result features: pole real/imaginary parts, noise standard
// deviations, residual autocorrelations at lags 1..4, log10 condition
// number and log10 minimum singular value of the stacked covariance.
struct IdentFeatures {
  Eigen::VectorXd values;  // 2 n + 2 + 4 + 2
};

std::vector<std::string> ident_feature_names(int n);

// Features for a window whose identification failed outright: poles and
// noise terms zero, condition number saturated.
IdentFeatures ident_features_deficient(int n);

enum class LabelClass { good, bad, excluded };
const char* label_name(LabelClass c);
LabelClass label_from_name(const std::string& name);

struct WindowLabel {
  LabelClass label = LabelClass::bad;
  double mean_err = 0.0;
  double err_std = 0.0;
  double max_pole_modulus = 0.0;
  bool poles_real_stable = false;  // real, inside the unit circle, above floor
};

struct LabelThresholds {
  double err_good = 1.2;         // degC
  double err_std_good = 1.5;     // degC
  double pole_floor = 0.8;
  double err_excl_hi = 1.5;      // exclusion band: mean err in (1.2, 1.5]
  double err_std_excl_hi = 2.0;  // or error std in (1.5, 2.0]
};

TraceFeatures trace_features(const Window& window, const PartialPowers& powers,
                             int core_id);

IdentFeatures ident_features(const IdentDiagnostics& diag,
                             const ArxModel& model);

WindowLabel label_window(double mean_err, double err_std,
                         const std::vector<std::complex<double>>& poles,
                         const LabelThresholds& thr = {});

// Biased normalized autocorrelation averaged over lags 1..max_lag; returns
// 1.0 and sets *zero_variance for a constant signal.
double mean_abs_autocorr(const Eigen::VectorXd& x, int max_lag,
                         bool* zero_variance);

}  // namespace coretherm
