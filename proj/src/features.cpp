#include "coretherm/features.hpp"

#include <cmath>

#include "coretherm/fft.hpp"

namespace coretherm {

namespace {

constexpr int kSubwindows = 20;
constexpr int kAutocorrLags = 100;
constexpr double kCondSaturation = 1e18;
constexpr double kPoleRealTol = 1e-9;

const char* kFeatureSuffix[5] = {"mean_abs_autocorr_100", "mean_lowpass",
                                 "std_lowpass", "span_lowpass",
                                 "mean_fft_norm"};

std::vector<std::string> signal_names(int n_cores) {
  std::vector<std::string> s = {"pkg_power", "core_temp", "uncore_power"};
  for (int c = 0; c < n_cores; ++c)
    s.push_back("core_" + std::to_string(c) + "_power");
  return s;
}

// 20 near-equal subwindow means of x.
Eigen::VectorXd lowpass20(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd out(kSubwindows);
  for (int i = 0; i < kSubwindows; ++i) {
    const Eigen::Index lo = n * i / kSubwindows;
    const Eigen::Index hi = n * (i + 1) / kSubwindows;
    out(i) = x.segment(lo, hi - lo).mean();
  }
  return out;
}

double mean_fft_norm(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<double> centered(static_cast<std::size_t>(n));
  const double mean = x.mean();
  for (Eigen::Index i = 0; i < n; ++i)
    centered[static_cast<std::size_t>(i)] = x(i) - mean;
  const auto spectrum = dft(centered);
  double acc = 0.0;
  for (const auto& bin : spectrum) acc += std::abs(bin);
  // Mean over bins of the 1/N-scaled transform.
  return acc / (static_cast<double>(n) * static_cast<double>(n));
}

void push_signal(const Eigen::VectorXd& x, Eigen::VectorXd& out,
                 Eigen::Index& at, bool* zero_variance) {
  out(at++) = mean_abs_autocorr(x, kAutocorrLags, zero_variance);
  const Eigen::VectorXd lp = lowpass20(x);
  out(at++) = lp.mean();
  const double lp_mean = lp.mean();
  out(at++) = std::sqrt((lp.array() - lp_mean).square().sum() /
                        static_cast<double>(lp.size()));
  out(at++) = lp.maxCoeff() - lp.minCoeff();
  out(at++) = mean_fft_norm(x);
}

}  // namespace

double mean_abs_autocorr(const Eigen::VectorXd& x, int max_lag,
                         bool* zero_variance) {
  const Eigen::Index n = x.size();
  const double mean = x.mean();
  const Eigen::VectorXd c = x.array() - mean;
  const double denom = c.squaredNorm();
  if (denom <= 0.0) {
    if (zero_variance) *zero_variance = true;
    return 1.0;  // constant-signal convention
  }
  double acc = 0.0;
  int lags = 0;
  for (int k = 1; k <= max_lag && k < n; ++k) {
    acc += std::abs(c.head(n - k).dot(c.tail(n - k)) / denom);
    ++lags;
  }
  return lags > 0 ? acc / lags : 0.0;
}

std::vector<std::string> trace_feature_names(int n_cores) {
  std::vector<std::string> names;
  for (const auto& sig : signal_names(n_cores))
    for (const auto* suffix : kFeatureSuffix) names.push_back(sig + "_" + suffix);
  return names;
}

TraceFeatures trace_features(const Window& window, const PartialPowers& powers,
                             int core_id) {
  const TelemetryFrame& f = window.frame;
  const Eigen::Index n = f.n_samples();
  if (n < 200)
    throw DataError("trace_features: window must have at least 200 samples");
  if (powers.n_samples() != n || powers.n_cores() != f.n_cores())
    throw DataError("trace_features: powers not aligned to window");
  if (core_id < 0 || core_id >= f.n_cores())
    throw ConfigError("trace_features: core_id out of range");

  TraceFeatures feat;
  feat.values.resize((f.n_cores() + 3) * 5);
  Eigen::Index at = 0;
  push_signal(f.pkg_power, feat.values, at, &feat.zero_variance);
  push_signal(f.core_temps.row(core_id).transpose(), feat.values, at,
              &feat.zero_variance);
  push_signal(powers.uncore, feat.values, at, &feat.zero_variance);
  for (int c = 0; c < f.n_cores(); ++c)
    push_signal(powers.per_core.row(c).transpose(), feat.values, at,
                &feat.zero_variance);
  if (!feat.values.allFinite())
    throw NumericalError("trace_features: non-finite feature");
  return feat;
}

std::vector<std::string> ident_feature_names(int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("re_pole_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) names.push_back("im_pole_" + std::to_string(i));
  names.push_back("sigma_w");
  names.push_back("sigma_v");
  for (int k = 1; k <= 4; ++k)
    names.push_back("resid_autocorr_" + std::to_string(k));
  names.push_back("log10_cond_r");
  names.push_back("log10_min_sv_r");
  return names;
}

namespace {

Eigen::VectorXd assemble_ident(const std::vector<std::complex<double>>& poles,
                               double sigma_w, double sigma_v,
                               const std::array<double, 4>& resid,
                               double cond_r, double min_sv_r) {
  const int n = static_cast<int>(poles.size());
  Eigen::VectorXd v(2 * n + 2 + 4 + 2);
  Eigen::Index at = 0;
  for (const auto& pole : poles) v(at++) = pole.real();
  for (const auto& pole : poles) v(at++) = pole.imag();
  v(at++) = sigma_w;
  v(at++) = sigma_v;
  for (double r : resid) v(at++) = r;
  const double cond = std::min(std::isfinite(cond_r) ? cond_r : kCondSaturation,
                               kCondSaturation);
  v(at++) = std::log10(std::max(cond, 1.0));
  v(at++) = std::log10(std::max(min_sv_r, 1e-300));
  return v;
}

}  // namespace

IdentFeatures ident_features(const IdentDiagnostics& diag,
                             const ArxModel& model) {
  (void)model;
  IdentFeatures f;
  f.values = assemble_ident(diag.poles, diag.sigma_w, diag.sigma_v,
                            diag.residual_autocorr, diag.cond_r, diag.min_sv_r);
  return f;
}

IdentFeatures ident_features_deficient(int n) {
  IdentFeatures f;
  f.values = assemble_ident(
      std::vector<std::complex<double>>(static_cast<std::size_t>(n), {0.0, 0.0}),
      0.0, 0.0, {0.0, 0.0, 0.0, 0.0}, kCondSaturation, 1e-300);
  return f;
}

const char* label_name(LabelClass c) {
  switch (c) {
    case LabelClass::good: return "good";
    case LabelClass::bad: return "bad";
    case LabelClass::excluded: return "excluded";
  }
  return "unknown";
}

LabelClass label_from_name(const std::string& name) {
  if (name == "good") return LabelClass::good;
  if (name == "bad") return LabelClass::bad;
  if (name == "excluded") return LabelClass::excluded;
  throw DataError("unknown label: " + name);
}

WindowLabel label_window(double mean_err, double err_std,
                         const std::vector<std::complex<double>>& poles,
                         const LabelThresholds& thr) {
  WindowLabel out;
  out.mean_err = mean_err;
  out.err_std = err_std;

  bool ok = !poles.empty();
  double max_mod = 0.0;
  for (const auto& pole : poles) {
    const double mod = std::abs(pole);
    max_mod = std::max(max_mod, mod);
    const bool real =
        std::abs(pole.imag()) <= kPoleRealTol * std::max(1.0, mod);
    if (!real || mod >= 1.0 || pole.real() <= thr.pole_floor) ok = false;
  }
  out.max_pole_modulus = max_mod;
  out.poles_real_stable = ok;

  if (mean_err < thr.err_good && err_std < thr.err_std_good && ok) {
    out.label = LabelClass::good;
  } else if ((mean_err > thr.err_good && mean_err <= thr.err_excl_hi) ||
             (err_std > thr.err_std_good && err_std <= thr.err_std_excl_hi)) {
    out.label = LabelClass::excluded;
  } else {
    out.label = LabelClass::bad;
  }
  return out;
}

}  // namespace coretherm
