#include "coretherm/synth.hpp"

#include <algorithm>
#include <cmath>

#include "coretherm/arx.hpp"

namespace coretherm {

const char* workload_kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::prbs: return "prbs";
    case WorkloadKind::constant: return "constant";
    case WorkloadKind::sinusoid: return "sinusoid";
    case WorkloadKind::job_steps: return "job_steps";
  }
  return "unknown";
}

WorkloadKind workload_kind_from_name(const std::string& name) {
  if (name == "prbs") return WorkloadKind::prbs;
  if (name == "constant") return WorkloadKind::constant;
  if (name == "sinusoid") return WorkloadKind::sinusoid;
  if (name == "job_steps") return WorkloadKind::job_steps;
  throw ConfigError("unknown workload kind: " + name);
}

double dc_gain(const CoreThermalTruth& core, int input_k) {
  return core.b.row(input_k).sum() / (1.0 + core.a.sum());
}

GroundTruthThermal gen_thermal_truth(int n_cores, std::uint64_t seed,
                                     const ThermalTruthOptions& opts) {
  if (n_cores < 1) throw ConfigError("gen_thermal_truth: n_cores must be >= 1");
  Rng rng(seed);
  GroundTruthThermal truth;
  truth.n_cores = n_cores;
  truth.ambient_c = rng.uniform(opts.ambient_lo, opts.ambient_hi);
  truth.sigma_w2 = opts.sigma_w2;
  truth.cores.resize(static_cast<std::size_t>(n_cores));

  for (int c = 0; c < n_cores; ++c) {
    auto& core = truth.cores[static_cast<std::size_t>(c)];
    const double p1 = rng.uniform(opts.pole_lo, opts.pole_hi - opts.pole_sep_min);
    const double p2 = rng.uniform(p1 + opts.pole_sep_min, opts.pole_hi);
    core.a.resize(2);
    core.a << -(p1 + p2), p1 * p2;
    const double one_plus_sum_a = 1.0 + core.a.sum();  // (1-p1)(1-p2)

    core.b.resize(n_cores + 1, 2);
    const double self_gain = rng.uniform(opts.gain_lo, opts.gain_hi);
    for (int k = 0; k <= n_cores; ++k) {
      double gain;
      if (k == 0)
        gain = rng.uniform(opts.uncore_gain_lo, opts.uncore_gain_hi);
      else if (k - 1 == c)
        gain = self_gain;
      else
        gain = self_gain * rng.uniform(opts.cross_frac_lo, opts.cross_frac_hi);
      const double total = gain * one_plus_sum_a;
      const double frac = rng.uniform(0.4, 0.8);
      core.b(k, 0) = frac * total;
      core.b(k, 1) = (1.0 - frac) * total;
    }
  }
  return truth;
}

Eigen::MatrixXd gen_workload(const WorkloadSpec& spec, int n_cores,
                             std::uint64_t seed) {
  if (spec.duration < 1) throw ConfigError("gen_workload: duration must be >= 1");
  if (n_cores < 1) throw ConfigError("gen_workload: n_cores must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd p(n_cores, spec.duration);

  switch (spec.kind) {
    case WorkloadKind::prbs: {
      // Geometric dwell with mean prbs_hold; 0.5 cap keeps samples iid at
      // the default rather than alternating deterministically.
      const double flip = std::min(1.0 / std::max(spec.prbs_hold, 1.0), 0.5);
      for (int c = 0; c < n_cores; ++c) {
        double level = rng.bernoulli(0.5) ? spec.virus_w : spec.idle_w;
        for (Eigen::Index t = 0; t < spec.duration; ++t) {
          if (t > 0 && rng.bernoulli(flip))
            level = (level == spec.idle_w) ? spec.virus_w : spec.idle_w;
          p(c, t) = level;
        }
      }
      break;
    }
    case WorkloadKind::constant:
      p.setConstant(spec.level_w);
      break;
    case WorkloadKind::sinusoid: {
      const double mid = 0.5 * (spec.idle_w + spec.virus_w);
      const double amp = 0.5 * (spec.virus_w - spec.idle_w);
      for (int c = 0; c < n_cores; ++c) {
        const double phase = rng.uniform(0.0, 6.283185307179586);
        for (Eigen::Index t = 0; t < spec.duration; ++t)
          p(c, t) = mid + amp * std::sin(6.283185307179586 *
                                             static_cast<double>(t) /
                                             spec.period_samples +
                                         phase);
      }
      break;
    }
    case WorkloadKind::job_steps: {
      for (int c = 0; c < n_cores; ++c) {
        Eigen::Index t = 0;
        while (t < spec.duration) {
          const double level = rng.uniform(spec.idle_w, spec.virus_w);
          const Eigen::Index dwell = rng.uniform_int(spec.dwell_min,
                                                     spec.dwell_max);
          const Eigen::Index end = std::min(t + dwell, spec.duration);
          for (; t < end; ++t) p(c, t) = level;
        }
      }
      break;
    }
  }
  // Power trajectories stay within [0, ceiling].
  return p.cwiseMax(0.0).cwiseMin(std::max(spec.virus_w, spec.level_w));
}

namespace {

// Slowly wandering value in [lo, hi], reflected at the bounds.
class RandomWalk {
 public:
  RandomWalk(double lo, double hi, double step, Rng& rng)
      : lo_(lo), hi_(hi), step_(step), v_(rng.uniform(lo, hi)) {}
  double next(Rng& rng) {
    v_ += rng.normal(0.0, step_);
    if (v_ < lo_) v_ = 2.0 * lo_ - v_;
    if (v_ > hi_) v_ = 2.0 * hi_ - v_;
    v_ = std::clamp(v_, lo_, hi_);
    return v_;
  }

 private:
  double lo_, hi_, step_, v_;
};

void check_stable(const GroundTruthThermal& truth) {
  for (const auto& core : truth.cores)
    for (const auto& pole : arx_poles(core.a))
      if (std::abs(pole) >= 1.0)
        throw ConfigError("simulate: unstable thermal truth refused");
}

}  // namespace

SynthDataset simulate(const GroundTruthThermal& truth,
                      const Eigen::MatrixXd& core_powers,
                      const SynthConfig& cfg, std::uint64_t seed) {
  const int nc = truth.n_cores;
  if (core_powers.rows() != nc)
    throw DataError("simulate: core power rows must equal n_cores");
  const Eigen::Index n_samples = core_powers.cols();
  if (n_samples < 4) throw DataError("simulate: need at least 4 samples");
  if (core_powers.minCoeff() < 0.0)
    throw DataError("simulate: negative core power");
  check_stable(truth);
  cfg.bounds.validate();

  Rng rng(seed);

  SynthDataset ds;
  ds.truth = truth;

  // Linear power ground truth. Per-core coefficients dominate the per-core
  // power range so the derived metrics stay inside [0, 1].
  const double peak = std::max(core_powers.maxCoeff(), 1.0);
  ds.power_truth.n_cores = nc;
  ds.power_truth.intercept = rng.uniform(8.0, 14.0);
  ds.power_truth.alpha << rng.uniform(6.0, 10.0), rng.uniform(-3.0, -1.0);
  ds.power_truth.beta.resize(nc);
  for (int c = 0; c < nc; ++c)
    ds.power_truth.beta(c) = rng.uniform(1.15, 1.45) * peak;

  // Uncore metrics wander slowly; uncore power follows the model exactly.
  Eigen::MatrixXd m_unc(2, n_samples);  // rescaled units
  RandomWalk walk_freq(0.2, 0.9, 0.002, rng);
  RandomWalk walk_idle(0.05, 0.6, 0.002, rng);
  for (Eigen::Index t = 0; t < n_samples; ++t) {
    m_unc(0, t) = walk_freq.next(rng);
    m_unc(1, t) = walk_idle.next(rng);
  }

  ds.true_powers.resize(nc + 1, n_samples);
  ds.true_powers.row(0) =
      (ds.power_truth.alpha(0) * m_unc.row(0) +
       ds.power_truth.alpha(1) * m_unc.row(1)).array() +
      ds.power_truth.intercept;
  ds.true_powers.bottomRows(nc) = core_powers;

  // Roll the thermal truth forward. A pre-roll with the first input held
  // constant starts every core near its stationary regime.
  constexpr Eigen::Index kPreRoll = 256;
  const Eigen::Index total = kPreRoll + n_samples;
  const double sigma_w = std::sqrt(truth.sigma_w2);
  ds.true_temps.resize(nc, n_samples);
  Eigen::VectorXd rise(total);
  for (int c = 0; c < nc; ++c) {
    const auto& core = truth.cores[static_cast<std::size_t>(c)];
    double dc = 0.0;
    for (int k = 0; k <= nc; ++k) dc += dc_gain(core, k) * ds.true_powers(k, 0);
    rise(0) = dc;
    rise(1) = dc;
    for (Eigen::Index t = 2; t < total; ++t) {
      const auto u_at = [&](Eigen::Index i) -> Eigen::Index {
        return i < kPreRoll ? 0 : i - kPreRoll;
      };
      double acc = -core.a(0) * rise(t - 1) - core.a(1) * rise(t - 2);
      for (int k = 0; k <= nc; ++k)
        acc += core.b(k, 0) * ds.true_powers(k, u_at(t - 1)) +
               core.b(k, 1) * ds.true_powers(k, u_at(t - 2));
      if (sigma_w > 0.0) acc += rng.normal(0.0, sigma_w);
      rise(t) = acc;
    }
    ds.true_temps.row(c) =
        rise.tail(n_samples).transpose().array() + truth.ambient_c;
  }

  // Assemble the telemetry frame: native-unit metrics with jitter, measured
  // package power with gaussian noise, quantized temperatures.
  TelemetryFrame f;
  f.sample_period = cfg.sample_period;
  f.node_id = cfg.node_id;
  f.socket_id = cfg.socket_id;
  f.timestamps.resize(n_samples);
  for (Eigen::Index t = 0; t < n_samples; ++t)
    f.timestamps(t) = cfg.t0_epoch + cfg.sample_period * static_cast<double>(t);

  const auto to_native = [](double m01, const std::pair<double, double>& r) {
    return r.first + m01 * (r.second - r.first);
  };
  const auto jitter01 = [&](double m01) {
    if (cfg.metric_jitter > 0.0) m01 += rng.normal(0.0, cfg.metric_jitter);
    return std::clamp(m01, 0.0, 1.0);
  };

  const auto cf = *cfg.bounds.core_freq;
  const auto pf = *cfg.bounds.pkg_freq;
  const auto idle = *cfg.bounds.idle_frac;
  f.core_freq_c0.resize(nc, n_samples);
  for (int c = 0; c < nc; ++c)
    for (Eigen::Index t = 0; t < n_samples; ++t)
      f.core_freq_c0(c, t) = to_native(
          jitter01(core_powers(c, t) / ds.power_truth.beta(c)), cf);
  f.pkg_freq_c0.resize(n_samples);
  f.idle_frac_pkg.resize(n_samples);
  for (Eigen::Index t = 0; t < n_samples; ++t) {
    f.pkg_freq_c0(t) = to_native(jitter01(m_unc(0, t)), pf);
    f.idle_frac_pkg(t) = to_native(jitter01(m_unc(1, t)), idle);
  }

  f.pkg_power = ds.true_powers.colwise().sum().transpose();
  if (cfg.pkg_noise_w > 0.0)
    for (Eigen::Index t = 0; t < n_samples; ++t)
      f.pkg_power(t) += rng.normal(0.0, cfg.pkg_noise_w);

  f.core_temps = ds.true_temps;
  if (cfg.quant_step > 0.0) {
    f.core_temps = f.core_temps.unaryExpr([&](double v) {
      return cfg.quant_step * std::round(v / cfg.quant_step);
    });
    f.temps_quantized = true;
    f.quant_step = cfg.quant_step;
  }

  f.validate();
  ds.frame = std::move(f);
  return ds;
}

}  // namespace coretherm
