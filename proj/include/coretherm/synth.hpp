#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "coretherm/power_model.hpp"
#include "coretherm/telemetry.hpp"

namespace coretherm {

// True per-core thermal dynamics in the same packing as ArxModel: a holds
// the AR coefficients, b the input couplings with row 0 = uncore.
struct CoreThermalTruth {
  Eigen::VectorXd a;  // order 2
  Eigen::MatrixXd b;  // (n_cores + 1) x 2
};

struct GroundTruthThermal {
  int n_cores = 0;
  double ambient_c = 40.0;
  double sigma_w2 = 0.0;  // true process-noise variance, degC^2
  std::vector<CoreThermalTruth> cores;
};

struct ThermalTruthOptions {
  double pole_lo = 0.75;
  double pole_hi = 0.97;
  double pole_sep_min = 0.03;   // keeps the two real poles apart
  double gain_lo = 0.3;         // degC/W self-coupling DC gain
  double gain_hi = 1.5;
  double cross_frac_lo = 0.05;  // neighbour coupling, fraction of self gain
  double cross_frac_hi = 0.20;
  double uncore_gain_lo = 0.005;
  double uncore_gain_hi = 0.02;
  double ambient_lo = 35.0;
  double ambient_hi = 45.0;
  double sigma_w2 = 0.0;
};

// Reproducible order-2 truths with real poles and dominant self-coupling.
GroundTruthThermal gen_thermal_truth(int n_cores, std::uint64_t seed,
                                     const ThermalTruthOptions& opts = {});

enum class WorkloadKind { prbs, constant, sinusoid, job_steps };
const char* workload_kind_name(WorkloadKind k);
WorkloadKind workload_kind_from_name(const std::string& name);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::prbs;
  Eigen::Index duration = 0;  // samples
  double idle_w = 2.0;        // prbs low level, job_steps floor
  double virus_w = 12.0;      // prbs high level, job_steps/sinusoid ceiling
  double level_w = 7.0;       // constant kind
  double period_samples = 2000.0;  // sinusoid
  Eigen::Index dwell_min = 150;    // job_steps dwell, samples
  Eigen::Index dwell_max = 2700;
  double prbs_hold = 2.0;  // mean samples per prbs level (2 = iid flips)
};

// Per-core power trajectories, n_cores x duration, bounded in [0, virus_w].
Eigen::MatrixXd gen_workload(const WorkloadSpec& spec, int n_cores,
                             std::uint64_t seed);

struct SynthConfig {
  double sample_period = 2.0;
  double t0_epoch = 1.7e9;
  double quant_step = 1.0;       // 0 disables temperature quantization
  double metric_jitter = 0.003;  // stddev, rescaled metric units
  double pkg_noise_w = 1.0;      // gaussian noise on measured package power
  ScalingBounds bounds = ScalingBounds::defaults();
  std::string node_id = "synth0";
  int socket_id = 0;
};

struct SynthDataset {
  TelemetryFrame frame;         // jittered metrics, quantized temps
  GroundTruthThermal truth;
  PowerModel power_truth;       // the linear power ground truth
  Eigen::MatrixXd true_powers;  // (n_cores + 1) x N, row 0 = uncore
  Eigen::MatrixXd true_temps;   // n_cores x N, pre-quantization
};

// Rolls the true dynamics forward on the given per-core powers, derives
// metrics consistent with a generated linear power model, and applies
// quantization and jitter. Refuses an unstable truth.
SynthDataset simulate(const GroundTruthThermal& truth,
                      const Eigen::MatrixXd& core_powers,
                      const SynthConfig& cfg, std::uint64_t seed);

// Steady-state temperature rise per watt for input k of one core.
double dc_gain(const CoreThermalTruth& core, int input_k);

}  // namespace coretherm
