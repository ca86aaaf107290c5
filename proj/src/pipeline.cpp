#include "coretherm/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "coretherm/csv.hpp"
#include "coretherm/serialize.hpp"
#include "coretherm/svg.hpp"

namespace coretherm {

using nlohmann::json;

Eigen::Index PipelineConfig::power_train_len() const {
  if (power_train_samples >= 0) return power_train_samples;
  return static_cast<Eigen::Index>(
      std::llround(power_train_days * 86400.0 / sample_period));
}

const char* feature_set_name(FeatureSet f) {
  return f == FeatureSet::trace ? "trace" : "ident";
}

void parallel_for(Eigen::Index count, int workers,
                  const std::function<void(Eigen::Index)>& fn) {
  workers = std::max(workers, 1);
  if (workers == 1 || count <= 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  const int n_threads = static_cast<int>(
      std::min<Eigen::Index>(workers, count));
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&] {
      while (true) {
        const Eigen::Index i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ------------------------------------------------------------------ synth

namespace {

WorkloadKind sample_kind(const CorpusWorkloadMix& mix, Rng& rng) {
  const double total = mix.prbs + mix.constant + mix.sinusoid + mix.job_steps;
  double u = rng.u01() * total;
  if ((u -= mix.prbs) < 0.0) return WorkloadKind::prbs;
  if ((u -= mix.constant) < 0.0) return WorkloadKind::constant;
  if ((u -= mix.sinusoid) < 0.0) return WorkloadKind::sinusoid;
  return WorkloadKind::job_steps;
}

WorkloadSpec kind_spec(WorkloadKind kind, const SynthStudySpec& study,
                       Eigen::Index duration, Rng& rng) {
  WorkloadSpec spec;
  spec.kind = kind;
  spec.duration = duration;
  spec.idle_w = study.idle_w;
  spec.virus_w = study.virus_w;
  switch (kind) {
    case WorkloadKind::prbs:
      // Dwell from near-iid up to several thermal time constants.
      spec.prbs_hold = rng.uniform(3.0, 48.0);
      break;
    case WorkloadKind::constant:
      spec.level_w = rng.uniform(study.idle_w + 1.0, 0.85 * study.virus_w);
      break;
    case WorkloadKind::sinusoid:
      spec.period_samples = rng.uniform(
          static_cast<double>(duration) / 4.0, static_cast<double>(duration));
      break;
    case WorkloadKind::job_steps:
      // Wide dwell range: windows span everything from step-rich traces
      // that identify well to near-constant ones that do not.
      spec.dwell_min = std::max<Eigen::Index>(duration / 32, 8);
      spec.dwell_max = std::max<Eigen::Index>(duration, spec.dwell_min + 1);
      break;
  }
  return spec;
}

std::string node_name(int socket_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "n%03d", socket_index);
  return buf;
}

}  // namespace

SynthStudyData gen_synth_study(const SynthStudySpec& spec) {
  if (spec.n_sockets < 1 || spec.n_cores < 1 || spec.window_count < 1)
    throw ConfigError("gen_synth_study: sockets, cores and windows must be >= 1");
  Rng master(spec.seed);
  SynthStudyData data;
  data.kinds.resize(static_cast<std::size_t>(spec.n_sockets));

  ThermalTruthOptions topt;
  topt.pole_lo = spec.pole_lo;
  topt.pole_hi = spec.pole_hi;
  topt.pole_sep_min = spec.pole_sep_min;
  topt.gain_lo = spec.gain_lo;
  topt.gain_hi = spec.gain_hi;
  topt.sigma_w2 = spec.sigma_w2;

  const Eigen::Index total =
      spec.power_train_samples +
      static_cast<Eigen::Index>(spec.window_count) * spec.window_len;

  for (int s = 0; s < spec.n_sockets; ++s) {
    const GroundTruthThermal truth =
        gen_thermal_truth(spec.n_cores, master.next_seed(), topt);

    Eigen::MatrixXd powers(spec.n_cores, total);
    auto& socket_kinds = data.kinds[static_cast<std::size_t>(s)];
    socket_kinds.assign(static_cast<std::size_t>(spec.n_cores), {});

    // Training prefix: PRBS on every core keeps the power fit well posed.
    if (spec.power_train_samples > 0) {
      WorkloadSpec pre;
      pre.kind = WorkloadKind::prbs;
      pre.duration = spec.power_train_samples;
      pre.idle_w = spec.idle_w;
      pre.virus_w = spec.virus_w;
      pre.prbs_hold = 4.0;
      powers.leftCols(pre.duration) =
          gen_workload(pre, spec.n_cores, master.next_seed());
    }

    for (int c = 0; c < spec.n_cores; ++c)
      socket_kinds[static_cast<std::size_t>(c)].resize(
          static_cast<std::size_t>(spec.window_count));
    for (int w = 0; w < spec.window_count; ++w) {
      const bool node_level = master.bernoulli(spec.node_kind_prob);
      const WorkloadKind shared = sample_kind(spec.mix, master);
      const bool straddle = master.bernoulli(spec.straddle_prob);
      const WorkloadKind shared2 = sample_kind(spec.mix, master);
      const Eigen::Index split = static_cast<Eigen::Index>(
          master.uniform(0.25, 0.75) * static_cast<double>(spec.window_len));
      for (int c = 0; c < spec.n_cores; ++c) {
        const WorkloadKind kind =
            node_level ? shared : sample_kind(spec.mix, master);
        socket_kinds[static_cast<std::size_t>(c)][static_cast<std::size_t>(w)] =
            kind;
        const Eigen::Index at = spec.power_train_samples +
                                static_cast<Eigen::Index>(w) * spec.window_len;
        if (!straddle) {
          const WorkloadSpec wspec =
              kind_spec(kind, spec, spec.window_len, master);
          powers.block(c, at, 1, spec.window_len) =
              gen_workload(wspec, 1, master.next_seed());
        } else {
          const WorkloadKind second =
              node_level ? shared2 : sample_kind(spec.mix, master);
          const WorkloadSpec first = kind_spec(kind, spec, split, master);
          const WorkloadSpec rest =
              kind_spec(second, spec, spec.window_len - split, master);
          powers.block(c, at, 1, split) =
              gen_workload(first, 1, master.next_seed());
          powers.block(c, at + split, 1, spec.window_len - split) =
              gen_workload(rest, 1, master.next_seed());
        }
      }
    }

    SynthConfig scfg;
    scfg.sample_period = spec.sample_period;
    scfg.quant_step = spec.quant_step;
    scfg.metric_jitter = spec.metric_jitter;
    scfg.pkg_noise_w = spec.pkg_noise_w;
    scfg.node_id = node_name(s);
    scfg.socket_id = 0;
    SynthDataset ds = simulate(truth, powers, scfg, master.next_seed());

    data.frames.push_back(std::move(ds.frame));
    data.truths.push_back(std::move(ds.truth));
    data.power_truths.push_back(std::move(ds.power_truth));
    data.true_powers.push_back(std::move(ds.true_powers));
  }
  return data;
}

void export_workload_kinds_csv(const SynthStudyData& data,
                               const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t s = 0; s < data.kinds.size(); ++s)
    for (std::size_t c = 0; c < data.kinds[s].size(); ++c)
      for (std::size_t w = 0; w < data.kinds[s][c].size(); ++w)
        rows.push_back({data.frames[s].node_id,
                        std::to_string(data.frames[s].socket_id),
                        std::to_string(c), std::to_string(w),
                        workload_kind_name(data.kinds[s][c][w])});
  write_csv(path, {"node", "socket", "core", "window", "workload"}, rows);
}

// ----------------------------------------------------------- power models

std::vector<PowerModel> fit_power_models(
    const std::vector<TelemetryFrame>& frames, const PipelineConfig& cfg,
    bool allow_rank_deficient) {
  std::vector<PowerModel> models;
  models.reserve(frames.size());
  const Eigen::Index train = cfg.power_train_len();
  PowerFitOptions opts;
  opts.allow_rank_deficient = allow_rank_deficient;
  for (const auto& frame : frames) {
    if (train >= frame.n_samples())
      throw DataError("power training span (" + std::to_string(train) +
                      ") covers the whole frame for node " + frame.node_id);
    const TelemetryFrame rescaled = rescale_metrics(frame, cfg.bounds);
    models.push_back(fit_power_model({rescaled.slice(0, train)}, opts));
  }
  return models;
}

// --------------------------------------------------- identification study

namespace {

struct SocketData {
  std::vector<Window> windows;
  std::vector<PartialPowers> powers;
};

SocketData prepare_socket(const TelemetryFrame& frame, const PowerModel& pm,
                          const PipelineConfig& cfg) {
  const Eigen::Index train = cfg.power_train_len();
  if (train >= frame.n_samples())
    throw DataError("thermal span empty after the power training cut");
  const TelemetryFrame rescaled = rescale_metrics(frame, cfg.bounds);
  const TelemetryFrame thermal =
      rescaled.slice(train, rescaled.n_samples() - train);
  const PartialPowers full = partition_powers(pm, thermal);

  SocketData sd;
  sd.windows = slice_windows(thermal, cfg.window_len, cfg.window_count);
  sd.powers.reserve(sd.windows.size());
  for (int w = 0; w < cfg.window_count; ++w)
    sd.powers.push_back(full.slice(
        static_cast<Eigen::Index>(w) * cfg.window_len, cfg.window_len));
  return sd;
}

}  // namespace

Eigen::RowVectorXd build_trace_row(const Window& window,
                                   const PartialPowers& powers, int core_id,
                                   int target_len) {
  const TelemetryFrame& f = window.frame;
  const int nc = f.n_cores();
  Eigen::MatrixXd channels(nc + 3, f.n_samples());
  channels.topRows(nc) = powers.per_core;
  channels.row(nc) = powers.uncore.transpose();
  channels.row(nc + 1) = f.core_temps.row(core_id);
  channels.row(nc + 2) = f.pkg_power.transpose();
  const Eigen::MatrixXd down = downsample_trace(channels, target_len);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(nc + 3) * target_len);
  for (int c = 0; c < nc + 3; ++c)
    row.segment(static_cast<Eigen::Index>(c) * target_len, target_len) =
        down.row(c);
  return row;
}

IdentStudyResult run_identification_study(
    const std::vector<TelemetryFrame>& frames,
    const std::vector<PowerModel>& power_models, const PipelineConfig& cfg,
    const StudyOptions& opts) {
  if (frames.empty()) throw DataError("identification study: no frames");
  if (frames.size() != power_models.size())
    throw ConfigError("identification study: one power model per frame required");

  IdentStudyResult out;
  out.n = cfg.n;
  out.n_cores = frames.front().n_cores();
  for (const auto& f : frames)
    if (f.n_cores() != out.n_cores)
      throw DataError("identification study: frames disagree on core count");
  out.trace_channels = out.n_cores + 3;

  for (std::size_t s = 0; s < frames.size(); ++s) {
    KalmanOptions kopt;
    kopt.burn_in = cfg.burn_in;
    // Quantized sensors cannot be trusted below their own cell noise; a
    // sigma_v2 estimate clamped to zero would otherwise turn the predictor
    // into a naive previous-value tracker.
    if (frames[s].temps_quantized)
      kopt.r_floor = std::max(kopt.r_floor,
                              frames[s].quant_step * frames[s].quant_step /
                                  12.0);
    const SocketData sd = prepare_socket(frames[s], power_models[s], cfg);
    const int nc = frames[s].n_cores();
    const Eigen::Index jobs =
        static_cast<Eigen::Index>(nc) * cfg.window_count;
    std::vector<CellResult> cells(static_cast<std::size_t>(jobs));

    parallel_for(jobs, cfg.workers, [&](Eigen::Index i) {
      const int core = static_cast<int>(i) / cfg.window_count;
      const int w = static_cast<int>(i) % cfg.window_count;
      CellResult& cell = cells[static_cast<std::size_t>(i)];
      cell.key = {frames[s].node_id, frames[s].socket_id, core, w};
      const Window win = sd.windows[static_cast<std::size_t>(w)].with_core(core);
      try {
        auto [model, diag] =
            identify(win, sd.powers[static_cast<std::size_t>(w)], core, cfg.n,
                     cfg.q);
        cell.ok = true;
        cell.cond_r = diag.cond_r;
        cell.model = std::move(model);
        cell.diag = std::move(diag);
        cell.ident_f = ident_features(cell.diag, cell.model).values;
      } catch (const ExcitationDeficient& e) {
        cell.error = e.what();
        cell.cond_r = e.cond_r;
        cell.ident_f = ident_features_deficient(cfg.n).values;
      } catch (const std::exception& e) {
        cell.error = e.what();
        cell.ident_f = ident_features_deficient(cfg.n).values;
      }
      cell.trace_f =
          trace_features(win, sd.powers[static_cast<std::size_t>(w)], core)
              .values;
      if (opts.collect_traces)
        cell.trace_row =
            build_trace_row(win, sd.powers[static_cast<std::size_t>(w)], core,
                            cfg.cnn_input_len);
    });

    if (opts.score) {
      parallel_for(jobs, cfg.workers, [&](Eigen::Index i) {
        CellResult& cell = cells[static_cast<std::size_t>(i)];
        if (!cell.ok) return;
        try {
          const auto [mean_err, err_std] =
              score_model(cell.model, sd.windows, sd.powers, cell.key.core,
                          kopt);
          cell.mean_err = mean_err;
          cell.err_std = err_std;
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error = std::string("scoring failed: ") + e.what();
        }
      });
    }

    for (auto& cell : cells) out.cells.push_back(std::move(cell));
  }

  if (opts.label) label_cells(out, cfg.thresholds);
  for (const auto& cell : out.cells)
    if (!cell.ok) ++out.failed_cells;
  return out;
}

void score_cells(IdentStudyResult& study,
                 const std::vector<TelemetryFrame>& frames,
                 const std::vector<PowerModel>& power_models,
                 const PipelineConfig& cfg) {
  if (frames.size() != power_models.size())
    throw ConfigError("score: one power model per frame required");
  std::map<std::pair<std::string, int>, std::size_t> frame_index;
  for (std::size_t i = 0; i < frames.size(); ++i)
    frame_index[{frames[i].node_id, frames[i].socket_id}] = i;

  // Group cells per socket so each socket's windows are prepared once.
  std::map<std::size_t, std::vector<Eigen::Index>> by_socket;
  for (std::size_t i = 0; i < study.cells.size(); ++i) {
    const auto& key = study.cells[i].key;
    const auto it = frame_index.find({key.node, key.socket});
    if (it == frame_index.end())
      throw DataError("score: no telemetry for cell " + key.node + "/" +
                      std::to_string(key.socket));
    by_socket[it->second].push_back(static_cast<Eigen::Index>(i));
  }

  for (const auto& [fidx, cell_ids] : by_socket) {
    KalmanOptions kopt;
    kopt.burn_in = cfg.burn_in;
    if (frames[fidx].temps_quantized)
      kopt.r_floor = std::max(kopt.r_floor,
                              frames[fidx].quant_step *
                                  frames[fidx].quant_step / 12.0);
    const SocketData sd = prepare_socket(frames[fidx], power_models[fidx], cfg);
    parallel_for(static_cast<Eigen::Index>(cell_ids.size()), cfg.workers,
                 [&](Eigen::Index j) {
                   CellResult& cell = study.cells[static_cast<std::size_t>(
                       cell_ids[static_cast<std::size_t>(j)])];
                   if (!cell.ok) return;
                   try {
                     const auto [mean_err, err_std] =
                         score_model(cell.model, sd.windows, sd.powers,
                                     cell.key.core, kopt);
                     cell.mean_err = mean_err;
                     cell.err_std = err_std;
                   } catch (const std::exception& e) {
                     cell.ok = false;
                     cell.error = std::string("scoring failed: ") + e.what();
                   }
                 });
  }
  study.failed_cells = 0;
  for (const auto& cell : study.cells)
    if (!cell.ok) ++study.failed_cells;
}

void label_cells(IdentStudyResult& study, const LabelThresholds& thr) {
  for (auto& cell : study.cells) {
    if (cell.ok) {
      cell.label = label_window(cell.mean_err, cell.err_std, cell.diag.poles,
                                thr);
    } else {
      cell.label = WindowLabel{};
      cell.label.label = LabelClass::bad;
      cell.label.mean_err = cell.mean_err;
      cell.label.err_std = cell.err_std;
    }
  }
}

void attach_traces(IdentStudyResult& study,
                   const std::vector<TelemetryFrame>& frames,
                   const std::vector<PowerModel>& power_models,
                   const PipelineConfig& cfg) {
  if (frames.size() != power_models.size())
    throw ConfigError("attach_traces: one power model per frame required");
  std::map<std::pair<std::string, int>, std::size_t> frame_index;
  for (std::size_t i = 0; i < frames.size(); ++i)
    frame_index[{frames[i].node_id, frames[i].socket_id}] = i;

  std::map<std::size_t, std::vector<Eigen::Index>> by_socket;
  for (std::size_t i = 0; i < study.cells.size(); ++i) {
    const auto& key = study.cells[i].key;
    const auto it = frame_index.find({key.node, key.socket});
    if (it == frame_index.end())
      throw DataError("attach_traces: no telemetry for cell " + key.node +
                      "/" + std::to_string(key.socket));
    by_socket[it->second].push_back(static_cast<Eigen::Index>(i));
  }

  study.trace_channels = study.n_cores + 3;
  for (const auto& [fidx, cell_ids] : by_socket) {
    const SocketData sd = prepare_socket(frames[fidx], power_models[fidx], cfg);
    parallel_for(
        static_cast<Eigen::Index>(cell_ids.size()), cfg.workers,
        [&](Eigen::Index j) {
          CellResult& cell = study.cells[static_cast<std::size_t>(
              cell_ids[static_cast<std::size_t>(j)])];
          const int w = cell.key.window;
          if (w < 0 || w >= static_cast<int>(sd.windows.size()))
            throw DataError("attach_traces: window index out of range");
          cell.trace_row = build_trace_row(
              sd.windows[static_cast<std::size_t>(w)].with_core(cell.key.core),
              sd.powers[static_cast<std::size_t>(w)], cell.key.core,
              cfg.cnn_input_len);
        });
  }
}

}  // namespace coretherm
