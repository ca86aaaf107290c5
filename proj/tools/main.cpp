// coretherm command-line pipeline. Every stage reads and writes plain files
// so studies are resumable; exit codes: 0 ok, 2 configuration error,
// 3 data error, 4 study completed with recorded cell failures.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "coretherm/csv.hpp"
#include "coretherm/pipeline.hpp"
#include "coretherm/serialize.hpp"

namespace fs = std::filesystem;
using namespace coretherm;

namespace {

int g_exit_code = 0;

void add_framing_options(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--sample-period", cfg.sample_period, "sampling time, s")
      ->envname("CORETHERM_SAMPLE_PERIOD");
  cmd->add_option("--power-train-days", cfg.power_train_days,
                  "power-model training span, days")
      ->envname("CORETHERM_POWER_TRAIN_DAYS");
  cmd->add_option("--power-train-samples", cfg.power_train_samples,
                  "power-model training span, samples (overrides days)")
      ->envname("CORETHERM_POWER_TRAIN_SAMPLES");
  cmd->add_option("--window-len", cfg.window_len, "window length, samples")
      ->envname("CORETHERM_WINDOW_LEN");
  cmd->add_option("--window-count", cfg.window_count, "windows per core")
      ->envname("CORETHERM_WINDOW_COUNT");
  cmd->add_option("--order-n", cfg.n, "ARX model order")
      ->envname("CORETHERM_ORDER_N");
  cmd->add_option("--lag-q", cfg.q, "instrumental lag depth")
      ->envname("CORETHERM_LAG_Q");
  cmd->add_option("--burn-in", cfg.burn_in,
                  "innovations skipped per window in error statistics")
      ->envname("CORETHERM_BURN_IN");
  cmd->add_option("--workers", cfg.workers, "worker threads for cell studies")
      ->envname("CORETHERM_WORKERS");
}

void add_threshold_options(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--err-thresh", cfg.thresholds.err_good,
                  "good-label mean error bound, degC");
  cmd->add_option("--err-std-thresh", cfg.thresholds.err_std_good,
                  "good-label error std bound, degC");
  cmd->add_option("--pole-thresh", cfg.thresholds.pole_floor,
                  "good-label minimum pole");
  cmd->add_option("--err-excl-hi", cfg.thresholds.err_excl_hi,
                  "exclusion band upper mean error, degC");
  cmd->add_option("--err-std-excl-hi", cfg.thresholds.err_std_excl_hi,
                  "exclusion band upper error std, degC");
}

nlohmann::json truth_to_json(const SynthStudyData& data) {
  nlohmann::json sockets = nlohmann::json::array();
  for (std::size_t s = 0; s < data.truths.size(); ++s) {
    const auto& truth = data.truths[s];
    nlohmann::json cores = nlohmann::json::array();
    for (const auto& core : truth.cores) {
      nlohmann::json a = nlohmann::json::array();
      for (Eigen::Index i = 0; i < core.a.size(); ++i) a.push_back(core.a(i));
      nlohmann::json b = nlohmann::json::array();
      for (Eigen::Index r = 0; r < core.b.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < core.b.cols(); ++c)
          row.push_back(core.b(r, c));
        b.push_back(std::move(row));
      }
      cores.push_back({{"a", a}, {"b", b}});
    }
    sockets.push_back({{"node", data.frames[s].node_id},
                       {"socket", data.frames[s].socket_id},
                       {"ambient_c", truth.ambient_c},
                       {"sigma_w2", truth.sigma_w2},
                       {"cores", cores},
                       {"power_model",
                        power_model_to_json(data.power_truths[s])}});
  }
  return {{"sockets", sockets}};
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "svm") return Algorithm::svm_rbf;
  if (s == "mlp") return Algorithm::mlp_features;
  if (s == "cnn") return Algorithm::cnn_trace;
  throw ConfigError("unknown algorithm '" + s + "' (svm, mlp, cnn)");
}

FeatureSet parse_feature_set(const std::string& s) {
  if (s == "trace") return FeatureSet::trace;
  if (s == "ident") return FeatureSet::ident;
  throw ConfigError("unknown feature set '" + s + "' (trace, ident)");
}

void setup_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth",
                                 "generate a synthetic telemetry corpus");
  auto spec = std::make_shared<SynthStudySpec>();
  auto out = std::make_shared<std::string>();
  auto kinds_out = std::make_shared<std::string>();
  auto truth_out = std::make_shared<std::string>();
  auto workload = std::make_shared<std::string>();
  cmd->add_option("--out", *out, "telemetry csv path")->required();
  cmd->add_option("--kinds-out", *kinds_out, "per-window workload kinds csv");
  cmd->add_option("--truth-out", *truth_out, "ground-truth sidecar json");
  cmd->add_option("--seed", spec->seed, "generator seed")->required();
  cmd->add_option("--sockets", spec->n_sockets, "socket count");
  cmd->add_option("--cores", spec->n_cores, "cores per socket");
  cmd->add_option("--windows", spec->window_count, "windows per core");
  cmd->add_option("--window-len", spec->window_len, "window length, samples");
  cmd->add_option("--power-train-samples", spec->power_train_samples,
                  "power-model training prefix, samples");
  cmd->add_option("--quant-step", spec->quant_step,
                  "temperature quantization step, degC (0 disables)");
  cmd->add_option("--sigma-w2", spec->sigma_w2, "process noise variance");
  cmd->add_option("--metric-jitter", spec->metric_jitter,
                  "counter jitter stddev, rescaled units");
  cmd->add_option("--pkg-noise", spec->pkg_noise_w,
                  "package power measurement noise, W");
  cmd->add_option("--pole-lo", spec->pole_lo, "slowest truth pole");
  cmd->add_option("--pole-hi", spec->pole_hi, "fastest truth pole");
  cmd->add_option("--mix-prbs", spec->mix.prbs, "workload mix weight");
  cmd->add_option("--mix-constant", spec->mix.constant, "workload mix weight");
  cmd->add_option("--mix-sinusoid", spec->mix.sinusoid, "workload mix weight");
  cmd->add_option("--mix-steps", spec->mix.job_steps, "workload mix weight");
  cmd->add_option("--workload", *workload,
                  "force one workload kind for every window");
  cmd->callback([=] {
    if (!workload->empty()) {
      spec->mix = {0.0, 0.0, 0.0, 0.0};
      switch (workload_kind_from_name(*workload)) {
        case WorkloadKind::prbs: spec->mix.prbs = 1.0; break;
        case WorkloadKind::constant: spec->mix.constant = 1.0; break;
        case WorkloadKind::sinusoid: spec->mix.sinusoid = 1.0; break;
        case WorkloadKind::job_steps: spec->mix.job_steps = 1.0; break;
      }
    }
    const SynthStudyData data = gen_synth_study(*spec);
    export_telemetry_csv(data.frames, *out);
    if (!kinds_out->empty()) export_workload_kinds_csv(data, *kinds_out);
    if (!truth_out->empty())
      save_model_json(*truth_out, "synth_truth", truth_to_json(data));
    std::printf("wrote %zu sockets x %d cores x %d windows to %s\n",
                data.frames.size(), spec->n_cores, spec->window_count,
                out->c_str());
  });
}

void setup_fit_power(CLI::App& app) {
  auto* cmd = app.add_subcommand("fit-power",
                                 "fit per-socket package power models");
  auto cfg = std::make_shared<PipelineConfig>();
  auto telemetry = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto allow_deficient = std::make_shared<bool>(false);
  cmd->add_option("--telemetry", *telemetry, "telemetry csv")->required();
  cmd->add_option("--out", *out, "power model file")->required();
  cmd->add_flag("--allow-rank-deficient", *allow_deficient,
                "zero deficient columns instead of failing");
  add_framing_options(cmd, *cfg);
  cmd->callback([=] {
    const auto frames = ingest_csv_frames(*telemetry);
    const auto models = fit_power_models(frames, *cfg, *allow_deficient);
    write_power_models(frames, models, *out);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const TelemetryFrame rescaled = rescale_metrics(frames[i], cfg->bounds);
      const Eigen::VectorXd err =
          (predict_package(models[i], rescaled) - rescaled.pkg_power)
              .cwiseAbs();
      const double n = static_cast<double>(err.size());
      const double lo =
          100.0 * (err.array() < cfg->power_thresh_lo).count() / n;
      const double hi =
          100.0 * (err.array() < cfg->power_thresh_hi).count() / n;
      std::printf("%s/%d: %.1f%% of samples within %.2f W, %.1f%% within %.2f W\n",
                  frames[i].node_id.c_str(), frames[i].socket_id, lo,
                  cfg->power_thresh_lo, hi, cfg->power_thresh_hi);
    }
  });
}

void setup_identify(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "identify", "identify per-core ARX models on every window");
  auto cfg = std::make_shared<PipelineConfig>();
  auto telemetry = std::make_shared<std::string>();
  auto power = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  cmd->add_option("--telemetry", *telemetry, "telemetry csv")->required();
  cmd->add_option("--power", *power, "power model file")->required();
  cmd->add_option("--out-dir", *out_dir, "study directory")->required();
  add_framing_options(cmd, *cfg);
  cmd->callback([=] {
    const auto frames = ingest_csv_frames(*telemetry);
    const auto models = load_power_models(*power, frames);
    StudyOptions opts;
    opts.score = false;
    opts.label = false;
    const IdentStudyResult study =
        run_identification_study(frames, models, *cfg, opts);
    fs::create_directories(*out_dir);
    write_arx_models(study, *out_dir + "/arx_models.json");
    write_trace_features_csv(study, *out_dir + "/features_trace.csv");
    write_ident_features_csv(study, *out_dir + "/features_ident.csv");
    std::printf("identified %zu cells, %ld failed\n", study.cells.size(),
                study.failed_cells);
    if (study.failed_cells > 0) g_exit_code = 4;
  });
}

void setup_score(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "score", "cross-validate every identified model on all windows");
  auto cfg = std::make_shared<PipelineConfig>();
  auto telemetry = std::make_shared<std::string>();
  auto power = std::make_shared<std::string>();
  auto models_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--telemetry", *telemetry, "telemetry csv")->required();
  cmd->add_option("--power", *power, "power model file")->required();
  cmd->add_option("--models", *models_path, "arx_models.json")->required();
  cmd->add_option("--out", *out, "scores csv")->required();
  add_framing_options(cmd, *cfg);
  cmd->callback([=] {
    const auto frames = ingest_csv_frames(*telemetry);
    const auto pms = load_power_models(*power, frames);
    IdentStudyResult study = load_arx_models(*models_path);
    score_cells(study, frames, pms, *cfg);
    write_scores_csv(study, *out);
    std::printf("scored %zu cells, %ld failed\n", study.cells.size(),
                study.failed_cells);
    if (study.failed_cells > 0) g_exit_code = 4;
  });
}

void setup_label(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "label", "apply the good/bad/excluded thresholds to scored cells");
  auto cfg = std::make_shared<PipelineConfig>();
  auto scores = std::make_shared<std::string>();
  auto models_path = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  cmd->add_option("--scores", *scores, "scores csv")->required();
  cmd->add_option("--models", *models_path, "arx_models.json")->required();
  cmd->add_option("--out-dir", *out_dir, "study directory")->required();
  add_threshold_options(cmd, *cfg);
  cmd->callback([=] {
    IdentStudyResult study = load_arx_models(*models_path);
    apply_scores_csv(study, *scores);
    label_cells(study, cfg->thresholds);
    fs::create_directories(*out_dir);
    write_labels_csv(study, *out_dir + "/labels.csv");
    write_fig4_csv(study, *out_dir + "/fig4_window_errors.csv");
    write_fig7_csv(study, *out_dir + "/fig7_scatter.csv");
    long good = 0, bad = 0, excluded = 0;
    for (const auto& cell : study.cells) {
      if (cell.label.label == LabelClass::good) ++good;
      else if (cell.label.label == LabelClass::bad) ++bad;
      else ++excluded;
    }
    std::printf("labels: %ld good, %ld bad, %ld excluded\n", good, bad,
                excluded);
  });
}

void setup_train_classifier(CLI::App& app) {
  auto* cmd = app.add_subcommand("train-classifier",
                                 "train one window classifier");
  auto cfg = std::make_shared<PipelineConfig>();
  auto alg = std::make_shared<std::string>();
  auto feats = std::make_shared<std::string>();
  auto labels = std::make_shared<std::string>();
  auto trace_csv = std::make_shared<std::string>();
  auto ident_csv = std::make_shared<std::string>();
  auto telemetry = std::make_shared<std::string>();
  auto power = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--algorithm", *alg, "svm | mlp | cnn")->required();
  cmd->add_option("--features", *feats, "trace | ident")->required();
  cmd->add_option("--labels", *labels, "labels csv")->required();
  cmd->add_option("--features-trace", *trace_csv, "trace features csv")
      ->required();
  cmd->add_option("--features-ident", *ident_csv, "ident features csv")
      ->required();
  cmd->add_option("--telemetry", *telemetry, "telemetry csv (cnn only)");
  cmd->add_option("--power", *power, "power model file (cnn only)");
  cmd->add_option("--out", *out, "classifier model file")->required();
  cmd->add_option("--seed", cfg->seed, "split/training seed")->required();
  cmd->add_option("--train-frac", cfg->train_fraction, "training fraction");
  cmd->add_option("--min-corpus", cfg->min_corpus, "minimum labeled windows");
  add_framing_options(cmd, *cfg);
  cmd->callback([=] {
    const Algorithm algorithm = parse_algorithm(*alg);
    const FeatureSet fs_kind = parse_feature_set(*feats);
    IdentStudyResult corpus =
        load_corpus_from_files(*labels, *trace_csv, *ident_csv);
    if (static_cast<Eigen::Index>(corpus.cells.size()) < cfg->min_corpus)
      throw ConfigError("corpus has " + std::to_string(corpus.cells.size()) +
                        " windows, need at least " +
                        std::to_string(cfg->min_corpus));
    if (algorithm == Algorithm::cnn_trace) {
      if (telemetry->empty() || power->empty())
        throw ConfigError("cnn training needs --telemetry and --power");
      const auto frames = ingest_csv_frames(*telemetry);
      const auto pms = load_power_models(*power, frames);
      attach_traces(corpus, frames, pms, *cfg);
    }
    const SplitIndices split =
        split_corpus(corpus, cfg->train_fraction, cfg->seed);
    TrainConfig tc = make_train_config(algorithm, fs_kind, *cfg);

    Eigen::MatrixXd x(static_cast<Eigen::Index>(split.train.size()), 0);
    Eigen::VectorXd y(static_cast<Eigen::Index>(split.train.size()));
    for (std::size_t i = 0; i < split.train.size(); ++i)
      y(static_cast<Eigen::Index>(i)) =
          corpus.cells[static_cast<std::size_t>(split.train[i])].label.label ==
                  LabelClass::good
              ? 1.0
              : 0.0;
    const auto fill = [&](auto pick) {
      const Eigen::VectorXd first =
          pick(corpus.cells[static_cast<std::size_t>(split.train[0])]);
      x.resize(static_cast<Eigen::Index>(split.train.size()), first.size());
      for (std::size_t i = 0; i < split.train.size(); ++i) {
        const Eigen::VectorXd row =
            pick(corpus.cells[static_cast<std::size_t>(split.train[i])]);
        x.row(static_cast<Eigen::Index>(i)) = row.transpose();
      }
    };

    TrainOutcome outcome;
    if (algorithm == Algorithm::cnn_trace) {
      fill([](const CellResult& c) {
        return Eigen::VectorXd(c.trace_row.transpose());
      });
      outcome = train_cnn(x, corpus.trace_channels, y, tc);
    } else {
      if (fs_kind == FeatureSet::trace)
        fill([](const CellResult& c) { return c.trace_f; });
      else
        fill([](const CellResult& c) { return c.ident_f; });
      outcome = algorithm == Algorithm::svm_rbf ? train_svm(x, y, tc)
                                                : train_mlp(x, y, tc);
    }
    save_classifier(*outcome.model, *out);
    std::printf("trained %s on %s features: %zu windows, %ld iterations, "
                "final loss %.4f\n",
                alg->c_str(), feats->c_str(), split.train.size(),
                outcome.iterations, outcome.final_loss);
  });
}

void setup_evaluate(CLI::App& app) {
  auto* cmd = app.add_subcommand("evaluate",
                                 "evaluate a classifier on the held-out split");
  auto cfg = std::make_shared<PipelineConfig>();
  auto model_path = std::make_shared<std::string>();
  auto feats = std::make_shared<std::string>();
  auto labels = std::make_shared<std::string>();
  auto trace_csv = std::make_shared<std::string>();
  auto ident_csv = std::make_shared<std::string>();
  auto telemetry = std::make_shared<std::string>();
  auto power = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto ecdf_out = std::make_shared<std::string>();
  auto tau = std::make_shared<double>(0.8);
  cmd->add_option("--model", *model_path, "classifier model file")->required();
  cmd->add_option("--features", *feats, "trace | ident")->required();
  cmd->add_option("--labels", *labels, "labels csv")->required();
  cmd->add_option("--features-trace", *trace_csv, "trace features csv")
      ->required();
  cmd->add_option("--features-ident", *ident_csv, "ident features csv")
      ->required();
  cmd->add_option("--telemetry", *telemetry, "telemetry csv (cnn only)");
  cmd->add_option("--power", *power, "power model file (cnn only)");
  cmd->add_option("--tau", *tau, "decision threshold");
  cmd->add_option("--out", *out, "report csv")->required();
  cmd->add_option("--ecdf-out", *ecdf_out, "error ecdf csv");
  cmd->add_option("--seed", cfg->seed, "split seed (must match training)")
      ->required();
  cmd->add_option("--train-frac", cfg->train_fraction, "training fraction");
  add_framing_options(cmd, *cfg);
  cmd->callback([=] {
    const FeatureSet fs_kind = parse_feature_set(*feats);
    const auto model = load_classifier(*model_path);
    IdentStudyResult corpus =
        load_corpus_from_files(*labels, *trace_csv, *ident_csv);
    if (model->algorithm() == Algorithm::cnn_trace) {
      if (telemetry->empty() || power->empty())
        throw ConfigError("cnn evaluation needs --telemetry and --power");
      const auto frames = ingest_csv_frames(*telemetry);
      const auto pms = load_power_models(*power, frames);
      attach_traces(corpus, frames, pms, *cfg);
    }
    const SplitIndices split =
        split_corpus(corpus, cfg->train_fraction, cfg->seed);

    const bool use_traces = model->algorithm() == Algorithm::cnn_trace;
    Eigen::MatrixXd x;
    Eigen::VectorXd y(static_cast<Eigen::Index>(split.test.size()));
    Eigen::VectorXd err(static_cast<Eigen::Index>(split.test.size()));
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      const auto& cell =
          corpus.cells[static_cast<std::size_t>(split.test[i])];
      const Eigen::VectorXd row =
          use_traces ? Eigen::VectorXd(cell.trace_row.transpose())
                     : (fs_kind == FeatureSet::trace ? cell.trace_f
                                                     : cell.ident_f);
      if (x.size() == 0)
        x.resize(static_cast<Eigen::Index>(split.test.size()), row.size());
      x.row(static_cast<Eigen::Index>(i)) = row.transpose();
      y(static_cast<Eigen::Index>(i)) =
          cell.label.label == LabelClass::good ? 1.0 : 0.0;
      err(static_cast<Eigen::Index>(i)) = cell.mean_err;
    }

    const EvalResult ev = evaluate(*model, x, y, err, *tau);
    write_csv(*out,
              {"algorithm", "feature_set", "tau", "misclassified_good_pct",
               "misclassified_bad_pct", "correct_pct", "unclassified_pct",
               "n_test", "n_classified"},
              {{algorithm_name(model->algorithm()), *feats, fmt_short(*tau),
                fmt_short(ev.report.misclassified_good_pct),
                fmt_short(ev.report.misclassified_bad_pct),
                fmt_short(ev.report.correct_pct),
                fmt_short(ev.report.unclassified_pct),
                std::to_string(ev.report.n_test),
                std::to_string(ev.report.n_classified)}});
    if (!ecdf_out->empty()) {
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < ev.good_call_errors.size(); ++i)
        rows.push_back(
            {fmt_short(ev.good_call_errors[i]),
             fmt_short(static_cast<double>(i + 1) /
                       static_cast<double>(ev.good_call_errors.size()))});
      write_csv(*ecdf_out, {"mean_err", "cum_frac"}, rows);
    }
    std::printf("correct %.2f%%, misclassified good %.2f%%, "
                "misclassified bad %.2f%%, unclassified %.2f%%\n",
                ev.report.correct_pct, ev.report.misclassified_good_pct,
                ev.report.misclassified_bad_pct, ev.report.unclassified_pct);
    if (ev.report.zero_yield)
      std::printf("warning: no window was classified at tau=%.2f\n", *tau);
  });
}

void setup_report(CLI::App& app) {
  auto* cmd = app.add_subcommand("report",
                                 "render SVG charts for a study directory");
  auto study_dir = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  cmd->add_option("--study-dir", *study_dir, "directory with study csvs")
      ->required();
  cmd->add_option("--out-dir", *out_dir, "directory for svg output")
      ->required();
  cmd->callback([=] { render_report(*study_dir, *out_dir); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coretherm: per-core thermal model identification with "
               "excitation-quality window selection"};
  app.require_subcommand(1);
  setup_synth(app);
  setup_fit_power(app);
  setup_identify(app);
  setup_score(app);
  setup_label(app);
  setup_train_classifier(app);
  setup_evaluate(app);
  setup_report(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return g_exit_code;
}
