// Study artifacts on disk, the classifier study, and report rendering.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "coretherm/csv.hpp"
#include "coretherm/pipeline.hpp"
#include "coretherm/serialize.hpp"
#include "coretherm/svg.hpp"

namespace coretherm {

using nlohmann::json;

namespace {

std::string cell_id(const CellKey& k) {
  return k.node + "/" + std::to_string(k.socket) + "/" + std::to_string(k.core) +
         "/" + std::to_string(k.window);
}

std::vector<std::string> key_header() {
  return {"node", "socket", "core", "window"};
}

std::vector<std::string> key_fields(const CellKey& k) {
  return {k.node, std::to_string(k.socket), std::to_string(k.core),
          std::to_string(k.window)};
}

CellKey key_from_row(const CsvTable& t, const std::vector<std::string>& row,
                     int c_node, int c_socket, int c_core, int c_window) {
  (void)t;
  CellKey k;
  k.node = row[static_cast<std::size_t>(c_node)];
  k.socket = std::stoi(row[static_cast<std::size_t>(c_socket)]);
  k.core = std::stoi(row[static_cast<std::size_t>(c_core)]);
  k.window = std::stoi(row[static_cast<std::size_t>(c_window)]);
  return k;
}

}  // namespace

// ------------------------------------------------------- study artifacts

void write_power_models(const std::vector<TelemetryFrame>& frames,
                        const std::vector<PowerModel>& models,
                        const std::string& path) {
  if (frames.size() != models.size())
    throw ConfigError("write_power_models: frame/model count mismatch");
  json entries = json::array();
  for (std::size_t i = 0; i < models.size(); ++i)
    entries.push_back({{"node", frames[i].node_id},
                       {"socket", frames[i].socket_id},
                       {"model", power_model_to_json(models[i])}});
  save_model_json(path, "power_model_set", {{"models", entries}});
}

std::vector<PowerModel> load_power_models(
    const std::string& path, const std::vector<TelemetryFrame>& frames) {
  const json payload = load_model_json(path, "power_model_set");
  std::map<std::pair<std::string, int>, PowerModel> by_key;
  for (const auto& entry : payload.at("models"))
    by_key[{entry.at("node").get<std::string>(),
            entry.at("socket").get<int>()}] =
        power_model_from_json(entry.at("model"));
  std::vector<PowerModel> out;
  out.reserve(frames.size());
  for (const auto& frame : frames) {
    const auto it = by_key.find({frame.node_id, frame.socket_id});
    if (it == by_key.end())
      throw DataError("no power model for " + frame.node_id + "/" +
                      std::to_string(frame.socket_id) + " in " + path);
    out.push_back(it->second);
  }
  return out;
}

void write_arx_models(const IdentStudyResult& study, const std::string& path) {
  json cells = json::array();
  for (const auto& cell : study.cells) {
    json jc = {{"node", cell.key.node},     {"socket", cell.key.socket},
               {"core", cell.key.core},     {"window", cell.key.window},
               {"status", cell.ok ? "ok" : "excitation_deficient"},
               {"cond_r", std::isfinite(cell.cond_r) ? cell.cond_r : 1e18}};
    if (!cell.ok) jc["error"] = cell.error;
    if (cell.ok) {
      jc["model"] = arx_model_to_json(cell.model);
      jc["diagnostics"] = ident_diagnostics_to_json(cell.diag);
    }
    cells.push_back(std::move(jc));
  }
  save_model_json(path, "arx_model_set",
                  {{"n", study.n},
                   {"n_cores", study.n_cores},
                   {"cells", cells}});
}

IdentStudyResult load_arx_models(const std::string& path) {
  const json payload = load_model_json(path, "arx_model_set");
  IdentStudyResult study;
  study.n = payload.at("n").get<int>();
  study.n_cores = payload.at("n_cores").get<int>();
  study.trace_channels = study.n_cores + 3;
  for (const auto& jc : payload.at("cells")) {
    CellResult cell;
    cell.key = {jc.at("node").get<std::string>(), jc.at("socket").get<int>(),
                jc.at("core").get<int>(), jc.at("window").get<int>()};
    cell.ok = jc.at("status").get<std::string>() == "ok";
    cell.cond_r = jc.at("cond_r").get<double>();
    if (cell.ok) {
      cell.model = arx_model_from_json(jc.at("model"));
      cell.diag = ident_diagnostics_from_json(jc.at("diagnostics"));
      cell.ident_f = ident_features(cell.diag, cell.model).values;
    } else {
      cell.error = jc.value("error", "");
      cell.ident_f = ident_features_deficient(study.n).values;
      ++study.failed_cells;
    }
    study.cells.push_back(std::move(cell));
  }
  return study;
}

void write_scores_csv(const IdentStudyResult& study, const std::string& path) {
  auto header = key_header();
  header.insert(header.end(), {"status", "mean_abs_err", "err_std"});
  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : study.cells) {
    auto row = key_fields(cell.key);
    row.push_back(cell.ok ? "ok" : "excitation_deficient");
    row.push_back(fmt_short(cell.mean_err));
    row.push_back(fmt_short(cell.err_std));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void apply_scores_csv(IdentStudyResult& study, const std::string& path) {
  const CsvTable t = read_csv(path);
  const int c_node = t.require_column("node");
  const int c_socket = t.require_column("socket");
  const int c_core = t.require_column("core");
  const int c_window = t.require_column("window");
  const int c_err = t.require_column("mean_abs_err");
  const int c_std = t.require_column("err_std");
  std::map<std::string, std::pair<double, double>> scores;
  for (const auto& row : t.rows)
    scores[cell_id(key_from_row(t, row, c_node, c_socket, c_core, c_window))] =
        {std::strtod(row[static_cast<std::size_t>(c_err)].c_str(), nullptr),
         std::strtod(row[static_cast<std::size_t>(c_std)].c_str(), nullptr)};
  for (auto& cell : study.cells) {
    const auto it = scores.find(cell_id(cell.key));
    if (it == scores.end())
      throw DataError("scores file is missing cell " + cell_id(cell.key));
    cell.mean_err = it->second.first;
    cell.err_std = it->second.second;
  }
}

void write_labels_csv(const IdentStudyResult& study, const std::string& path) {
  auto header = key_header();
  header.insert(header.end(), {"label", "mean_err", "err_std",
                               "max_pole_modulus", "poles_real_stable"});
  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : study.cells) {
    auto row = key_fields(cell.key);
    row.push_back(label_name(cell.label.label));
    row.push_back(fmt_short(cell.label.mean_err));
    row.push_back(fmt_short(cell.label.err_std));
    row.push_back(fmt_short(cell.label.max_pole_modulus));
    row.push_back(cell.label.poles_real_stable ? "1" : "0");
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

namespace {

void write_features_csv(const IdentStudyResult& study,
                        const std::vector<std::string>& names,
                        const std::function<const Eigen::VectorXd&(
                            const CellResult&)>& pick,
                        const std::string& path) {
  auto header = key_header();
  header.insert(header.end(), names.begin(), names.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : study.cells) {
    auto row = key_fields(cell.key);
    const Eigen::VectorXd& v = pick(cell);
    if (v.size() != static_cast<Eigen::Index>(names.size()))
      throw DataError("feature width mismatch for cell " + cell_id(cell.key));
    for (Eigen::Index i = 0; i < v.size(); ++i)
      row.push_back(fmt_full(v(i)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace

void write_trace_features_csv(const IdentStudyResult& study,
                              const std::string& path) {
  write_features_csv(
      study, trace_feature_names(study.n_cores),
      [](const CellResult& c) -> const Eigen::VectorXd& { return c.trace_f; },
      path);
}

void write_ident_features_csv(const IdentStudyResult& study,
                              const std::string& path) {
  write_features_csv(
      study, ident_feature_names(study.n),
      [](const CellResult& c) -> const Eigen::VectorXd& { return c.ident_f; },
      path);
}

void write_fig4_csv(const IdentStudyResult& study, const std::string& path) {
  // Mean error across a socket's cores, per identification window.
  std::map<std::pair<std::string, int>, std::map<int, std::pair<double, int>>>
      agg;
  for (const auto& cell : study.cells) {
    if (!cell.ok || !std::isfinite(cell.mean_err)) continue;
    auto& slot = agg[{cell.key.node, cell.key.socket}][cell.key.window];
    slot.first += cell.mean_err;
    slot.second += 1;
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& [key, windows] : agg)
    for (const auto& [w, acc] : windows)
      rows.push_back({key.first, std::to_string(key.second), std::to_string(w),
                      fmt_short(acc.first / acc.second)});
  write_csv(path, {"node", "socket", "window", "mean_err_across_cores"}, rows);
}

void write_fig7_csv(const IdentStudyResult& study, const std::string& path) {
  auto header = key_header();
  header.insert(header.end(),
                {"log10_cond_r", "max_pole_modulus", "mean_abs_err", "label"});
  std::vector<std::vector<std::string>> rows;
  for (const auto& cell : study.cells) {
    auto row = key_fields(cell.key);
    const double cond =
        std::min(std::isfinite(cell.cond_r) ? cell.cond_r : 1e18, 1e18);
    row.push_back(fmt_short(std::log10(std::max(cond, 1.0))));
    row.push_back(fmt_short(cell.label.max_pole_modulus));
    row.push_back(fmt_short(cell.mean_err));
    row.push_back(label_name(cell.label.label));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

// ------------------------------------------------------- classifier study

SplitIndices split_corpus(const IdentStudyResult& study, double train_fraction,
                          std::uint64_t seed) {
  const Eigen::Index n = static_cast<Eigen::Index>(study.cells.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(0, i))]);

  SplitIndices split;
  const Eigen::Index n_train =
      static_cast<Eigen::Index>(std::floor(train_fraction * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index idx = order[static_cast<std::size_t>(i)];
    if (i < n_train) {
      if (study.cells[static_cast<std::size_t>(idx)].label.label !=
          LabelClass::excluded)
        split.train.push_back(idx);
    } else {
      split.test.push_back(idx);
    }
  }
  return split;
}

namespace {

Eigen::MatrixXd gather_features(const IdentStudyResult& study,
                                const std::vector<Eigen::Index>& idx,
                                FeatureSet fs, bool traces) {
  if (idx.empty()) throw DataError("classifier study: empty split");
  const auto& first = study.cells[static_cast<std::size_t>(idx.front())];
  const Eigen::Index width =
      traces ? first.trace_row.size()
             : (fs == FeatureSet::trace ? first.trace_f.size()
                                        : first.ident_f.size());
  if (width == 0)
    throw DataError("classifier study: traces were not collected");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& cell = study.cells[static_cast<std::size_t>(idx[r])];
    const Eigen::VectorXd& v =
        fs == FeatureSet::trace ? cell.trace_f : cell.ident_f;
    if (traces) {
      if (cell.trace_row.size() != width)
        throw DataError("classifier study: ragged trace rows");
      x.row(static_cast<Eigen::Index>(r)) = cell.trace_row;
    } else {
      if (v.size() != width)
        throw DataError("classifier study: ragged feature rows");
      x.row(static_cast<Eigen::Index>(r)) = v.transpose();
    }
  }
  return x;
}

Eigen::VectorXd gather_labels(const IdentStudyResult& study,
                              const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    y(static_cast<Eigen::Index>(r)) =
        study.cells[static_cast<std::size_t>(idx[r])].label.label ==
                LabelClass::good
            ? 1.0
            : 0.0;
  return y;
}

Eigen::VectorXd gather_mean_err(const IdentStudyResult& study,
                                const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    e(static_cast<Eigen::Index>(r)) =
        study.cells[static_cast<std::size_t>(idx[r])].mean_err;
  return e;
}

std::uint64_t model_seed(std::uint64_t seed, Algorithm alg, FeatureSet fs) {
  const std::uint64_t tag =
      (static_cast<std::uint64_t>(alg) + 1) * 0x100000001B3ull +
      (fs == FeatureSet::trace ? 17 : 41);
  return seed ^ tag;
}

}  // namespace

TrainConfig make_train_config(Algorithm alg, FeatureSet fs,
                              const PipelineConfig& cfg) {
  TrainConfig tc;
  tc.algorithm = alg;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.threshold_patience = cfg.threshold_patience;
  tc.cnn_input_len = cfg.cnn_input_len;
  tc.seed = model_seed(cfg.seed, alg, fs);
  if (alg == Algorithm::mlp_features) {
    tc.weight_decay = cfg.mlp_weight_decay;
    if (fs == FeatureSet::trace) {
      tc.max_iterations = cfg.mlp_trace_iterations;
      tc.loss_threshold = -1.0;
    } else {
      tc.max_iterations = cfg.mlp_ident_max_iterations;
      tc.loss_threshold = cfg.mlp_ident_loss_threshold;
    }
  } else if (alg == Algorithm::cnn_trace) {
    tc.weight_decay = cfg.cnn_weight_decay;
    tc.max_iterations = cfg.cnn_max_iterations;
    tc.loss_threshold = cfg.cnn_loss_threshold;
  }
  return tc;
}

ClassifierStudyResult run_classifier_study(const IdentStudyResult& study,
                                           const PipelineConfig& cfg) {
  if (static_cast<Eigen::Index>(study.cells.size()) < cfg.min_corpus)
    throw ConfigError(
        "classifier study: corpus has " + std::to_string(study.cells.size()) +
        " labeled windows, need at least " + std::to_string(cfg.min_corpus) +
        "; generate more sockets/windows first");

  const SplitIndices split =
      split_corpus(study, cfg.train_fraction, cfg.seed);

  ClassifierStudyResult res;
  res.n_train = static_cast<Eigen::Index>(split.train.size());
  res.n_test = static_cast<Eigen::Index>(split.test.size());

  const Eigen::VectorXd y_train = gather_labels(study, split.train);
  const Eigen::VectorXd y_test = gather_labels(study, split.test);
  const Eigen::VectorXd err_test = gather_mean_err(study, split.test);

  struct Plan {
    Algorithm alg;
    FeatureSet fs;
    std::string name;
  };
  const std::vector<Plan> plans = {
      {Algorithm::svm_rbf, FeatureSet::trace, "svm_trace"},
      {Algorithm::mlp_features, FeatureSet::trace, "mlp_trace"},
      {Algorithm::cnn_trace, FeatureSet::trace, "cnn_trace"},
      {Algorithm::svm_rbf, FeatureSet::ident, "svm_ident"},
      {Algorithm::mlp_features, FeatureSet::ident, "mlp_ident"},
  };

  for (const auto& plan : plans) {
    const TrainConfig tc = make_train_config(plan.alg, plan.fs, cfg);
    const bool use_traces = plan.alg == Algorithm::cnn_trace;
    const Eigen::MatrixXd x_train =
        gather_features(study, split.train, plan.fs, use_traces);
    const Eigen::MatrixXd x_test =
        gather_features(study, split.test, plan.fs, use_traces);

    const auto t0 = std::chrono::steady_clock::now();
    TrainOutcome outcome;
    switch (plan.alg) {
      case Algorithm::svm_rbf:
        outcome = train_svm(x_train, y_train, tc);
        break;
      case Algorithm::mlp_features:
        outcome = train_mlp(x_train, y_train, tc);
        break;
      case Algorithm::cnn_trace:
        outcome = train_cnn(x_train, study.trace_channels, y_train, tc);
        break;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    for (double tau : {0.5, 0.8}) {
      const EvalResult ev =
          evaluate(*outcome.model, x_test, y_test, err_test, tau);
      ClassifierStudyRow row;
      row.algorithm = plan.name;
      row.feature_set = feature_set_name(plan.fs);
      row.tau = tau;
      row.report = ev.report;
      row.good_call_errors = ev.good_call_errors;
      row.iterations = outcome.iterations;
      row.train_seconds = seconds;
      res.rows.push_back(std::move(row));
    }
    res.models.emplace_back(plan.name, std::move(outcome.model));
  }
  return res;
}

void write_table4_csv(const ClassifierStudyResult& res,
                      const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : res.rows)
    rows.push_back({r.algorithm, r.feature_set, fmt_short(r.tau),
                    fmt_short(r.report.misclassified_good_pct),
                    fmt_short(r.report.misclassified_bad_pct),
                    fmt_short(r.report.correct_pct),
                    fmt_short(r.report.unclassified_pct),
                    std::to_string(r.report.n_test),
                    std::to_string(r.report.n_classified),
                    std::to_string(r.iterations)});
  write_csv(path,
            {"algorithm", "feature_set", "tau", "misclassified_good_pct",
             "misclassified_bad_pct", "correct_pct", "unclassified_pct",
             "n_test", "n_classified", "train_iterations"},
            rows);
}

void write_ecdf_csvs(const ClassifierStudyResult& res, const std::string& dir) {
  for (const auto& r : res.rows) {
    std::vector<std::vector<std::string>> rows;
    const auto n = r.good_call_errors.size();
    for (std::size_t i = 0; i < n; ++i)
      rows.push_back({fmt_short(r.good_call_errors[i]),
                      fmt_short(static_cast<double>(i + 1) /
                                static_cast<double>(n))});
    const std::string tau_tag = r.tau == 0.5 ? "05" : "08";
    write_csv(dir + "/ecdf_" + r.algorithm + "_" + tau_tag + ".csv",
              {"mean_err", "cum_frac"}, rows);
  }
}

IdentStudyResult load_corpus_from_files(const std::string& labels_csv,
                                        const std::string& trace_features_csv,
                                        const std::string& ident_features_csv) {
  const CsvTable labels = read_csv(labels_csv);
  const CsvTable trace = read_csv(trace_features_csv);
  const CsvTable ident = read_csv(ident_features_csv);

  const auto key_cols = [](const CsvTable& t) {
    return std::array<int, 4>{t.require_column("node"),
                              t.require_column("socket"),
                              t.require_column("core"),
                              t.require_column("window")};
  };
  const auto lk = key_cols(labels);
  const auto tk = key_cols(trace);
  const auto ik = key_cols(ident);

  const auto feature_rows = [&](const CsvTable& t,
                                const std::array<int, 4>& kc) {
    std::map<std::string, Eigen::VectorXd> out;
    const Eigen::Index width = static_cast<Eigen::Index>(t.header.size()) - 4;
    for (const auto& row : t.rows) {
      Eigen::VectorXd v(width);
      Eigen::Index at = 0;
      for (int col = 0; col < static_cast<int>(t.header.size()); ++col) {
        if (col == kc[0] || col == kc[1] || col == kc[2] || col == kc[3])
          continue;
        v(at++) = std::strtod(row[static_cast<std::size_t>(col)].c_str(),
                              nullptr);
      }
      out[cell_id(key_from_row(t, row, kc[0], kc[1], kc[2], kc[3]))] = v;
    }
    return out;
  };
  const auto trace_rows = feature_rows(trace, tk);
  const auto ident_rows = feature_rows(ident, ik);

  const int c_label = labels.require_column("label");
  const int c_err = labels.require_column("mean_err");
  const int c_std = labels.require_column("err_std");
  const int c_pole = labels.require_column("max_pole_modulus");
  const int c_stable = labels.require_column("poles_real_stable");

  IdentStudyResult study;
  for (const auto& row : labels.rows) {
    CellResult cell;
    cell.key = key_from_row(labels, row, lk[0], lk[1], lk[2], lk[3]);
    const std::string id = cell_id(cell.key);
    const auto t_it = trace_rows.find(id);
    const auto i_it = ident_rows.find(id);
    if (t_it == trace_rows.end() || i_it == ident_rows.end())
      throw DataError("corpus files do not cover cell " + id);
    cell.trace_f = t_it->second;
    cell.ident_f = i_it->second;
    cell.label.label =
        label_from_name(row[static_cast<std::size_t>(c_label)]);
    cell.label.mean_err =
        std::strtod(row[static_cast<std::size_t>(c_err)].c_str(), nullptr);
    cell.label.err_std =
        std::strtod(row[static_cast<std::size_t>(c_std)].c_str(), nullptr);
    cell.label.max_pole_modulus =
        std::strtod(row[static_cast<std::size_t>(c_pole)].c_str(), nullptr);
    cell.label.poles_real_stable =
        row[static_cast<std::size_t>(c_stable)] == "1";
    cell.mean_err = cell.label.mean_err;
    cell.err_std = cell.label.err_std;
    cell.ok = true;
    study.cells.push_back(std::move(cell));
  }
  if (study.cells.empty()) throw DataError("corpus is empty: " + labels_csv);

  // Recover the layout from the feature widths.
  const Eigen::Index trace_width = study.cells.front().trace_f.size();
  const Eigen::Index ident_width = study.cells.front().ident_f.size();
  study.n_cores = static_cast<int>(trace_width / 5) - 3;
  study.trace_channels = study.n_cores + 3;
  study.n = static_cast<int>((ident_width - 8) / 2);
  return study;
}

void save_classifier(const WindowClassifier& model, const std::string& path) {
  save_model_json(path, "classifier", model.to_json());
}

std::unique_ptr<WindowClassifier> load_classifier(const std::string& path) {
  return classifier_from_json(load_model_json(path, "classifier"));
}

// ------------------------------------------------------------------ report

namespace {

double cell_value(const std::vector<std::string>& row, int col) {
  return std::strtod(row[static_cast<std::size_t>(col)].c_str(), nullptr);
}

}  // namespace

void render_report(const std::string& study_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::vector<std::string> palette = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  if (fs::exists(study_dir + "/fig4_window_errors.csv")) {
    const CsvTable t = read_csv(study_dir + "/fig4_window_errors.csv");
    const int c_node = t.require_column("node");
    const int c_socket = t.require_column("socket");
    const int c_window = t.require_column("window");
    const int c_err = t.require_column("mean_err_across_cores");
    std::map<std::string, SvgSeries> series;
    for (const auto& row : t.rows) {
      const std::string key = row[static_cast<std::size_t>(c_node)] + "/" +
                              row[static_cast<std::size_t>(c_socket)];
      auto& s = series[key];
      s.label = series.size() <= 8 ? key : "";
      s.x.push_back(cell_value(row, c_window));
      s.y.push_back(cell_value(row, c_err));
    }
    SvgChart chart;
    chart.title = "Mean temperature error per identification window";
    chart.x_label = "identification window";
    chart.y_label = "mean abs error (degC)";
    chart.h_lines = {1.2};
    int i = 0;
    for (auto& [key, s] : series) {
      s.color = palette[static_cast<std::size_t>(i++) % palette.size()];
      chart.series.push_back(std::move(s));
    }
    write_svg_chart(out_dir + "/fig4_window_errors.svg", chart);
  }

  if (fs::exists(study_dir + "/fig7_scatter.csv")) {
    const CsvTable t = read_csv(study_dir + "/fig7_scatter.csv");
    const int c_cond = t.require_column("log10_cond_r");
    const int c_pole = t.require_column("max_pole_modulus");
    const int c_err = t.require_column("mean_abs_err");
    const int c_label = t.require_column("label");
    const std::map<std::string, std::string> colors = {
        {"good", "#2ca02c"}, {"bad", "#d62728"}, {"excluded", "#7f7f7f"}};
    for (const auto& [x_col, x_name, file] :
         std::vector<std::tuple<int, std::string, std::string>>{
             {c_cond, "log10 cond(R)", "fig7_cond.svg"},
             {c_pole, "max pole modulus", "fig7_pole.svg"}}) {
      SvgChart chart;
      chart.title = "Identification quality vs " + x_name;
      chart.x_label = x_name;
      chart.y_label = "mean abs error (degC)";
      chart.h_lines = {1.2};
      for (const auto& [label, color] : colors) {
        SvgSeries s;
        s.points = true;
        s.color = color;
        s.label = label;
        for (const auto& row : t.rows) {
          if (row[static_cast<std::size_t>(c_label)] != label) continue;
          const double err = cell_value(row, c_err);
          if (!std::isfinite(err) || err > 25.0) continue;  // keep axes sane
          s.x.push_back(cell_value(row, x_col));
          s.y.push_back(err);
        }
        chart.series.push_back(std::move(s));
      }
      write_svg_chart(out_dir + "/" + file, chart);
    }
  }

  // Fig 6 analogs: one chart per feature family with every ECDF found.
  for (const auto& family : {std::string("trace"), std::string("ident")}) {
    SvgChart chart;
    chart.title = "Error ECDF of windows called good (" + family + ")";
    chart.x_label = "mean abs error (degC)";
    chart.y_label = "cumulative fraction";
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(study_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("ecdf_", 0) == 0 &&
          name.find("_" + family) != std::string::npos &&
          entry.path().extension() == ".csv")
        names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    int i = 0;
    for (const auto& name : names) {
      const CsvTable t = read_csv(study_dir + "/" + name);
      const int c_err = t.require_column("mean_err");
      const int c_frac = t.require_column("cum_frac");
      SvgSeries s;
      s.label = name.substr(5, name.size() - 9);
      s.color = palette[static_cast<std::size_t>(i++) % palette.size()];
      for (const auto& row : t.rows) {
        s.x.push_back(cell_value(row, c_err));
        s.y.push_back(cell_value(row, c_frac));
      }
      chart.series.push_back(std::move(s));
    }
    if (!chart.series.empty())
      write_svg_chart(out_dir + "/fig6_" + family + ".svg", chart);
  }
}

}  // namespace coretherm
