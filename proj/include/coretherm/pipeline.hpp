#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coretherm/classify.hpp"
#include "coretherm/features.hpp"
#include "coretherm/kalman.hpp"
#include "coretherm/synth.hpp"

namespace coretherm {

// Paper-default study parameters; synthetic corpora override the framing.
struct PipelineConfig {
  double sample_period = 2.0;
  int power_train_days = 3;
  Eigen::Index power_train_samples = -1;  // < 0: derived from days and period
  Eigen::Index window_len = 21600;        // ~12 h at 2 s
  int window_count = 25;
  int n = 2;
  // Instrument lag depth. The algebraic minimum (Nc+1) q >= (Nc+2) n is far
  // too shallow statistically for thermal time constants of tens of
  // samples; 32 lags keep the covariance solve well conditioned.
  int q = 32;
  LabelThresholds thresholds;
  double power_thresh_lo = 3.23;  // W, the 1 degC equivalent
  double power_thresh_hi = 9.68;  // W, the 3 degC equivalent
  Eigen::Index burn_in = 60;
  int workers = 1;
  ScalingBounds bounds = ScalingBounds::defaults();
  std::uint64_t seed = 1;

  // Classifier settings (paper values where stated).
  double learning_rate = 1e-3;
  double mlp_weight_decay = 1e-4;
  double cnn_weight_decay = 1e-5;
  Eigen::Index batch_size = 128;
  long mlp_trace_iterations = 3000;
  double mlp_ident_loss_threshold = 0.15;
  long mlp_ident_max_iterations = 5000;
  double cnn_loss_threshold = 0.18;
  long cnn_max_iterations = 1000;
  int threshold_patience = 5;
  int cnn_input_len = 2048;
  double train_fraction = 0.8;
  Eigen::Index min_corpus = 200;

  Eigen::Index power_train_len() const;
};

// ------------------------------------------------------------------ synth

struct CorpusWorkloadMix {
  double prbs = 0.35;
  double constant = 0.15;
  double sinusoid = 0.15;
  double job_steps = 0.35;
};

struct SynthStudySpec {
  int n_sockets = 2;
  int n_cores = 4;
  int window_count = 25;
  Eigen::Index window_len = 8192;
  Eigen::Index power_train_samples = 4096;
  double sample_period = 2.0;
  double quant_step = 1.0;
  double sigma_w2 = 1e-4;
  double metric_jitter = 0.003;
  double pkg_noise_w = 1.0;
  CorpusWorkloadMix mix;
  // Probability that a window's workload kind is drawn once for the whole
  // socket (jobs usually span every core); otherwise kinds are drawn per
  // core and a well-excited core can still carry unidentifiable neighbour
  // couplings.
  double node_kind_prob = 0.7;
  // Probability that a window straddles a workload change: the kind
  // switches to a second draw at a random split point, the way real
  // windows cut across job boundaries.
  double straddle_prob = 0.35;
  double idle_w = 2.0;
  double virus_w = 18.0;
  double gain_lo = 0.5;  // degC/W self-coupling range
  double gain_hi = 1.5;
  // Poles kept above the labeling floor and separated enough that
  // well-excited windows can actually land in the good class.
  double pole_lo = 0.86;
  double pole_hi = 0.965;
  double pole_sep_min = 0.06;
  std::uint64_t seed = 1;
};

struct SynthStudyData {
  std::vector<TelemetryFrame> frames;  // per socket, training prefix included
  std::vector<GroundTruthThermal> truths;
  std::vector<PowerModel> power_truths;
  std::vector<Eigen::MatrixXd> true_powers;  // per socket, (Nc+1) x N
  // kinds[socket][core][window]
  std::vector<std::vector<std::vector<WorkloadKind>>> kinds;
};

SynthStudyData gen_synth_study(const SynthStudySpec& spec);

void export_workload_kinds_csv(const SynthStudyData& data,
                               const std::string& path);

// ----------------------------------------------------- identification study

struct CellKey {
  std::string node;
  int socket = 0;
  int core = 0;
  int window = 0;
};

struct CellResult {
  CellKey key;
  bool ok = false;
  std::string error;          // set when !ok
  double cond_r = 0.0;        // carried even for deficient solves
  ArxModel model;             // valid when ok
  IdentDiagnostics diag;      // valid when ok
  double mean_err = std::numeric_limits<double>::infinity();
  double err_std = std::numeric_limits<double>::infinity();
  WindowLabel label;
  Eigen::VectorXd ident_f;
  Eigen::VectorXd trace_f;
  Eigen::RowVectorXd trace_row;  // channel-major CNN input, optional
};

struct StudyOptions {
  bool score = true;
  bool label = true;
  bool collect_traces = false;
};

struct IdentStudyResult {
  std::vector<CellResult> cells;
  long failed_cells = 0;
  int n = 2;
  int n_cores = 0;       // uniform across sockets when nonzero
  int trace_channels = 0;
};

std::vector<PowerModel> fit_power_models(
    const std::vector<TelemetryFrame>& frames, const PipelineConfig& cfg,
    bool allow_rank_deficient = false);

IdentStudyResult run_identification_study(
    const std::vector<TelemetryFrame>& frames,
    const std::vector<PowerModel>& power_models, const PipelineConfig& cfg,
    const StudyOptions& opts = {});

// Fills mean_err / err_std on existing cells (used by the `score` stage).
void score_cells(IdentStudyResult& study,
                 const std::vector<TelemetryFrame>& frames,
                 const std::vector<PowerModel>& power_models,
                 const PipelineConfig& cfg);

void label_cells(IdentStudyResult& study, const LabelThresholds& thr);

void write_power_models(const std::vector<TelemetryFrame>& frames,
                        const std::vector<PowerModel>& models,
                        const std::string& path);
// Returns models aligned to the given frames (matched by node/socket).
std::vector<PowerModel> load_power_models(
    const std::string& path, const std::vector<TelemetryFrame>& frames);

// Study artifacts on disk.
void write_arx_models(const IdentStudyResult& study, const std::string& path);
IdentStudyResult load_arx_models(const std::string& path);
void write_scores_csv(const IdentStudyResult& study, const std::string& path);
void apply_scores_csv(IdentStudyResult& study, const std::string& path);
void write_labels_csv(const IdentStudyResult& study, const std::string& path);
void write_trace_features_csv(const IdentStudyResult& study,
                              const std::string& path);
void write_ident_features_csv(const IdentStudyResult& study,
                              const std::string& path);
void write_fig4_csv(const IdentStudyResult& study, const std::string& path);
void write_fig7_csv(const IdentStudyResult& study, const std::string& path);

// --------------------------------------------------------- classifier study

enum class FeatureSet { trace, ident };
const char* feature_set_name(FeatureSet f);

struct SplitIndices {
  std::vector<Eigen::Index> train;  // exclusion band removed
  std::vector<Eigen::Index> test;   // full 20%, binary truth
};

// Deterministic 80/20 shuffle split derived from the seed; exclusion-band
// cells are dropped from the training side only.
SplitIndices split_corpus(const IdentStudyResult& study, double train_fraction,
                          std::uint64_t seed);

struct ClassifierStudyRow {
  std::string algorithm;
  std::string feature_set;
  double tau = 0.5;
  ClassificationReport report;
  std::vector<double> good_call_errors;  // sorted, for the ECDF
  long iterations = 0;
  double train_seconds = 0.0;
};

struct ClassifierStudyResult {
  std::vector<ClassifierStudyRow> rows;
  std::vector<std::pair<std::string, std::unique_ptr<WindowClassifier>>> models;
  Eigen::Index n_train = 0;
  Eigen::Index n_test = 0;
};

// Per-configuration training setup (iteration budgets, decay, stop rule and
// a seed derived from the study seed).
TrainConfig make_train_config(Algorithm alg, FeatureSet fs,
                              const PipelineConfig& cfg);

ClassifierStudyResult run_classifier_study(const IdentStudyResult& study,
                                           const PipelineConfig& cfg);

// Rebuilds a corpus from stage files (labels plus both feature tables) so
// train-classifier / evaluate can resume from disk.
IdentStudyResult load_corpus_from_files(const std::string& labels_csv,
                                        const std::string& trace_features_csv,
                                        const std::string& ident_features_csv);

// Recomputes the CNN trace rows from telemetry for an already-loaded corpus.
void attach_traces(IdentStudyResult& study,
                   const std::vector<TelemetryFrame>& frames,
                   const std::vector<PowerModel>& power_models,
                   const PipelineConfig& cfg);

void write_table4_csv(const ClassifierStudyResult& res,
                      const std::string& path);
void write_ecdf_csvs(const ClassifierStudyResult& res,
                     const std::string& dir);
void save_classifier(const WindowClassifier& model, const std::string& path);
std::unique_ptr<WindowClassifier> load_classifier(const std::string& path);

// ------------------------------------------------------------------ report

// Renders the SVG charts for a study directory that already holds the CSVs.
void render_report(const std::string& study_dir, const std::string& out_dir);

// ------------------------------------------------------------------ misc

// Deterministic work queue: results must be written by index.
void parallel_for(Eigen::Index count, int workers,
                  const std::function<void(Eigen::Index)>& fn);

// CNN input for one cell: channels [core powers, uncore, core temp,
// pkg power], mean-pooled to target_len and flattened channel-major.
Eigen::RowVectorXd build_trace_row(const Window& window,
                                   const PartialPowers& powers, int core_id,
                                   int target_len);

}  // namespace coretherm
