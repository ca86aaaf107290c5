#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "coretherm/nn.hpp"
#include "coretherm/svm.hpp"

namespace coretherm {

enum class Algorithm { svm_rbf, mlp_features, cnn_trace };
const char* algorithm_name(Algorithm a);

struct TrainConfig {
  Algorithm algorithm = Algorithm::mlp_features;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;  // 1e-5 for the CNN
  Eigen::Index batch_size = 128;
  long max_iterations = 3000;   // trace MLP stops here; others cap here
  double loss_threshold = -1.0; // >= 0 enables the early-stop rule
  int threshold_patience = 5;
  std::vector<int> mlp_widths = {64, 64, 32, 16};
  int cnn_base_channels = 16;
  int cnn_kernel = 5;
  int cnn_pool = 4;
  double cnn_dropout = 0.5;
  int cnn_input_len = 2048;
  SvmConfig svm;
  std::uint64_t seed = 1;
};

// Zero-mean unit-variance feature scaling fitted on the training split and
// stored with the model.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // floored at 1e-12

  void fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

struct Verdict {
  double likelihood = 0.0;
  enum class Decision { good, bad, unclassified } decision = Decision::bad;
};

const char* decision_name(Verdict::Decision d);

// Three-way rule: good if l > tau, bad if l < 1 - tau, else unclassified.
// At tau = 0.5 the boundary case l == 0.5 classifies (as good), so no
// window is ever left unclassified there.
Verdict decide(double likelihood, double tau);

// Percentages over the classified windows, except unclassified_pct which is
// over the whole test set.
struct ClassificationReport {
  double misclassified_good_pct = 0.0;
  double misclassified_bad_pct = 0.0;
  double correct_pct = 0.0;
  double unclassified_pct = 0.0;
  Eigen::Index n_test = 0;
  Eigen::Index n_classified = 0;
  bool zero_yield = false;
};

// Common face of the three classifier families. Inference is cache-free
// and safe to share across threads.
class WindowClassifier {
 public:
  virtual ~WindowClassifier() = default;
  virtual Eigen::VectorXd likelihoods(const Eigen::MatrixXd& x_raw) const = 0;
  virtual Algorithm algorithm() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

class SvmClassifier : public WindowClassifier {
 public:
  SvmClassifier(Standardizer stats, SvmModel model)
      : stats_(std::move(stats)), model_(std::move(model)) {}
  Eigen::VectorXd likelihoods(const Eigen::MatrixXd& x_raw) const override;
  Algorithm algorithm() const override { return Algorithm::svm_rbf; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<SvmClassifier> from_json(const nlohmann::json& j);

 private:
  Standardizer stats_;
  SvmModel model_;
};

class MlpClassifier : public WindowClassifier {
 public:
  MlpClassifier(Standardizer stats, nn::Sequential net)
      : stats_(std::move(stats)), net_(std::move(net)) {}
  Eigen::VectorXd likelihoods(const Eigen::MatrixXd& x_raw) const override;
  Algorithm algorithm() const override { return Algorithm::mlp_features; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<MlpClassifier> from_json(const nlohmann::json& j);

 private:
  Standardizer stats_;
  nn::Sequential net_;
};

// Standardizes each input channel with training-set statistics before the
// convolutional stack. Rows hold channel-major traces.
class CnnClassifier : public WindowClassifier {
 public:
  CnnClassifier(Eigen::VectorXd ch_mean, Eigen::VectorXd ch_std, int input_len,
                nn::Sequential net)
      : ch_mean_(std::move(ch_mean)),
        ch_std_(std::move(ch_std)),
        input_len_(input_len),
        net_(std::move(net)) {}
  Eigen::VectorXd likelihoods(const Eigen::MatrixXd& x_raw) const override;
  Algorithm algorithm() const override { return Algorithm::cnn_trace; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<CnnClassifier> from_json(const nlohmann::json& j);

  int input_len() const { return input_len_; }
  int channels() const { return static_cast<int>(ch_mean_.size()); }

 private:
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd ch_mean_, ch_std_;
  int input_len_;
  nn::Sequential net_;
};

struct TrainOutcome {
  std::unique_ptr<WindowClassifier> model;
  long iterations = 0;
  double final_loss = 0.0;
  bool stopped_on_threshold = false;
};

TrainOutcome train_svm(const Eigen::MatrixXd& features,
                       const Eigen::VectorXd& labels01,
                       const TrainConfig& cfg);
TrainOutcome train_mlp(const Eigen::MatrixXd& features,
                       const Eigen::VectorXd& labels01,
                       const TrainConfig& cfg);
// traces: one row per window, channel-major, n_channels * cnn_input_len wide.
TrainOutcome train_cnn(const Eigen::MatrixXd& traces, int n_channels,
                       const Eigen::VectorXd& labels01,
                       const TrainConfig& cfg);

std::unique_ptr<WindowClassifier> classifier_from_json(const nlohmann::json& j);

struct EvalResult {
  ClassificationReport report;
  // Sorted true mean errors of the windows the model called good (the
  // worst-case population), paired with cumulative fractions.
  std::vector<double> good_call_errors;
};

// labels01 holds the binary ground truth; mean_err feeds the error ECDF and
// may be empty.
EvalResult evaluate(const WindowClassifier& model, const Eigen::MatrixXd& x_raw,
                    const Eigen::VectorXd& labels01,
                    const Eigen::VectorXd& mean_err, double tau);

ClassificationReport report_from_likelihoods(const Eigen::VectorXd& likelihoods,
                                             const Eigen::VectorXd& labels01,
                                             double tau);

// Mean-pools (channels x len) down to (channels x target_len) with
// near-equal adaptive bins; len must be >= target_len.
Eigen::MatrixXd downsample_trace(const Eigen::MatrixXd& trace, int target_len);

}  // namespace coretherm
