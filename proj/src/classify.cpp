#include "coretherm/classify.hpp"

#include <algorithm>
#include <cmath>

namespace coretherm {

using nlohmann::json;

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::svm_rbf: return "svm_rbf";
    case Algorithm::mlp_features: return "mlp_features";
    case Algorithm::cnn_trace: return "cnn_trace";
  }
  return "unknown";
}

const char* decision_name(Verdict::Decision d) {
  switch (d) {
    case Verdict::Decision::good: return "good";
    case Verdict::Decision::bad: return "bad";
    case Verdict::Decision::unclassified: return "unclassified";
  }
  return "unknown";
}

Verdict decide(double likelihood, double tau) {
  if (tau < 0.5 || tau >= 1.0)
    throw ConfigError("decide: tau must lie in [0.5, 1)");
  Verdict v;
  v.likelihood = likelihood;
  if (likelihood > tau)
    v.decision = Verdict::Decision::good;
  else if (likelihood < 1.0 - tau)
    v.decision = Verdict::Decision::bad;
  else if (tau == 0.5)
    v.decision = Verdict::Decision::good;  // boundary tie always classifies
  else
    v.decision = Verdict::Decision::unclassified;
  return v;
}

void Standardizer::fit(const Eigen::MatrixXd& x) {
  mean = x.colwise().mean();
  stddev.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - mean(c)).square().sum() /
                       static_cast<double>(x.rows());
    stddev(c) = std::max(std::sqrt(var), 1e-12);
  }
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size())
    throw DataError("standardizer: feature width mismatch");
  Eigen::MatrixXd out = x;
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= stddev.transpose().array();
  return out;
}

json Standardizer::to_json() const {
  json jm = json::array(), js = json::array();
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    jm.push_back(mean(i));
    js.push_back(stddev(i));
  }
  return {{"mean", jm}, {"stddev", js}};
}

Standardizer Standardizer::from_json(const json& j) {
  Standardizer s;
  const auto& jm = j.at("mean");
  const auto& js = j.at("stddev");
  s.mean.resize(static_cast<Eigen::Index>(jm.size()));
  s.stddev.resize(static_cast<Eigen::Index>(js.size()));
  for (Eigen::Index i = 0; i < s.mean.size(); ++i) {
    s.mean(i) = jm.at(static_cast<std::size_t>(i)).get<double>();
    s.stddev(i) = js.at(static_cast<std::size_t>(i)).get<double>();
  }
  return s;
}

// ------------------------------------------------------------ classifiers

Eigen::VectorXd SvmClassifier::likelihoods(const Eigen::MatrixXd& x_raw) const {
  return model_.likelihood_batch(stats_.apply(x_raw));
}

json SvmClassifier::to_json() const {
  return {{"algorithm", "svm_rbf"},
          {"standardizer", stats_.to_json()},
          {"svm", model_.to_json()}};
}

std::unique_ptr<SvmClassifier> SvmClassifier::from_json(const json& j) {
  return std::make_unique<SvmClassifier>(
      Standardizer::from_json(j.at("standardizer")),
      SvmModel::from_json(j.at("svm")));
}

Eigen::VectorXd MlpClassifier::likelihoods(const Eigen::MatrixXd& x_raw) const {
  return nn::SoftmaxBce::likelihood(net_.infer(stats_.apply(x_raw)));
}

json MlpClassifier::to_json() const {
  return {{"algorithm", "mlp_features"},
          {"standardizer", stats_.to_json()},
          {"net", net_.to_json()}};
}

std::unique_ptr<MlpClassifier> MlpClassifier::from_json(const json& j) {
  return std::make_unique<MlpClassifier>(
      Standardizer::from_json(j.at("standardizer")),
      nn::Sequential::from_json(j.at("net")));
}

Eigen::MatrixXd CnnClassifier::standardize(const Eigen::MatrixXd& x) const {
  const int c = channels();
  if (x.cols() != static_cast<Eigen::Index>(c) * input_len_)
    throw DataError("cnn classifier: trace width mismatch");
  Eigen::MatrixXd out = x;
  for (int ch = 0; ch < c; ++ch) {
    auto block = out.middleCols(static_cast<Eigen::Index>(ch) * input_len_,
                                input_len_);
    block.array() -= ch_mean_(ch);
    block.array() /= ch_std_(ch);
  }
  return out;
}

Eigen::VectorXd CnnClassifier::likelihoods(const Eigen::MatrixXd& x_raw) const {
  return nn::SoftmaxBce::likelihood(net_.infer(standardize(x_raw)));
}

json CnnClassifier::to_json() const {
  json jm = json::array(), js = json::array();
  for (Eigen::Index i = 0; i < ch_mean_.size(); ++i) {
    jm.push_back(ch_mean_(i));
    js.push_back(ch_std_(i));
  }
  return {{"algorithm", "cnn_trace"},
          {"channel_mean", jm},
          {"channel_std", js},
          {"input_len", input_len_},
          {"net", net_.to_json()}};
}

std::unique_ptr<CnnClassifier> CnnClassifier::from_json(const json& j) {
  const auto& jm = j.at("channel_mean");
  const auto& js = j.at("channel_std");
  Eigen::VectorXd mean(static_cast<Eigen::Index>(jm.size()));
  Eigen::VectorXd stddev(static_cast<Eigen::Index>(js.size()));
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    mean(i) = jm.at(static_cast<std::size_t>(i)).get<double>();
    stddev(i) = js.at(static_cast<std::size_t>(i)).get<double>();
  }
  return std::make_unique<CnnClassifier>(std::move(mean), std::move(stddev),
                                         j.at("input_len").get<int>(),
                                         nn::Sequential::from_json(j.at("net")));
}

std::unique_ptr<WindowClassifier> classifier_from_json(const json& j) {
  const std::string alg = j.at("algorithm").get<std::string>();
  if (alg == "svm_rbf") return SvmClassifier::from_json(j);
  if (alg == "mlp_features") return MlpClassifier::from_json(j);
  if (alg == "cnn_trace") return CnnClassifier::from_json(j);
  throw DataError("unknown classifier algorithm: " + alg);
}

// --------------------------------------------------------------- training

namespace {

void check_labels(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels01) {
  if (x.rows() != labels01.size())
    throw DataError("training: label count mismatch");
  const double pos = labels01.sum();
  if (pos == 0.0 || pos == static_cast<double>(labels01.size()))
    throw DataError("training: single-class training set");
}

}  // namespace

TrainOutcome train_svm(const Eigen::MatrixXd& features,
                       const Eigen::VectorXd& labels01,
                       const TrainConfig& cfg) {
  check_labels(features, labels01);
  Standardizer stats;
  stats.fit(features);
  SvmConfig svm_cfg = cfg.svm;
  svm_cfg.seed = cfg.seed;
  SvmModel model = train_svm_rbf(stats.apply(features), labels01, svm_cfg);
  TrainOutcome out;
  out.model = std::make_unique<SvmClassifier>(std::move(stats), std::move(model));
  return out;
}

TrainOutcome train_mlp(const Eigen::MatrixXd& features,
                       const Eigen::VectorXd& labels01,
                       const TrainConfig& cfg) {
  check_labels(features, labels01);
  Standardizer stats;
  stats.fit(features);
  const Eigen::MatrixXd x = stats.apply(features);

  Rng rng(cfg.seed);
  nn::Sequential net =
      nn::make_mlp(static_cast<int>(x.cols()), cfg.mlp_widths, rng);

  nn::TrainOptions topt;
  topt.lr = cfg.learning_rate;
  topt.weight_decay = cfg.weight_decay;
  topt.batch_size = cfg.batch_size;
  topt.max_iterations = cfg.max_iterations;
  topt.loss_threshold = cfg.loss_threshold;
  topt.threshold_patience = cfg.threshold_patience;
  topt.seed = rng.next_seed();
  const nn::TrainStats stats_out = nn::train(net, x, labels01, topt);

  TrainOutcome out;
  out.model = std::make_unique<MlpClassifier>(std::move(stats), std::move(net));
  out.iterations = stats_out.iterations;
  out.final_loss = stats_out.final_loss;
  out.stopped_on_threshold = stats_out.stopped_on_threshold;
  return out;
}

TrainOutcome train_cnn(const Eigen::MatrixXd& traces, int n_channels,
                       const Eigen::VectorXd& labels01,
                       const TrainConfig& cfg) {
  check_labels(traces, labels01);
  if (traces.cols() % n_channels != 0)
    throw DataError("train_cnn: trace width not divisible by channel count");
  const int l_in = static_cast<int>(traces.cols()) / n_channels;
  if (l_in != cfg.cnn_input_len)
    throw DataError("train_cnn: traces are " + std::to_string(l_in) +
                    " samples long, expected " +
                    std::to_string(cfg.cnn_input_len));

  // Per-channel statistics across the training set and all time steps.
  Eigen::VectorXd ch_mean(n_channels), ch_std(n_channels);
  for (int ch = 0; ch < n_channels; ++ch) {
    const auto block =
        traces.middleCols(static_cast<Eigen::Index>(ch) * l_in, l_in);
    const double m = block.mean();
    const double var = (block.array() - m).square().sum() /
                       static_cast<double>(block.size());
    ch_mean(ch) = m;
    ch_std(ch) = std::max(std::sqrt(var), 1e-12);
  }
  Eigen::MatrixXd x = traces;
  for (int ch = 0; ch < n_channels; ++ch) {
    auto block = x.middleCols(static_cast<Eigen::Index>(ch) * l_in, l_in);
    block.array() -= ch_mean(ch);
    block.array() /= ch_std(ch);
  }

  Rng rng(cfg.seed);
  nn::Sequential net =
      nn::make_cnn(n_channels, l_in, cfg.cnn_base_channels, cfg.cnn_kernel,
                   cfg.cnn_pool, cfg.cnn_dropout, rng);

  nn::TrainOptions topt;
  topt.lr = cfg.learning_rate;
  topt.weight_decay = cfg.weight_decay;
  topt.batch_size = cfg.batch_size;
  topt.max_iterations = cfg.max_iterations;
  topt.loss_threshold = cfg.loss_threshold;
  topt.threshold_patience = cfg.threshold_patience;
  topt.seed = rng.next_seed();
  const nn::TrainStats stats_out = nn::train(net, x, labels01, topt);

  TrainOutcome out;
  out.model = std::make_unique<CnnClassifier>(std::move(ch_mean),
                                              std::move(ch_std), l_in,
                                              std::move(net));
  out.iterations = stats_out.iterations;
  out.final_loss = stats_out.final_loss;
  out.stopped_on_threshold = stats_out.stopped_on_threshold;
  return out;
}

// ------------------------------------------------------------- evaluation

ClassificationReport report_from_likelihoods(const Eigen::VectorXd& likelihoods,
                                             const Eigen::VectorXd& labels01,
                                             double tau) {
  if (likelihoods.size() != labels01.size())
    throw DataError("evaluate: likelihood/label size mismatch");
  ClassificationReport rep;
  rep.n_test = likelihoods.size();
  Eigen::Index mis_good = 0, mis_bad = 0, correct = 0, unclassified = 0;
  for (Eigen::Index i = 0; i < likelihoods.size(); ++i) {
    const Verdict v = decide(likelihoods(i), tau);
    const bool truly_good = labels01(i) > 0.5;
    switch (v.decision) {
      case Verdict::Decision::good:
        truly_good ? ++correct : ++mis_good;
        break;
      case Verdict::Decision::bad:
        truly_good ? ++mis_bad : ++correct;
        break;
      case Verdict::Decision::unclassified:
        ++unclassified;
        break;
    }
  }
  rep.n_classified = rep.n_test - unclassified;
  rep.zero_yield = rep.n_classified == 0;
  const double denom =
      rep.n_classified > 0 ? static_cast<double>(rep.n_classified) : 1.0;
  rep.misclassified_good_pct = 100.0 * static_cast<double>(mis_good) / denom;
  rep.misclassified_bad_pct = 100.0 * static_cast<double>(mis_bad) / denom;
  rep.correct_pct = 100.0 * static_cast<double>(correct) / denom;
  rep.unclassified_pct = 100.0 * static_cast<double>(unclassified) /
                         static_cast<double>(rep.n_test);
  return rep;
}

EvalResult evaluate(const WindowClassifier& model, const Eigen::MatrixXd& x_raw,
                    const Eigen::VectorXd& labels01,
                    const Eigen::VectorXd& mean_err, double tau) {
  const Eigen::VectorXd l = model.likelihoods(x_raw);
  EvalResult res;
  res.report = report_from_likelihoods(l, labels01, tau);
  if (mean_err.size() == labels01.size()) {
    for (Eigen::Index i = 0; i < l.size(); ++i)
      if (decide(l(i), tau).decision == Verdict::Decision::good)
        res.good_call_errors.push_back(mean_err(i));
    std::sort(res.good_call_errors.begin(), res.good_call_errors.end());
  }
  return res;
}

Eigen::MatrixXd downsample_trace(const Eigen::MatrixXd& trace, int target_len) {
  const Eigen::Index len = trace.cols();
  if (len < target_len)
    throw DataError("downsample_trace: window shorter than target length");
  if (len == target_len) return trace;
  Eigen::MatrixXd out(trace.rows(), target_len);
  for (int i = 0; i < target_len; ++i) {
    const Eigen::Index lo = len * i / target_len;
    const Eigen::Index hi = len * (i + 1) / target_len;
    out.col(i) = trace.middleCols(lo, hi - lo).rowwise().mean();
  }
  return out;
}

}  // namespace coretherm
