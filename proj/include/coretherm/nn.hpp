#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "coretherm/common.hpp"
#include "json.hpp"

namespace coretherm::nn {

// Rows are batch samples. 1-D signals are stored channel-major per row:
// [c0 t0..tL, c1 t0..tL, ...].
using Matrix = Eigen::MatrixXd;

struct ParamRef {
  double* data;
  Eigen::Index size;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& x, bool train) = 0;
  // Cache-free evaluation; safe to call concurrently on a shared model.
  virtual Matrix infer(const Matrix& x) const = 0;
  // Consumes d(loss)/d(output), accumulates parameter gradients, returns
  // d(loss)/d(input). Must follow a forward on the same batch.
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual std::vector<ParamRef> params() { return {}; }
  virtual std::vector<ParamRef> grads() { return {}; }
  virtual void init(Rng&) {}
  virtual void zero_grads() {}
  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

class Dense : public Layer {
 public:
  Dense(int in, int out);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix infer(const Matrix& x) const override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<ParamRef> params() override;
  std::vector<ParamRef> grads() override;
  void init(Rng& rng) override;
  void zero_grads() override;
  std::string kind() const override { return "dense"; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<Dense> from_json(const nlohmann::json& j);

  Matrix w;  // out x in
  Eigen::VectorXd b;
  Matrix dw;
  Eigen::VectorXd db;

 private:
  int in_, out_;
  Matrix x_;
};

class Relu : public Layer {
 public:
  Matrix forward(const Matrix& x, bool train) override;
  Matrix infer(const Matrix& x) const override;
  Matrix backward(const Matrix& grad_out) override;
  std::string kind() const override { return "relu"; }
  nlohmann::json to_json() const override;

 private:
  Matrix x_;
};

class Conv1d : public Layer {
 public:
  Conv1d(int c_in, int c_out, int kernel, int l_in);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix infer(const Matrix& x) const override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<ParamRef> params() override;
  std::vector<ParamRef> grads() override;
  void init(Rng& rng) override;
  void zero_grads() override;
  std::string kind() const override { return "conv1d"; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<Conv1d> from_json(const nlohmann::json& j);

  int l_out() const { return l_out_; }

  Matrix w;  // c_out x (c_in * kernel)
  Eigen::VectorXd b;
  Matrix dw;
  Eigen::VectorXd db;

 private:
  void im2col(const Eigen::Ref<const Eigen::RowVectorXd>& row,
              Matrix& col) const;
  int c_in_, c_out_, kernel_, l_in_, l_out_;
  Matrix x_;
};

class MaxPool1d : public Layer {
 public:
  MaxPool1d(int channels, int width, int l_in);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix infer(const Matrix& x) const override;
  Matrix backward(const Matrix& grad_out) override;
  std::string kind() const override { return "max_pool1d"; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<MaxPool1d> from_json(const nlohmann::json& j);

  int l_out() const { return l_out_; }

 private:
  int channels_, width_, l_in_, l_out_;
  Eigen::Index in_cols_ = 0;
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax_;
};

// Adaptive average pooling down to one sample per channel.
class GlobalAvgPool1d : public Layer {
 public:
  GlobalAvgPool1d(int channels, int l_in);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix infer(const Matrix& x) const override;
  Matrix backward(const Matrix& grad_out) override;
  std::string kind() const override { return "global_avg_pool1d"; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<GlobalAvgPool1d> from_json(const nlohmann::json& j);

 private:
  int channels_, l_in_;
};

// Inverted dropout; identity at inference. The mask stream is owned by the
// layer and reseeded from the trainer for reproducibility.
class Dropout : public Layer {
 public:
  explicit Dropout(double p);
  Matrix forward(const Matrix& x, bool train) override;
  Matrix infer(const Matrix& x) const override { return x; }
  Matrix backward(const Matrix& grad_out) override;
  std::string kind() const override { return "dropout"; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<Dropout> from_json(const nlohmann::json& j);

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

 private:
  double p_;
  Rng rng_{0};
  Matrix mask_;
};

class Sequential {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Matrix forward(const Matrix& x, bool train = false);
  Matrix infer(const Matrix& x) const;
  void backward(const Matrix& grad_out);
  void init(Rng& rng);
  void zero_grads();
  void reseed_dropout(std::uint64_t seed);
  std::vector<ParamRef> params();
  std::vector<ParamRef> grads();
  Eigen::Index param_count();

  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

  nlohmann::json to_json() const;
  static Sequential from_json(const nlohmann::json& j);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Two-logit softmax with binary cross-entropy on the positive-class
// probability; equivalent to sigmoid BCE on z1 - z0.
struct SoftmaxBce {
  // targets in {0, 1}; returns mean loss over the batch.
  double forward(const Matrix& logits, const Eigen::VectorXd& targets);
  Matrix backward() const;  // d(mean loss)/d(logits)
  static Eigen::VectorXd likelihood(const Matrix& logits);

  Matrix logits_;
  Eigen::VectorXd targets_;
};

// Adam with decoupled weight decay.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}
  void step(const std::vector<ParamRef>& params,
            const std::vector<ParamRef>& grads);

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

struct TrainOptions {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  Eigen::Index batch_size = 128;
  long max_iterations = 3000;
  double loss_threshold = -1.0;  // < 0 disables the early-stop rule
  int threshold_patience = 5;
  std::uint64_t seed = 1;
};

struct TrainStats {
  long iterations = 0;
  double final_loss = 0.0;
  bool stopped_on_threshold = false;
};

// Mini-batch training with seeded shuffling; stops at the iteration cap or
// once the batch loss stays below loss_threshold for threshold_patience
// consecutive iterations.
TrainStats train(Sequential& model, const Matrix& x,
                 const Eigen::VectorXd& targets, const TrainOptions& opts);

// Builders for the two architectures used by the window classifiers.
Sequential make_mlp(int input_dim, const std::vector<int>& widths, Rng& rng);
Sequential make_cnn(int c_in, int l_in, int base_channels, int kernel,
                    int pool_width, double dropout_p, Rng& rng);

}  // namespace coretherm::nn
