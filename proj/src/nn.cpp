#include "coretherm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coretherm::nn {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols =
      rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j.at(static_cast<std::size_t>(r))
                    .at(static_cast<std::size_t>(c))
                    .get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

void uniform_fan_in(Matrix& w, Eigen::VectorXd& b, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      w(r, c) = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(int in, int out)
    : w(Matrix::Zero(out, in)),
      b(Eigen::VectorXd::Zero(out)),
      dw(Matrix::Zero(out, in)),
      db(Eigen::VectorXd::Zero(out)),
      in_(in),
      out_(out) {}

Matrix Dense::forward(const Matrix& x, bool) {
  x_ = x;
  Matrix y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

Matrix Dense::infer(const Matrix& x) const {
  Matrix y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

Matrix Dense::backward(const Matrix& grad_out) {
  dw.noalias() += grad_out.transpose() * x_;
  db.noalias() += grad_out.colwise().sum().transpose();
  return grad_out * w;
}

std::vector<ParamRef> Dense::params() {
  return {{w.data(), w.size()}, {b.data(), b.size()}};
}
std::vector<ParamRef> Dense::grads() {
  return {{dw.data(), dw.size()}, {db.data(), db.size()}};
}
void Dense::init(Rng& rng) { uniform_fan_in(w, b, in_, rng); }
void Dense::zero_grads() {
  dw.setZero();
  db.setZero();
}

json Dense::to_json() const {
  return {{"kind", "dense"}, {"in", in_}, {"out", out_},
          {"w", matrix_to_json(w)}, {"b", vector_to_json(b)}};
}

std::unique_ptr<Dense> Dense::from_json(const json& j) {
  auto layer = std::make_unique<Dense>(j.at("in").get<int>(),
                                       j.at("out").get<int>());
  layer->w = matrix_from_json(j.at("w"));
  layer->b = vector_from_json(j.at("b"));
  layer->dw.setZero();
  layer->db.setZero();
  return layer;
}

// ----------------------------------------------------------------- Relu

Matrix Relu::forward(const Matrix& x, bool) {
  x_ = x;
  return x.cwiseMax(0.0);
}

Matrix Relu::infer(const Matrix& x) const { return x.cwiseMax(0.0); }

Matrix Relu::backward(const Matrix& grad_out) {
  return (x_.array() > 0.0).select(grad_out, Matrix::Zero(grad_out.rows(),
                                                          grad_out.cols()));
}

json Relu::to_json() const { return {{"kind", "relu"}}; }

// --------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int c_in, int c_out, int kernel, int l_in)
    : w(Matrix::Zero(c_out, c_in * kernel)),
      b(Eigen::VectorXd::Zero(c_out)),
      dw(Matrix::Zero(c_out, c_in * kernel)),
      db(Eigen::VectorXd::Zero(c_out)),
      c_in_(c_in),
      c_out_(c_out),
      kernel_(kernel),
      l_in_(l_in),
      l_out_(l_in - kernel + 1) {
  if (l_out_ < 1) throw ConfigError("conv1d: kernel longer than input");
}

void Conv1d::im2col(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                    Matrix& col) const {
  for (int ci = 0; ci < c_in_; ++ci)
    for (int j = 0; j < kernel_; ++j)
      col.row(ci * kernel_ + j) =
          row.segment(ci * l_in_ + j, l_out_);
}

Matrix Conv1d::forward(const Matrix& x, bool) {
  if (x.cols() != static_cast<Eigen::Index>(c_in_) * l_in_)
    throw DataError("conv1d: input width mismatch");
  x_ = x;
  const Eigen::Index batch = x.rows();
  Matrix y(batch, static_cast<Eigen::Index>(c_out_) * l_out_);
  Matrix col(c_in_ * kernel_, l_out_);
  Matrix out(c_out_, l_out_);
  for (Eigen::Index s = 0; s < batch; ++s) {
    im2col(x.row(s), col);
    out.noalias() = w * col;
    out.colwise() += b;
    for (int c = 0; c < c_out_; ++c)
      y.row(s).segment(static_cast<Eigen::Index>(c) * l_out_, l_out_) =
          out.row(c);
  }
  return y;
}

Matrix Conv1d::infer(const Matrix& x) const {
  if (x.cols() != static_cast<Eigen::Index>(c_in_) * l_in_)
    throw DataError("conv1d: input width mismatch");
  const Eigen::Index batch = x.rows();
  Matrix y(batch, static_cast<Eigen::Index>(c_out_) * l_out_);
  Matrix col(c_in_ * kernel_, l_out_);
  Matrix out(c_out_, l_out_);
  for (Eigen::Index s = 0; s < batch; ++s) {
    im2col(x.row(s), col);
    out.noalias() = w * col;
    out.colwise() += b;
    for (int c = 0; c < c_out_; ++c)
      y.row(s).segment(static_cast<Eigen::Index>(c) * l_out_, l_out_) =
          out.row(c);
  }
  return y;
}

Matrix Conv1d::backward(const Matrix& grad_out) {
  const Eigen::Index batch = x_.rows();
  Matrix grad_in = Matrix::Zero(batch, x_.cols());
  Matrix col(c_in_ * kernel_, l_out_);
  Matrix dcol(c_in_ * kernel_, l_out_);
  Matrix g(c_out_, l_out_);
  for (Eigen::Index s = 0; s < batch; ++s) {
    for (int c = 0; c < c_out_; ++c)
      g.row(c) = grad_out.row(s).segment(
          static_cast<Eigen::Index>(c) * l_out_, l_out_);
    im2col(x_.row(s), col);
    dw.noalias() += g * col.transpose();
    db.noalias() += g.rowwise().sum();
    dcol.noalias() = w.transpose() * g;
    auto gin = grad_in.row(s);
    for (int ci = 0; ci < c_in_; ++ci)
      for (int j = 0; j < kernel_; ++j)
        gin.segment(ci * l_in_ + j, l_out_) += dcol.row(ci * kernel_ + j);
  }
  return grad_in;
}

std::vector<ParamRef> Conv1d::params() {
  return {{w.data(), w.size()}, {b.data(), b.size()}};
}
std::vector<ParamRef> Conv1d::grads() {
  return {{dw.data(), dw.size()}, {db.data(), db.size()}};
}
void Conv1d::init(Rng& rng) { uniform_fan_in(w, b, c_in_ * kernel_, rng); }
void Conv1d::zero_grads() {
  dw.setZero();
  db.setZero();
}

json Conv1d::to_json() const {
  return {{"kind", "conv1d"},   {"c_in", c_in_},   {"c_out", c_out_},
          {"kernel", kernel_},  {"l_in", l_in_},
          {"w", matrix_to_json(w)}, {"b", vector_to_json(b)}};
}

std::unique_ptr<Conv1d> Conv1d::from_json(const json& j) {
  auto layer = std::make_unique<Conv1d>(
      j.at("c_in").get<int>(), j.at("c_out").get<int>(),
      j.at("kernel").get<int>(), j.at("l_in").get<int>());
  layer->w = matrix_from_json(j.at("w"));
  layer->b = vector_from_json(j.at("b"));
  return layer;
}

// ------------------------------------------------------------ MaxPool1d

MaxPool1d::MaxPool1d(int channels, int width, int l_in)
    : channels_(channels), width_(width), l_in_(l_in), l_out_(l_in / width) {
  if (l_out_ < 1) throw ConfigError("max_pool1d: input shorter than pool");
}

Matrix MaxPool1d::forward(const Matrix& x, bool) {
  const Eigen::Index batch = x.rows();
  in_cols_ = x.cols();
  Matrix y(batch, static_cast<Eigen::Index>(channels_) * l_out_);
  argmax_.resize(batch, y.cols());
  for (Eigen::Index s = 0; s < batch; ++s)
    for (int c = 0; c < channels_; ++c)
      for (int t = 0; t < l_out_; ++t) {
        const Eigen::Index base =
            static_cast<Eigen::Index>(c) * l_in_ +
            static_cast<Eigen::Index>(t) * width_;
        Eigen::Index best = base;
        double best_v = x(s, base);
        for (int j = 1; j < width_; ++j)
          if (x(s, base + j) > best_v) {
            best_v = x(s, base + j);
            best = base + j;
          }
        const Eigen::Index out_idx = static_cast<Eigen::Index>(c) * l_out_ + t;
        y(s, out_idx) = best_v;
        argmax_(s, out_idx) = best;
      }
  return y;
}

Matrix MaxPool1d::infer(const Matrix& x) const {
  const Eigen::Index batch = x.rows();
  Matrix y(batch, static_cast<Eigen::Index>(channels_) * l_out_);
  for (Eigen::Index s = 0; s < batch; ++s)
    for (int c = 0; c < channels_; ++c)
      for (int t = 0; t < l_out_; ++t) {
        const Eigen::Index base = static_cast<Eigen::Index>(c) * l_in_ +
                                  static_cast<Eigen::Index>(t) * width_;
        double best = x(s, base);
        for (int j = 1; j < width_; ++j) best = std::max(best, x(s, base + j));
        y(s, static_cast<Eigen::Index>(c) * l_out_ + t) = best;
      }
  return y;
}

Matrix MaxPool1d::backward(const Matrix& grad_out) {
  Matrix grad_in = Matrix::Zero(grad_out.rows(), in_cols_);
  for (Eigen::Index s = 0; s < grad_out.rows(); ++s)
    for (Eigen::Index i = 0; i < grad_out.cols(); ++i)
      grad_in(s, argmax_(s, i)) += grad_out(s, i);
  return grad_in;
}

json MaxPool1d::to_json() const {
  return {{"kind", "max_pool1d"}, {"channels", channels_},
          {"width", width_},      {"l_in", l_in_}};
}

std::unique_ptr<MaxPool1d> MaxPool1d::from_json(const json& j) {
  return std::make_unique<MaxPool1d>(j.at("channels").get<int>(),
                                     j.at("width").get<int>(),
                                     j.at("l_in").get<int>());
}

// ------------------------------------------------------ GlobalAvgPool1d

GlobalAvgPool1d::GlobalAvgPool1d(int channels, int l_in)
    : channels_(channels), l_in_(l_in) {}

Matrix GlobalAvgPool1d::forward(const Matrix& x, bool) {
  const Eigen::Index batch = x.rows();
  Matrix y(batch, channels_);
  for (Eigen::Index s = 0; s < batch; ++s)
    for (int c = 0; c < channels_; ++c)
      y(s, c) = x.row(s).segment(static_cast<Eigen::Index>(c) * l_in_, l_in_)
                    .mean();
  return y;
}

Matrix GlobalAvgPool1d::infer(const Matrix& x) const {
  const Eigen::Index batch = x.rows();
  Matrix y(batch, channels_);
  for (Eigen::Index s = 0; s < batch; ++s)
    for (int c = 0; c < channels_; ++c)
      y(s, c) = x.row(s).segment(static_cast<Eigen::Index>(c) * l_in_, l_in_)
                    .mean();
  return y;
}

Matrix GlobalAvgPool1d::backward(const Matrix& grad_out) {
  Matrix grad_in(grad_out.rows(),
                 static_cast<Eigen::Index>(channels_) * l_in_);
  const double scale = 1.0 / static_cast<double>(l_in_);
  for (Eigen::Index s = 0; s < grad_out.rows(); ++s)
    for (int c = 0; c < channels_; ++c)
      grad_in.row(s)
          .segment(static_cast<Eigen::Index>(c) * l_in_, l_in_)
          .setConstant(grad_out(s, c) * scale);
  return grad_in;
}

json GlobalAvgPool1d::to_json() const {
  return {{"kind", "global_avg_pool1d"},
          {"channels", channels_},
          {"l_in", l_in_}};
}

std::unique_ptr<GlobalAvgPool1d> GlobalAvgPool1d::from_json(const json& j) {
  return std::make_unique<GlobalAvgPool1d>(j.at("channels").get<int>(),
                                           j.at("l_in").get<int>());
}

// -------------------------------------------------------------- Dropout

Dropout::Dropout(double p) : p_(p) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
}

Matrix Dropout::forward(const Matrix& x, bool train) {
  if (!train || p_ == 0.0) {
    mask_.resize(0, 0);
    return x;
  }
  const double keep = 1.0 - p_;
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      mask_(r, c) = rng_.bernoulli(keep) ? 1.0 / keep : 0.0;
  return x.cwiseProduct(mask_);
}

Matrix Dropout::backward(const Matrix& grad_out) {
  if (mask_.size() == 0) return grad_out;
  return grad_out.cwiseProduct(mask_);
}

json Dropout::to_json() const { return {{"kind", "dropout"}, {"p", p_}}; }

std::unique_ptr<Dropout> Dropout::from_json(const json& j) {
  return std::make_unique<Dropout>(j.at("p").get<double>());
}

// ----------------------------------------------------------- Sequential

Matrix Sequential::forward(const Matrix& x, bool train) {
  Matrix h = x;
  for (auto& layer : layers_) h = layer->forward(h, train);
  return h;
}

Matrix Sequential::infer(const Matrix& x) const {
  Matrix h = x;
  for (const auto& layer : layers_) h = layer->infer(h);
  return h;
}

void Sequential::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
}

void Sequential::init(Rng& rng) {
  for (auto& layer : layers_) layer->init(rng);
}

void Sequential::zero_grads() {
  for (auto& layer : layers_) layer->zero_grads();
}

void Sequential::reseed_dropout(std::uint64_t seed) {
  for (auto& layer : layers_)
    if (auto* d = dynamic_cast<Dropout*>(layer.get())) d->reseed(seed++);
}

std::vector<ParamRef> Sequential::params() {
  std::vector<ParamRef> out;
  for (auto& layer : layers_)
    for (auto& p : layer->params()) out.push_back(p);
  return out;
}

std::vector<ParamRef> Sequential::grads() {
  std::vector<ParamRef> out;
  for (auto& layer : layers_)
    for (auto& g : layer->grads()) out.push_back(g);
  return out;
}

Eigen::Index Sequential::param_count() {
  Eigen::Index n = 0;
  for (auto& p : params()) n += p.size;
  return n;
}

json Sequential::to_json() const {
  json layers = json::array();
  for (const auto& layer : layers_) layers.push_back(layer->to_json());
  return {{"layers", layers}};
}

Sequential Sequential::from_json(const json& j) {
  Sequential model;
  for (const auto& lj : j.at("layers")) {
    const std::string kind = lj.at("kind").get<std::string>();
    if (kind == "dense") model.add(Dense::from_json(lj));
    else if (kind == "relu") model.add(std::make_unique<Relu>());
    else if (kind == "conv1d") model.add(Conv1d::from_json(lj));
    else if (kind == "max_pool1d") model.add(MaxPool1d::from_json(lj));
    else if (kind == "global_avg_pool1d")
      model.add(GlobalAvgPool1d::from_json(lj));
    else if (kind == "dropout") model.add(Dropout::from_json(lj));
    else throw DataError("unknown layer kind: " + kind);
  }
  return model;
}

// ----------------------------------------------------------- SoftmaxBce

double SoftmaxBce::forward(const Matrix& logits,
                           const Eigen::VectorXd& targets) {
  if (logits.cols() != 2)
    throw DataError("softmax_bce: expected two logits per sample");
  if (logits.rows() != targets.size())
    throw DataError("softmax_bce: batch size mismatch");
  logits_ = logits;
  targets_ = targets;
  double loss = 0.0;
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double d = logits(s, 1) - logits(s, 0);
    const double softplus_pos = std::max(d, 0.0) + std::log1p(std::exp(-std::abs(d)));
    const double softplus_neg = softplus_pos - d;  // softplus(-d)
    loss += targets(s) * softplus_neg + (1.0 - targets(s)) * softplus_pos;
  }
  return loss / static_cast<double>(logits.rows());
}

Matrix SoftmaxBce::backward() const {
  Matrix g(logits_.rows(), 2);
  const double scale = 1.0 / static_cast<double>(logits_.rows());
  for (Eigen::Index s = 0; s < logits_.rows(); ++s) {
    const double d = logits_(s, 1) - logits_(s, 0);
    const double p1 = 1.0 / (1.0 + std::exp(-d));
    const double e = (p1 - targets_(s)) * scale;
    g(s, 1) = e;
    g(s, 0) = -e;
  }
  return g;
}

Eigen::VectorXd SoftmaxBce::likelihood(const Matrix& logits) {
  Eigen::VectorXd p(logits.rows());
  for (Eigen::Index s = 0; s < logits.rows(); ++s)
    p(s) = 1.0 / (1.0 + std::exp(-(logits(s, 1) - logits(s, 0))));
  return p;
}

// ----------------------------------------------------------------- Adam

void Adam::step(const std::vector<ParamRef>& params,
                const std::vector<ParamRef>& grads) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Eigen::VectorXd::Zero(params[i].size);
      v_[i] = Eigen::VectorXd::Zero(params[i].size);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size);
    Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size);
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = (cfg_.beta2 * v_[i].array() +
             (1.0 - cfg_.beta2) * g.array().square()).matrix();
    const auto m_hat = m_[i].array() / bc1;
    const auto v_hat = v_[i].array() / bc2;
    if (cfg_.weight_decay > 0.0) p -= (cfg_.lr * cfg_.weight_decay) * p;
    p.array() -= cfg_.lr * m_hat / (v_hat.sqrt() + cfg_.eps);
  }
}

// ---------------------------------------------------------------- train

TrainStats train(Sequential& model, const Matrix& x,
                 const Eigen::VectorXd& targets, const TrainOptions& opts) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw DataError("train: empty training set");
  if (targets.size() != n) throw DataError("train: target size mismatch");

  AdamConfig acfg;
  acfg.lr = opts.lr;
  acfg.weight_decay = opts.weight_decay;
  Adam opt(acfg);
  SoftmaxBce loss;
  Rng rng(opts.seed);
  model.reseed_dropout(rng.next_seed());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index bs = std::min<Eigen::Index>(opts.batch_size, n);
  Matrix xb(bs, x.cols());
  Eigen::VectorXd yb(bs);

  TrainStats stats;
  int below = 0;
  Eigen::Index cursor = n;  // forces an initial shuffle
  for (long it = 0; it < opts.max_iterations; ++it) {
    if (cursor + bs > n) {
      // Fisher-Yates with the run's own stream.
      for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(rng.uniform_int(0, i));
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(j)]);
      }
      cursor = 0;
    }
    for (Eigen::Index i = 0; i < bs; ++i) {
      xb.row(i) = x.row(order[static_cast<std::size_t>(cursor + i)]);
      yb(i) = targets(order[static_cast<std::size_t>(cursor + i)]);
    }
    cursor += bs;

    model.zero_grads();
    const Matrix logits = model.forward(xb, /*train=*/true);
    const double batch_loss = loss.forward(logits, yb);
    if (!std::isfinite(batch_loss))
      throw NumericalError("train: non-finite loss at iteration " +
                           std::to_string(it));
    model.backward(loss.backward());
    opt.step(model.params(), model.grads());

    stats.iterations = it + 1;
    stats.final_loss = batch_loss;
    if (opts.loss_threshold >= 0.0) {
      below = batch_loss < opts.loss_threshold ? below + 1 : 0;
      if (below >= opts.threshold_patience) {
        stats.stopped_on_threshold = true;
        break;
      }
    }
  }
  return stats;
}

// -------------------------------------------------------------- builders

Sequential make_mlp(int input_dim, const std::vector<int>& widths, Rng& rng) {
  Sequential model;
  int in = input_dim;
  for (int w : widths) {
    model.add(std::make_unique<Dense>(in, w));
    model.add(std::make_unique<Relu>());
    in = w;
  }
  model.add(std::make_unique<Dense>(in, 2));
  model.init(rng);
  return model;
}

Sequential make_cnn(int c_in, int l_in, int base_channels, int kernel,
                    int pool_width, double dropout_p, Rng& rng) {
  Sequential model;
  int channels = c_in;
  int length = l_in;
  int out_channels = base_channels;
  for (int block = 0; block < 4; ++block) {
    auto conv = std::make_unique<Conv1d>(channels, out_channels, kernel, length);
    length = conv->l_out();
    model.add(std::move(conv));
    model.add(std::make_unique<Relu>());
    auto pool = std::make_unique<MaxPool1d>(out_channels, pool_width, length);
    length = pool->l_out();
    model.add(std::move(pool));
    channels = out_channels;
    out_channels *= 2;
  }
  model.add(std::make_unique<Dropout>(dropout_p));
  model.add(std::make_unique<GlobalAvgPool1d>(channels, length));
  model.add(std::make_unique<Dense>(channels, 2));
  model.init(rng);
  return model;
}

}  // namespace coretherm::nn
