#include "coretherm/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace coretherm {

using nlohmann::json;

namespace {

constexpr double kTau = 1e-12;

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           double gamma) {
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (a * b.transpose());
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return (-gamma * d2.cwiseMax(0.0)).array().exp();
}

double default_gamma(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double var =
      (x.rowwise() - mean).array().square().sum() /
      static_cast<double>(x.rows() * x.cols());
  return var > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
}

struct SmoResult {
  Eigen::VectorXd alpha;
  double rho = 0.0;
};

// LibSVM-style SMO on min 0.5 a'Qa - e'a, 0 <= a <= C, y'a = 0 with
// Q_ij = y_i y_j K_ij. Deterministic: maximal violating pair selection.
SmoResult smo_solve(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                    double c, double tol, long max_iter) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);

  for (long iter = 0; iter < max_iter; ++iter) {
    // Maximal violating pair.
    double up_best = -std::numeric_limits<double>::infinity();
    double low_best = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad(t);
      const bool in_up = (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0);
      const bool in_low = (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < c);
      if (in_up && v > up_best) {
        up_best = v;
        i = t;
      }
      if (in_low && v < low_best) {
        low_best = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || up_best - low_best < tol) break;

    const double yi = y(i), yj = y(j);
    const double old_ai = alpha(i), old_aj = alpha(j);
    if (yi != yj) {
      double quad = k(i, i) + k(j, j) + 2.0 * k(i, j) * yi * yj;
      // y_i y_j = -1 here, so this is K_ii + K_jj - 2 K_ij.
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0 && alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = diff;
      } else if (diff <= 0.0 && alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > 0.0 && alpha(i) > c) {
        alpha(i) = c;
        alpha(j) = c - diff;
      } else if (diff <= 0.0 && alpha(j) > c) {
        alpha(j) = c;
        alpha(i) = c + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c && alpha(i) > c) {
        alpha(i) = c;
        alpha(j) = sum - c;
      } else if (sum <= c && alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = sum;
      }
      if (sum > c && alpha(j) > c) {
        alpha(j) = c;
        alpha(i) = sum - c;
      } else if (sum <= c && alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = sum;
      }
    }

    const double dai = (alpha(i) - old_ai) * yi;
    const double daj = (alpha(j) - old_aj) * yj;
    // G_t += y_t (K_ti dai + K_tj daj)
    grad.array() +=
        y.array() * (k.col(i).array() * dai + k.col(j).array() * daj);
  }

  // rho from the free support vectors (midpoint of the bounds otherwise).
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (alpha(t) >= c) {
      if (y(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0.0) {
      if (y(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  SmoResult res;
  res.alpha = alpha;
  res.rho = n_free > 0 ? sum_free / static_cast<double>(n_free)
                       : 0.5 * (ub + lb);
  return res;
}

// Platt's sigmoid fit (Lin/Weng/Keerthi variant), deterministic Newton.
std::pair<double, double> platt_fit(const Eigen::VectorXd& decision,
                                    const Eigen::VectorXd& labels01) {
  const Eigen::Index n = decision.size();
  double prior1 = labels01.sum();
  double prior0 = static_cast<double>(n) - prior1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = labels01(i) > 0.5 ? hi : lo;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  const double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;

  const auto objective = [&](double pa, double pb) {
    double obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double f = decision(i) * pa + pb;
      if (f >= 0.0)
        obj += t(i) * f + std::log1p(std::exp(-f));
      else
        obj += (t(i) - 1.0) * f + std::log1p(std::exp(f));
    }
    return obj;
  };

  double fval = objective(a, b);
  for (int it = 0; it < 100; ++it) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double f = decision(i) * a + b;
      const double p = f >= 0.0 ? std::exp(-f) / (1.0 + std::exp(-f))
                                : 1.0 / (1.0 + std::exp(f));
      const double q = 1.0 - p;
      const double d2 = p * q;
      h11 += decision(i) * decision(i) * d2;
      h22 += d2;
      h21 += decision(i) * d2;
      const double d1 = t(i) - p;
      g1 += decision(i) * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;

    double step = 1.0;
    bool moved = false;
    while (step >= min_step) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {a, b};
}

SvmModel train_once(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels01,
                    double c, double gamma, double tol, long max_iter) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels01(i) > 0.5 ? 1.0 : -1.0;

  const Eigen::MatrixXd k = rbf_kernel(x, x, gamma);
  const SmoResult sol = smo_solve(k, y, c, tol, max_iter);

  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i)
    if (sol.alpha(i) > 1e-12) sv.push_back(i);
  if (sv.empty()) sv.push_back(0);  // degenerate but keeps the model usable

  SvmModel model;
  model.gamma = gamma;
  model.bias = -sol.rho;
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = x.row(sv[r]);
    model.dual_coef(static_cast<Eigen::Index>(r)) =
        sol.alpha(sv[r]) * y(sv[r]);
  }

  const Eigen::VectorXd dec = model.decision_batch(x);
  std::tie(model.platt_a, model.platt_b) = platt_fit(dec, labels01);
  return model;
}

}  // namespace

double SvmModel::decision(const Eigen::RowVectorXd& x) const {
  Eigen::MatrixXd xm(1, x.size());
  xm.row(0) = x;
  return decision_batch(xm)(0);
}

Eigen::VectorXd SvmModel::decision_batch(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd k = rbf_kernel(x, support_vectors, gamma);
  return (k * dual_coef).array() + bias;
}

double SvmModel::likelihood(const Eigen::RowVectorXd& x) const {
  const double f = decision(x);
  return 1.0 / (1.0 + std::exp(platt_a * f + platt_b));
}

Eigen::VectorXd SvmModel::likelihood_batch(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd f = decision_batch(x);
  return (1.0 / (1.0 + (platt_a * f.array() + platt_b).exp())).matrix();
}

json SvmModel::to_json() const {
  json sv = json::array();
  for (Eigen::Index r = 0; r < support_vectors.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < support_vectors.cols(); ++c)
      row.push_back(support_vectors(r, c));
    sv.push_back(std::move(row));
  }
  json coef = json::array();
  for (Eigen::Index i = 0; i < dual_coef.size(); ++i)
    coef.push_back(dual_coef(i));
  return {{"support_vectors", sv}, {"dual_coef", coef},   {"bias", bias},
          {"gamma", gamma},        {"platt_a", platt_a},  {"platt_b", platt_b}};
}

SvmModel SvmModel::from_json(const json& j) {
  SvmModel m;
  const auto& sv = j.at("support_vectors");
  const Eigen::Index rows = static_cast<Eigen::Index>(sv.size());
  const Eigen::Index cols =
      rows > 0 ? static_cast<Eigen::Index>(sv.at(0).size()) : 0;
  m.support_vectors.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m.support_vectors(r, c) = sv.at(static_cast<std::size_t>(r))
                                    .at(static_cast<std::size_t>(c))
                                    .get<double>();
  const auto& coef = j.at("dual_coef");
  m.dual_coef.resize(static_cast<Eigen::Index>(coef.size()));
  for (Eigen::Index i = 0; i < m.dual_coef.size(); ++i)
    m.dual_coef(i) = coef.at(static_cast<std::size_t>(i)).get<double>();
  m.bias = j.at("bias").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.platt_a = j.at("platt_a").get<double>();
  m.platt_b = j.at("platt_b").get<double>();
  return m;
}

SvmModel train_svm_rbf(const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& labels01, const SvmConfig& cfg) {
  if (x.rows() < 2) throw DataError("train_svm_rbf: need at least 2 samples");
  if (x.rows() != labels01.size())
    throw DataError("train_svm_rbf: label count mismatch");
  const double pos = labels01.sum();
  if (pos == 0.0 || pos == static_cast<double>(labels01.size()))
    throw DataError("train_svm_rbf: single-class training set");

  const double gamma0 = cfg.gamma > 0.0 ? cfg.gamma : default_gamma(x);
  if (!cfg.grid_search)
    return train_once(x, labels01, cfg.c, gamma0, cfg.tol, cfg.max_iter);

  // Small deterministic grid scored on a held-out quarter.
  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index i = x.rows() - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  const Eigen::Index n_val = std::max<Eigen::Index>(x.rows() / 4, 1);
  const Eigen::Index n_tr = x.rows() - n_val;
  Eigen::MatrixXd xtr(n_tr, x.cols()), xva(n_val, x.cols());
  Eigen::VectorXd ytr(n_tr), yva(n_val);
  for (Eigen::Index i = 0; i < n_tr; ++i) {
    xtr.row(i) = x.row(order[static_cast<std::size_t>(i)]);
    ytr(i) = labels01(order[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < n_val; ++i) {
    xva.row(i) = x.row(order[static_cast<std::size_t>(n_tr + i)]);
    yva(i) = labels01(order[static_cast<std::size_t>(n_tr + i)]);
  }

  double best_acc = -1.0, best_c = cfg.c, best_gamma = gamma0;
  for (double c : {0.1, 1.0, 10.0}) {
    for (double g : {0.25 * gamma0, gamma0, 4.0 * gamma0}) {
      if (ytr.sum() == 0.0 || ytr.sum() == static_cast<double>(n_tr)) continue;
      const SvmModel m = train_once(xtr, ytr, c, g, cfg.tol, cfg.max_iter);
      const Eigen::VectorXd dec = m.decision_batch(xva);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n_val; ++i)
        acc += ((dec(i) > 0.0) == (yva(i) > 0.5)) ? 1.0 : 0.0;
      acc /= static_cast<double>(n_val);
      if (acc > best_acc) {
        best_acc = acc;
        best_c = c;
        best_gamma = g;
      }
    }
  }
  return train_once(x, labels01, best_c, best_gamma, cfg.tol, cfg.max_iter);
}

}  // namespace coretherm
