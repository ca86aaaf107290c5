#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "coretherm/common.hpp"
#include "json.hpp"

namespace coretherm {

struct SvmConfig {
  double c = 1.0;
  double gamma = 0.0;  // 0 selects 1 / (n_features * mean feature variance)
  double tol = 1e-3;
  long max_iter = 500000;
  bool grid_search = false;  // small C/gamma grid on a held-out quarter
  std::uint64_t seed = 1;
};

// Soft-margin SVM with a Gaussian kernel, trained by sequential minimal
// optimization on the maximal violating pair; likelihoods come from a
// Platt-style sigmoid fitted on the training decision values.
struct SvmModel {
  Eigen::MatrixXd support_vectors;  // one row per support vector
  Eigen::VectorXd dual_coef;        // alpha_i * y_i
  double bias = 0.0;                // decision = sum coef K(sv, x) + bias
  double gamma = 0.0;
  double platt_a = 0.0;
  double platt_b = 0.0;

  double decision(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd decision_batch(const Eigen::MatrixXd& x) const;
  double likelihood(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd likelihood_batch(const Eigen::MatrixXd& x) const;

  nlohmann::json to_json() const;
  static SvmModel from_json(const nlohmann::json& j);
};

// labels are 0/1; features should already be standardized.
SvmModel train_svm_rbf(const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& labels01, const SvmConfig& cfg);

}  // namespace coretherm
