// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "olqr/errors.hpp"
#include "olqr/linalg.hpp"

namespace olqr {

struct CostWeights {
  MatrixXd Q;
  MatrixXd R;

  CostWeights() = default;
  /// Q symmetric PSD, R symmetric positive definite; throws ErrorCode::Config.
  CostWeights(MatrixXd q, MatrixXd r);

  /// Q + K' R K.
  MatrixXd closed_loop_cost(const MatrixXd& K) const { return Q + K.transpose() * R * K; }
};

/// One policy-iteration step: P evaluates the gain used at this step, K is the
/// improved gain derived from P.
struct PolicyIterate {
  MatrixXd P;
  MatrixXd K;
  int iteration = 0;
  /// ||P_k - P_{k-1}||_F; NaN on the first step.
  double delta_p = 0.0;
  /// Lyapunov residual for oracle iterates, least-squares residual for data iterates.
  double residual = 0.0;
  /// Condition number of the regression matrix; NaN for oracle iterates.
  double theta_condition = 0.0;

  PolicyIterate() = default;
  PolicyIterate(MatrixXd p, MatrixXd k, int iter);
};

struct KleinmanResult {
  std::vector<PolicyIterate> history;
  bool converged = false;

  const MatrixXd& P() const { return history.back().P; }
  const MatrixXd& K() const { return history.back().K; }
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<PolicyIterate> history)
      : Error(ErrorCode::NonConvergence, what), history_(std::move(history)) {}
  const std::vector<PolicyIterate>& history() const noexcept { return history_; }

 private:
  std::vector<PolicyIterate> history_;
};

}  // namespace olqr
