// SPDX-License-Identifier: Apache-2.0
#include "olqr/policy.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Eigenvalues>

namespace olqr {
namespace {

double min_sym_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_symmetric(const MatrixXd& m) {
  return m.rows() == m.cols() && (m - m.transpose()).norm() <= 1e-10 * std::max(1.0, m.norm());
}

}  // namespace

CostWeights::CostWeights(MatrixXd q, MatrixXd r) : Q(std::move(q)), R(std::move(r)) {
  if (!is_symmetric(Q)) throw Error(ErrorCode::Config, "cost: Q must be square symmetric");
  if (!is_symmetric(R) || R.rows() == 0) throw Error(ErrorCode::Config, "cost: R must be square symmetric");
  if (min_sym_eig(Q) < -1e-12) throw Error(ErrorCode::Config, "cost: Q must be positive semidefinite");
  if (min_sym_eig(R) <= 0.0) throw Error(ErrorCode::Config, "cost: R must be positive definite");
  Q = symmetrize(Q);
  R = symmetrize(R);
}

PolicyIterate::PolicyIterate(MatrixXd p, MatrixXd k, int iter)
    : P(symmetrize(p)), K(std::move(k)), iteration(iter), delta_p(std::numeric_limits<double>::quiet_NaN()),
      theta_condition(std::numeric_limits<double>::quiet_NaN()) {}

}  // namespace olqr
