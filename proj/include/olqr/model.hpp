// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "olqr/errors.hpp"
#include "olqr/linalg.hpp"
#include "olqr/policy.hpp"

namespace olqr {

/// Real part an eigenvalue must stay below to count as stable.
inline constexpr double kHurwitzMargin = -1e-9;

/// Plant xdot = A x + B u + E e with e ~ N(0, sigma). Only the simulator and the
/// model-based oracle ever see this type.
struct LtiSystem {
  MatrixXd A;
  MatrixXd B;
  MatrixXd E;
  MatrixXd sigma;

  LtiSystem() = default;
  /// Validates dimensions and that sigma is symmetric PSD; throws ErrorCode::Config.
  LtiSystem(MatrixXd a, MatrixXd b, MatrixXd e, MatrixXd noise_covariance);

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return E.cols(); }
};

/// Solves Ak' P + P Ak + Qbar = 0 through the dense Kronecker system
/// (I (x) Ak' + Ak' (x) I) vec(P) = -vec(Qbar). Ak must be Hurwitz.
MatrixXd solve_lyapunov(const MatrixXd& Ak, const MatrixXd& Qbar);

/// ||Ak' P + P Ak + Qbar||_F.
double lyapunov_residual(const MatrixXd& Ak, const MatrixXd& P, const MatrixXd& Qbar);

/// Model-based policy iteration from a stabilizing K0. Stops once
/// ||P_k - P_{k-1}||_F < tol; throws NonConvergenceError after max_iter steps.
KleinmanResult kleinman_iterate(const LtiSystem& sys, const CostWeights& w, const MatrixXd& K0,
                                double tol = 1e-10, int max_iter = 100);

/// ||A'P + PA + Q - P B R^-1 B' P||_F.
double are_residual(const LtiSystem& sys, const CostWeights& w, const MatrixXd& P);

bool is_hurwitz(const MatrixXd& M, double margin = kHurwitzMargin);

/// Eigenvalues of A - B K sorted by ascending real part (ties by imaginary part).
std::vector<std::complex<double>> closed_loop_eigs(const LtiSystem& sys, const MatrixXd& K);

struct AssumptionReport {
  bool stabilizable = true;
  bool detectable = true;
  std::vector<std::string> warnings;
};

/// PBH rank tests for (A, B) stabilizability and (Q^1/2, A) detectability.
/// Failures are reported as warnings, never thrown.
AssumptionReport check_assumptions(const LtiSystem& sys, const CostWeights& w, double tol = 1e-9);

}  // namespace olqr
