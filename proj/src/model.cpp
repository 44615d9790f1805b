// SPDX-License-Identifier: Apache-2.0
#include "olqr/model.hpp"

#include <algorithm>
#include <cmath>
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

// Smallest singular value of a complex matrix relative to its largest.
bool full_column_rank(const Eigen::MatrixXcd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& s = svd.singularValues();
  const double smax = std::max(1.0, s(0));
  return s(s.size() - 1) > tol * smax;
}

}  // namespace

LtiSystem::LtiSystem(MatrixXd a, MatrixXd b, MatrixXd e, MatrixXd noise_covariance)
    : A(std::move(a)), B(std::move(b)), E(std::move(e)), sigma(std::move(noise_covariance)) {
  const auto nn = A.rows();
  if (nn == 0 || A.cols() != nn) throw Error(ErrorCode::Config, "system: A must be square and non-empty");
  if (B.rows() != nn) throw Error(ErrorCode::Config, "system: B must have as many rows as A");
  if (E.rows() != nn) throw Error(ErrorCode::Config, "system: E must have as many rows as A");
  if (sigma.rows() != E.cols() || sigma.cols() != E.cols())
    throw Error(ErrorCode::Config, "system: sigma must be p x p with p = cols(E)");
  if (!is_symmetric(sigma)) throw Error(ErrorCode::Config, "system: sigma must be symmetric");
  if (sigma.size() > 0 && min_sym_eig(sigma) < -1e-12)
    throw Error(ErrorCode::Config, "system: sigma must be positive semidefinite");
  sigma = symmetrize(sigma);
}

MatrixXd solve_lyapunov(const MatrixXd& Ak, const MatrixXd& Qbar) {
  if (Ak.rows() != Ak.cols() || Qbar.rows() != Ak.rows() || Qbar.cols() != Ak.cols())
    throw Error(ErrorCode::Shape, "solve_lyapunov: dimension mismatch");
  if (!is_hurwitz(Ak)) throw Error(ErrorCode::Precondition, "solve_lyapunov: closed-loop matrix is not Hurwitz");
  const auto n = Ak.rows();
  const MatrixXd I = MatrixXd::Identity(n, n);
  const MatrixXd At = Ak.transpose();
  const MatrixXd L = kron(I, At) + kron(At, I);
  Eigen::FullPivLU<MatrixXd> lu(L);
  if (!lu.isInvertible()) throw Error(ErrorCode::Numerical, "solve_lyapunov: singular Kronecker system");
  const VectorXd p = lu.solve(-vec(Qbar));
  return symmetrize(unvec(p, n, n));
}

double lyapunov_residual(const MatrixXd& Ak, const MatrixXd& P, const MatrixXd& Qbar) {
  return (Ak.transpose() * P + P * Ak + Qbar).norm();
}

KleinmanResult kleinman_iterate(const LtiSystem& sys, const CostWeights& w, const MatrixXd& K0, double tol,
                                int max_iter) {
  if (K0.rows() != sys.m() || K0.cols() != sys.n()) throw Error(ErrorCode::Shape, "kleinman: K0 must be m x n");
  if (!is_hurwitz(sys.A - sys.B * K0))
    throw Error(ErrorCode::Precondition, "kleinman: A - B K0 is not Hurwitz");
  const Eigen::LLT<MatrixXd> r_chol(w.R);

  KleinmanResult out;
  MatrixXd K = K0;
  for (int k = 0; k < max_iter; ++k) {
    const MatrixXd Ak = sys.A - sys.B * K;
    const MatrixXd Qbar = w.closed_loop_cost(K);
    const MatrixXd P = solve_lyapunov(Ak, Qbar);
    PolicyIterate it(P, r_chol.solve(sys.B.transpose() * P), k);
    it.residual = lyapunov_residual(Ak, it.P, Qbar);
    if (!out.history.empty()) it.delta_p = (it.P - out.history.back().P).norm();
    K = it.K;
    out.history.push_back(std::move(it));
    if (out.history.size() > 1 && out.history.back().delta_p < tol) {
      out.converged = true;
      return out;
    }
  }
  throw NonConvergenceError("kleinman: no convergence within max_iter", std::move(out.history));
}

double are_residual(const LtiSystem& sys, const CostWeights& w, const MatrixXd& P) {
  const MatrixXd BtP = sys.B.transpose() * P;
  const MatrixXd res = sys.A.transpose() * P + P * sys.A + w.Q - BtP.transpose() * w.R.llt().solve(BtP);
  return res.norm();
}

bool is_hurwitz(const MatrixXd& M, double margin) {
  if (M.size() == 0) return true;
  Eigen::EigenSolver<MatrixXd> es(M, false);
  return es.eigenvalues().real().maxCoeff() < margin;
}

std::vector<std::complex<double>> closed_loop_eigs(const LtiSystem& sys, const MatrixXd& K) {
  Eigen::EigenSolver<MatrixXd> es(sys.A - sys.B * K, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return ev;
}

AssumptionReport check_assumptions(const LtiSystem& sys, const CostWeights& w, double tol) {
  AssumptionReport rep;
  const auto n = sys.n();
  Eigen::EigenSolver<MatrixXd> es(sys.A, false);
  Eigen::SelfAdjointEigenSolver<MatrixXd> qes(w.Q);
  const MatrixXd q_half =
      qes.eigenvectors() * qes.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * qes.eigenvectors().transpose();
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);

  for (const auto& lambda : es.eigenvalues()) {
    if (lambda.real() < 0.0) continue;
    const Eigen::MatrixXcd shifted = sys.A.cast<std::complex<double>>() - lambda * I;

    Eigen::MatrixXcd ctrl(n, n + sys.m());
    ctrl << shifted, sys.B.cast<std::complex<double>>();
    if (!full_column_rank(ctrl.adjoint(), tol) && rep.stabilizable) {
      rep.stabilizable = false;
      rep.warnings.push_back("(A, B) is not stabilizable: uncontrollable mode with Re >= 0");
    }

    Eigen::MatrixXcd obs(2 * n, n);
    obs << shifted, q_half.cast<std::complex<double>>();
    if (!full_column_rank(obs, tol) && rep.detectable) {
      rep.detectable = false;
      rep.warnings.push_back("(Q^1/2, A) is not detectable: unobservable mode with Re >= 0");
    }
  }
  return rep;
}

}  // namespace olqr
