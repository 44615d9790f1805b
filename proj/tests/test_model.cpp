// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "olqr/model.hpp"
#include "oracles.hpp"

using namespace olqr;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

double min_eig(const MatrixXd& S) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (S + S.transpose())).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("system and cost validation") {
  const MatrixXd A = -MatrixXd::Identity(2, 2);
  CHECK(code_of([&] { LtiSystem(A, MatrixXd::Ones(3, 1), MatrixXd::Ones(2, 1), MatrixXd::Ones(1, 1)); }) ==
        ErrorCode::Config);
  CHECK(code_of([&] { LtiSystem(A, MatrixXd::Ones(2, 1), MatrixXd::Ones(2, 1), -MatrixXd::Ones(1, 1)); }) ==
        ErrorCode::Config);
  CHECK(code_of([&] { CostWeights(MatrixXd::Identity(2, 2), MatrixXd::Zero(1, 1)); }) == ErrorCode::Config);
  MatrixXd Q(2, 2);
  Q << 1, 2, 0, 1;
  CHECK(code_of([&] { CostWeights(Q, MatrixXd::Ones(1, 1)); }) == ErrorCode::Config);
}

TEST_CASE("Lyapunov: scalar structure") {
  const MatrixXd P = solve_lyapunov(-MatrixXd::Identity(2, 2), 2.0 * MatrixXd::Identity(2, 2));
  CHECK((P - MatrixXd::Identity(2, 2)).norm() <= 1e-14);
}

TEST_CASE("Lyapunov: agrees with a Schur-based solve") {
  const MatrixXd A = oracle::example_A();
  const MatrixXd Q = 30.0 * MatrixXd::Identity(3, 3);
  const MatrixXd P = solve_lyapunov(A, Q);
  CHECK((P - oracle::lyapunov_schur(A, Q)).norm() <= 1e-10 * P.norm());

  std::mt19937_64 rng(21);
  for (int n = 1; n <= 6; ++n)
    for (int trial = 0; trial < 5; ++trial) {
      const MatrixXd Ak = oracle::random_hurwitz(n, rng);
      const MatrixXd Qb = oracle::random_psd(n, rng);
      const MatrixXd Pk = solve_lyapunov(Ak, Qb);
      CHECK((Pk - oracle::lyapunov_schur(Ak, Qb)).norm() <= 1e-10 * std::max(1.0, Pk.norm()));
      CHECK((Pk - Pk.transpose()).norm() == 0.0);
    }
}

TEST_CASE("Lyapunov: residual on random 4x4 and precondition") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd Ak = oracle::random_hurwitz(4, rng);
    const MatrixXd Qb = oracle::random_psd(4, rng);
    CHECK(lyapunov_residual(Ak, solve_lyapunov(Ak, Qb), Qb) <= 1e-8);
  }
  CHECK(code_of([] { solve_lyapunov(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)); }) ==
        ErrorCode::Precondition);
}

TEST_CASE("Kleinman on the 3-state example") {
  const auto sys = oracle::example_system(0.0);
  const auto w = oracle::example_weights();
  const KleinmanResult r = kleinman_iterate(sys, w, MatrixXd::Zero(1, 3));
  CHECK(r.converged);
  CHECK((r.K() - oracle::published_gain()).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(are_residual(sys, w, r.P()) <= 1e-6);
  CHECK(r.history.size() <= 10);
  for (const auto& it : r.history) {
    CHECK(min_eig(it.P) > 0.0);
    CHECK((it.P - it.P.transpose()).norm() <= 1e-10 * it.P.norm());
  }
  // Fixed point: one more step moves P by less than the tolerance.
  const MatrixXd P_next = solve_lyapunov(sys.A - sys.B * r.K(), w.closed_loop_cost(r.K()));
  CHECK((P_next - r.P()).norm() < 1e-10);
}

TEST_CASE("Kleinman without actuation reduces to a Lyapunov solve") {
  const LtiSystem sys(-MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 1));
  const CostWeights w(MatrixXd::Identity(2, 2), MatrixXd::Ones(1, 1));
  const KleinmanResult r = kleinman_iterate(sys, w, MatrixXd::Zero(1, 2));
  CHECK(r.K().cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.P() - 0.5 * MatrixXd::Identity(2, 2)).norm() <= 1e-14);
}

TEST_CASE("Kleinman iterates decrease monotonically") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 4, m = 1 + trial % 2;
    const LtiSystem sys(oracle::random_hurwitz(n, rng, 0.2), oracle::random_matrix(n, m, rng), MatrixXd::Zero(n, 1),
                        MatrixXd::Zero(1, 1));
    const CostWeights w(oracle::random_psd(n, rng) + 0.1 * MatrixXd::Identity(n, n), MatrixXd::Identity(m, m));
    const KleinmanResult r = kleinman_iterate(sys, w, MatrixXd::Zero(m, n));
    REQUIRE(r.converged);
    for (std::size_t k = 1; k < r.history.size(); ++k)
      CHECK(min_eig(r.history[k - 1].P - r.history[k].P) >= -1e-9);
    for (const auto& ev : closed_loop_eigs(sys, r.K())) CHECK(ev.real() < 0.0);
  }
}

TEST_CASE("Kleinman error paths") {
  const auto sys = oracle::example_system(0.0);
  const auto w = oracle::example_weights();
  MatrixXd bad(1, 3);
  bad << -10, 0, 0;
  CHECK(code_of([&] { kleinman_iterate(sys, w, bad); }) == ErrorCode::Precondition);
  try {
    kleinman_iterate(sys, w, MatrixXd::Zero(1, 3), 1e-300, 2);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.history().size() == 2);
  }
}

TEST_CASE("ARE residual") {
  const auto sys = oracle::example_system(0.0);
  const auto w = oracle::example_weights();
  CHECK(are_residual(sys, w, MatrixXd::Zero(3, 3)) == doctest::Approx(30.0 * std::sqrt(3.0)));

  // First-order slope along a symmetric direction S equals ||Acl' S + S Acl||_F.
  const KleinmanResult r = kleinman_iterate(sys, w, MatrixXd::Zero(1, 3));
  const MatrixXd Acl = sys.A - sys.B * r.K();
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd S = oracle::random_symmetric(3, rng);
    const double delta = 1e-5;
    const double fd = (are_residual(sys, w, r.P() + delta * S) - are_residual(sys, w, r.P())) / delta;
    const double slope = (Acl.transpose() * S + S * Acl).norm();
    CHECK(std::abs(fd - slope) <= 0.05 * slope);
  }
}

TEST_CASE("Hurwitz tests") {
  CHECK(is_hurwitz(oracle::example_A()));
  MatrixXd rot(2, 2);
  rot << 0, 1, -1, 0;
  CHECK_FALSE(is_hurwitz(rot));
  MatrixXd K(1, 3);
  K << -4.7022, 6.2931, -1.1790;
  const auto sys = oracle::example_system(0.0);
  CHECK_FALSE(is_hurwitz(sys.A - sys.B * K));
  const auto ev = closed_loop_eigs(sys, MatrixXd::Zero(1, 3));
  for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev[i - 1].real() <= ev[i].real());
}

TEST_CASE("assumption checks report rather than fail") {
  MatrixXd A(2, 2);
  A << 1, 0, 0, -1;
  MatrixXd B(2, 1);
  B << 0, 1;
  const LtiSystem sys(A, B, MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 1));
  const AssumptionReport r = check_assumptions(sys, CostWeights(MatrixXd::Identity(2, 2), MatrixXd::Ones(1, 1)));
  CHECK_FALSE(r.stabilizable);
  CHECK(r.detectable);
  CHECK(r.warnings.size() == 1);

  const AssumptionReport d = check_assumptions(sys, CostWeights(MatrixXd::Zero(2, 2), MatrixXd::Ones(1, 1)));
  CHECK_FALSE(d.detectable);

  const auto ex = check_assumptions(oracle::example_system(1.0), oracle::example_weights());
  CHECK(ex.stabilizable);
  CHECK(ex.detectable);
  CHECK(ex.warnings.empty());
}
