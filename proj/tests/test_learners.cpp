// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "olqr/learners.hpp"
#include "olqr/model.hpp"
#include "olqr/sim.hpp"
#include "oracles.hpp"

using namespace olqr;

namespace {

SimOptions options(int l = 100, bool record = false, double dt = 1e-3) {
  SimOptions o;
  o.dt = dt;
  o.interval_count = l;
  o.x0 = VectorXd::Constant(3, 0.4);
  o.record_disturbance = record;
  return o;
}

ExplorationSignal signal(std::uint64_t seed = 4) { return ExplorationSignal::random(1, 10, 1.0, -5, 5, seed); }

DataMatrices measured_run(double sigma, std::uint64_t seed = 8, double dt = 1e-3) {
  return build_matrices(
      simulate(oracle::example_system(sigma), signal(), std::nullopt, options(100, true, dt), seed), true);
}

std::vector<DataMatrices> batch(double sigma, int N, std::uint64_t seed, int l = 100, double dt = 1e-3) {
  std::vector<DataMatrices> out;
  for (const auto& t : generate_episodes(oracle::example_system(sigma), signal(seed), N, options(l, false, dt), seed))
    out.push_back(build_matrices(t, false));
  return out;
}

LearnerConfig config() {
  LearnerConfig c;
  c.K0 = MatrixXd::Zero(1, 3);
  return c;
}

MatrixXd oracle_gain() {
  return kleinman_iterate(oracle::example_system(0.0), oracle::example_weights(), MatrixXd::Zero(1, 3)).K();
}

double max_abs(const MatrixXd& M) { return M.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("unknown layout") {
  const UnknownLayout L{3, 1, 1};
  CHECK(L.p_size() == 6);
  CHECK(L.k_offset() == 6);
  CHECK(L.e_offset() == 9);
  CHECK(L.total() == 12);
  CHECK(UnknownLayout{3, 1, 0}.total() == 9);
}

TEST_CASE("assemble_exact structure") {
  const DataMatrices dm = measured_run(1.0);
  const CostWeights w(MatrixXd::Identity(3, 3), MatrixXd::Ones(1, 1));
  const RegressionSystem rs = assemble_exact(dm, MatrixXd::Zero(1, 3), w);
  CHECK(rs.Theta.cols() == 12);
  CHECK(rs.Theta.leftCols(6) == dm.Dxx);
  CHECK(rs.Theta.middleCols(6, 3) == -2.0 * dm.Ixu0);
  CHECK(rs.Theta.rightCols(3) == -2.0 * *dm.Ixe);
  // Qbar = I: Phi is minus the integral of ||x||^2 per window.
  const VectorXd direct = dm.Ixx.col(0) + dm.Ixx.col(4) + dm.Ixx.col(8);
  CHECK((rs.Phi + direct).norm() <= 1e-13 * direct.norm());

  DataMatrices no_e = dm;
  no_e.Ixe.reset();
  CHECK_THROWS_AS(assemble_exact(no_e, MatrixXd::Zero(1, 3), w), Error);
  CHECK_THROWS_AS(assemble_episodic(no_e, MatrixXd::Zero(1, 3), w), Error);
}

TEST_CASE("model-based iterates satisfy the data regressions") {
  const auto sys = oracle::example_system(0.0);
  const auto w = oracle::example_weights();
  MatrixXd K(1, 3);
  K << 1.0, 0.5, -0.2;
  const MatrixXd P = solve_lyapunov(sys.A - sys.B * K, w.closed_loop_cost(K));
  const MatrixXd K_next = sys.B.transpose() * P;

  // The trapezoid rule leaves an O(dt^2) relative residual (about 2.6e-6 at
  // dt = 1e-3), so these checks run on a finer grid.
  const double dt = 2.5e-4;
  SUBCASE("measured disturbance") {
    const DataMatrices dm = measured_run(1.0, 8, dt);
    const RegressionSystem rs = assemble_exact(dm, K, w);
    VectorXd z(12);
    z << svec(P), vec(K_next), vec(sys.E.transpose() * P);
    const double rel = (rs.Theta * z - rs.Phi).norm() / rs.Phi.norm();
    MESSAGE("exact consistency residual " << rel);
    CHECK(rel <= 1e-6);
  }
  SUBCASE("noise-free average") {
    DataMatrices dm = average_matrices(batch(0.0, 2, 3, 100, dt));
    const RegressionSystem rs = assemble_episodic(dm, K, w);
    VectorXd z(9);
    z << svec(P), vec(K_next);
    const double rel = (rs.Theta * z - rs.Phi).norm() / rs.Phi.norm();
    MESSAGE("episodic consistency residual " << rel);
    CHECK(rel <= 1e-6);
  }
}

TEST_CASE("solve_iteration on synthetic systems") {
  std::mt19937_64 rng(31);
  RegressionSystem rs;
  rs.layout = UnknownLayout{3, 1, 1};

  SUBCASE("square invertible") {
    rs.Theta = oracle::random_matrix(12, 12, rng);
    VectorXd z(12);
    z << svec(oracle::random_symmetric(3, rng)), oracle::random_matrix(6, 1, rng);
    rs.Phi = rs.Theta * z;
    const auto sol = solve_iteration(rs);
    CHECK((sol.z - z).norm() <= 1e-10 * z.norm());
    CHECK(sol.EtP.has_value());
    CHECK((sol.P - smat(z.head(6))).norm() <= 1e-10);

    RegressionSystem doubled = rs;
    doubled.Theta.resize(24, 12);
    doubled.Theta << rs.Theta, rs.Theta;
    doubled.Phi.resize(24);
    doubled.Phi << rs.Phi, rs.Phi;
    CHECK((solve_iteration(doubled).z - z).norm() <= 1e-10 * z.norm());
  }
  SUBCASE("orthogonal noise is projected away") {
    rs.Theta = oracle::random_matrix(40, 12, rng);
    const VectorXd z = oracle::random_matrix(12, 1, rng);
    VectorXd noise = oracle::random_matrix(40, 1, rng);
    const Eigen::HouseholderQR<MatrixXd> qr(rs.Theta);
    const MatrixXd Qthin = qr.householderQ() * MatrixXd::Identity(40, 12);
    noise -= Qthin * (Qthin.transpose() * noise);
    rs.Phi = rs.Theta * z + noise;
    const auto sol = solve_iteration(rs);
    CHECK((sol.z - z).norm() <= 1e-10 * z.norm());
    CHECK(sol.residual == doctest::Approx(noise.norm()).epsilon(1e-8));
  }
  SUBCASE("rank deficiency names the missing dimension") {
    rs.Theta = oracle::random_matrix(40, 12, rng);
    rs.Theta.col(11) = rs.Theta.col(0);
    rs.Theta.col(10) = 2.0 * rs.Theta.col(1);
    rs.Phi = oracle::random_matrix(40, 1, rng);
    try {
      solve_iteration(rs);
      FAIL("expected an excitation error");
    } catch (const ExcitationError& e) {
      CHECK(e.deficiency() == 2);
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
  }
}

TEST_CASE("exact learning with measured disturbance") {
  const DataMatrices dm = measured_run(4.0);
  const auto w = oracle::example_weights();
  const LearningResult r = learn_exact(dm, w, config());
  CHECK(r.converged);
  CHECK(r.history.size() <= 10);
  CHECK(max_abs(r.K() - oracle_gain()) <= 1e-2);
  REQUIRE(r.EtP.has_value());
  const auto sys = oracle::example_system(4.0);
  CHECK(max_abs(*r.EtP - sys.E.transpose() * r.P()) <= 1e-2 * max_abs(r.P()));
  // Bookkeeping: converged flag means the last step moved P less than varsigma.
  CHECK(r.history.back().delta_p < config().varsigma);
}

TEST_CASE("exact learning needs a non-degenerate disturbance record") {
  // With e identically zero the Ixe block vanishes and [Ixx Ixu0 Ixe] loses p*n rank.
  const DataMatrices dm = measured_run(0.0);
  try {
    learn_exact(dm, oracle::example_weights(), config());
    FAIL("expected an excitation error");
  } catch (const ExcitationError& e) {
    CHECK(e.required() == 12);
    CHECK(e.achieved() == 9);
  }
}

TEST_CASE("episodic learning: noise-free reduction and naive equivalence") {
  const auto dms = batch(0.0, 3, 5);
  const auto w = oracle::example_weights();
  const LearningResult ep = learn_episodic(dms, w, config());
  CHECK(max_abs(ep.K() - oracle_gain()) <= 1e-3);
  CHECK(ep.history.size() <= 10);

  const auto trajs = generate_episodes(oracle::example_system(0.0), signal(5), 3, options(), 5);
  const LearningResult nv = learn_naive_average(trajs, w, config());
  REQUIRE(nv.history.size() == ep.history.size());
  CHECK(nv.K() == ep.K());
  CHECK(nv.P() == ep.P());
}

TEST_CASE("episodic learning at moderate noise") {
  const auto dms = batch(0.25, 50, 11);
  const LearningResult r = learn_episodic(dms, oracle::example_weights(), config());
  CHECK(r.converged);
  CHECK(max_abs(r.K() - oracle_gain()) <= 0.05);
  const auto sys = oracle::example_system(0.0);
  CHECK(is_hurwitz(sys.A - sys.B * r.K()));
  CHECK(r.history.size() <= static_cast<std::size_t>(config().max_iter));
}

TEST_CASE("learner error paths") {
  const auto dms = batch(0.0, 1, 5);
  LearnerConfig c = config();
  c.max_iter = 2;
  c.varsigma = 1e-300;
  try {
    learn_episodic(dms, oracle::example_weights(), c);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.history().size() == 2);
  }
  c = config();
  c.varsigma = 0.0;
  CHECK_THROWS_AS(learn_episodic(dms, oracle::example_weights(), c), Error);

  const auto few = batch(1.0, 1, 5, 8);
  try {
    learn_episodic(few, oracle::example_weights(), config());
    FAIL("expected an excitation error");
  } catch (const ExcitationError& e) {
    CHECK(e.required() == 9);
  }
  const std::vector<DataMatrices> none;
  CHECK_THROWS_AS(learn_episodic(none, oracle::example_weights(), config()), Error);
}

TEST_CASE("covariance gap residual") {
  const auto w = oracle::example_weights();
  const auto opt = kleinman_iterate(oracle::example_system(0.0), w, MatrixXd::Zero(1, 3));
  const MatrixXd &P = opt.P(), &K = opt.K();

  const auto quiet = generate_episodes(oracle::example_system(0.0), signal(), 30, options(10), 2);
  CHECK(covariance_gap_residual(quiet, P, K, K, w) == 0.0);
  const std::vector<Trajectory> few(quiet.begin(), quiet.begin() + 29);
  try {
    covariance_gap_residual(few, P, K, K, w);
    FAIL("expected an estimation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Estimation);
  }

  // Same seeds with the noise scaled by s: every deviation scales by s, the
  // residual by s^2.
  double base = 0.0;
  for (double s : {1.0, 2.0, 4.0}) {
    const auto trajs = generate_episodes(oracle::example_system(100.0 * s * s), signal(), 40, options(20), 6);
    const double r = covariance_gap_residual(trajs, P, K, K, w);
    if (s == 1.0) base = r;
    CHECK(std::abs(r / (base * s * s) - 1.0) <= 0.25);
    CHECK(covariance_gap_residual(trajs, P, K, K, w, WindowSelection{3}) != 0.0);
  }

  const auto trajs = generate_episodes(oracle::example_system(100.0), signal(), 40, options(20), 6);
  const GapEstimate g = covariance_gap_bootstrap(trajs, P, K, K, w, {}, 50, 1);
  CHECK(g.value == doctest::Approx(covariance_gap_residual(trajs, P, K, K, w)).epsilon(1e-10));
  CHECK(g.standard_error > 0.0);
  CHECK(covariance_gap_bootstrap(trajs, P, K, K, w, {}, 50, 1).standard_error == g.standard_error);
  CHECK_THROWS_AS(covariance_gap_residual(trajs, P, K, K, w, WindowSelection{20}), Error);
}

TEST_CASE("run report and final gain records") {
  const LearningResult r = learn_episodic(batch(0.0, 1, 5), oracle::example_weights(), config());
  const std::string report = run_report_csv(r, oracle_gain());
  CHECK(report.rfind("iteration,delta_p,gain_error_maxabs,condition,residual\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(report.begin(), report.end(), '\n')) == r.history.size() + 1);
  const std::string fin = final_gain_csv(r);
  CHECK(fin.find("# converged=1") != std::string::npos);
  CHECK(fin.rfind("row,col,value\n0,0,", 0) == 0);
}
