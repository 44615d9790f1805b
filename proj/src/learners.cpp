// SPDX-License-Identifier: Apache-2.0
#include "olqr/learners.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "olqr/errors.hpp"
#include "olqr/io.hpp"

namespace olqr {
namespace {

// Shared part of both assemblies: [Dxx, -2 Ixx (I (x) K'R) - 2 Ixu0 (I (x) R)] and Phi.
RegressionSystem assemble_core(const DataMatrices& dm, const MatrixXd& K, const CostWeights& w, Eigen::Index p) {
  const auto n = dm.n, m = dm.m;
  if (K.rows() != m || K.cols() != n) throw Error(ErrorCode::Shape, "assemble: K must be m x n");
  if (w.Q.rows() != n || w.R.rows() != m) throw Error(ErrorCode::Shape, "assemble: cost weights do not match data");
  RegressionSystem rs;
  rs.layout = {n, m, p};
  const Eigen::Index l = dm.interval_count();
  rs.Theta.resize(l, rs.layout.total());
  const MatrixXd I = MatrixXd::Identity(n, n);
  rs.Theta.leftCols(rs.layout.p_size()) = dm.Dxx;
  rs.Theta.middleCols(rs.layout.k_offset(), rs.layout.k_size()) =
      -2.0 * dm.Ixx * kron(I, K.transpose() * w.R) - 2.0 * dm.Ixu0 * kron(I, w.R);
  rs.Phi = -dm.Ixx * vec(w.closed_loop_cost(K));
  return rs;
}

double condition_of(const Eigen::JacobiSVD<MatrixXd>& svd) {
  const auto& s = svd.singularValues();
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

template <typename Assemble>
LearningResult iterate(Assemble&& assemble, const CostWeights& w, const LearnerConfig& cfg) {
  if (!(cfg.varsigma > 0.0)) throw Error(ErrorCode::Config, "learner: varsigma must be positive");
  if (cfg.max_iter < 1) throw Error(ErrorCode::Config, "learner: max_iter must be at least 1");
  LearningResult out;
  MatrixXd K = cfg.K0;
  for (int k = 0; k < cfg.max_iter; ++k) {
    const RegressionSystem rs = assemble(K, w);
    IterationSolution sol = solve_iteration(rs);
    PolicyIterate it(sol.P, sol.K_next, k);
    it.residual = sol.residual;
    it.theta_condition = sol.condition;
    if (!out.history.empty()) it.delta_p = (it.P - out.history.back().P).norm();
    for (auto& msg : sol.warnings) out.warnings.push_back("iteration " + std::to_string(k) + ": " + msg);
    out.EtP = std::move(sol.EtP);
    K = it.K;
    const bool blown = !std::isfinite(it.P.norm()) || it.P.norm() > cfg.divergence_threshold;
    out.history.push_back(std::move(it));
    if (blown)
      throw NonConvergenceError("learner: iteration diverged (||P_k|| above threshold)", std::move(out.history));
    if (out.history.size() > 1 && out.history.back().delta_p < cfg.varsigma) {
      out.converged = true;
      return out;
    }
  }
  throw NonConvergenceError("learner: no convergence within max_iter", std::move(out.history));
}

}  // namespace

RegressionSystem assemble_exact(const DataMatrices& dm, const MatrixXd& K, const CostWeights& w) {
  if (!dm.Ixe) throw Error(ErrorCode::Mode, "assemble_exact: Ixe block missing (disturbance not recorded)");
  RegressionSystem rs = assemble_core(dm, K, w, dm.p);
  rs.Theta.rightCols(rs.layout.e_size()) = -2.0 * *dm.Ixe;
  Eigen::JacobiSVD<MatrixXd> svd(rs.Theta);
  rs.condition = condition_of(svd);
  return rs;
}

RegressionSystem assemble_episodic(const DataMatrices& dm, const MatrixXd& K, const CostWeights& w) {
  if (!dm.averaged) throw Error(ErrorCode::Mode, "assemble_episodic: data matrices are not an episode average");
  RegressionSystem rs = assemble_core(dm, K, w, 0);
  Eigen::JacobiSVD<MatrixXd> svd(rs.Theta);
  rs.condition = condition_of(svd);
  return rs;
}

IterationSolution solve_iteration(const RegressionSystem& rs) {
  if (rs.Theta.cols() != rs.layout.total() || rs.Theta.rows() != rs.Phi.size())
    throw Error(ErrorCode::Shape, "solve_iteration: Theta/Phi do not match layout");
  if (std::isnan(rs.condition)) throw Error(ErrorCode::Numerical, "solve_iteration: condition number undefined");
  Eigen::JacobiSVD<MatrixXd> svd(rs.Theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RankReport rank = rank_report(rs.Theta, static_cast<int>(rs.Theta.cols()));
  if (!rank.passed) {
    throw ExcitationError("solve_iteration: Theta is rank deficient (deficient subspace dimension " +
                              std::to_string(rank.required - rank.achieved) + ")",
                          rank.required, rank.achieved);
  }
  const VectorXd& s = svd.singularValues();
  const VectorXd z = svd.matrixV() * (svd.matrixU().transpose() * rs.Phi).cwiseQuotient(s);

  IterationSolution sol;
  sol.z = z;
  sol.condition = condition_of(svd);
  sol.residual = (rs.Theta * z - rs.Phi).norm();
  sol.P = smat(z.head(rs.layout.p_size()));
  sol.K_next = unvec(z.segment(rs.layout.k_offset(), rs.layout.k_size()), rs.layout.m, rs.layout.n);
  if (rs.layout.p > 0) sol.EtP = unvec(z.tail(rs.layout.e_size()), rs.layout.p, rs.layout.n);
  if (sol.condition > 1e8) sol.warnings.push_back("Theta condition number " + format_double(sol.condition) + " > 1e8");
  return sol;
}

LearningResult learn_exact(const DataMatrices& dm, const CostWeights& w, const LearnerConfig& cfg) {
  const RankReport rank = check_rank_exact(dm);
  if (!rank.passed)
    throw ExcitationError("learn_exact: rank [Ixx Ixu0 Ixe] is " + std::to_string(rank.achieved) + ", need " +
                              std::to_string(rank.required),
                          rank.required, rank.achieved);
  return iterate([&](const MatrixXd& K, const CostWeights& cw) { return assemble_exact(dm, K, cw); }, w, cfg);
}

LearningResult learn_averaged(const DataMatrices& averaged, const CostWeights& w, const LearnerConfig& cfg) {
  const RankReport rank = check_rank_episodic(averaged);
  if (!rank.passed)
    throw ExcitationError("learn_episodic: rank [Ixx Ixu0] is " + std::to_string(rank.achieved) + ", need " +
                              std::to_string(rank.required),
                          rank.required, rank.achieved);
  return iterate([&](const MatrixXd& K, const CostWeights& cw) { return assemble_episodic(averaged, K, cw); }, w,
                 cfg);
}

LearningResult learn_episodic(std::span<const DataMatrices> dms, const CostWeights& w, const LearnerConfig& cfg) {
  if (dms.empty()) throw Error(ErrorCode::Config, "learn_episodic: no episodes");
  std::vector<DataMatrices> stripped(dms.begin(), dms.end());
  for (auto& d : stripped) d.Ixe.reset();
  return learn_averaged(average_matrices(stripped), w, cfg);
}

LearningResult learn_naive_average(std::span<const Trajectory> trajs, const CostWeights& w, const LearnerConfig& cfg) {
  DataMatrices dm = build_matrices(naive_average_trajectory(trajs), false);
  // A single (mean) trajectory; it enters the same regression as an average.
  dm.averaged = true;
  return learn_averaged(dm, w, cfg);
}

namespace {

// Per-sample weights: the residual is sum_s Tr((alpha_s P + beta_s G) S(t_s)).
struct GapWeights {
  std::vector<Eigen::Index> samples;
  std::vector<MatrixXd> forms;
};

GapWeights gap_weights(const Trajectory& ref, const MatrixXd& P, const MatrixXd& K, const MatrixXd& K_next,
                       const CostWeights& w, WindowSelection windows) {
  const int h = ref.steps_per_interval();
  const int l = ref.interval_count;
  int first = 0, last = l - 1;
  if (windows.index) {
    if (*windows.index < 0 || *windows.index >= l) throw Error(ErrorCode::Config, "covariance gap: window index out of range");
    first = last = *windows.index;
  }
  const Eigen::Index a0 = static_cast<Eigen::Index>(first) * h;
  const Eigen::Index b0 = static_cast<Eigen::Index>(last + 1) * h;
  const MatrixXd G = symmetrize(w.closed_loop_cost(K) - 2.0 * K.transpose() * w.R * K_next);

  GapWeights gw;
  for (Eigen::Index s = a0; s <= b0; ++s) {
    // Trapezoid weight: interior points dt, endpoints dt / 2 (windows are contiguous).
    const double beta = (s == a0 || s == b0) ? 0.5 * ref.dt : ref.dt;
    MatrixXd form = beta * G;
    if (s == a0) form -= P;
    if (s == b0) form += P;
    gw.samples.push_back(s);
    gw.forms.push_back(std::move(form));
  }
  return gw;
}

void check_batch(std::span<const Trajectory> trajs) {
  if (trajs.size() < 30) throw Error(ErrorCode::Estimation, "covariance gap: need at least 30 episodes");
  for (const auto& t : trajs)
    if (t.samples() != trajs.front().samples() || t.n() != trajs.front().n())
      throw Error(ErrorCode::Grid, "covariance gap: episodes do not share a grid");
}

}  // namespace

double covariance_gap_residual(std::span<const Trajectory> trajs, const MatrixXd& P, const MatrixXd& K,
                               const MatrixXd& K_next, const CostWeights& w, WindowSelection windows) {
  check_batch(trajs);
  const GapWeights gw = gap_weights(trajs.front(), P, K, K_next, w, windows);
  const double N = static_cast<double>(trajs.size());
  double total = 0.0;
  for (std::size_t j = 0; j < gw.samples.size(); ++j) {
    const auto s = gw.samples[j];
    // Shifted by the first episode so identical samples give exactly zero.
    const VectorXd pivot = trajs.front().states.col(s);
    VectorXd mean = VectorXd::Zero(trajs.front().n());
    for (const auto& t : trajs) mean += t.states.col(s) - pivot;
    mean /= N;
    double acc = 0.0;
    for (const auto& t : trajs) {
      const VectorXd d = (t.states.col(s) - pivot) - mean;
      acc += d.dot(gw.forms[j] * d);
    }
    total += acc / (N - 1.0);
  }
  return total;
}

GapEstimate covariance_gap_bootstrap(std::span<const Trajectory> trajs, const MatrixXd& P, const MatrixXd& K,
                                     const MatrixXd& K_next, const CostWeights& w, WindowSelection windows,
                                     int resamples, std::uint64_t seed) {
  check_batch(trajs);
  if (resamples < 2) throw Error(ErrorCode::Config, "covariance gap: need at least two bootstrap resamples");
  const GapWeights gw = gap_weights(trajs.front(), P, K, K_next, w, windows);
  const auto N = static_cast<Eigen::Index>(trajs.size());
  const auto n = trajs.front().n();
  const auto S = static_cast<Eigen::Index>(gw.samples.size());

  // Deviations from the full-batch mean, one n x S block per episode, and each
  // episode's weighted quadratic sum. A resample with counts c then gives
  // (sum_i c_i q_i - N * sum_s delta_s' M_s delta_s) / (N - 1), delta_s = sum_i c_i d_i(s) / N.
  MatrixXd pivot(n, S);
  for (Eigen::Index j = 0; j < S; ++j) pivot.col(j) = trajs.front().states.col(gw.samples[j]);
  MatrixXd mean = MatrixXd::Zero(n, S);
  for (const auto& t : trajs)
    for (Eigen::Index j = 0; j < S; ++j) mean.col(j) += t.states.col(gw.samples[j]) - pivot.col(j);
  mean /= static_cast<double>(N);
  mean += pivot;
  std::vector<MatrixXd> dev(N);
  VectorXd q(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    dev[i].resize(n, S);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < S; ++j) {
      dev[i].col(j) = trajs[i].states.col(gw.samples[j]) - mean.col(j);
      acc += dev[i].col(j).dot(gw.forms[j] * dev[i].col(j));
    }
    q(i) = acc;
  }

  auto evaluate = [&](const VectorXd& counts) {
    MatrixXd delta = MatrixXd::Zero(n, S);
    for (Eigen::Index i = 0; i < N; ++i)
      if (counts(i) != 0.0) delta += counts(i) * dev[i];
    delta /= static_cast<double>(N);
    double cross = 0.0;
    for (Eigen::Index j = 0; j < S; ++j) cross += delta.col(j).dot(gw.forms[j] * delta.col(j));
    return (counts.dot(q) - static_cast<double>(N) * cross) / static_cast<double>(N - 1);
  };

  GapEstimate est;
  est.value = evaluate(VectorXd::Ones(N));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
  std::vector<double> draws(resamples);
  for (int b = 0; b < resamples; ++b) {
    VectorXd counts = VectorXd::Zero(N);
    for (Eigen::Index i = 0; i < N; ++i) counts(pick(rng)) += 1.0;
    draws[b] = evaluate(counts);
  }
  double mu = 0.0;
  for (double d : draws) mu += d;
  mu /= resamples;
  double var = 0.0;
  for (double d : draws) var += (d - mu) * (d - mu);
  est.standard_error = std::sqrt(var / (resamples - 1));
  return est;
}

std::string run_report_csv(const LearningResult& result, const std::optional<MatrixXd>& K_ref) {
  std::string out = "iteration,delta_p,gain_error_maxabs,condition,residual\n";
  for (const auto& it : result.history) {
    out += std::to_string(it.iteration) + ',' + (std::isnan(it.delta_p) ? std::string() : format_double(it.delta_p)) + ',';
    if (K_ref) out += format_double((it.K - *K_ref).cwiseAbs().maxCoeff());
    out += ',' + format_double(it.theta_condition) + ',' + format_double(it.residual) + '\n';
  }
  return out;
}

std::string final_gain_csv(const LearningResult& result) {
  std::string out = "row,col,value\n";
  const MatrixXd& K = result.K();
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j)
      out += std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(K(i, j)) + '\n';
  out += "# converged=" + std::string(result.converged ? "1" : "0") +
         " iterations=" + std::to_string(result.history.size()) + "\n";
  return out;
}

}  // namespace olqr
