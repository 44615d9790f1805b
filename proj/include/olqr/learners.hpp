// SPDX-License-Identifier: Apache-2.0
#pragma once

// Offline policy iteration from recorded data. Nothing in this header (or its
// implementation) may depend on the plant model: learners see only
// DataMatrices, Trajectory and the cost weights.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "olqr/data_matrices.hpp"
#include "olqr/policy.hpp"
#include "olqr/trajectory.hpp"

namespace olqr {

struct LearnerConfig {
  /// Initial gain; assumed stabilizing (cannot be checked without the plant).
  MatrixXd K0;
  /// Stop once ||P_k - P_{k-1}||_F < varsigma.
  double varsigma = 1e-6;
  int max_iter = 50;
  /// ||P_k||_F above this is treated as a diverging iteration.
  double divergence_threshold = 1e10;
  /// Condition number of Theta above which a warning is attached.
  double condition_warning = 1e8;
};

/// Column layout of the unknown stack [svec(P); vec(K_next); vec(E'P)].
struct UnknownLayout {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  /// 0 when the disturbance block is absent.
  Eigen::Index p = 0;

  Eigen::Index p_size() const { return svec_size(n); }
  Eigen::Index k_offset() const { return p_size(); }
  Eigen::Index k_size() const { return n * m; }
  Eigen::Index e_offset() const { return k_offset() + k_size(); }
  Eigen::Index e_size() const { return n * p; }
  Eigen::Index total() const { return e_offset() + e_size(); }
};

struct RegressionSystem {
  MatrixXd Theta;
  VectorXd Phi;
  UnknownLayout layout;
  /// sigma_max / sigma_min of Theta (inf when rank deficient).
  double condition = 0.0;
};

struct IterationSolution {
  MatrixXd P;
  MatrixXd K_next;
  std::optional<MatrixXd> EtP;
  /// Stacked unknown vector.
  VectorXd z;
  /// ||Theta z - Phi||_2, recomputed after the solve.
  double residual = 0.0;
  double condition = 0.0;
  std::vector<std::string> warnings;
};

/// Theta = [Dxx, -2 Ixx (I (x) K'R) - 2 Ixu0 (I (x) R), -2 Ixe], Phi = -Ixx vec(Q + K'RK).
RegressionSystem assemble_exact(const DataMatrices& dm, const MatrixXd& K, const CostWeights& w);

/// Same without the disturbance block; dm must be an episode average.
RegressionSystem assemble_episodic(const DataMatrices& dm, const MatrixXd& K, const CostWeights& w);

/// Minimum-norm least-squares solve through the SVD pseudoinverse. Throws
/// ExcitationError when Theta is rank deficient.
IterationSolution solve_iteration(const RegressionSystem& rs);

struct LearningResult {
  std::vector<PolicyIterate> history;
  bool converged = false;
  /// E'P from the last step (exact learner only).
  std::optional<MatrixXd> EtP;
  std::vector<std::string> warnings;

  const MatrixXd& K() const { return history.back().K; }
  const MatrixXd& P() const { return history.back().P; }
};

/// One-shot learning from a single episode with the disturbance recorded.
LearningResult learn_exact(const DataMatrices& dm, const CostWeights& w, const LearnerConfig& cfg);

/// Averages the episodes' matrices, then iterates the averaged regression.
LearningResult learn_episodic(std::span<const DataMatrices> dms, const CostWeights& w, const LearnerConfig& cfg);

/// Iterates on an already averaged batch.
LearningResult learn_averaged(const DataMatrices& averaged, const CostWeights& w, const LearnerConfig& cfg);

/// Baseline: learns from the pointwise mean trajectory.
LearningResult learn_naive_average(std::span<const Trajectory> trajs, const CostWeights& w, const LearnerConfig& cfg);

/// Learning windows entering the covariance-gap residual.
struct WindowSelection {
  /// Single window index, or every window when unset.
  std::optional<int> index;
};

/// Evaluates, with empirical state covariances S(t) across episodes,
///   Tr(P (S(t+T) - S(t))) - 2 int Tr(K' R K_next S) + int Tr((Q + K'RK) S)
/// over the selected window(s). Needs at least 30 episodes.
double covariance_gap_residual(std::span<const Trajectory> trajs, const MatrixXd& P, const MatrixXd& K,
                               const MatrixXd& K_next, const CostWeights& w, WindowSelection windows = {});

struct GapEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Residual plus its bootstrap standard error (episodes resampled with replacement).
GapEstimate covariance_gap_bootstrap(std::span<const Trajectory> trajs, const MatrixXd& P, const MatrixXd& K,
                                     const MatrixXd& K_next, const CostWeights& w, WindowSelection windows,
                                     int resamples, std::uint64_t seed);

/// Per-iteration CSV: iteration, delta_p, gain_error_maxabs (when a reference
/// is given), condition, residual.
std::string run_report_csv(const LearningResult& result, const std::optional<MatrixXd>& K_ref = std::nullopt);

/// Final gain record: one row per K entry (row, col, value), plus converged flag and iteration count.
std::string final_gain_csv(const LearningResult& result);

}  // namespace olqr
