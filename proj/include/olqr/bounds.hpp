// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "olqr/data_matrices.hpp"
#include "olqr/learners.hpp"
#include "olqr/model.hpp"
#include "olqr/sim.hpp"

namespace olqr {

/// Sampled-minus-averaged data blocks.
struct DeltaMatrices {
  MatrixXd Dxx;
  MatrixXd Ixx;
  MatrixXd Ixu0;
};

DeltaMatrices delta_matrices(const DataMatrices& sampled, const DataMatrices& averaged);

/// ||dDxx|| + 2 ||dIxx|| ||K'R|| + 2 ||dIxu0|| ||R||, spectral norms.
double gamma1(const DeltaMatrices& d, const MatrixXd& K, const MatrixXd& R);

/// The assembled perturbation [dDxx, -2 dIxx (I (x) K'R) - 2 dIxu0 (I (x) R)].
MatrixXd delta_theta(const DeltaMatrices& d, const MatrixXd& K, const MatrixXd& R);

/// ||Theta^+||^2 ||Phi|| gamma1 + ||Theta^+|| ||dIxx|| ||vec(Qbar)||, with
/// ||Theta^+|| = 1 / sigma_min(Theta). Throws ExcitationError on rank deficiency.
double gamma2(const RegressionSystem& nominal, double gamma1_value, double delta_ixx_norm, const MatrixXd& Qbar);

struct BoundRecord {
  int iteration = 0;
  double norm_dDxx = 0.0;
  double norm_dIxx = 0.0;
  double norm_dIxu0 = 0.0;
  double norm_dTheta = 0.0;
  double gamma1 = 0.0;
  double theta_pinv_norm = 0.0;
  double phi_norm = 0.0;
  double qbar_vec_norm = 0.0;
  double gamma2 = 0.0;
  /// ||z_k - z_k^nom|| for z = [svec(P_k); vec(K_{k+1})] from the same K_k.
  double realized_error = 0.0;
  /// ||K_{k+1} - K_{k+1}^nom||_2.
  double realized_gain_error = 0.0;
  /// ||P_k - P_opt|| against the model-based optimum.
  double p_error_to_optimum = 0.0;
  /// gamma2 + ||P_{k-1}^nom - P_opt^nom||.
  double neighborhood_bound = 0.0;
  bool gamma1_premise_holds = false;
  bool bound_satisfied = false;
  bool neighborhood_satisfied = false;
};

struct BoundReport {
  std::uint64_t seed = 0;
  int episodes = 0;
  std::vector<BoundRecord> records;
  /// ||P_opt - P_opt^nom||, reported without assuming it is small.
  double optimum_gap = 0.0;
  MatrixXd final_gain;
  MatrixXd nominal_final_gain;
};

/// Recomputes gamma2 from a record's stored factors.
double regenerate_gamma2(const BoundRecord& r);

/// True when gamma2 covered the realized error at every iteration.
bool bound_holds_throughout(const BoundReport& rep);
/// True when ||dTheta|| <= gamma1 at every iteration.
bool premise_holds_throughout(const BoundReport& rep);

struct BoundSetup {
  ExplorationSignal signal;
  SimOptions sim;
  LearnerConfig learner;
  unsigned workers = 0;
};

/// Paired nominal (noise-free) and noisy episodic learning. At every iteration
/// both regressions are solved from the noisy run's K_k; the perturbation uses
/// an independently simulated batch of the same size against the learning batch.
BoundReport verify_bound(const LtiSystem& sys, const CostWeights& w, const BoundSetup& setup, int episodes,
                         std::uint64_t seed);

/// One row per (seed, iteration) with every factor column.
std::string bound_report_csv(const std::vector<BoundReport>& reports);

}  // namespace olqr
