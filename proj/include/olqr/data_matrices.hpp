// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "olqr/linalg.hpp"
#include "olqr/trajectory.hpp"

namespace olqr {

/// Regression data of one episode (or the episode average) over l windows
/// [t_i, t_i + T]:
///   Dxx  l x n(n+1)/2  endpoint differences of x(x)x, folded so that
///                      row * svec(P) = x'Px |_{t_i}^{t_i+T}
///   Ixx  l x n^2       integrals of x(x)x
///   Ixu0 l x nm        integrals of x(x)u0
///   Ixe  l x np        integrals of x(x)e, only when e was recorded
struct DataMatrices {
  MatrixXd Dxx;
  MatrixXd Ixx;
  MatrixXd Ixu0;
  std::optional<MatrixXd> Ixe;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Eigen::Index p = 0;
  double interval_length = 0.0;
  bool averaged = false;
  /// Source identifiers (episode seeds, file names) for provenance.
  std::vector<std::string> sources;

  Eigen::Index interval_count() const { return Dxx.rows(); }
};

/// Builds the matrices with trapezoidal quadrature. The disturbance is held
/// constant over each grid step, so Ixe integrates x per step against the held e.
DataMatrices build_matrices(const Trajectory& traj, bool include_e);

struct RankReport {
  int required = 0;
  int achieved = 0;
  bool passed = false;
  VectorXd singular_values;
  double threshold = 0.0;
};

/// Numerical rank with cutoff 1e3 * max(rows, cols) * eps * sigma_max.
RankReport rank_report(const MatrixXd& m, int required);

/// rank [Ixx Ixu0 Ixe] (Ixx folded to svec columns) vs n(n+1)/2 + nm + np.
RankReport check_rank_exact(const DataMatrices& dm);
/// rank [Ixx Ixu0] (Ixx folded) vs n(n+1)/2 + nm.
RankReport check_rank_episodic(const DataMatrices& dm);

/// Entrywise mean over episodes, accumulated in index order as a running mean
/// (identical inputs give a bit-identical mean).
DataMatrices average_matrices(std::span<const DataMatrices> dms);

/// Pointwise mean of states and inputs over episodes sharing one grid.
Trajectory naive_average_trajectory(std::span<const Trajectory> trajs);

std::string data_matrices_to_text(const DataMatrices& dm, const std::string& source_hash = "");
DataMatrices data_matrices_from_text(std::string_view text);
void write_data_matrices(const std::filesystem::path& path, const DataMatrices& dm, const std::string& source_hash = "");
DataMatrices read_data_matrices(const std::filesystem::path& path);

}  // namespace olqr
