// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace olqr {

/// Recorded samples of one episode on a uniform grid. Column i of each block is
/// the value at times[i].
struct Trajectory {
  double dt = 0.0;
  /// Interval length T of the learning windows.
  double interval_length = 0.0;
  /// Number of learning windows l.
  int interval_count = 0;
  std::uint64_t episode_seed = 0;
  Eigen::VectorXd times;
  Eigen::MatrixXd states;
  Eigen::MatrixXd inputs;
  /// Present iff the disturbance was recorded ("controlled environment").
  std::optional<Eigen::MatrixXd> disturbances;

  Eigen::Index n() const { return states.rows(); }
  Eigen::Index m() const { return inputs.rows(); }
  Eigen::Index p() const { return disturbances ? disturbances->rows() : 0; }
  Eigen::Index samples() const { return times.size(); }
  /// Grid steps per learning window.
  int steps_per_interval() const;
};

}  // namespace olqr
