// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "olqr/linalg.hpp"

namespace olqr {

/// Everything an experiment run needs. Values the reference example leaves open
/// (noise level, exploration amplitude, x0) are plain fields with defaults.
struct ExperimentConfig {
  // system
  MatrixXd A, B, E, sigma;
  // cost
  MatrixXd Q, R;
  // exploration
  int n_sin = 10;
  double amplitude = 1.0;
  double freq_lo = -5.0;
  double freq_hi = 5.0;
  // simulation
  double dt = 1e-3;
  double T = 0.05;
  int l = 100;
  std::optional<double> duration;
  /// "random": x0 ~ U(-1, 1)^n drawn from the master seed; "fixed": use x0.
  std::string x0_mode = "random";
  VectorXd x0;
  double blowup_threshold = 1e8;
  // learning; K0 defaults to zeros(m, n)
  MatrixXd K0;
  double varsigma = 1e-6;
  int max_iter = 50;
  // episodes
  int N = 50;
  std::uint64_t master_seed = 1;
  // sweep
  std::vector<int> sweep_N{1, 10, 50};
  int sweep_seeds = 20;
  // bounds
  std::vector<int> bounds_N{10, 50, 250};
  int bounds_seeds = 10;
  // compare
  int compare_N = 500;
  int compare_seeds = 20;
  int bootstrap_resamples = 200;

  std::string output_dir = "runs";
  /// 0 = hardware concurrency.
  unsigned workers = 0;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return E.cols(); }
};

/// Parses and validates. Unknown keys, missing required keys and inconsistent
/// dimensions throw ErrorCode::Config with the offending key path.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical serialization: every field present, keys sorted, fixed indentation.
std::string canonical_json(const ExperimentConfig& cfg);

/// SHA-256 of the canonical serialization.
std::string config_hash(const ExperimentConfig& cfg);

/// Throws ErrorCode::Config on the first inconsistency.
void validate(const ExperimentConfig& cfg);

}  // namespace olqr
