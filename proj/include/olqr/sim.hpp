// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "olqr/model.hpp"
#include "olqr/trajectory.hpp"

namespace olqr {

/// Sum-of-sinusoids exploration input: channel c is sum_i a(c,i) sin(w(c,i) t).
/// Each channel carries its own frequency set.
struct ExplorationSignal {
  MatrixXd amplitudes;
  MatrixXd frequencies;

  Eigen::Index channels() const { return frequencies.rows(); }
  Eigen::Index terms() const { return frequencies.cols(); }

  /// Draws n_sin frequencies per channel from U(lo, hi), every amplitude set to `amplitude`.
  static ExplorationSignal random(Eigen::Index channels, int n_sin, double amplitude, double lo, double hi,
                                  std::uint64_t seed);
};

VectorXd exploration_value(const ExplorationSignal& sig, double t);

/// Gaussian sampler for N(0, sigma). Uses a Cholesky factor when sigma is
/// positive definite and an eigen-decomposition factor when it is only PSD.
class NoiseSampler {
 public:
  explicit NoiseSampler(const MatrixXd& sigma);

  VectorXd sample(std::mt19937_64& rng) const;
  bool degenerate() const { return zero_; }
  Eigen::Index dim() const { return factor_.rows(); }

 private:
  MatrixXd factor_;
  bool zero_ = false;
};

VectorXd sample_noise(const MatrixXd& sigma, std::mt19937_64& rng);

struct SimOptions {
  double dt = 1e-3;
  double interval_length = 0.05;
  int interval_count = 100;
  /// Defaults to interval_length * interval_count when unset.
  std::optional<double> duration;
  VectorXd x0;
  double blowup_threshold = 1e8;
  bool record_disturbance = false;

  double effective_duration() const { return duration.value_or(interval_length * interval_count); }
};

/// Classical RK4 on xdot = A x + B u + E e. The disturbance is drawn once per
/// step and held over it. With a feedback gain, u = -K x + u0, otherwise u = u0.
Trajectory simulate(const LtiSystem& sys, const ExplorationSignal& sig, const std::optional<MatrixXd>& feedback,
                    const SimOptions& opt, std::uint64_t seed);

/// Noise seed for episode `index` of a batch.
std::uint64_t episode_seed(std::uint64_t master_seed, std::uint64_t index);

/// N episodes sharing x0 and exploration input; only the noise stream differs.
/// Output is ordered by episode index whatever the worker count (0 = hardware).
std::vector<Trajectory> generate_episodes(const LtiSystem& sys, const ExplorationSignal& sig, int count,
                                          const SimOptions& opt, std::uint64_t master_seed, unsigned workers = 0);

}  // namespace olqr
