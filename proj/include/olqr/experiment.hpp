// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "olqr/bounds.hpp"
#include "olqr/config.hpp"
#include "olqr/learners.hpp"
#include "olqr/model.hpp"
#include "olqr/sim.hpp"

namespace olqr {

LtiSystem system_of(const ExperimentConfig& cfg);
CostWeights weights_of(const ExperimentConfig& cfg);
LearnerConfig learner_of(const ExperimentConfig& cfg);

/// Exploration signal, x0 and grid for one master seed. Frequencies and (in
/// random mode) x0 are drawn from their own seed streams, so they are shared by
/// every episode of the seed's batch.
BoundSetup setup_for_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// first, first + 1, ..., first + count - 1.
std::vector<std::uint64_t> seed_list(std::uint64_t first, int count);

/// max_ij |K_ij - K_ref_ij|.
double gain_error(const MatrixXd& K, const MatrixXd& K_ref);

/// Collects every file of a run directory and writes manifest.json listing
/// their SHA-256 hashes. All writes of a run go through one instance.
class RunWriter {
 public:
  explicit RunWriter(std::filesystem::path dir);
  void write(const std::string& relative, std::string_view content);
  const std::filesystem::path& dir() const { return dir_; }
  void finish(const std::string& command, const ExperimentConfig& cfg,
              const std::map<std::string, std::string>& notes = {});

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string matrix_csv(const MatrixXd& M);
/// Reads the row,col,value layout written by matrix_csv / final_gain_csv.
MatrixXd read_matrix_csv(const std::filesystem::path& path);

struct OracleOutput {
  KleinmanResult kleinman;
  double are_residual = 0.0;
  std::vector<std::complex<double>> eigenvalues;
};

/// Model-based optimum. Unstabilizable systems raise a config error.
OracleOutput compute_oracle(const ExperimentConfig& cfg);
OracleOutput cmd_oracle(const ExperimentConfig& cfg, const std::filesystem::path& out);

enum class DataMode { Controlled, Uncertain };

struct SimulateOutput {
  int ok = 0;
  int diverged = 0;
  std::filesystem::path manifest;
};

/// N episodes of the master seed, one CSV each, plus data_manifest.json. Episodes
/// that blow up are recorded in the manifest; more than 10% of them aborts the
/// run with a DivergenceError after the manifest is written.
SimulateOutput cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out, DataMode mode);

struct EpisodeSet {
  DataMode mode = DataMode::Uncertain;
  std::vector<Trajectory> trajectories;
  std::vector<std::string> files;
};

/// Loads the episodes listed in a data manifest, checking each file's hash.
EpisodeSet load_episodes(const std::filesystem::path& manifest);

enum class Algorithm { Exact, Episodic, Naive };

Algorithm parse_algorithm(const std::string& name);
std::string algorithm_name(Algorithm a);

/// Learns from simulate's files only. `episode` selects the record used by the
/// exact algorithm.
LearningResult cmd_learn(const ExperimentConfig& cfg, const std::filesystem::path& out, Algorithm algorithm,
                         const std::filesystem::path& data_manifest,
                         const std::optional<std::filesystem::path>& reference = std::nullopt, int episode = 0);

/// verify_bound over bounds.N_values x bounds.seed_count seeds.
std::vector<BoundReport> cmd_bounds(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct SweepCell {
  int N = 0;
  std::uint64_t seed = 0;
  double gain_error = 0.0;
  bool hurwitz = false;
  int iterations = 0;
  bool converged = false;
  /// Empty on success; otherwise the error that stopped the cell.
  std::string error;
  MatrixXd K;
};

/// Episodic learning on N fresh episodes of `seed`, scored against K_ref with the
/// true plant (test-time only).
SweepCell sweep_cell(const ExperimentConfig& cfg, int N, std::uint64_t seed, const MatrixXd& K_ref);
std::vector<SweepCell> cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct CompareCell {
  std::uint64_t seed = 0;
  double episodic_error = 0.0;
  double naive_error = 0.0;
  GapEstimate gap;
  std::string error;
};

/// Paired episodic vs naive learning on the same batch, plus the covariance-gap
/// residual of the batch at the oracle policy (whole horizon).
CompareCell compare_cell(const ExperimentConfig& cfg, std::uint64_t seed, const OracleOutput& oracle);
std::vector<CompareCell> cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace olqr
