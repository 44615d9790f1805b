// SPDX-License-Identifier: Apache-2.0
#include "olqr/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <thread>

#include <json.hpp>

#include "olqr/data_matrices.hpp"
#include "olqr/io.hpp"
#include "olqr/seeding.hpp"
#include "olqr/svg.hpp"

namespace olqr {
namespace {

using json = nlohmann::json;

double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string flag(bool b) { return b ? "1" : "0"; }

// Commas and newlines would break the CSV cell.
std::string csv_text(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string episode_file(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "episodes/episode_%04d.csv", index);
  return buf;
}

std::vector<DataMatrices> matrices_of(const std::vector<Trajectory>& trajs, bool include_e) {
  std::vector<DataMatrices> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) out.push_back(build_matrices(t, include_e));
  return out;
}

// Runs `learn`; when it fails to converge, falls back to the last iterate so
// the caller can still score the gain.
template <class F>
LearningResult learn_or_last(F&& learn, std::string& error) {
  try {
    return learn();
  } catch (const NonConvergenceError& e) {
    if (e.history().empty()) throw;
    error = e.what();
    LearningResult partial;
    partial.history = e.history();
    return partial;
  }
}

}  // namespace

LtiSystem system_of(const ExperimentConfig& cfg) { return LtiSystem(cfg.A, cfg.B, cfg.E, cfg.sigma); }

CostWeights weights_of(const ExperimentConfig& cfg) { return CostWeights(cfg.Q, cfg.R); }

LearnerConfig learner_of(const ExperimentConfig& cfg) {
  LearnerConfig lc;
  lc.K0 = cfg.K0;
  lc.varsigma = cfg.varsigma;
  lc.max_iter = cfg.max_iter;
  return lc;
}

BoundSetup setup_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  BoundSetup s;
  s.signal = ExplorationSignal::random(cfg.m(), cfg.n_sin, cfg.amplitude, cfg.freq_lo, cfg.freq_hi,
                                       derive_seed(seed, SeedStream::Exploration));
  s.sim.dt = cfg.dt;
  s.sim.interval_length = cfg.T;
  s.sim.interval_count = cfg.l;
  s.sim.duration = cfg.duration;
  s.sim.blowup_threshold = cfg.blowup_threshold;
  if (cfg.x0_mode == "fixed") {
    s.sim.x0 = cfg.x0;
  } else {
    std::mt19937_64 rng(derive_seed(seed, SeedStream::InitialState));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    s.sim.x0.resize(cfg.n());
    for (Eigen::Index i = 0; i < cfg.n(); ++i) s.sim.x0(i) = u(rng);
  }
  s.learner = learner_of(cfg);
  s.workers = cfg.workers;
  return s;
}

std::vector<std::uint64_t> seed_list(std::uint64_t first, int count) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < count; ++i) out.push_back(first + static_cast<std::uint64_t>(i));
  return out;
}

double gain_error(const MatrixXd& K, const MatrixXd& K_ref) {
  if (K.rows() != K_ref.rows() || K.cols() != K_ref.cols()) throw Error(ErrorCode::Shape, "gain_error: shape mismatch");
  return (K - K_ref).cwiseAbs().maxCoeff();
}

RunWriter::RunWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

void RunWriter::write(const std::string& relative, std::string_view content) {
  write_file(dir_ / relative, content);
  files_.emplace_back(relative, sha256_hex(content));
}

void RunWriter::finish(const std::string& command, const ExperimentConfig& cfg,
                       const std::map<std::string, std::string>& notes) {
  json j;
  j["command"] = command;
  j["config_hash"] = config_hash(cfg);
  j["master_seed"] = cfg.master_seed;
  j["files"] = json::array();
  for (const auto& [path, hash] : files_) j["files"].push_back({{"path", path}, {"sha256", hash}});
  j["notes"] = json::object();
  for (const auto& [k, v] : notes) j["notes"][k] = v;
  write_file(dir_ / "manifest.json", j.dump(2) + "\n");
}

std::string matrix_csv(const MatrixXd& M) {
  std::string out = "row,col,value\n";
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      out += std::to_string(r) + ',' + std::to_string(c) + ',' + format_double(M(r, c)) + '\n';
  return out;
}

MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::array<double, 3>> cells;
  Eigen::Index rows = 0, cols = 0;
  for (auto line : split(text, '\n')) {
    if (line.empty() || line.front() == '#' || line.starts_with("row,")) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw Error(ErrorCode::Io, "matrix csv: expected row,col,value in " + path.string());
    const double r = parse_double(f[0]), c = parse_double(f[1]);
    cells.push_back({r, c, parse_double(f[2])});
    rows = std::max(rows, static_cast<Eigen::Index>(r) + 1);
    cols = std::max(cols, static_cast<Eigen::Index>(c) + 1);
  }
  if (cells.empty()) throw Error(ErrorCode::Io, "matrix csv: no entries in " + path.string());
  MatrixXd M = MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [r, c, v] : cells) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
  if (M.hasNaN()) throw Error(ErrorCode::Io, "matrix csv: missing entries in " + path.string());
  return M;
}

OracleOutput compute_oracle(const ExperimentConfig& cfg) {
  const LtiSystem sys = system_of(cfg);
  const CostWeights w = weights_of(cfg);
  const AssumptionReport a = check_assumptions(sys, w);
  if (!a.stabilizable) throw Error(ErrorCode::Config, "oracle: (A, B) is not stabilizable");
  OracleOutput out;
  out.kleinman = kleinman_iterate(sys, w, cfg.K0);
  out.are_residual = are_residual(sys, w, out.kleinman.P());
  out.eigenvalues = closed_loop_eigs(sys, out.kleinman.K());
  return out;
}

OracleOutput cmd_oracle(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  OracleOutput o = compute_oracle(cfg);
  RunWriter w(out);
  w.write("oracle_gain.csv", matrix_csv(o.kleinman.K()));
  w.write("oracle_P.csv", matrix_csv(o.kleinman.P()));
  std::string eig = "index,real,imag\n";
  for (std::size_t i = 0; i < o.eigenvalues.size(); ++i)
    eig += std::to_string(i) + ',' + format_double(o.eigenvalues[i].real()) + ',' +
           format_double(o.eigenvalues[i].imag()) + '\n';
  w.write("closed_loop_eigenvalues.csv", eig);
  std::string hist = "iteration,delta_p,lyapunov_residual\n";
  for (const auto& it : o.kleinman.history)
    hist += std::to_string(it.iteration) + ',' + format_double(it.delta_p) + ',' + format_double(it.residual) + '\n';
  w.write("oracle_history.csv", hist);
  w.write("oracle_summary.csv", "key,value\nare_residual," + format_double(o.are_residual) + "\niterations," +
                                    std::to_string(o.kleinman.history.size()) + "\nconverged," +
                                    flag(o.kleinman.converged) + "\n");
  w.finish("oracle", cfg);
  return o;
}

SimulateOutput cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out, DataMode mode) {
  const LtiSystem sys = system_of(cfg);
  BoundSetup setup = setup_for_seed(cfg, cfg.master_seed);
  setup.sim.record_disturbance = mode == DataMode::Controlled;
  const int N = cfg.N;

  struct Slot {
    std::optional<Trajectory> traj;
    std::string error;
    double last_valid_time = 0.0;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(N));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < N; i = next++) {
      try {
        slots[i].traj = simulate(sys, setup.signal, std::nullopt, setup.sim, episode_seed(cfg.master_seed, i));
      } catch (const DivergenceError& e) {
        slots[i].error = e.what();
        slots[i].last_valid_time = e.last_valid_time();
      }
    }
  };
  {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(cfg.workers ? cfg.workers : hw, static_cast<unsigned>(N));
    std::vector<std::jthread> pool;
    for (unsigned k = 1; k < workers; ++k) pool.emplace_back(work);
    work();
  }

  RunWriter w(out);
  SimulateOutput res;
  json manifest;
  manifest["format"] = "olqr-data-manifest v1";
  manifest["mode"] = mode == DataMode::Controlled ? "controlled" : "uncertain";
  manifest["master_seed"] = cfg.master_seed;
  manifest["config_hash"] = config_hash(cfg);
  manifest["episodes"] = json::array();
  int first_bad = -1;
  for (int i = 0; i < N; ++i) {
    json e = {{"index", i}, {"seed", episode_seed(cfg.master_seed, i)}};
    if (slots[i].traj) {
      const std::string text = trajectory_to_csv(*slots[i].traj);
      const std::string file = episode_file(i);
      w.write(file, text);
      e["status"] = "ok";
      e["file"] = file;
      e["sha256"] = sha256_hex(text);
      ++res.ok;
    } else {
      e["status"] = "diverged";
      e["error"] = slots[i].error;
      e["last_valid_time"] = slots[i].last_valid_time;
      if (first_bad < 0) first_bad = i;
      ++res.diverged;
    }
    manifest["episodes"].push_back(std::move(e));
  }
  w.write("data_manifest.json", manifest.dump(2) + "\n");
  w.finish("simulate", cfg, {{"mode", manifest["mode"].get<std::string>()}});
  res.manifest = out / "data_manifest.json";
  if (10 * res.diverged > N)
    throw DivergenceError("simulate: " + std::to_string(res.diverged) + " of " + std::to_string(N) +
                              " episodes diverged (limit 10%)",
                          slots[first_bad].last_valid_time, first_bad);
  return res;
}

EpisodeSet load_episodes(const std::filesystem::path& manifest) {
  json j;
  try {
    j = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, "data manifest " + manifest.string() + ": " + e.what());
  }
  EpisodeSet set;
  try {
    if (j.at("format") != "olqr-data-manifest v1") throw Error(ErrorCode::Io, "unsupported data manifest format");
    const std::string mode = j.at("mode");
    if (mode != "controlled" && mode != "uncertain") throw Error(ErrorCode::Io, "data manifest: bad mode");
    set.mode = mode == "controlled" ? DataMode::Controlled : DataMode::Uncertain;
    for (const auto& e : j.at("episodes")) {
      if (e.at("status") != "ok") continue;
      const std::string file = e.at("file");
      const std::string text = read_file(manifest.parent_path() / file);
      if (sha256_hex(text) != e.at("sha256").get<std::string>())
        throw Error(ErrorCode::Io, "data manifest: hash mismatch for " + file);
      set.trajectories.push_back(trajectory_from_csv(text));
      set.files.push_back(file);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, "data manifest " + manifest.string() + ": " + e.what());
  }
  if (set.trajectories.empty()) throw Error(ErrorCode::Io, "data manifest lists no usable episodes");
  return set;
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "exact") return Algorithm::Exact;
  if (name == "episodic") return Algorithm::Episodic;
  if (name == "naive") return Algorithm::Naive;
  throw Error(ErrorCode::Config, "unknown algorithm '" + name + "' (exact, episodic, naive)");
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Exact: return "exact";
    case Algorithm::Episodic: return "episodic";
    case Algorithm::Naive: return "naive";
  }
  return "?";
}

LearningResult cmd_learn(const ExperimentConfig& cfg, const std::filesystem::path& out, Algorithm algorithm,
                         const std::filesystem::path& data_manifest,
                         const std::optional<std::filesystem::path>& reference, int episode) {
  const EpisodeSet set = load_episodes(data_manifest);
  const CostWeights w = weights_of(cfg);
  const LearnerConfig lc = learner_of(cfg);
  const std::string source = sha256_hex(read_file(data_manifest));
  std::optional<MatrixXd> K_ref;
  if (reference) K_ref = read_matrix_csv(*reference);

  RunWriter writer(out);
  std::string error;
  LearningResult result;
  switch (algorithm) {
    case Algorithm::Exact: {
      if (set.mode != DataMode::Controlled)
        throw Error(ErrorCode::Precondition, "exact learning needs controlled-mode data (disturbance recorded)");
      if (episode < 0 || episode >= static_cast<int>(set.trajectories.size()))
        throw Error(ErrorCode::Config, "episode index out of range");
      const DataMatrices dm = build_matrices(set.trajectories[static_cast<std::size_t>(episode)], true);
      writer.write("data_matrices.txt", data_matrices_to_text(dm, source));
      result = learn_or_last([&] { return learn_exact(dm, w, lc); }, error);
      break;
    }
    case Algorithm::Episodic: {
      const DataMatrices avg = average_matrices(matrices_of(set.trajectories, false));
      writer.write("data_matrices.txt", data_matrices_to_text(avg, source));
      result = learn_or_last([&] { return learn_averaged(avg, w, lc); }, error);
      break;
    }
    case Algorithm::Naive:
      result = learn_or_last([&] { return learn_naive_average(set.trajectories, w, lc); }, error);
      break;
  }

  writer.write("run_report.csv", run_report_csv(result, K_ref));
  writer.write("final_gain.csv", final_gain_csv(result));
  Series dp{"||P_k - P_k-1||_F", {}, {}}, ge{"max |K_k - K_ref|", {}, {}};
  for (const auto& it : result.history) {
    dp.x.push_back(it.iteration);
    dp.y.push_back(it.delta_p);
    if (K_ref) {
      ge.x.push_back(it.iteration);
      ge.y.push_back(gain_error(it.K, *K_ref));
    }
  }
  std::vector<Series> series{dp};
  if (K_ref) series.push_back(ge);
  writer.write("convergence.svg", line_chart(algorithm_name(algorithm) + " learning", "iteration", "value", series, true));
  std::map<std::string, std::string> notes{{"algorithm", algorithm_name(algorithm)},
                                           {"episodes", std::to_string(set.trajectories.size())},
                                           {"converged", flag(result.converged)}};
  if (!error.empty()) notes["error"] = error;
  writer.finish("learn", cfg, notes);
  if (!error.empty()) throw NonConvergenceError(error, result.history);
  return result;
}

std::vector<BoundReport> cmd_bounds(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const LtiSystem sys = system_of(cfg);
  const CostWeights w = weights_of(cfg);
  std::vector<BoundReport> reports;
  std::string summary = "N,seeds,median_final_gamma2,median_final_realized_error,seeds_bound_held,premise_held\n";
  Series g{"median final gamma2", {}, {}}, r{"median final realized error", {}, {}};
  for (int N : cfg.bounds_N) {
    std::vector<double> g2, re;
    int held = 0;
    bool premise = true;
    for (auto seed : seed_list(cfg.master_seed, cfg.bounds_seeds)) {
      BoundReport rep = verify_bound(sys, w, setup_for_seed(cfg, seed), N, seed);
      g2.push_back(rep.records.back().gamma2);
      re.push_back(rep.records.back().realized_error);
      held += bound_holds_throughout(rep);
      premise = premise && premise_holds_throughout(rep);
      reports.push_back(std::move(rep));
    }
    summary += std::to_string(N) + ',' + std::to_string(cfg.bounds_seeds) + ',' + format_double(median(g2)) + ',' +
               format_double(median(re)) + ',' + std::to_string(held) + ',' + flag(premise) + '\n';
    g.x.push_back(N);
    g.y.push_back(median(g2));
    r.x.push_back(N);
    r.y.push_back(median(re));
  }
  RunWriter writer(out);
  writer.write("bounds.csv", bound_report_csv(reports));
  writer.write("bounds_summary.csv", summary);
  writer.write("bounds.svg", line_chart("perturbation bound vs episodes", "N", "value", {g, r}, true));
  writer.finish("bounds", cfg);
  return reports;
}

SweepCell sweep_cell(const ExperimentConfig& cfg, int N, std::uint64_t seed, const MatrixXd& K_ref) {
  const LtiSystem sys = system_of(cfg);
  const BoundSetup setup = setup_for_seed(cfg, seed);
  SweepCell cell;
  cell.N = N;
  cell.seed = seed;
  try {
    const auto trajs = generate_episodes(sys, setup.signal, N, setup.sim, seed, setup.workers);
    const DataMatrices avg = average_matrices(matrices_of(trajs, false));
    const LearningResult res = learn_or_last([&] { return learn_averaged(avg, weights_of(cfg), setup.learner); },
                                             cell.error);
    cell.K = res.K();
    cell.converged = res.converged;
    cell.iterations = static_cast<int>(res.history.size());
    cell.gain_error = gain_error(cell.K, K_ref);
    cell.hurwitz = cell.K.allFinite() && is_hurwitz(sys.A - sys.B * cell.K);
  } catch (const Error& e) {
    cell.error = e.what();
    cell.gain_error = std::numeric_limits<double>::quiet_NaN();
  }
  return cell;
}

std::vector<SweepCell> cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const MatrixXd K_ref = compute_oracle(cfg).kleinman.K();
  std::vector<SweepCell> cells;
  std::string table = "N,seed,gain_error,hurwitz,iterations,converged,error\n";
  std::string summary = "N,cells,median_gain_error,stable_fraction,converged_fraction,failed_cells\n";
  Series med{"median gain error", {}, {}};
  for (int N : cfg.sweep_N) {
    std::vector<double> errs;
    int stable = 0, converged = 0, failed = 0;
    for (auto seed : seed_list(cfg.master_seed, cfg.sweep_seeds)) {
      SweepCell c = sweep_cell(cfg, N, seed, K_ref);
      table += std::to_string(N) + ',' + std::to_string(seed) + ',' + format_double(c.gain_error) + ',' +
               flag(c.hurwitz) + ',' + std::to_string(c.iterations) + ',' + flag(c.converged) + ',' +
               csv_text(c.error) + '\n';
      errs.push_back(c.gain_error);
      stable += c.hurwitz;
      converged += c.converged;
      failed += c.K.size() == 0;
      cells.push_back(std::move(c));
    }
    const double count = cfg.sweep_seeds;
    summary += std::to_string(N) + ',' + std::to_string(cfg.sweep_seeds) + ',' + format_double(median(errs)) + ',' +
               format_double(stable / count) + ',' + format_double(converged / count) + ',' + std::to_string(failed) +
               '\n';
    med.x.push_back(N);
    med.y.push_back(median(errs));
  }
  RunWriter writer(out);
  writer.write("sweep_cells.csv", table);
  writer.write("sweep_summary.csv", summary);
  writer.write("sweep.svg", line_chart("episodic learning: gain error vs episodes", "N", "max |K - K_opt|", {med}, true));
  writer.finish("sweep", cfg);
  return cells;
}

CompareCell compare_cell(const ExperimentConfig& cfg, std::uint64_t seed, const OracleOutput& oracle) {
  const LtiSystem sys = system_of(cfg);
  const CostWeights w = weights_of(cfg);
  const BoundSetup setup = setup_for_seed(cfg, seed);
  const MatrixXd& K_opt = oracle.kleinman.K();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  CompareCell cell{seed, nan, nan, {nan, nan}, {}};
  try {
    const auto trajs = generate_episodes(sys, setup.signal, cfg.compare_N, setup.sim, seed, setup.workers);
    std::string err_e, err_n;
    const DataMatrices avg = average_matrices(matrices_of(trajs, false));
    const LearningResult ep = learn_or_last([&] { return learn_averaged(avg, w, setup.learner); }, err_e);
    const LearningResult nv = learn_or_last([&] { return learn_naive_average(trajs, w, setup.learner); }, err_n);
    cell.episodic_error = gain_error(ep.K(), K_opt);
    cell.naive_error = gain_error(nv.K(), K_opt);
    cell.error = err_e.empty() ? err_n : err_e;
    cell.gap = covariance_gap_bootstrap(trajs, oracle.kleinman.P(), K_opt, K_opt, w, {}, cfg.bootstrap_resamples,
                                        derive_seed(seed, SeedStream::Bootstrap));
  } catch (const Error& e) {
    cell.error = e.what();
  }
  return cell;
}

std::vector<CompareCell> cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const OracleOutput oracle = compute_oracle(cfg);
  std::vector<CompareCell> cells;
  std::string table = "seed,episodic_gain_error,naive_gain_error,naive_worse,gap,gap_standard_error,error\n";
  std::vector<double> ee, ne;
  int worse = 0;
  for (auto seed : seed_list(cfg.master_seed, cfg.compare_seeds)) {
    CompareCell c = compare_cell(cfg, seed, oracle);
    const bool nw = c.naive_error > c.episodic_error;
    worse += nw;
    ee.push_back(c.episodic_error);
    ne.push_back(c.naive_error);
    table += std::to_string(seed) + ',' + format_double(c.episodic_error) + ',' + format_double(c.naive_error) + ',' +
             flag(nw) + ',' + format_double(c.gap.value) + ',' + format_double(c.gap.standard_error) + ',' +
             csv_text(c.error) + '\n';
    cells.push_back(std::move(c));
  }
  const std::string sentence = "naive mean-trajectory learning had a larger gain error than episodic learning on " +
                               std::to_string(worse) + " of " + std::to_string(cfg.compare_seeds) + " seeds";
  std::string summary = "key,value\nseeds," + std::to_string(cfg.compare_seeds) + "\nepisodes," +
                        std::to_string(cfg.compare_N) + "\nnaive_worse," + std::to_string(worse) +
                        "\nmedian_episodic_gain_error," + format_double(median(ee)) + "\nmedian_naive_gain_error," +
                        format_double(median(ne)) + "\nsummary," + sentence + "\n";
  RunWriter writer(out);
  writer.write("compare_cells.csv", table);
  writer.write("compare_summary.csv", summary);
  writer.finish("compare", cfg);
  return cells;
}

}  // namespace olqr
