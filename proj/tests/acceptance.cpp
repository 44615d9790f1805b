// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Every threshold and runtime limit below is fixed here, not read from a config.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "olqr/experiment.hpp"
#include "olqr/io.hpp"
#include "oracles.hpp"

using namespace olqr;
namespace fs = std::filesystem;

namespace {

const fs::path kSource(OLQR_SOURCE_DIR);

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig reproduction() { return load_config(kSource / "configs" / "reproduction.json"); }

MatrixXd published_gain() {
  MatrixXd K(1, 3);
  K << 4.0554, 1.0190, 1.5051;
  return K;
}

// 1. Model-based optimum on the 3-state example.
void oracle_reproduction(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const OracleOutput o = compute_oracle(reproduction());
  const double secs = seconds_since(t0);
  const double err = gain_error(o.kleinman.K(), published_gain());
  v.detail << "max|K - K_pub| = " << err << ", ARE residual " << o.are_residual << ", " << secs << " s";
  v.require(err <= 1e-3, "gain within 1e-3");
  v.require(secs < 1.0, "runtime < 1 s");
}

// 2. Exact learner with the disturbance recorded tracks Kleinman iterate by iterate.
void exact_equivalence(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = reproduction();
  const LtiSystem sys = system_of(cfg);
  const CostWeights w = weights_of(cfg);
  BoundSetup setup = setup_for_seed(cfg, cfg.master_seed);
  setup.sim.record_disturbance = true;
  const Trajectory tr = simulate(sys, setup.signal, std::nullopt, setup.sim, episode_seed(cfg.master_seed, 0));
  const LearningResult r = learn_exact(build_matrices(tr, true), w, setup.learner);
  const KleinmanResult k = kleinman_iterate(sys, w, cfg.K0);
  const double secs = seconds_since(t0);

  double worst = 0.0;
  const std::size_t common = std::min(r.history.size(), k.history.size());
  for (std::size_t i = 0; i < common; ++i) worst = std::max(worst, gain_error(r.history[i].K, k.history[i].K));
  const double final_err = gain_error(r.K(), k.K());
  v.detail << "l=" << tr.interval_count << " dt=" << tr.dt << ", final error " << final_err << ", worst iterate error "
           << worst << " over " << common << " iterations, " << secs << " s";
  v.require(r.converged, "converged");
  v.require(final_err <= 1e-2, "final gain within 1e-2");
  v.require(common >= 2 && worst <= 1e-2, "iterates within 1e-2");
  v.require(secs < 30.0, "runtime < 30 s");
}

// Sweep cells shared by criteria 3 and 4.
struct SweepData {
  std::vector<SweepCell> n1, n50;
  double n50_seconds = 0.0;
};

SweepData sweep_data() {
  const ExperimentConfig cfg = reproduction();
  const MatrixXd K_ref = compute_oracle(cfg).kleinman.K();
  SweepData d;
  const auto t0 = std::chrono::steady_clock::now();
  for (auto seed : seed_list(cfg.master_seed, 20)) d.n50.push_back(sweep_cell(cfg, 50, seed, K_ref));
  d.n50_seconds = seconds_since(t0);
  for (auto seed : seed_list(cfg.master_seed, 20)) d.n1.push_back(sweep_cell(cfg, 1, seed, K_ref));
  return d;
}

// 3. Episodic learning at N = 50.
void episodic_reproduction(Verdict& v, const SweepData& d) {
  const SweepCell& master = d.n50.front();
  const auto stable = std::count_if(d.n50.begin(), d.n50.end(), [](const SweepCell& c) { return c.hurwitz; });
  v.detail << "master seed error " << master.gain_error << " in " << master.iterations << " iterations (converged "
           << master.converged << "), Hurwitz " << stable << "/20, " << d.n50_seconds << " s";
  v.require(master.error.empty(), "master seed ran cleanly");
  v.require(master.gain_error <= 0.05, "gain within 0.05");
  v.require(master.converged && master.iterations <= 10, "converged within 10 iterations");
  v.require(stable >= 19, ">= 19/20 Hurwitz");
  v.require(d.n50_seconds < 300.0, "runtime < 5 min");
}

// 4. Single episodes degrade the gain.
void single_episode_degradation(Verdict& v, const SweepData& d) {
  std::vector<double> e1, e50;
  for (const auto& c : d.n1) e1.push_back(c.gain_error);
  for (const auto& c : d.n50) e50.push_back(c.gain_error);
  const double m1 = median(e1), m50 = median(e50);
  const auto unstable = std::count_if(d.n1.begin(), d.n1.end(), [](const SweepCell& c) { return !c.hurwitz; });
  v.detail << "median N=1 " << m1 << ", median N=50 " << m50 << ", ratio " << m1 / m50 << ", destabilizing N=1 seeds "
           << unstable << "/20";
  v.require(m1 >= 5.0 * m50, "ratio >= 5");
  v.require(unstable >= 1, "at least one destabilizing N=1 gain");
}

// 5. Perturbation bound suite.
void bound_suite(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = reproduction();
  const LtiSystem sys = system_of(cfg);
  const CostWeights w = weights_of(cfg);
  const auto run = [&](int N, std::uint64_t seed) { return verify_bound(sys, w, setup_for_seed(cfg, seed), N, seed); };

  bool premise = true;
  int batches = 0, held_50 = 0;
  std::vector<double> medians;
  for (int N : {10, 50, 250}) {
    std::vector<double> finals;
    const int seeds = N == 50 ? 20 : 10;
    for (auto seed : seed_list(cfg.master_seed, seeds)) {
      const BoundReport rep = run(N, seed);
      ++batches;
      premise = premise && premise_holds_throughout(rep);
      if (N == 50) held_50 += bound_holds_throughout(rep);
      if (finals.size() < 10) finals.push_back(rep.records.back().gamma2);
    }
    medians.push_back(median(finals));
  }
  const double secs = seconds_since(t0);
  v.detail << "premise on " << batches << " batches: " << premise << "; bound held " << held_50
           << "/20 at N=50; median gamma2 " << medians[0] << " > " << medians[1] << " > " << medians[2] << "; " << secs
           << " s";
  v.require(premise, "(a) ||dTheta|| <= gamma1 everywhere");
  v.require(held_50 >= 18, "(b) >= 18/20 seeds");
  v.require(medians[0] > medians[1] && medians[1] > medians[2], "(c) strictly decreasing");
  v.require(secs < 600.0, "runtime < 10 min");
}

// 6. Covariance gap and the naive baseline at elevated noise.
void covariance_gap(Verdict& v) {
  const ExperimentConfig cfg = load_config(kSource / "configs" / "elevated_noise.json");
  const OracleOutput o = compute_oracle(cfg);
  int gap_ok = 0, worse = 0, clean = 0;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (auto seed : seed_list(cfg.master_seed, 20)) {
    ExperimentConfig c = cfg;
    c.compare_N = 500;
    const CompareCell cell = compare_cell(c, seed, o);
    clean += cell.error.empty();
    const double ratio = cell.gap.value / cell.gap.standard_error;
    min_ratio = std::min(min_ratio, ratio);
    gap_ok += ratio > 10.0;
    worse += cell.naive_error > cell.episodic_error;
  }
  v.detail << "sigma " << cfg.sigma(0, 0) << ", N=500: gap > 10 SE on " << gap_ok << "/20 seeds (min ratio "
           << min_ratio << "), naive worse on " << worse << "/20, clean runs " << clean << "/20";
  v.require(gap_ok == 20, "gap > 10 x bootstrap SE");
  v.require(worse >= 15, "naive worse on >= 15/20");
}

// 7. Linear-algebra and integrator kernels against independent constructions.
void kernel_oracles(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double lyap = 0.0, kr = 0.0;
  bool roundtrip = true;
  for (int n = 1; n <= 6; ++n)
    for (int trial = 0; trial < 5; ++trial) {
      const MatrixXd A = oracle::random_hurwitz(n, rng);
      const MatrixXd Q = oracle::random_psd(n, rng);
      const MatrixXd P = solve_lyapunov(A, Q);
      lyap = std::max(lyap, (P - oracle::lyapunov_schur(A, Q)).norm() / std::max(1.0, P.norm()));
      const MatrixXd S = oracle::random_symmetric(n, rng);
      roundtrip = roundtrip && smat(svec(S)) == S && svec(smat(svec(S))) == svec(S);
      const MatrixXd a = oracle::random_matrix(n, 7 - n, rng), b = oracle::random_matrix(3, n, rng);
      kr = std::max(kr, (kron(a, b) - oracle::kron_loop(a, b)).cwiseAbs().maxCoeff());
    }

  const LtiSystem sys = oracle::example_system(0.0);
  const auto sig = ExplorationSignal::random(1, 10, 1.0, -5, 5, 17);
  VectorXd x0(3);
  x0 << 0.5, -0.3, 0.8;
  const auto end_state = [&](double dt) {
    SimOptions o;
    o.dt = dt;
    o.interval_length = 0.1;
    o.interval_count = 10;
    o.x0 = x0;
    const Trajectory tr = simulate(sys, sig, std::nullopt, o, 0);
    return VectorXd(tr.states.col(tr.samples() - 1));
  };
  const VectorXd ref = end_state(0.00125);
  const double ratio = (end_state(0.02) - ref).norm() / (end_state(0.01) - ref).norm();
  const double secs = seconds_since(t0);
  v.detail << "Lyapunov rel. diff " << lyap << ", svec/smat exact " << roundtrip << ", kron " << kr
           << ", RK4 halving ratio " << ratio << ", " << secs << " s";
  v.require(lyap <= 1e-10, "Lyapunov agreement 1e-10");
  v.require(roundtrip, "exact round trips");
  v.require(kr <= 1e-14, "kron 1e-14");
  v.require(ratio >= 12.0 && ratio <= 20.0, "halving ratio within [12, 20] (fourth order: 16)");
  v.require(secs < 10.0, "runtime < 10 s");
}

// 8. Every CLI command, twice, byte-compared.
const char* kDeterminismConfig = R"({
  "system": {
    "A": [[-2, 1, 0], [-4, -5, 0.4], [0, -2, -5]],
    "B": [[1], [1], [1]],
    "E": [[0.3], [0.3], [0.3]],
    "sigma": [[0.25]]
  },
  "cost": { "Q": [[30, 0, 0], [0, 30, 0], [0, 0, 30]], "R": [[1]] },
  "simulation": { "l": 40 },
  "episodes": { "N": 5, "master_seed": 11 },
  "sweep": { "N_values": [1, 5], "seed_count": 3 },
  "bounds": { "N_values": [5, 10], "seed_count": 2 },
  "compare": { "N": 30, "seed_count": 2, "bootstrap_resamples": 20 }
})";

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + OLQR_CLI + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void determinism(Verdict& v) {
  const fs::path root = fs::temp_directory_path() / ("olqr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  write_file(config, kDeterminismConfig);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"oracle", "oracle"},
      {"sim_uncertain", "simulate --mode uncertain"},
      {"sim_controlled", "simulate --mode controlled"},
      {"learn_episodic", "learn --algorithm episodic --data {run}/sim_uncertain/data_manifest.json "
                         "--reference {run}/oracle/oracle_gain.csv"},
      {"learn_naive", "learn --algorithm naive --data {run}/sim_uncertain/data_manifest.json"},
      {"learn_exact", "learn --algorithm exact --data {run}/sim_controlled/data_manifest.json"},
      {"bounds", "bounds"},
      {"sweep", "sweep"},
      {"compare", "compare"},
  };
  int failures = 0, csvs = 0, differing = 0;
  for (const char* run : {"a", "b"})
    for (const auto& [name, args] : commands) {
      std::string a = args;
      const fs::path run_dir = root / run;
      for (auto pos = a.find("{run}"); pos != std::string::npos; pos = a.find("{run}"))
        a.replace(pos, 5, run_dir.string());
      const int rc = cli("--config " + config.string() + " --seed 11 --quiet --out " + (run_dir / name).string() + " " + a);
      if (rc != 0) {
        ++failures;
        v.detail << "[" << name << " exited " << rc << "] ";
      }
    }
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    ++csvs;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) {
      ++differing;
      v.detail << "[differs: " << fs::relative(entry.path(), root / "a").string() << "] ";
    }
  }
  v.detail << commands.size() << " commands x 2 runs, " << csvs << " CSV files compared, " << differing << " differ";
  v.require(failures == 0, "all commands succeed");
  v.require(csvs > 0 && differing == 0, "byte-identical CSVs");
  fs::remove_all(root);
}

bool report(int id, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " [exception: " << e.what() << "]";
  }
  std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.str().c_str());
  std::fflush(stdout);
  return v.pass;
}

}  // namespace

int main() {
  bool all = true;
  all &= report(1, oracle_reproduction);
  all &= report(2, exact_equivalence);
  SweepData sweep;
  bool sweep_ok = true;
  try {
    sweep = sweep_data();
  } catch (const std::exception& e) {
    sweep_ok = false;
    std::printf("sweep failed: %s\n", e.what());
  }
  all &= report(3, [&](Verdict& v) {
    if (!sweep_ok) throw std::runtime_error("no sweep data");
    episodic_reproduction(v, sweep);
  });
  all &= report(4, [&](Verdict& v) {
    if (!sweep_ok) throw std::runtime_error("no sweep data");
    single_episode_degradation(v, sweep);
  });
  all &= report(5, bound_suite);
  all &= report(6, covariance_gap);
  all &= report(7, kernel_oracles);
  all &= report(8, determinism);
  std::printf("acceptance: %s\n", all ? "all criteria PASS" : "one or more criteria FAIL");
  return all ? 0 : 1;
}
