// SPDX-License-Identifier: Apache-2.0
// olqr: offline LQR learning experiments.
//
//   olqr oracle   --config cfg.json [--out dir]
//   olqr simulate --config cfg.json --mode controlled|uncertain
//   olqr learn    --config cfg.json --algorithm exact|episodic|naive --data dir/data_manifest.json
//   olqr bounds | sweep | compare --config cfg.json
//
// Exit codes: 0 ok, 2 config/precondition, 3 excitation, 4 divergence,
// 5 non-convergence, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "olqr/config.hpp"
#include "olqr/experiment.hpp"
#include "olqr/io.hpp"

namespace {

std::string gain_text(const Eigen::MatrixXd& K) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < K.rows(); ++r)
    for (Eigen::Index c = 0; c < K.cols(); ++c) s += (r || c ? ", " : "") + olqr::format_double(K(r, c));
  return s + "]";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline LQR gain learning from trajectory data"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (default: <output.directory>/<command>)");
  app.add_option("--seed", seed, "master seed, overrides episodes.master_seed");
  app.add_flag("--quiet", quiet, "print nothing on success");

  auto* oracle = app.add_subcommand("oracle", "model-based optimal gain (Kleinman iteration)");
  auto* simulate = app.add_subcommand("simulate", "generate episode files and a data manifest");
  std::string mode = "uncertain";
  simulate->add_option("--mode", mode, "controlled (record e) or uncertain")
      ->check(CLI::IsMember({"controlled", "uncertain"}));
  auto* learn = app.add_subcommand("learn", "learn a gain from simulate's files");
  std::string algorithm = "episodic", data;
  std::optional<std::string> reference;
  int episode = 0;
  learn->add_option("--algorithm", algorithm, "exact, episodic or naive")
      ->check(CLI::IsMember({"exact", "episodic", "naive"}));
  learn->add_option("--data", data, "data_manifest.json written by simulate")->required()->check(CLI::ExistingFile);
  learn->add_option("--reference", reference, "reference gain CSV (e.g. oracle_gain.csv)")->check(CLI::ExistingFile);
  learn->add_option("--episode", episode, "episode used by the exact algorithm");
  auto* bounds = app.add_subcommand("bounds", "perturbation bound verification across seeds and N");
  auto* sweep = app.add_subcommand("sweep", "episodic learning error and stability across N and seeds");
  auto* compare = app.add_subcommand("compare", "episodic vs naive mean-trajectory learning, covariance gap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    olqr::ExperimentConfig cfg = olqr::load_config(config_path);
    if (seed) cfg.master_seed = *seed;
    const std::string command = app.get_subcommands().front()->get_name();
    const std::filesystem::path out =
        out_dir.empty() ? std::filesystem::path(cfg.output_dir) / command : std::filesystem::path(out_dir);
    auto say = [&](const std::string& s) {
      if (!quiet) std::cout << s << "\n";
    };

    if (oracle->parsed()) {
      const auto o = olqr::cmd_oracle(cfg, out);
      say("K = " + gain_text(o.kleinman.K()) + "  ARE residual " + olqr::format_double(o.are_residual));
    } else if (simulate->parsed()) {
      const auto s = olqr::cmd_simulate(
          cfg, out, mode == "controlled" ? olqr::DataMode::Controlled : olqr::DataMode::Uncertain);
      say(std::to_string(s.ok) + " episodes written, " + std::to_string(s.diverged) + " diverged; manifest " +
          s.manifest.string());
    } else if (learn->parsed()) {
      std::optional<std::filesystem::path> ref;
      if (reference) ref = *reference;
      const auto r = olqr::cmd_learn(cfg, out, olqr::parse_algorithm(algorithm), data, ref, episode);
      say("K = " + gain_text(r.K()) + "  iterations " + std::to_string(r.history.size()) +
          (r.converged ? "  converged" : "  not converged"));
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    } else if (bounds->parsed()) {
      const auto reps = olqr::cmd_bounds(cfg, out);
      int held = 0;
      for (const auto& r : reps) held += olqr::bound_holds_throughout(r);
      say(std::to_string(held) + " of " + std::to_string(reps.size()) + " runs within the bound; see " +
          (out / "bounds_summary.csv").string());
    } else if (sweep->parsed()) {
      olqr::cmd_sweep(cfg, out);
      say("sweep written to " + (out / "sweep_summary.csv").string());
    } else if (compare->parsed()) {
      const auto cells = olqr::cmd_compare(cfg, out);
      int worse = 0;
      for (const auto& c : cells) worse += c.naive_error > c.episodic_error;
      say("naive worse than episodic on " + std::to_string(worse) + " of " + std::to_string(cells.size()) +
          " seeds; see " + (out / "compare_summary.csv").string());
    }
    return 0;
  } catch (const olqr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return olqr::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
