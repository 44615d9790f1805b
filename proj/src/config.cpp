// SPDX-License-Identifier: Apache-2.0
#include "olqr/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "olqr/errors.hpp"
#include "olqr/io.hpp"
#include "olqr/model.hpp"
#include "olqr/policy.hpp"

namespace olqr {
namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::Config, "config: " + path + ": " + msg);
}

// Walks one JSON object, remembering which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  std::string path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) fail(path_of(key), "missing required key");
    return *v;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(path_of(key), "expected a number");
    return v->get<double>();
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(path_of(key), "expected an integer");
    return v->get<long long>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(path_of(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

MatrixXd to_matrix(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return MatrixXd(0, 0);
  if (!j[0].is_array()) fail(path, "expected an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(path + "[" + std::to_string(r) + "]", "ragged matrix row");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) fail(path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]", "expected a number");
      out(r, c) = v.get<double>();
    }
  }
  return out;
}

VectorXd to_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  VectorXd out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
    out(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return out;
}

std::vector<int> to_int_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) fail(path + "[" + std::to_string(i) + "]", "expected an integer");
    out.push_back(j[i].get<int>());
  }
  return out;
}

json from_matrix(const MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

json from_vector(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

bool is_multiple(double T, double dt) {
  const double ratio = T / dt;
  return ratio >= 1.0 && std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, std::string("config: malformed JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  Section top(root, "");
  {
    Section s(top.require("system"), "system");
    cfg.A = to_matrix(s.require("A"), "system.A");
    cfg.B = to_matrix(s.require("B"), "system.B");
    cfg.E = to_matrix(s.require("E"), "system.E");
    cfg.sigma = to_matrix(s.require("sigma"), "system.sigma");
    s.finish();
  }
  {
    Section s(top.require("cost"), "cost");
    cfg.Q = to_matrix(s.require("Q"), "cost.Q");
    cfg.R = to_matrix(s.require("R"), "cost.R");
    s.finish();
  }
  if (const json* j = top.find("exploration")) {
    Section s(*j, "exploration");
    cfg.n_sin = static_cast<int>(s.integer("n_sin", cfg.n_sin));
    cfg.amplitude = s.number("amplitude", cfg.amplitude);
    if (const json* r = s.find("frequency_range")) {
      const VectorXd v = to_vector(*r, "exploration.frequency_range");
      if (v.size() != 2) fail("exploration.frequency_range", "expected [lo, hi]");
      cfg.freq_lo = v(0);
      cfg.freq_hi = v(1);
    }
    s.finish();
  }
  if (const json* j = top.find("simulation")) {
    Section s(*j, "simulation");
    cfg.dt = s.number("dt", cfg.dt);
    cfg.T = s.number("T", cfg.T);
    cfg.l = static_cast<int>(s.integer("l", cfg.l));
    if (const json* d = s.find("duration"); d && !d->is_null()) {
      if (!d->is_number()) fail("simulation.duration", "expected a number or null");
      cfg.duration = d->get<double>();
    }
    if (const json* m = s.find("x0_mode")) {
      if (!m->is_string()) fail("simulation.x0_mode", "expected a string");
      cfg.x0_mode = m->get<std::string>();
    }
    if (const json* x = s.find("x0")) cfg.x0 = to_vector(*x, "simulation.x0");
    cfg.blowup_threshold = s.number("blowup_threshold", cfg.blowup_threshold);
    s.finish();
  }
  if (const json* j = top.find("learning")) {
    Section s(*j, "learning");
    if (const json* k = s.find("K0")) cfg.K0 = to_matrix(*k, "learning.K0");
    cfg.varsigma = s.number("varsigma", cfg.varsigma);
    cfg.max_iter = static_cast<int>(s.integer("max_iter", cfg.max_iter));
    s.finish();
  }
  if (const json* j = top.find("episodes")) {
    Section s(*j, "episodes");
    cfg.N = static_cast<int>(s.integer("N", cfg.N));
    if (const json* seed = s.find("master_seed")) {
      if (!seed->is_number_unsigned()) fail("episodes.master_seed", "expected a non-negative integer");
      cfg.master_seed = seed->get<std::uint64_t>();
    }
    s.finish();
  }
  if (const json* j = top.find("sweep")) {
    Section s(*j, "sweep");
    if (const json* v = s.find("N_values")) cfg.sweep_N = to_int_list(*v, "sweep.N_values");
    cfg.sweep_seeds = static_cast<int>(s.integer("seed_count", cfg.sweep_seeds));
    s.finish();
  }
  if (const json* j = top.find("bounds")) {
    Section s(*j, "bounds");
    if (const json* v = s.find("N_values")) cfg.bounds_N = to_int_list(*v, "bounds.N_values");
    cfg.bounds_seeds = static_cast<int>(s.integer("seed_count", cfg.bounds_seeds));
    s.finish();
  }
  if (const json* j = top.find("compare")) {
    Section s(*j, "compare");
    cfg.compare_N = static_cast<int>(s.integer("N", cfg.compare_N));
    cfg.compare_seeds = static_cast<int>(s.integer("seed_count", cfg.compare_seeds));
    cfg.bootstrap_resamples = static_cast<int>(s.integer("bootstrap_resamples", cfg.bootstrap_resamples));
    s.finish();
  }
  if (const json* j = top.find("output")) {
    Section s(*j, "output");
    if (const json* d = s.find("directory")) {
      if (!d->is_string()) fail("output.directory", "expected a string");
      cfg.output_dir = d->get<std::string>();
    }
    s.finish();
  }
  if (const json* w = top.find("workers")) {
    if (!w->is_number_unsigned()) fail("workers", "expected a non-negative integer");
    cfg.workers = w->get<unsigned>();
  }
  top.finish();

  if (cfg.K0.size() == 0) cfg.K0 = MatrixXd::Zero(cfg.m(), cfg.n());
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

void validate(const ExperimentConfig& cfg) {
  const auto n = cfg.n();
  if (n == 0 || cfg.A.cols() != n) fail("system.A", "must be square and non-empty");
  if (cfg.B.rows() != n || cfg.B.cols() == 0) fail("system.B", "must be n x m with m >= 1");
  if (cfg.E.rows() != n || cfg.E.cols() == 0) fail("system.E", "must be n x p with p >= 1");
  if (cfg.sigma.rows() != cfg.p() || cfg.sigma.cols() != cfg.p()) fail("system.sigma", "must be p x p");
  if (cfg.Q.rows() != n || cfg.Q.cols() != n) fail("cost.Q", "must be n x n");
  if (cfg.R.rows() != cfg.m() || cfg.R.cols() != cfg.m()) fail("cost.R", "must be m x m");
  if (cfg.K0.rows() != cfg.m() || cfg.K0.cols() != n) fail("learning.K0", "must be m x n");
  // Reuse the domain constructors for symmetry / definiteness checks.
  try {
    LtiSystem(cfg.A, cfg.B, cfg.E, cfg.sigma);
    CostWeights(cfg.Q, cfg.R);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("config: ") + e.what());
  }
  if (cfg.n_sin < 1) fail("exploration.n_sin", "must be at least 1");
  if (!(cfg.amplitude >= 0.0)) fail("exploration.amplitude", "must be non-negative");
  if (!(cfg.freq_lo <= cfg.freq_hi)) fail("exploration.frequency_range", "lo must not exceed hi");
  if (!(cfg.dt > 0.0)) fail("simulation.dt", "must be positive");
  if (!is_multiple(cfg.T, cfg.dt)) fail("simulation.T", "must be a positive multiple of dt");
  if (cfg.l < 1) fail("simulation.l", "must be at least 1");
  if (cfg.duration && !(*cfg.duration + 1e-9 * cfg.dt >= cfg.T * cfg.l))
    fail("simulation.duration", "must cover l windows of length T");
  if (cfg.x0_mode != "random" && cfg.x0_mode != "fixed") fail("simulation.x0_mode", "must be 'random' or 'fixed'");
  if (cfg.x0_mode == "fixed" && cfg.x0.size() != n) fail("simulation.x0", "fixed mode needs n entries");
  if (!(cfg.blowup_threshold > 0.0)) fail("simulation.blowup_threshold", "must be positive");
  if (!(cfg.varsigma > 0.0)) fail("learning.varsigma", "must be positive");
  if (cfg.max_iter < 1) fail("learning.max_iter", "must be at least 1");
  if (cfg.N < 1) fail("episodes.N", "must be at least 1");
  for (int v : cfg.sweep_N)
    if (v < 1) fail("sweep.N_values", "entries must be at least 1");
  for (int v : cfg.bounds_N)
    if (v < 1) fail("bounds.N_values", "entries must be at least 1");
  if (cfg.sweep_seeds < 1) fail("sweep.seed_count", "must be at least 1");
  if (cfg.bounds_seeds < 1) fail("bounds.seed_count", "must be at least 1");
  if (cfg.compare_N < 30) fail("compare.N", "must be at least 30");
  if (cfg.compare_seeds < 1) fail("compare.seed_count", "must be at least 1");
  if (cfg.bootstrap_resamples < 2) fail("compare.bootstrap_resamples", "must be at least 2");
}

std::string canonical_json(const ExperimentConfig& cfg) {
  json j;
  j["system"] = {{"A", from_matrix(cfg.A)}, {"B", from_matrix(cfg.B)}, {"E", from_matrix(cfg.E)},
                 {"sigma", from_matrix(cfg.sigma)}};
  j["cost"] = {{"Q", from_matrix(cfg.Q)}, {"R", from_matrix(cfg.R)}};
  j["exploration"] = {{"n_sin", cfg.n_sin},
                      {"amplitude", cfg.amplitude},
                      {"frequency_range", json::array({cfg.freq_lo, cfg.freq_hi})}};
  j["simulation"] = {{"dt", cfg.dt},
                     {"T", cfg.T},
                     {"l", cfg.l},
                     {"duration", cfg.duration ? json(*cfg.duration) : json(nullptr)},
                     {"x0_mode", cfg.x0_mode},
                     {"x0", from_vector(cfg.x0)},
                     {"blowup_threshold", cfg.blowup_threshold}};
  j["learning"] = {{"K0", from_matrix(cfg.K0)}, {"varsigma", cfg.varsigma}, {"max_iter", cfg.max_iter}};
  j["episodes"] = {{"N", cfg.N}, {"master_seed", cfg.master_seed}};
  j["sweep"] = {{"N_values", cfg.sweep_N}, {"seed_count", cfg.sweep_seeds}};
  j["bounds"] = {{"N_values", cfg.bounds_N}, {"seed_count", cfg.bounds_seeds}};
  j["compare"] = {
      {"N", cfg.compare_N}, {"seed_count", cfg.compare_seeds}, {"bootstrap_resamples", cfg.bootstrap_resamples}};
  j["output"] = {{"directory", cfg.output_dir}};
  j["workers"] = cfg.workers;
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_json(cfg)); }

}  // namespace olqr
