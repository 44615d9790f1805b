// SPDX-License-Identifier: Apache-2.0
#include "olqr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "olqr/errors.hpp"

namespace olqr {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::Io, "cannot parse number '" + std::string(s) + "'");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "sha256 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::map<std::string, std::string> parse_header_fields(std::string_view line) {
  std::map<std::string, std::string> fields;
  for (auto tok : split(line, ' ')) {
    if (tok.empty()) continue;
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos || eq == 0) throw Error(ErrorCode::Io, "malformed header field '" + std::string(tok) + "'");
    fields.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
  }
  return fields;
}

namespace {

constexpr std::string_view kTrajectoryTag = "# olqr-trajectory v1";

const std::string& field(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) throw Error(ErrorCode::Io, "trajectory header lacks '" + key + "'");
  return it->second;
}

}  // namespace

std::string trajectory_to_csv(const Trajectory& traj) {
  const auto n = traj.n(), m = traj.m(), p = traj.p();
  std::string out;
  out.reserve(static_cast<std::size_t>(traj.samples()) * 24 * (1 + n + m + p) + 256);
  out += kTrajectoryTag;
  out += "\n# n=" + std::to_string(n) + " m=" + std::to_string(m) + " p=" + std::to_string(p) +
         " dt=" + format_double(traj.dt) + " T=" + format_double(traj.interval_length) +
         " l=" + std::to_string(traj.interval_count) + " seed=" + std::to_string(traj.episode_seed) +
         " mode=" + (traj.disturbances ? "controlled" : "uncertain") + "\n";
  out += "t";
  for (Eigen::Index i = 0; i < n; ++i) out += ",x" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < m; ++i) out += ",u" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < p; ++i) out += ",e" + std::to_string(i + 1);
  out += '\n';
  for (Eigen::Index s = 0; s < traj.samples(); ++s) {
    out += format_double(traj.times(s));
    for (Eigen::Index i = 0; i < n; ++i) (out += ',') += format_double(traj.states(i, s));
    for (Eigen::Index i = 0; i < m; ++i) (out += ',') += format_double(traj.inputs(i, s));
    for (Eigen::Index i = 0; i < p; ++i) (out += ',') += format_double((*traj.disturbances)(i, s));
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_csv(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 4 || lines[0] != kTrajectoryTag) throw Error(ErrorCode::Io, "not a trajectory file");
  if (lines[1].size() < 2 || lines[1][0] != '#') throw Error(ErrorCode::Io, "trajectory header missing");
  const auto f = parse_header_fields(lines[1].substr(1));

  Trajectory traj;
  const int n = std::stoi(field(f, "n")), m = std::stoi(field(f, "m")), p = std::stoi(field(f, "p"));
  traj.dt = parse_double(field(f, "dt"));
  traj.interval_length = parse_double(field(f, "T"));
  traj.interval_count = std::stoi(field(f, "l"));
  traj.episode_seed = std::stoull(field(f, "seed"));
  const bool controlled = field(f, "mode") == "controlled";
  if (controlled != (p > 0)) throw Error(ErrorCode::Io, "trajectory mode flag inconsistent with p");

  const auto rows = static_cast<Eigen::Index>(lines.size() - 3);
  const int cols = 1 + n + m + p;
  traj.times.resize(rows);
  traj.states.resize(n, rows);
  traj.inputs.resize(m, rows);
  Eigen::MatrixXd dist(p, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto cells = split(lines[static_cast<std::size_t>(r) + 3], ',');
    if (static_cast<int>(cells.size()) != cols) throw Error(ErrorCode::Io, "trajectory row has wrong column count");
    traj.times(r) = parse_double(cells[0]);
    for (int i = 0; i < n; ++i) traj.states(i, r) = parse_double(cells[1 + i]);
    for (int i = 0; i < m; ++i) traj.inputs(i, r) = parse_double(cells[1 + n + i]);
    for (int i = 0; i < p; ++i) dist(i, r) = parse_double(cells[1 + n + m + i]);
  }
  if (controlled) traj.disturbances = std::move(dist);
  return traj;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  write_file(path, trajectory_to_csv(traj));
}

Trajectory read_trajectory(const std::filesystem::path& path) { return trajectory_from_csv(read_file(path)); }

}  // namespace olqr
