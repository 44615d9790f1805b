// SPDX-License-Identifier: Apache-2.0
#include "olqr/data_matrices.hpp"

#include <algorithm>
#include <limits>

#include "olqr/errors.hpp"
#include "olqr/io.hpp"

namespace olqr {
namespace {

VectorXd kron_vec(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// mean += (x - mean) / k, applied blockwise.
void accumulate(MatrixXd& mean, const MatrixXd& x, double k) { mean += (x - mean) / k; }

void require_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::Shape, std::string("average_matrices: heterogeneous ") + what + " shapes");
}

}  // namespace

DataMatrices build_matrices(const Trajectory& traj, bool include_e) {
  if (include_e && !traj.disturbances)
    throw Error(ErrorCode::Mode, "build_matrices: disturbance requested but not recorded");
  const int h = traj.steps_per_interval();
  const int l = traj.interval_count;
  if (l < 1) throw Error(ErrorCode::Grid, "build_matrices: no intervals");
  if (static_cast<Eigen::Index>(l) * h + 1 > traj.samples())
    throw Error(ErrorCode::Grid, "build_matrices: trajectory shorter than l * T");

  const auto n = traj.n(), m = traj.m(), p = include_e ? traj.p() : 0;
  const double half_dt = 0.5 * traj.dt;

  DataMatrices dm;
  dm.n = n;
  dm.m = m;
  dm.p = p;
  dm.interval_length = traj.interval_length;
  dm.sources.push_back("seed:" + std::to_string(traj.episode_seed));
  MatrixXd dxx_full(l, n * n);
  dm.Ixx = MatrixXd::Zero(l, n * n);
  dm.Ixu0 = MatrixXd::Zero(l, n * m);
  MatrixXd ixe = MatrixXd::Zero(l, n * p);

  for (int i = 0; i < l; ++i) {
    const Eigen::Index a = static_cast<Eigen::Index>(i) * h, b = a + h;
    dxx_full.row(i) = (kron_vec(traj.states.col(b), traj.states.col(b)) -
                       kron_vec(traj.states.col(a), traj.states.col(a))).transpose();
    VectorXd xx_prev = kron_vec(traj.states.col(a), traj.states.col(a));
    VectorXd xu_prev = kron_vec(traj.states.col(a), traj.inputs.col(a));
    for (Eigen::Index s = a; s < b; ++s) {
      const VectorXd xx_next = kron_vec(traj.states.col(s + 1), traj.states.col(s + 1));
      const VectorXd xu_next = kron_vec(traj.states.col(s + 1), traj.inputs.col(s + 1));
      dm.Ixx.row(i) += half_dt * (xx_prev + xx_next).transpose();
      dm.Ixu0.row(i) += half_dt * (xu_prev + xu_next).transpose();
      if (p > 0) {
        const VectorXd x_mid = traj.states.col(s) + traj.states.col(s + 1);
        ixe.row(i) += half_dt * kron_vec(x_mid, traj.disturbances->col(s)).transpose();
      }
      xx_prev = xx_next;
      xu_prev = xu_next;
    }
  }
  dm.Dxx = fold_symmetric(dxx_full, n);
  if (include_e) dm.Ixe = std::move(ixe);
  return dm;
}

RankReport rank_report(const MatrixXd& m, int required) {
  RankReport rep;
  rep.required = required;
  if (m.size() == 0) return rep;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values(0);
  rep.threshold = 1e3 * static_cast<double>(std::max(m.rows(), m.cols())) *
                  std::numeric_limits<double>::epsilon() * smax;
  rep.achieved = static_cast<int>((rep.singular_values.array() > rep.threshold).count());
  if (smax == 0.0) rep.achieved = 0;
  rep.passed = rep.achieved == required;
  return rep;
}

RankReport check_rank_exact(const DataMatrices& dm) {
  if (!dm.Ixe) throw Error(ErrorCode::Mode, "check_rank_exact: Ixe block missing");
  MatrixXd stacked(dm.interval_count(), svec_size(dm.n) + dm.n * dm.m + dm.n * dm.p);
  stacked << fold_symmetric(dm.Ixx, dm.n), dm.Ixu0, *dm.Ixe;
  return rank_report(stacked, static_cast<int>(stacked.cols()));
}

RankReport check_rank_episodic(const DataMatrices& dm) {
  MatrixXd stacked(dm.interval_count(), svec_size(dm.n) + dm.n * dm.m);
  stacked << fold_symmetric(dm.Ixx, dm.n), dm.Ixu0;
  return rank_report(stacked, static_cast<int>(stacked.cols()));
}

DataMatrices average_matrices(std::span<const DataMatrices> dms) {
  if (dms.empty()) throw Error(ErrorCode::Shape, "average_matrices: no inputs");
  DataMatrices out = dms.front();
  if (out.averaged) throw Error(ErrorCode::Mode, "average_matrices: input already averaged");
  for (std::size_t k = 1; k < dms.size(); ++k) {
    const auto& d = dms[k];
    if (d.averaged) throw Error(ErrorCode::Mode, "average_matrices: input already averaged");
    require_same_shape(out.Dxx, d.Dxx, "Dxx");
    require_same_shape(out.Ixx, d.Ixx, "Ixx");
    require_same_shape(out.Ixu0, d.Ixu0, "Ixu0");
    if (out.Ixe.has_value() != d.Ixe.has_value()) throw Error(ErrorCode::Shape, "average_matrices: mixed Ixe presence");
    if (out.Ixe) require_same_shape(*out.Ixe, *d.Ixe, "Ixe");
    if (d.interval_length != out.interval_length) throw Error(ErrorCode::Shape, "average_matrices: interval grids differ");

    const double count = static_cast<double>(k + 1);
    accumulate(out.Dxx, d.Dxx, count);
    accumulate(out.Ixx, d.Ixx, count);
    accumulate(out.Ixu0, d.Ixu0, count);
    if (out.Ixe) accumulate(*out.Ixe, *d.Ixe, count);
    out.sources.insert(out.sources.end(), d.sources.begin(), d.sources.end());
  }
  out.averaged = true;
  return out;
}

Trajectory naive_average_trajectory(std::span<const Trajectory> trajs) {
  if (trajs.empty()) throw Error(ErrorCode::Shape, "naive_average_trajectory: no inputs");
  Trajectory out = trajs.front();
  out.disturbances.reset();
  out.episode_seed = 0;
  for (std::size_t k = 1; k < trajs.size(); ++k) {
    const auto& t = trajs[k];
    if (t.samples() != out.samples() || t.dt != out.dt || t.times != out.times ||
        t.interval_length != out.interval_length || t.interval_count != out.interval_count)
      throw Error(ErrorCode::Grid, "naive_average_trajectory: grid mismatch");
    if (t.n() != out.n() || t.m() != out.m()) throw Error(ErrorCode::Shape, "naive_average_trajectory: dimension mismatch");
    const double count = static_cast<double>(k + 1);
    accumulate(out.states, t.states, count);
    accumulate(out.inputs, t.inputs, count);
  }
  return out;
}

namespace {

constexpr std::string_view kMatricesTag = "# olqr-data-matrices v1";

void append_block(std::string& out, const std::string& name, const MatrixXd& m) {
  out += "[" + name + "] rows=" + std::to_string(m.rows()) + " cols=" + std::to_string(m.cols()) + "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
}

}  // namespace

std::string data_matrices_to_text(const DataMatrices& dm, const std::string& source_hash) {
  std::string out(kMatricesTag);
  out += "\n# n=" + std::to_string(dm.n) + " m=" + std::to_string(dm.m) + " p=" + std::to_string(dm.p) +
         " l=" + std::to_string(dm.interval_count()) + " T=" + format_double(dm.interval_length) +
         " svec=upper-colmajor-unscaled averaged=" + (dm.averaged ? "1" : "0") +
         " source_hash=" + (source_hash.empty() ? "none" : source_hash) + "\n";
  append_block(out, "Dxx", dm.Dxx);
  append_block(out, "Ixx", dm.Ixx);
  append_block(out, "Ixu0", dm.Ixu0);
  if (dm.Ixe) append_block(out, "Ixe", *dm.Ixe);
  return out;
}

DataMatrices data_matrices_from_text(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 2 || lines[0] != kMatricesTag || lines[1].empty() || lines[1][0] != '#')
    throw Error(ErrorCode::Io, "not a data-matrices file");
  const auto f = parse_header_fields(lines[1].substr(1));
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = f.find(k);
    if (it == f.end()) throw Error(ErrorCode::Io, "data-matrices header lacks '" + k + "'");
    return it->second;
  };
  if (get("svec") != "upper-colmajor-unscaled") throw Error(ErrorCode::Io, "unsupported svec convention");
  DataMatrices dm;
  dm.n = std::stoi(get("n"));
  dm.m = std::stoi(get("m"));
  dm.p = std::stoi(get("p"));
  dm.interval_length = parse_double(get("T"));
  dm.averaged = get("averaged") == "1";

  std::size_t i = 2;
  while (i < lines.size()) {
    const auto head = lines[i];
    const auto close = head.find(']');
    if (head.empty() || head[0] != '[' || close == std::string_view::npos)
      throw Error(ErrorCode::Io, "data-matrices: expected block header");
    const std::string name(head.substr(1, close - 1));
    const auto dims = parse_header_fields(head.substr(close + 1));
    const int rows = std::stoi(dims.at("rows")), cols = std::stoi(dims.at("cols"));
    MatrixXd block(rows, cols);
    for (int r = 0; r < rows; ++r) {
      if (i + 1 + r >= lines.size()) throw Error(ErrorCode::Io, "data-matrices: truncated block " + name);
      const auto cells = split(lines[i + 1 + r], ',');
      if (static_cast<int>(cells.size()) != cols && cols > 0) throw Error(ErrorCode::Io, "data-matrices: bad row in " + name);
      for (int c = 0; c < cols; ++c) block(r, c) = parse_double(cells[c]);
    }
    if (name == "Dxx") dm.Dxx = std::move(block);
    else if (name == "Ixx") dm.Ixx = std::move(block);
    else if (name == "Ixu0") dm.Ixu0 = std::move(block);
    else if (name == "Ixe") dm.Ixe = std::move(block);
    else throw Error(ErrorCode::Io, "data-matrices: unknown block " + name);
    i += 1 + static_cast<std::size_t>(rows);
  }
  return dm;
}

void write_data_matrices(const std::filesystem::path& path, const DataMatrices& dm, const std::string& source_hash) {
  write_file(path, data_matrices_to_text(dm, source_hash));
}

DataMatrices read_data_matrices(const std::filesystem::path& path) { return data_matrices_from_text(read_file(path)); }

}  // namespace olqr
