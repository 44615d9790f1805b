// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "olqr/trajectory.hpp"

namespace olqr {

/// Shortest text with 17 significant digits ("%.17g"); round-trips every double.
std::string format_double(double v);
double parse_double(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes bytes exactly; creates parent directories.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// "k1=v1 k2=v2" header line body -> map. Throws ErrorCode::Io on malformed pairs.
std::map<std::string, std::string> parse_header_fields(std::string_view line);

std::vector<std::string_view> split(std::string_view s, char sep);

/// One-file-per-episode CSV: two '#' header lines (format tag, then
/// n m p dt T l seed mode), a column-name line, then one row per grid point
/// with columns t, x..., u0..., [e...].
std::string trajectory_to_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(std::string_view text);

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

}  // namespace olqr
