// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace olqr {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static SVG 1.1 line chart. Non-finite and (on a log axis) non-positive
/// points are skipped. Output depends only on the inputs.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series, bool log_y = false);

}  // namespace olqr
