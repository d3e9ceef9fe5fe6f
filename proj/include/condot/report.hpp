// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace condot {

struct ChartSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // drawn in the given order
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  bool diagonal = false;  // dashed y = x reference
};

/// Self-contained SVG line chart with axes, ticks and a legend.
std::string svg_line_chart(const ChartSpec& spec, const std::vector<ChartSeries>& series);

/// Collects metrics_*.csv, sweep_*.csv, calibration_curve_*.csv and
/// quantile_curves_*.csv from `in_dir` into report.md under `out_dir`, and
/// optionally one SVG chart per figure. Returns the files written.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& in_dir,
                                                const std::filesystem::path& out_dir, bool svg);

}  // namespace condot
