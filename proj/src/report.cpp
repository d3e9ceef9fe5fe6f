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

#include "condot/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "condot/error.hpp"
#include "condot/io.hpp"

namespace condot {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 160, kTop = 40, kBottom = 56;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out.push_back(c);
  }
  return out;
}

double parse_number(const std::string& s, const fs::path& file) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("report: non-numeric cell '" + s + "' in " + file.string());
  }
}

int require_column(const io::CsvTable& t, const std::string& name, const fs::path& file) {
  const int c = t.column(name);
  if (c < 0) throw ValidationError("report: " + file.string() + " lacks column '" + name + "'");
  return c;
}

// Files in `dir` named prefix*.csv, sorted by name.
std::vector<fs::path> matching(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind(prefix, 0) == 0 && e.path().extension() == ".csv") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string stem_after(const fs::path& p, const std::string& prefix) {
  return p.stem().string().substr(prefix.size());
}

}  // namespace

std::string svg_line_chart(const ChartSpec& spec, const std::vector<ChartSeries>& series) {
  if (!(spec.x_max > spec.x_min && spec.y_max > spec.y_min)) throw ValidationError("chart: empty axis range");
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - spec.x_min) / (spec.x_max - spec.x_min) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - spec.y_min) / (spec.y_max - spec.y_min) * ph; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth, 0) + "\" height=\"" +
                  fixed(kHeight, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(spec.title) + "</text>\n";
  s += "<rect x=\"" + fixed(kLeft) + "\" y=\"" + fixed(kTop) + "\" width=\"" + fixed(pw) + "\" height=\"" + fixed(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = spec.x_min + (spec.x_max - spec.x_min) * i / 5.0;
    const double yv = spec.y_min + (spec.y_max - spec.y_min) * i / 5.0;
    s += "<line x1=\"" + fixed(sx(xv)) + "\" y1=\"" + fixed(kTop + ph) + "\" x2=\"" + fixed(sx(xv)) + "\" y2=\"" +
         fixed(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fixed(sx(xv)) + "\" y=\"" + fixed(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         fixed(xv) + "</text>\n";
    s += "<line x1=\"" + fixed(kLeft - 5) + "\" y1=\"" + fixed(sy(yv)) + "\" x2=\"" + fixed(kLeft) + "\" y2=\"" +
         fixed(sy(yv)) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fixed(kLeft - 8) + "\" y=\"" + fixed(sy(yv) + 4) + "\" text-anchor=\"end\">" + fixed(yv) +
         "</text>\n";
  }
  s += "<text x=\"" + fixed(kLeft + pw / 2) + "\" y=\"" + fixed(kHeight - 14) + "\" text-anchor=\"middle\">" +
       escape(spec.x_label) + "</text>\n";
  s += "<text transform=\"translate(16," + fixed(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(spec.y_label) + "</text>\n";
  if (spec.diagonal) {
    const double lo = std::max(spec.x_min, spec.y_min), hi = std::min(spec.x_max, spec.y_max);
    s += "<line x1=\"" + fixed(sx(lo)) + "\" y1=\"" + fixed(sy(lo)) + "\" x2=\"" + fixed(sx(hi)) + "\" y2=\"" +
         fixed(sy(hi)) + "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (const auto& [x, y] : series[i].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!pts.empty()) pts.push_back(' ');
      pts += fixed(sx(x)) + "," + fixed(sy(y));
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
         "\"/>\n";
    const double ly = kTop + 12 + 18 * static_cast<double>(i);
    s += "<line x1=\"" + fixed(kWidth - kRight + 12) + "\" y1=\"" + fixed(ly) + "\" x2=\"" +
         fixed(kWidth - kRight + 32) + "\" y2=\"" + fixed(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fixed(kWidth - kRight + 38) + "\" y=\"" + fixed(ly + 4) + "\">" + escape(series[i].label) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<fs::path> write_report(const fs::path& in_dir, const fs::path& out_dir, bool svg) {
  if (!fs::is_directory(in_dir)) throw ValidationError("report: no such directory " + in_dir.string());
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    io::write_text(out_dir / name, text);
    written.push_back(out_dir / name);
  };

  std::string md = "# Report\n\n";

  const auto metrics = matching(in_dir, "metrics_");
  if (!metrics.empty()) {
    md += "## Calibration metrics\n\n";
    io::CsvTable first = io::parse_csv(io::read_text(metrics.front()));
    md += "| " + [&] {
      std::string h;
      for (std::size_t i = 0; i < first.header.size(); ++i) h += (i ? " | " : "") + first.header[i];
      return h;
    }() + " |\n|";
    for (std::size_t i = 0; i < first.header.size(); ++i) md += "---|";
    md += "\n";
    for (const auto& f : metrics) {
      const io::CsvTable t = io::parse_csv(io::read_text(f));
      if (t.header != first.header) throw ValidationError("report: " + f.string() + " has a different header");
      for (const auto& row : t.rows) {
        md += "|";
        for (const auto& cell : row) md += " " + (cell.empty() ? std::string("n/a") : cell) + " |";
        md += "\n";
      }
    }
    md += "\n";
  }

  // Cost-accuracy frontiers, one chart per control kind.
  std::map<std::string, std::vector<ChartSeries>> frontiers;
  const auto sweeps = matching(in_dir, "sweep_");
  if (!sweeps.empty()) md += "## Best-of-N sweeps\n\n";
  for (const auto& f : sweeps) {
    const io::CsvTable t = io::parse_csv(io::read_text(f));
    const int ck = require_column(t, "control_kind", f), cc = require_column(t, "control", f);
    const int ca = require_column(t, "mean_accuracy", f), cb = require_column(t, "mean_norm_budget", f);
    if (t.rows.empty()) continue;
    const std::string name = stem_after(f, "sweep_");
    const std::string kind = t.rows.front()[static_cast<std::size_t>(ck)];
    md += "### " + name + "\n\n| " + kind + " | accuracy | normalized budget |\n|---|---|---|\n";
    ChartSeries s{name, {}};
    for (const auto& row : t.rows) {
      const double budget = parse_number(row[static_cast<std::size_t>(cb)], f);
      const double acc = parse_number(row[static_cast<std::size_t>(ca)], f);
      md += "| " + row[static_cast<std::size_t>(cc)] + " | " + fixed(acc, 4) + " | " + fixed(budget, 4) + " |\n";
      s.points.emplace_back(budget, acc);
    }
    std::sort(s.points.begin(), s.points.end());
    md += "\n";
    frontiers[kind].push_back(std::move(s));
  }

  std::vector<ChartSeries> calibration;
  for (const auto& f : matching(in_dir, "calibration_curve_")) {
    const io::CsvTable t = io::parse_csv(io::read_text(f));
    const int cl = require_column(t, "level", f), cv = require_column(t, "coverage", f);
    ChartSeries s{stem_after(f, "calibration_curve_"), {}};
    for (const auto& row : t.rows)
      s.points.emplace_back(parse_number(row[static_cast<std::size_t>(cl)], f),
                            parse_number(row[static_cast<std::size_t>(cv)], f));
    calibration.push_back(std::move(s));
  }

  std::vector<std::pair<std::string, std::vector<ChartSeries>>> quantile_charts;
  for (const auto& f : matching(in_dir, "quantile_curves_")) {
    const io::CsvTable t = io::parse_csv(io::read_text(f));
    const int cs = require_column(t, "sample", f), cl = require_column(t, "level", f);
    const int cq = require_column(t, "quantile", f);
    std::vector<ChartSeries> per_sample;
    for (const auto& row : t.rows) {
      const std::string& id = row[static_cast<std::size_t>(cs)];
      if (per_sample.empty() || per_sample.back().label != id) per_sample.push_back({id, {}});
      per_sample.back().points.emplace_back(parse_number(row[static_cast<std::size_t>(cl)], f),
                                            parse_number(row[static_cast<std::size_t>(cq)], f));
    }
    quantile_charts.emplace_back(stem_after(f, "quantile_curves_"), std::move(per_sample));
  }

  if (svg) {
    md += "## Figures\n\n";
    for (const auto& [kind, series] : frontiers) {
      const std::string name = "frontier_" + kind + ".svg";
      emit(name, svg_line_chart({"Accuracy vs normalized budget (" + kind + " sweep)", "mean N / N_max",
                                 "accuracy", 0, 1, 0, 1, false},
                                series));
      md += "- [" + name + "](" + name + ")\n";
    }
    if (!calibration.empty()) {
      emit("calibration_curves.svg",
           svg_line_chart({"Empirical coverage of predicted quantiles", "level", "coverage", 0, 1, 0, 1, true},
                          calibration));
      md += "- [calibration_curves.svg](calibration_curves.svg)\n";
    }
    for (const auto& [variant, series] : quantile_charts) {
      const std::string name = "quantile_curves_" + variant + ".svg";
      emit(name, svg_line_chart({"Predicted quantile curves (" + variant + ")", "level", "Q(level | h)", 0, 1, 0, 1,
                                 false},
                                series));
      md += "- [" + name + "](" + name + ")\n";
    }
    md += "\n";
  }
  emit("report.md", md);
  return written;
}

}  // namespace condot
