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

#include "condot/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "condot/error.hpp"
#include "condot/io.hpp"

namespace condot {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::ot: return "ot";
    case Variant::qr: return "qr";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "ot") return Variant::ot;
  if (s == "qr") return Variant::qr;
  throw ValidationError("unknown variant '" + s + "' (expected base, ot or qr)");
}

void EceConfig::validate() const {
  if (num_bins < 1) throw ValidationError("ece: num_bins must be >= 1");
  if (!(lo < 0.0 && hi > 1.0)) throw ValidationError("ece: range must satisfy lo < 0 and hi > 1");
}

namespace {
void check_pair(std::span<const double> preds, std::span<const double> targets) {
  if (preds.empty()) throw ValidationError("metric: empty input");
  if (preds.size() != targets.size()) throw ValidationError("metric: preds and targets differ in length");
}
}  // namespace

double brier(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += (preds[i] - targets[i]) * (preds[i] - targets[i]);
  return sum / static_cast<double>(preds.size());
}

PosBrier pos_brier(std::span<const double> preds, std::span<const double> targets, PositiveRule rule) {
  check_pair(preds, targets);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool positive = rule == PositiveRule::any_success ? targets[i] > 0.0 : targets[i] >= 1.0;
    if (!positive) continue;
    sum += (preds[i] - targets[i]) * (preds[i] - targets[i]);
    ++n;
  }
  if (n == 0) return {0.0, true};
  return {sum / static_cast<double>(n), false};
}

int ece_bin(double pred, const EceConfig& config) {
  const double width = (config.hi - config.lo) / config.num_bins;
  const auto idx = static_cast<long>(std::floor((pred - config.lo) / width));
  return static_cast<int>(std::clamp<long>(idx, 0, config.num_bins - 1));
}

double ece(std::span<const double> preds, std::span<const double> targets, const EceConfig& config) {
  check_pair(preds, targets);
  config.validate();
  std::vector<double> sum_p(static_cast<std::size_t>(config.num_bins), 0.0);
  std::vector<double> sum_t(sum_p.size(), 0.0);
  std::vector<std::size_t> count(sum_p.size(), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto b = static_cast<std::size_t>(ece_bin(preds[i], config));
    sum_p[b] += preds[i];
    sum_t[b] += targets[i];
    ++count[b];
  }
  const double n = static_cast<double>(preds.size());
  double total = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    const double c = static_cast<double>(count[b]);
    total += (c / n) * std::abs(sum_p[b] / c - sum_t[b] / c);
  }
  return total;
}

double pinball(double tau, double y, double q) { return y >= q ? tau * (y - q) : (1.0 - tau) * (q - y); }

namespace {
void check_levels(const QuantileModel& model, std::span<const double> levels) {
  if (levels.empty()) throw ValidationError("metric: no quantile levels");
  for (double l : levels)
    if (!model.supports(l)) throw ValidationError("metric: model does not support level " + std::to_string(l));
}
}  // namespace

double wql(const QuantileModel& model, const CalibrationDataset& samples, std::span<const double> levels) {
  if (samples.samples.empty()) throw ValidationError("wql: empty sample set");
  check_levels(model, levels);
  const Eigen::MatrixXd q = model.quantile_grid(levels, context_matrix(samples));
  const double n = static_cast<double>(samples.samples.size());
  double total = 0.0;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    double level_sum = 0.0;
    for (std::size_t j = 0; j < samples.samples.size(); ++j)
      level_sum += pinball(levels[l], samples.samples[j].p_emp,
                           q(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)));
    total += level_sum / n;
  }
  return total / static_cast<double>(levels.size());
}

std::vector<std::pair<double, double>> calibration_curve(const QuantileModel& model, const CalibrationDataset& samples,
                                                         std::span<const double> levels) {
  if (samples.samples.empty()) throw ValidationError("calibration curve: empty sample set");
  check_levels(model, levels);
  const Eigen::MatrixXd q = model.quantile_grid(levels, context_matrix(samples));
  std::vector<std::pair<double, double>> curve;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::size_t covered = 0;
    for (std::size_t j = 0; j < samples.samples.size(); ++j)
      if (samples.samples[j].p_emp <= q(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j))) ++covered;
    curve.emplace_back(levels[l], static_cast<double>(covered) / static_cast<double>(samples.samples.size()));
  }
  return curve;
}

double calibration_area(const QuantileModel& model, const CalibrationDataset& samples, std::span<const double> levels) {
  const auto curve = calibration_curve(model, samples, levels);
  double total = 0.0;
  for (const auto& [beta, coverage] : curve) total += std::abs(coverage - beta);
  return total / static_cast<double>(curve.size());
}

std::string MetricsReport::csv_header() { return "variant,n,brier,pos_brier,ece,wql,calibration_area"; }

std::string MetricsReport::csv_row() const {
  using io::format_double;
  return to_string(variant) + "," + std::to_string(n_samples) + "," + format_double(brier) + "," +
         format_double(pos_brier) + "," + format_double(ece) + "," + (wql ? format_double(*wql) : "") + "," +
         format_double(calibration_area);
}

namespace {

// The raw score used as a degenerate predictive distribution.
class ScoreAsQuantile final : public QuantileModel {
 public:
  explicit ScoreAsQuantile(const CalibrationDataset& ds) {
    for (const auto& s : ds.samples) scores_.push_back(s.score);
  }
  double quantile(double, std::span<const double>) const override {
    throw ValidationError("score-as-quantile is only defined per sample");
  }
  Eigen::MatrixXd quantile_grid(std::span<const double> levels, const Eigen::MatrixXd& contexts) const override {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(levels.size()), contexts.cols());
    for (Eigen::Index j = 0; j < contexts.cols(); ++j) out.col(j).setConstant(scores_[static_cast<std::size_t>(j)]);
    return out;
  }

 private:
  std::vector<double> scores_;
};

}  // namespace

std::vector<double> point_predictions(Variant variant, const QuantileModel* model, const CalibrationDataset& samples,
                                      std::span<const double> levels) {
  std::vector<double> preds;
  preds.reserve(samples.samples.size());
  switch (variant) {
    case Variant::base:
      for (const auto& s : samples.samples) preds.push_back(s.score);
      break;
    case Variant::ot: {
      if (!model) throw ValidationError("ot variant needs a model");
      const Eigen::VectorXd e = expected_probabilities(*model, context_matrix(samples), levels);
      preds.assign(e.data(), e.data() + e.size());
      break;
    }
    case Variant::qr: {
      const auto* qr = dynamic_cast<const QrModel*>(model);
      if (!qr) throw ValidationError("qr variant needs a quantile-regression model");
      for (const auto& s : samples.samples) preds.push_back(median_estimate(*qr, s.hidden));
      break;
    }
  }
  return preds;
}

MetricsReport evaluate_variant(Variant variant, const QuantileModel* model, const CalibrationDataset& samples,
                               const EvalConfig& config) {
  if (samples.samples.empty()) throw ValidationError("evaluate: empty sample set");
  std::vector<double> targets;
  for (const auto& s : samples.samples) targets.push_back(s.p_emp);
  const std::vector<double> preds = point_predictions(variant, model, samples, config.levels);

  MetricsReport r;
  r.variant = variant;
  r.n_samples = samples.samples.size();
  r.brier = brier(preds, targets);
  const PosBrier pb = pos_brier(preds, targets, config.positive_rule);
  r.pos_brier = pb.value;
  r.pos_brier_no_positives = pb.no_positives;
  r.ece = ece(preds, targets, config.ece);
  if (variant == Variant::base) {
    r.calibration_area = calibration_area(ScoreAsQuantile(samples), samples, config.levels);
  } else {
    r.wql = wql(*model, samples, config.levels);
    r.calibration_area = calibration_area(*model, samples, config.levels);
  }
  return r;
}

}  // namespace condot
