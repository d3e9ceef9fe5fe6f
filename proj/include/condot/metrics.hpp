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

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "condot/data_model.hpp"
#include "condot/quantile_models.hpp"

namespace condot {

enum class Variant { base, ot, qr };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct EceConfig {
  int num_bins = 12;
  double lo = -0.0005;
  double hi = 1.0005;

  void validate() const;
};

/// What counts as a positive sample for PosBrier on fractional targets.
enum class PositiveRule {
  any_success,  // target > 0
  all_success,  // target == 1
};

struct PosBrier {
  double value = 0.0;
  bool no_positives = false;
};

double brier(std::span<const double> preds, std::span<const double> targets);
PosBrier pos_brier(std::span<const double> preds, std::span<const double> targets,
                   PositiveRule rule = PositiveRule::any_success);

/// Equal-width bins over [lo, hi], half-open except the last; the weighted
/// mean gap between mean prediction and mean target per non-empty bin.
double ece(std::span<const double> preds, std::span<const double> targets, const EceConfig& config = {});

/// Bin index used by ece() for one prediction; values outside [lo, hi] are
/// placed in the nearest end bin.
int ece_bin(double pred, const EceConfig& config);

double pinball(double tau, double y, double q);

/// Mean over levels of the mean pinball loss over samples.
double wql(const QuantileModel& model, const CalibrationDataset& samples, std::span<const double> levels);

/// Coverage per level: fraction of samples with p_emp <= Q(beta | h).
std::vector<std::pair<double, double>> calibration_curve(const QuantileModel& model, const CalibrationDataset& samples,
                                                         std::span<const double> levels);

/// Mean over levels of |coverage(beta) - beta|.
double calibration_area(const QuantileModel& model, const CalibrationDataset& samples, std::span<const double> levels);

struct MetricsReport {
  Variant variant = Variant::base;
  std::size_t n_samples = 0;
  double brier = 0.0;
  double pos_brier = 0.0;
  bool pos_brier_no_positives = false;
  double ece = 0.0;
  std::optional<double> wql;  // absent for the base variant
  double calibration_area = 0.0;

  /// CSV columns: variant,n,brier,pos_brier,ece,wql,calibration_area
  static std::string csv_header();
  std::string csv_row() const;
};

struct EvalConfig {
  EceConfig ece;
  PositiveRule positive_rule = PositiveRule::any_success;
  std::vector<double> levels = default_levels();
};

/// Point predictions for a variant: raw scores (base), trapezoid expected
/// probability (ot), or the median head (qr).
std::vector<double> point_predictions(Variant variant, const QuantileModel* model, const CalibrationDataset& samples,
                                      std::span<const double> levels);

/// Full report. `model` is ignored for the base variant and required
/// otherwise. The base variant's calibration area treats the raw score as a
/// constant quantile prediction at every level.
MetricsReport evaluate_variant(Variant variant, const QuantileModel* model, const CalibrationDataset& samples,
                               const EvalConfig& config = {});

}  // namespace condot
