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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "condot/data_model.hpp"
#include "condot/picnn.hpp"

namespace condot {

/// Eleven evenly spaced levels 0.0, 0.1, ..., 1.0.
std::vector<double> default_levels();

/// Packs sample hidden states as columns of a d x N matrix.
Eigen::MatrixXd context_matrix(const CalibrationDataset& ds);
Eigen::MatrixXd context_matrix(const std::vector<CandidatePool>& pools);

/// Conditional quantile function Q(beta | h) over success probabilities.
/// Outputs are clamped to [0, 1].
class QuantileModel {
 public:
  virtual ~QuantileModel() = default;

  virtual double quantile(double beta, std::span<const double> h) const = 0;

  /// Whether quantile() accepts `beta`. Models with a fixed grid reject
  /// off-grid levels.
  virtual bool supports(double beta) const { return beta >= 0.0 && beta <= 1.0; }

  /// Quantiles for every (level, context) pair: rows follow `levels`,
  /// columns follow the columns of `contexts`.
  virtual Eigen::MatrixXd quantile_grid(std::span<const double> levels, const Eigen::MatrixXd& contexts) const;
};

enum class SourceMode { uniform, score };
enum class InferencePotential { g, f };

/// Empirical quantiles of the training scores on an evenly spaced level
/// grid; used to turn a level into a source point in score mode.
struct SourceQuantileTable {
  std::vector<double> knots;  // knots[i] is the i/(n-1) empirical quantile

  static SourceQuantileTable from_scores(std::vector<double> scores, int n_knots = 101);
  double at(double beta) const;  // linear interpolation between knots
};

/// Quantiles from the gradient of a learned convex potential: with a uniform
/// source, Q(beta | h) = clamp(d/dy pot(beta, h), 0, 1).
class OtQuantileModel final : public QuantileModel {
 public:
  OtQuantileModel(PicnnPotential potential, SourceMode mode, InferencePotential which,
                  std::optional<SourceQuantileTable> table = std::nullopt);

  double quantile(double beta, std::span<const double> h) const override;
  Eigen::MatrixXd quantile_grid(std::span<const double> levels, const Eigen::MatrixXd& contexts) const override;

  const PicnnPotential& potential() const { return potential_; }
  SourceMode source_mode() const { return mode_; }
  InferencePotential which() const { return which_; }
  const std::optional<SourceQuantileTable>& source_table() const { return table_; }

 private:
  double source_point(double beta) const;

  PicnnPotential potential_;
  SourceMode mode_;
  InferencePotential which_;
  std::optional<SourceQuantileTable> table_;
};

/// Linear quantile-regression baseline: one affine head per level, trained
/// independently, so predictions may cross.
class QrModel final : public QuantileModel {
 public:
  QrModel(Eigen::MatrixXd weights, Eigen::VectorXd biases, std::vector<double> levels);

  double quantile(double beta, std::span<const double> h) const override;
  bool supports(double beta) const override;
  Eigen::MatrixXd quantile_grid(std::span<const double> levels, const Eigen::MatrixXd& contexts) const override;

  /// Unclamped head output for level index m.
  double raw(std::size_t m, std::span<const double> h) const;

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& biases() const { return biases_; }
  const std::vector<double>& levels() const { return levels_; }

 private:
  std::size_t level_index(double beta) const;  // throws on off-grid levels

  Eigen::MatrixXd weights_;  // M x d
  Eigen::VectorXd biases_;   // M
  std::vector<double> levels_;
};

double ot_quantile(const OtQuantileModel& model, double beta, std::span<const double> h);
double qr_quantile(const QrModel& model, double beta, std::span<const double> h);

struct QrTrainConfig {
  double lr = 1e-2;
  int steps = 2000;
  int batch_size = 64;
  double clip_max_norm = 1.0;
  std::uint64_t seed = 0;
};

/// Minimizes the mean pinball loss over batch and levels with Adam.
QrModel qr_train(const CalibrationDataset& train, std::vector<double> levels, const QrTrainConfig& config);

/// Trapezoid estimate of the integral of Q(tau | h) over [0, 1] on `grid`
/// (sorted, endpoints 0 and 1).
double expected_probability(const QuantileModel& model, std::span<const double> h, std::span<const double> grid);

/// Per-context expected probabilities for the columns of `contexts`.
Eigen::VectorXd expected_probabilities(const QuantileModel& model, const Eigen::MatrixXd& contexts,
                                       std::span<const double> grid);

double median_estimate(const QrModel& model, std::span<const double> h);

}  // namespace condot
