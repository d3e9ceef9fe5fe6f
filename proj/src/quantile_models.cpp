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

#include "condot/quantile_models.hpp"

#include <algorithm>
#include <cmath>

#include "condot/error.hpp"
#include "condot/optim.hpp"
#include "condot/rng.hpp"

namespace condot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> default_levels() {
  std::vector<double> levels;
  for (int i = 0; i <= 10; ++i) levels.push_back(i / 10.0);
  return levels;
}

MatrixXd context_matrix(const CalibrationDataset& ds) {
  MatrixXd m(static_cast<Eigen::Index>(ds.hidden_dim), static_cast<Eigen::Index>(ds.samples.size()));
  for (std::size_t j = 0; j < ds.samples.size(); ++j)
    for (std::size_t i = 0; i < ds.hidden_dim; ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ds.samples[j].hidden[i];
  return m;
}

MatrixXd context_matrix(const std::vector<CandidatePool>& pools) {
  const std::size_t d = pools.empty() ? 0 : pools.front().question_hidden.size();
  MatrixXd m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(pools.size()));
  for (std::size_t j = 0; j < pools.size(); ++j)
    for (std::size_t i = 0; i < d; ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pools[j].question_hidden[i];
  return m;
}

MatrixXd QuantileModel::quantile_grid(std::span<const double> levels, const MatrixXd& contexts) const {
  MatrixXd out(static_cast<Eigen::Index>(levels.size()), contexts.cols());
  std::vector<double> h(static_cast<std::size_t>(contexts.rows()));
  for (Eigen::Index j = 0; j < contexts.cols(); ++j) {
    for (Eigen::Index i = 0; i < contexts.rows(); ++i) h[static_cast<std::size_t>(i)] = contexts(i, j);
    for (std::size_t m = 0; m < levels.size(); ++m) out(static_cast<Eigen::Index>(m), j) = quantile(levels[m], h);
  }
  return out;
}

namespace {
double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_level(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("quantile level outside [0,1]");
}
}  // namespace

SourceQuantileTable SourceQuantileTable::from_scores(std::vector<double> scores, int n_knots) {
  if (scores.empty()) throw ValidationError("source quantile table: no scores");
  if (n_knots < 2) throw ValidationError("source quantile table: need at least 2 knots");
  std::sort(scores.begin(), scores.end());
  SourceQuantileTable t;
  const double last = static_cast<double>(scores.size() - 1);
  for (int i = 0; i < n_knots; ++i) {
    const double pos = last * static_cast<double>(i) / static_cast<double>(n_knots - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, scores.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    t.knots.push_back(scores[lo] + frac * (scores[hi] - scores[lo]));
  }
  return t;
}

double SourceQuantileTable::at(double beta) const {
  check_level(beta);
  const double pos = beta * static_cast<double>(knots.size() - 1);
  const auto lo = std::min(static_cast<std::size_t>(std::floor(pos)), knots.size() - 2);
  const double frac = pos - static_cast<double>(lo);
  return knots[lo] + frac * (knots[lo + 1] - knots[lo]);
}

OtQuantileModel::OtQuantileModel(PicnnPotential potential, SourceMode mode, InferencePotential which,
                                 std::optional<SourceQuantileTable> table)
    : potential_(std::move(potential)), mode_(mode), which_(which), table_(std::move(table)) {
  if (mode_ == SourceMode::score && (!table_ || table_->knots.size() < 2))
    throw ValidationError("score-mode OT model needs a source quantile table");
}

double OtQuantileModel::source_point(double beta) const {
  return mode_ == SourceMode::uniform ? beta : table_->at(beta);
}

double OtQuantileModel::quantile(double beta, std::span<const double> h) const {
  check_level(beta);
  return clamp01(potential_.dy(source_point(beta), h));
}

MatrixXd OtQuantileModel::quantile_grid(std::span<const double> levels, const MatrixXd& contexts) const {
  const Eigen::Index n = contexts.cols();
  const auto m = static_cast<Eigen::Index>(levels.size());
  if (m == 0 || n == 0) return MatrixXd(m, n);
  VectorXd ys(n * m);
  for (Eigen::Index l = 0; l < m; ++l) {
    const double beta = levels[static_cast<std::size_t>(l)];
    check_level(beta);
    ys.segment(l * n, n).setConstant(source_point(beta));
  }
  const VectorXd dy = potential_.evaluate(ys, contexts, static_cast<int>(m)).dy;
  MatrixXd out(m, n);
  for (Eigen::Index l = 0; l < m; ++l)
    for (Eigen::Index j = 0; j < n; ++j) out(l, j) = clamp01(dy(l * n + j));
  return out;
}

double ot_quantile(const OtQuantileModel& model, double beta, std::span<const double> h) {
  return model.quantile(beta, h);
}

QrModel::QrModel(MatrixXd weights, VectorXd biases, std::vector<double> levels)
    : weights_(std::move(weights)), biases_(std::move(biases)), levels_(std::move(levels)) {
  if (levels_.empty()) throw ValidationError("qr: no quantile levels");
  if (weights_.rows() != static_cast<Eigen::Index>(levels_.size()) || biases_.size() != weights_.rows())
    throw ValidationError("qr: weights, biases and levels disagree in size");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    check_level(levels_[i]);
    if (i > 0 && !(levels_[i] > levels_[i - 1])) throw ValidationError("qr: levels must be strictly increasing");
  }
}

std::size_t QrModel::level_index(double beta) const {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (std::abs(levels_[i] - beta) <= 1e-9) return i;
  throw ValidationError("qr: unsupported level " + std::to_string(beta) + " (not in the trained grid)");
}

bool QrModel::supports(double beta) const {
  return std::any_of(levels_.begin(), levels_.end(), [beta](double l) { return std::abs(l - beta) <= 1e-9; });
}

double QrModel::raw(std::size_t m, std::span<const double> h) const {
  if (static_cast<Eigen::Index>(h.size()) != weights_.cols()) throw ValidationError("qr: context dimension mismatch");
  double v = biases_(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < h.size(); ++i) v += weights_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)) * h[i];
  return v;
}

double QrModel::quantile(double beta, std::span<const double> h) const { return clamp01(raw(level_index(beta), h)); }

MatrixXd QrModel::quantile_grid(std::span<const double> levels, const MatrixXd& contexts) const {
  if (contexts.rows() != weights_.cols()) throw ValidationError("qr: context dimension mismatch");
  MatrixXd out(static_cast<Eigen::Index>(levels.size()), contexts.cols());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto m = static_cast<Eigen::Index>(level_index(levels[l]));
    out.row(static_cast<Eigen::Index>(l)) =
        ((weights_.row(m) * contexts).array() + biases_(m)).cwiseMax(0.0).cwiseMin(1.0).matrix();
  }
  return out;
}

double qr_quantile(const QrModel& model, double beta, std::span<const double> h) { return model.quantile(beta, h); }

QrModel qr_train(const CalibrationDataset& train, std::vector<double> levels, const QrTrainConfig& config) {
  if (train.samples.empty()) throw ValidationError("qr_train: empty training split");
  if (config.steps < 0 || config.batch_size < 1) throw ValidationError("qr_train: invalid steps or batch size");
  const auto M = static_cast<Eigen::Index>(levels.size());
  const auto d = static_cast<Eigen::Index>(train.hidden_dim);

  // flat parameters: weights (column-major M x d) followed by biases
  std::vector<double> params(static_cast<std::size_t>(M * d + M), 0.0);
  std::vector<double> grad(params.size());
  AdamMoments moments(params.size());
  const AdamHyper hyper{config.lr, 0.9, 0.999, 1e-8};
  Xoshiro256 rng(config.seed);
  const MatrixXd contexts = context_matrix(train);

  for (int step = 0; step < config.steps; ++step) {
    Eigen::Map<const MatrixXd> W(params.data(), M, d);
    Eigen::Map<const VectorXd> b(params.data() + M * d, M);
    std::fill(grad.begin(), grad.end(), 0.0);
    Eigen::Map<MatrixXd> gW(grad.data(), M, d);
    Eigen::Map<VectorXd> gb(grad.data() + M * d, M);

    double loss = 0.0;
    const double scale = 1.0 / (static_cast<double>(config.batch_size) * static_cast<double>(M));
    for (int i = 0; i < config.batch_size; ++i) {
      const auto j = static_cast<Eigen::Index>(rng.below(train.samples.size()));
      const double y = train.samples[static_cast<std::size_t>(j)].p_emp;
      const VectorXd q = W * contexts.col(j) + b;
      for (Eigen::Index m = 0; m < M; ++m) {
        const double tau = levels[static_cast<std::size_t>(m)];
        const double r = y - q(m);
        double dq = 0.0;  // subgradient; 0 at a tie
        if (r > 0.0) {
          loss += tau * r;
          dq = -tau;
        } else if (r < 0.0) {
          loss += (tau - 1.0) * r;
          dq = 1.0 - tau;
        }
        gb(m) += dq * scale;
        gW.row(m) += dq * scale * contexts.col(j).transpose();
      }
    }
    if (!std::isfinite(loss)) throw NumericError("qr_train: non-finite loss at step " + std::to_string(step));
    clip_gradients(grad, config.clip_max_norm);
    adam_step(params, grad, moments, hyper);
  }

  Eigen::Map<const MatrixXd> W(params.data(), M, d);
  Eigen::Map<const VectorXd> b(params.data() + M * d, M);
  return QrModel(W, b, std::move(levels));
}

namespace {
void check_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw ValidationError("expected_probability: grid needs at least 2 levels");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ValidationError("expected_probability: grid must be increasing");
}
}  // namespace

double expected_probability(const QuantileModel& model, std::span<const double> h, std::span<const double> grid) {
  check_grid(grid);
  double area = 0.0;
  double prev = model.quantile(grid[0], h);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = model.quantile(grid[i], h);
    area += 0.5 * (grid[i] - grid[i - 1]) * (prev + cur);
    prev = cur;
  }
  return area;
}

VectorXd expected_probabilities(const QuantileModel& model, const MatrixXd& contexts, std::span<const double> grid) {
  check_grid(grid);
  const MatrixXd q = model.quantile_grid(grid, contexts);
  VectorXd out = VectorXd::Zero(contexts.cols());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out += 0.5 * (grid[i] - grid[i - 1]) * (q.row(r - 1) + q.row(r)).transpose();
  }
  return out;
}

double median_estimate(const QrModel& model, std::span<const double> h) {
  if (!model.supports(0.5)) throw ValidationError("median_estimate: 0.5 is not a trained level");
  return model.quantile(0.5, h);
}

}  // namespace condot
