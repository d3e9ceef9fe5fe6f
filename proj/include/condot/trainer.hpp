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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "condot/data_model.hpp"
#include "condot/dual_loss.hpp"
#include "condot/optim.hpp"
#include "condot/picnn.hpp"
#include "condot/quantile_models.hpp"
#include "condot/rng.hpp"

namespace condot {

enum class InferenceChoice { g, f, automatic };

struct TrainConfig {
  double lr_f = 1e-3;
  double lr_g = 1e-3;
  double lr_decay_gamma = 0.5;
  int lr_decay_every = 1000;
  int f_update_every = 5;
  int batch_size = 128;
  long max_steps = 20000;
  double clip_max_norm = 1.0;
  int eval_every = 50;
  int patience = 175;  // evaluations without improvement before stopping
  double min_delta = 1e-4;
  SourceMode source_mode = SourceMode::uniform;
  InferenceChoice inference = InferenceChoice::g;
  DualConvention convention = DualConvention::source_transport;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<double> eval_levels = default_levels();

  void validate() const;
};

struct TrainLogRow {
  long step = 0;
  double loss_f = 0.0;
  double loss_g = 0.0;
  double lr_f = 0.0;
  double lr_g = 0.0;
  double val_area = 0.0;
  double best_area = 0.0;
};

/// Mutable state of one training run.
struct TrainState {
  long step = 0;
  AdamMoments moments_g;
  AdamMoments moments_f;
  double best_area = std::numeric_limits<double>::infinity();
  long best_step = 0;
  InferencePotential best_inference = InferencePotential::g;
  std::vector<double> best_g;
  std::vector<double> best_f;
  int evals_since_improve = 0;
  Xoshiro256 rng{0};
};

struct TrainResult {
  PicnnPotential g;
  PicnnPotential f;
  InferencePotential inference = InferencePotential::g;
  std::optional<SourceQuantileTable> source_table;  // score mode only
  std::vector<TrainLogRow> log;
  double best_area = std::numeric_limits<double>::infinity();
  long best_step = 0;
  long steps_run = 0;
  bool stopped_early = false;

  /// The selected inference potential wrapped as a quantile model.
  OtQuantileModel model(SourceMode mode) const;
};

/// batch_size records drawn uniformly with replacement; y = p_emp, the
/// context is the record's hidden state, and x is a U(0,1) draw (uniform
/// mode) or the record's score (score mode).
DualBatch make_batch(const CalibrationDataset& train, const TrainConfig& config, Xoshiro256& rng);

/// Learning rate after `step` optimizer steps: lr * gamma^(step / every).
double decayed_lr(double lr, double gamma, int every, long step);

/// Alternating dual training with early stopping on validation calibration
/// area. Returns the checkpoint with the lowest validation area seen.
TrainResult train(const CalibrationDataset& train_split, const CalibrationDataset& val_split,
                  const PicnnConfig& pconfig, const TrainConfig& tconfig);

std::string train_log_csv(const std::vector<TrainLogRow>& log);

}  // namespace condot
