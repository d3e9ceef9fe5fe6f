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

#include "condot/trainer.hpp"

#include <cmath>

#include "condot/error.hpp"
#include "condot/io.hpp"
#include "condot/metrics.hpp"

namespace condot {

void TrainConfig::validate() const {
  if (!(lr_f > 0.0 && lr_g > 0.0)) throw ValidationError("train: learning rates must be positive");
  if (!(lr_decay_gamma > 0.0 && lr_decay_gamma <= 1.0)) throw ValidationError("train: lr_decay_gamma must lie in (0,1]");
  if (lr_decay_every < 1 || f_update_every < 1 || batch_size < 1 || eval_every < 1)
    throw ValidationError("train: step counts and batch size must be positive");
  if (max_steps < 0) throw ValidationError("train: max_steps must be nonnegative");
  if (!(clip_max_norm > 0.0)) throw ValidationError("train: clip_max_norm must be positive");
  if (patience < 1) throw ValidationError("train: patience must be >= 1");
  if (!(min_delta >= 0.0)) throw ValidationError("train: min_delta must be nonnegative");
  if (eval_levels.empty()) throw ValidationError("train: eval_levels must be non-empty");
}

OtQuantileModel TrainResult::model(SourceMode mode) const {
  return OtQuantileModel(inference == InferencePotential::g ? g : f, mode, inference, source_table);
}

DualBatch make_batch(const CalibrationDataset& train, const TrainConfig& config, Xoshiro256& rng) {
  if (train.samples.empty()) throw ValidationError("make_batch: empty training split");
  const auto n = static_cast<Eigen::Index>(config.batch_size);
  DualBatch b;
  b.x.resize(n);
  b.y.resize(n);
  b.contexts.resize(static_cast<Eigen::Index>(train.hidden_dim), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = train.samples[rng.below(train.samples.size())];
    b.y(i) = s.p_emp;
    b.x(i) = config.source_mode == SourceMode::uniform ? rng.uniform() : s.score;
    for (std::size_t k = 0; k < s.hidden.size(); ++k) b.contexts(static_cast<Eigen::Index>(k), i) = s.hidden[k];
  }
  return b;
}

double decayed_lr(double lr, double gamma, int every, long step) {
  return lr * std::pow(gamma, static_cast<double>(step / every));
}

namespace {

struct Evaluation {
  double area;
  InferencePotential which;
};

Evaluation evaluate(const PicnnPotential& g, const PicnnPotential& f, const TrainConfig& cfg,
                    const std::optional<SourceQuantileTable>& table, const CalibrationDataset& val) {
  const double area_g =
      calibration_area(OtQuantileModel(g, cfg.source_mode, InferencePotential::g, table), val, cfg.eval_levels);
  if (cfg.inference == InferenceChoice::g) return {area_g, InferencePotential::g};
  const double area_f =
      calibration_area(OtQuantileModel(f, cfg.source_mode, InferencePotential::f, table), val, cfg.eval_levels);
  if (cfg.inference == InferenceChoice::f || area_f < area_g) return {area_f, InferencePotential::f};
  return {area_g, InferencePotential::g};
}

void update(PicnnPotential& pot, std::vector<double>& grad, AdamMoments& moments, double lr, const TrainConfig& cfg) {
  clip_gradients(grad, cfg.clip_max_norm);
  adam_step(pot.params(), grad, moments, AdamHyper{lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  pot.project_nonnegative();
}

}  // namespace

TrainResult train(const CalibrationDataset& train_split, const CalibrationDataset& val_split,
                  const PicnnConfig& pconfig, const TrainConfig& tconfig) {
  tconfig.validate();
  pconfig.validate();
  if (train_split.samples.empty()) throw ValidationError("train: empty training split");
  if (val_split.samples.empty()) throw ValidationError("train: empty validation split");
  if (static_cast<int>(train_split.hidden_dim) != pconfig.input_dim)
    throw ValidationError("train: hidden dimension of the data differs from the network input_dim");

  TrainResult result;
  result.g = init_potential(pconfig, derive_seed(tconfig.seed, 1));
  result.f = init_potential(pconfig, derive_seed(tconfig.seed, 2));
  result.inference = tconfig.inference == InferenceChoice::f ? InferencePotential::f : InferencePotential::g;
  if (tconfig.source_mode == SourceMode::score) {
    std::vector<double> scores;
    for (const auto& s : train_split.samples) scores.push_back(s.score);
    result.source_table = SourceQuantileTable::from_scores(std::move(scores));
  }

  TrainState st;
  st.moments_g = AdamMoments(result.g.num_params());
  st.moments_f = AdamMoments(result.f.num_params());
  st.rng = Xoshiro256(derive_seed(tconfig.seed, 3));
  st.best_inference = result.inference;

  PicnnPotential& g = result.g;
  PicnnPotential& f = result.f;
  double last_loss_f = 0.0;
  double last_loss_g = 0.0;

  for (st.step = 1; st.step <= tconfig.max_steps; ++st.step) {
    const double lr_g = decayed_lr(tconfig.lr_g, tconfig.lr_decay_gamma, tconfig.lr_decay_every, st.step - 1);
    const double lr_f = decayed_lr(tconfig.lr_f, tconfig.lr_decay_gamma, tconfig.lr_decay_every, st.step - 1);
    const DualBatch batch = make_batch(train_split, tconfig, st.rng);
    try {
      LossGradient lg = loss_gradients(g, f, batch, DualLoss::g, tconfig.convention);
      last_loss_g = lg.loss;
      update(g, lg.grad, st.moments_g, lr_g, tconfig);
      if (st.step % tconfig.f_update_every == 0) {
        LossGradient lf = loss_gradients(g, f, batch, DualLoss::f, tconfig.convention);
        last_loss_f = lf.loss;
        update(f, lf.grad, st.moments_f, lr_f, tconfig);
      }
    } catch (const NumericError& e) {
      throw NumericError("train: step " + std::to_string(st.step) + ": " + e.what());
    }
    result.steps_run = st.step;

    if (st.step % tconfig.eval_every != 0) continue;
    const Evaluation ev = evaluate(g, f, tconfig, result.source_table, val_split);
    if (ev.area < st.best_area - tconfig.min_delta)
      st.evals_since_improve = 0;
    else
      ++st.evals_since_improve;
    if (ev.area < st.best_area) {
      st.best_area = ev.area;
      st.best_step = st.step;
      st.best_inference = ev.which;
      st.best_g.assign(g.params().begin(), g.params().end());
      st.best_f.assign(f.params().begin(), f.params().end());
    }
    const double next_lr_f = decayed_lr(tconfig.lr_f, tconfig.lr_decay_gamma, tconfig.lr_decay_every, st.step);
    const double next_lr_g = decayed_lr(tconfig.lr_g, tconfig.lr_decay_gamma, tconfig.lr_decay_every, st.step);
    result.log.push_back({st.step, last_loss_f, last_loss_g, next_lr_f, next_lr_g, ev.area, st.best_area});
    if (st.evals_since_improve >= tconfig.patience) {
      result.stopped_early = true;
      break;
    }
  }

  if (!st.best_g.empty()) {
    std::copy(st.best_g.begin(), st.best_g.end(), g.params().begin());
    std::copy(st.best_f.begin(), st.best_f.end(), f.params().begin());
    result.best_area = st.best_area;
    result.best_step = st.best_step;
    result.inference = st.best_inference;
  }
  return result;
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  using io::format_double;
  std::string out = "step,loss_f,loss_g,lr_f,lr_g,val_area,best_area\n";
  for (const auto& r : log)
    out += std::to_string(r.step) + "," + format_double(r.loss_f) + "," + format_double(r.loss_g) + "," +
           format_double(r.lr_f) + "," + format_double(r.lr_g) + "," + format_double(r.val_area) + "," +
           format_double(r.best_area) + "\n";
  return out;
}

}  // namespace condot
