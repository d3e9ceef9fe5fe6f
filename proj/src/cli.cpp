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

#include "condot/cli.hpp"

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "condot/checkpoint.hpp"
#include "condot/data_model.hpp"
#include "condot/error.hpp"
#include "condot/io.hpp"
#include "condot/report.hpp"

namespace condot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (root.contains(name)) {
      j_ = root.at(name);
      if (!j_.is_object()) throw ValidationError("config: section '" + name + "' must be an object");
    }
  }

  template <class T>
  void get(const std::string& key, T& dst) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      dst = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: " + name_ + "." + key + " has the wrong type");
    }
  }

  template <class E>
  void get_enum(const std::string& key, E& dst, const std::function<E(const std::string&)>& parse) {
    std::string s;
    if (!j_.contains(key)) return;
    get(key, s);
    dst = parse(s);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ValidationError("config: unknown key '" + name_ + "." + k + "'");
  }

 private:
  json j_ = json::object();
  std::string name_;
  std::set<std::string> used_;
};

SourceMode parse_source_mode(const std::string& s) {
  if (s == "uniform") return SourceMode::uniform;
  if (s == "score") return SourceMode::score;
  throw ValidationError("unknown source mode '" + s + "' (expected uniform or score)");
}

InferenceChoice parse_inference(const std::string& s) {
  if (s == "g") return InferenceChoice::g;
  if (s == "f") return InferenceChoice::f;
  if (s == "auto") return InferenceChoice::automatic;
  throw ValidationError("unknown inference potential '" + s + "' (expected g, f or auto)");
}

DualConvention parse_convention(const std::string& s) {
  if (s == "source_transport") return DualConvention::source_transport;
  if (s == "as_written") return DualConvention::as_written;
  throw ValidationError("unknown dual convention '" + s + "' (expected source_transport or as_written)");
}

PositiveRule parse_positive_rule(const std::string& s) {
  if (s == "any_success") return PositiveRule::any_success;
  if (s == "all_success") return PositiveRule::all_success;
  throw ValidationError("unknown positive rule '" + s + "' (expected any_success or all_success)");
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("bad level '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw ValidationError("empty level list");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] >= 0.0 && out[i] <= 1.0)) throw ValidationError("levels must lie in [0,1]");
    if (i > 0 && !(out[i] > out[i - 1])) throw ValidationError("levels must be strictly increasing");
  }
  return out;
}

template <class T>
void override_with(T& dst, const std::optional<T>& v) {
  if (v) dst = *v;
}

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : parse_run_config(io::read_text(path));
}

CalibrationDataset split_side(const CalibrationDataset& ds, const SplitAssignment& split, bool train_side) {
  const auto& qs = train_side ? split.train_questions : split.test_questions;
  CalibrationDataset out = ds.subset(qs, ds.name + (train_side ? ":train" : ":test"));
  if (out.samples.empty())
    throw ValidationError(std::string("split leaves no ") + (train_side ? "training" : "test") + " samples");
  return out;
}

std::unique_ptr<QuantileModel> model_for(Variant variant, const std::string& checkpoint) {
  if (variant == Variant::base) {
    if (!checkpoint.empty()) throw ValidationError("--checkpoint is not used by the base variant");
    return nullptr;
  }
  if (checkpoint.empty()) throw ValidationError("--checkpoint is required for variant " + to_string(variant));
  const std::string kind = checkpoint_kind(checkpoint);
  if (kind != to_string(variant))
    throw ValidationError("checkpoint " + checkpoint + " holds a " + kind + " model, not " + to_string(variant));
  return load_quantile_model(checkpoint);
}

void write_file(std::ostream& out, const fs::path& path, const std::string& text) {
  io::write_text(path, text);
  out << "wrote " << path.string() << "\n";
}

// ---- subcommands ----------------------------------------------------------

struct Common {
  std::string out_dir;
  std::string config;
};

void add_common(CLI::App* sub, Common& c, bool with_config = true) {
  sub->add_option("--out-dir", c.out_dir, "Output directory")->required();
  if (with_config) sub->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
}

struct SynthArgs {
  Common common;
  std::optional<std::string> family;
  std::optional<int> questions, hidden_dim, prefixes, rollouts, candidates;
  std::optional<double> prm_bias, prm_noise_sd, ranking_strength;
  std::optional<std::uint64_t> seed;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  RunConfig rc = load_config(a.common.config);
  SyntheticConfig& s = rc.synthetic;
  if (a.family) s.family = parse_family(*a.family);
  override_with(s.n_questions, a.questions);
  override_with(s.hidden_dim, a.hidden_dim);
  override_with(s.prefixes_per_question, a.prefixes);
  override_with(s.n_rollouts, a.rollouts);
  override_with(s.prm_bias, a.prm_bias);
  override_with(s.prm_noise_sd, a.prm_noise_sd);
  override_with(s.ranking_strength, a.ranking_strength);
  override_with(s.seed, a.seed);
  override_with(rc.n_candidates, a.candidates);
  rc.validate();

  const fs::path dir = a.common.out_dir;
  fs::create_directories(dir);
  const SyntheticData data = generate_dataset(s);
  const auto pools = generate_pools(s, rc.n_candidates);
  save_dataset(dir / "samples.jsonl", data.dataset);
  out << "wrote " << (dir / "samples.jsonl").string() << "\n";
  save_pools(dir / "pools.jsonl", pools);
  out << "wrote " << (dir / "pools.jsonl").string() << "\n";
  save_oracle(dir / "oracle.json", data.oracle);
  out << "wrote " << (dir / "oracle.json").string() << "\n";
}

struct SplitArgs {
  Common common;
  std::string samples;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
};

void cmd_split(const SplitArgs& a, std::ostream& out) {
  const CalibrationDataset ds = load_dataset(a.samples);
  const SplitAssignment split = group_split(ds, a.train_fraction, a.seed);
  fs::create_directories(a.common.out_dir);
  const fs::path path = fs::path(a.common.out_dir) / "split.json";
  save_split(path, split);
  out << "wrote " << path.string() << " (" << split.train_questions.size() << " train, "
      << split.test_questions.size() << " test questions)\n";
}

struct TrainOtArgs {
  Common common;
  std::string samples, split;
  std::optional<long> max_steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr_f, lr_g, val_fraction;
  std::optional<int> batch_size, eval_every, patience, f_update_every;
  std::optional<std::string> source_mode, inference, convention;
};

void cmd_train_ot(const TrainOtArgs& a, std::ostream& out) {
  RunConfig rc = load_config(a.common.config);
  TrainConfig& t = rc.train;
  override_with(t.max_steps, a.max_steps);
  override_with(t.seed, a.seed);
  override_with(t.lr_f, a.lr_f);
  override_with(t.lr_g, a.lr_g);
  override_with(t.batch_size, a.batch_size);
  override_with(t.eval_every, a.eval_every);
  override_with(t.patience, a.patience);
  override_with(t.f_update_every, a.f_update_every);
  override_with(rc.val_fraction, a.val_fraction);
  if (a.source_mode) t.source_mode = parse_source_mode(*a.source_mode);
  if (a.inference) t.inference = parse_inference(*a.inference);
  if (a.convention) t.convention = parse_convention(*a.convention);

  const CalibrationDataset ds = load_dataset(a.samples);
  const SplitAssignment split = load_split(a.split);
  rc.picnn.input_dim = static_cast<int>(ds.hidden_dim);
  rc.validate();

  const CalibrationDataset train_all = split_side(ds, split, true);
  const SplitAssignment inner = group_split(train_all, 1.0 - rc.val_fraction, derive_seed(t.seed, 4));
  const CalibrationDataset fit = train_all.subset(inner.train_questions, ds.name + ":fit");
  const CalibrationDataset val = train_all.subset(inner.test_questions, ds.name + ":val");

  const TrainResult r = train(fit, val, rc.picnn, t);
  fs::create_directories(a.common.out_dir);
  const fs::path dir = a.common.out_dir;
  OtCheckpoint ckpt{r.f, r.g, t.source_mode, r.inference, r.source_table};
  save_checkpoint(dir / "checkpoint_ot.json", ckpt);
  out << "wrote " << (dir / "checkpoint_ot.json").string() << "\n";
  write_file(out, dir / "train_log.csv", train_log_csv(r.log));
  out << "steps " << r.steps_run << (r.stopped_early ? " (early stop)" : "") << ", best validation area "
      << io::format_double(r.best_area) << " at step " << r.best_step << ", inference potential "
      << (r.inference == InferencePotential::g ? "g" : "f") << "\n";
}

struct TrainQrArgs {
  Common common;
  std::string samples, split;
  std::optional<std::string> levels;
  std::optional<int> steps;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
};

void cmd_train_qr(const TrainQrArgs& a, std::ostream& out) {
  RunConfig rc = load_config(a.common.config);
  if (a.levels) rc.qr_levels = parse_levels(*a.levels);
  override_with(rc.qr.steps, a.steps);
  override_with(rc.qr.lr, a.lr);
  override_with(rc.qr.seed, a.seed);
  rc.validate();
  const CalibrationDataset ds = load_dataset(a.samples);
  const SplitAssignment split = load_split(a.split);
  const QrModel model = qr_train(split_side(ds, split, true), rc.qr_levels, rc.qr);
  fs::create_directories(a.common.out_dir);
  const fs::path path = fs::path(a.common.out_dir) / "checkpoint_qr.json";
  save_qr_checkpoint(path, model);
  out << "wrote " << path.string() << "\n";
}

struct EvaluateArgs {
  Common common;
  std::string samples, split, checkpoint, variant;
  std::optional<std::string> positive_rule;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  RunConfig rc = load_config(a.common.config);
  if (a.positive_rule) rc.eval.positive_rule = parse_positive_rule(*a.positive_rule);
  rc.validate();
  const Variant variant = parse_variant(a.variant);
  CalibrationDataset ds = load_dataset(a.samples);
  if (!a.split.empty()) ds = split_side(ds, load_split(a.split), false);
  const auto model = model_for(variant, a.checkpoint);

  const MetricsReport rep = evaluate_variant(variant, model.get(), ds, rc.eval);
  const fs::path dir = a.common.out_dir;
  fs::create_directories(dir);
  const std::string v = to_string(variant);
  write_file(out, dir / ("metrics_" + v + ".csv"), MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n");

  std::string curve = "level,coverage\n";
  if (variant == Variant::base) {
    // the raw score is read as the same quantile at every level
    std::size_t covered = 0;
    for (const auto& s : ds.samples) covered += s.p_emp <= s.score ? 1 : 0;
    const double c = static_cast<double>(covered) / static_cast<double>(ds.samples.size());
    for (double l : rc.eval.levels) curve += io::format_double(l) + "," + io::format_double(c) + "\n";
  } else {
    for (const auto& [l, c] : calibration_curve(*model, ds, rc.eval.levels))
      curve += io::format_double(l) + "," + io::format_double(c) + "\n";
  }
  write_file(out, dir / ("calibration_curve_" + v + ".csv"), curve);

  if (model) {
    std::vector<double> levels;
    if (const auto* qr = dynamic_cast<const QrModel*>(model.get())) {
      levels = qr->levels();
    } else {
      for (int i = 0; i <= 20; ++i) levels.push_back(i / 20.0);
    }
    std::string qc = "sample,level,quantile\n";
    const std::size_t n = std::min(ds.samples.size(), static_cast<std::size_t>(rc.curve_samples));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = ds.samples[i];
      const std::string id = s.question_id + "#" + std::to_string(s.prefix_index);
      for (double l : levels)
        qc += id + "," + io::format_double(l) + "," + io::format_double(model->quantile(l, s.hidden)) + "\n";
    }
    write_file(out, dir / ("quantile_curves_" + v + ".csv"), qc);
  }
}

struct AllocateArgs {
  Common common;
  std::string pools, checkpoint, variant;
  double confidence = 0.9;
  std::optional<double> beta;
  int n_max = 64;
};

void cmd_allocate(const AllocateArgs& a, std::ostream& out) {
  RunConfig rc = load_config(a.common.config);
  rc.validate();
  const Variant variant = parse_variant(a.variant);
  const auto pools = load_pools(a.pools);
  const auto model = model_for(variant, a.checkpoint);
  if (variant == Variant::base && a.beta) throw ValidationError("--beta needs a quantile model (ot or qr)");

  AllocationRequest req;
  req.confidence = a.confidence;
  req.n_max = a.n_max;
  if (const auto* qr = dynamic_cast<const QrModel*>(model.get())) req.quantile_grid = qr->levels();
  req.validate();

  std::string csv = a.beta ? "question_id,n,saturated,beta\n" : "question_id,n,saturated\n";
  for (const auto& p : pools) {
    AllocationResult r;
    if (variant == Variant::base) r = allocate_base(p.question_score, req);
    else if (a.beta) r = allocate_beta_point(*model, p.question_hidden, *a.beta, req);
    else r = allocate_posterior(*model, p.question_hidden, req);
    csv += p.question_id + "," + std::to_string(r.n) + "," + (r.saturated ? "1" : "0");
    if (a.beta) csv += "," + io::format_double(*a.beta);
    csv += "\n";
  }
  fs::create_directories(a.common.out_dir);
  write_file(out, fs::path(a.common.out_dir) / ("allocation_" + to_string(variant) + ".csv"), csv);
}

struct SimulateArgs {
  Common common;
  std::string pools, checkpoint, variant, sweep;
  std::optional<int> trials, n_max;
  std::optional<std::uint64_t> seed;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  RunConfig rc = load_config(a.common.config);
  SimConfig& sim = rc.sim;
  override_with(sim.n_trials, a.trials);
  override_with(sim.n_max, a.n_max);
  override_with(sim.seed, a.seed);
  sim.variant = parse_variant(a.variant);
  rc.validate();
  if (a.sweep != "c" && a.sweep != "beta") throw ValidationError("--sweep must be c or beta");

  const auto pools = load_pools(a.pools);
  const auto model = model_for(sim.variant, a.checkpoint);
  std::vector<SweepPoint> points;
  if (a.sweep == "c") {
    if (sim.variant == Variant::base) {
      points = sweep_c(pools, BaseAllocator(pools, sim.n_max), sim);
    } else {
      std::vector<double> grid = default_levels();
      if (const auto* qr = dynamic_cast<const QrModel*>(model.get())) grid = qr->levels();
      points = sweep_c(pools, PosteriorAllocator(*model, pools, grid, sim.n_max), sim);
    }
  } else {
    if (sim.variant == Variant::base) throw ValidationError("the beta sweep needs a quantile model (ot or qr)");
    points = sweep_beta(pools, *model, sim);
  }
  fs::create_directories(a.common.out_dir);
  const std::string name = "sweep_" + to_string(sim.variant) + "_" + a.sweep + ".csv";
  write_file(out, fs::path(a.common.out_dir) / name, sweep_csv(points, a.sweep, pools.size(), sim));
}

struct ReportArgs {
  std::string in_dir, out_dir;
  bool svg = false;
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
  const fs::path dst = a.out_dir.empty() ? fs::path(a.in_dir) : fs::path(a.out_dir);
  for (const auto& p : write_report(a.in_dir, dst, a.svg)) out << "wrote " << p.string() << "\n";
}

}  // namespace

void RunConfig::validate() const {
  synthetic.validate();
  if (n_candidates < 1) throw ValidationError("config: n_candidates must be >= 1");
  picnn.validate();
  train.validate();
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ValidationError("config: val_fraction must lie in (0,1)");
  if (qr.steps < 0 || qr.batch_size < 1 || !(qr.lr > 0.0) || !(qr.clip_max_norm > 0.0))
    throw ValidationError("config: invalid qr training settings");
  if (qr_levels.empty()) throw ValidationError("config: qr levels must be non-empty");
  eval.ece.validate();
  if (eval.levels.empty()) throw ValidationError("config: eval levels must be non-empty");
  if (curve_samples < 0) throw ValidationError("config: curve_samples must be nonnegative");
  sim.validate();
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config: top level must be an object");
  static const std::set<std::string> sections{"synthetic", "picnn", "train", "qr", "eval", "sim"};
  for (const auto& [k, v] : root.items())
    if (!sections.count(k)) throw ValidationError("config: unknown section '" + k + "'");

  RunConfig rc;
  {
    Section s(root, "synthetic");
    auto& c = rc.synthetic;
    s.get_enum<Family>("family", c.family, parse_family);
    s.get("hidden_dim", c.hidden_dim);
    s.get("n_questions", c.n_questions);
    s.get("prefixes_per_question", c.prefixes_per_question);
    s.get("n_rollouts", c.n_rollouts);
    s.get("prm_bias", c.prm_bias);
    s.get("prm_noise_sd", c.prm_noise_sd);
    s.get("ranking_strength", c.ranking_strength);
    s.get("seed", c.seed);
    s.get("n_candidates", rc.n_candidates);
    s.finish();
  }
  {
    Section s(root, "picnn");
    auto& c = rc.picnn;
    s.get("input_dim", c.input_dim);
    s.get("embed_dims", c.embed_dims);
    s.get("hidden_dim_context", c.hidden_dim_context);
    s.get("hidden_dim_convex", c.hidden_dim_convex);
    s.get("num_layers", c.num_layers);
    s.finish();
  }
  {
    Section s(root, "train");
    auto& c = rc.train;
    s.get("lr_f", c.lr_f);
    s.get("lr_g", c.lr_g);
    s.get("lr_decay_gamma", c.lr_decay_gamma);
    s.get("lr_decay_every", c.lr_decay_every);
    s.get("f_update_every", c.f_update_every);
    s.get("batch_size", c.batch_size);
    s.get("max_steps", c.max_steps);
    s.get("clip_max_norm", c.clip_max_norm);
    s.get("eval_every", c.eval_every);
    s.get("patience", c.patience);
    s.get("min_delta", c.min_delta);
    s.get_enum<SourceMode>("source_mode", c.source_mode, parse_source_mode);
    s.get_enum<InferenceChoice>("inference", c.inference, parse_inference);
    s.get_enum<DualConvention>("convention", c.convention, parse_convention);
    s.get("seed", c.seed);
    s.get("adam_beta1", c.adam_beta1);
    s.get("adam_beta2", c.adam_beta2);
    s.get("adam_eps", c.adam_eps);
    s.get("eval_levels", c.eval_levels);
    s.get("val_fraction", rc.val_fraction);
    s.finish();
  }
  {
    Section s(root, "qr");
    s.get("lr", rc.qr.lr);
    s.get("steps", rc.qr.steps);
    s.get("batch_size", rc.qr.batch_size);
    s.get("clip_max_norm", rc.qr.clip_max_norm);
    s.get("seed", rc.qr.seed);
    s.get("levels", rc.qr_levels);
    s.finish();
  }
  {
    Section s(root, "eval");
    s.get("num_bins", rc.eval.ece.num_bins);
    s.get("ece_lo", rc.eval.ece.lo);
    s.get("ece_hi", rc.eval.ece.hi);
    s.get_enum<PositiveRule>("positive_rule", rc.eval.positive_rule, parse_positive_rule);
    s.get("levels", rc.eval.levels);
    s.get("curve_samples", rc.curve_samples);
    s.finish();
  }
  {
    Section s(root, "sim");
    auto& c = rc.sim;
    s.get("n_trials", c.n_trials);
    s.get("n_max", c.n_max);
    s.get("c_levels", c.c_levels);
    s.get("beta_levels", c.beta_levels);
    s.get("fixed_c_for_beta_sweep", c.fixed_c_for_beta_sweep);
    s.get("seed", c.seed);
    s.finish();
  }
  rc.validate();
  return rc;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibrated success-probability quantiles and adaptive Best-of-N budgets", "condot"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::function<void()> action;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset, candidate pools and the oracle");
  add_common(s, synth.common);
  s->add_option("--family", synth.family, "uniform_band or logit_normal");
  s->add_option("--questions", synth.questions, "Number of questions");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--hidden-dim", synth.hidden_dim);
  s->add_option("--prefixes", synth.prefixes, "Prefixes per question");
  s->add_option("--rollouts", synth.rollouts, "Rollouts per prefix");
  s->add_option("--prm-bias", synth.prm_bias);
  s->add_option("--prm-noise-sd", synth.prm_noise_sd);
  s->add_option("--ranking-strength", synth.ranking_strength);
  s->add_option("--candidates", synth.candidates, "Candidates per pool");
  s->callback([&] { action = [&] { cmd_synth(synth, out); }; });

  SplitArgs split;
  s = app.add_subcommand("split", "Question-grouped train/test split");
  add_common(s, split.common, false);
  s->add_option("--samples", split.samples)->required()->check(CLI::ExistingFile);
  s->add_option("--train-fraction", split.train_fraction, "Share of questions used for training")
      ->capture_default_str();
  s->add_option("--seed", split.seed)->capture_default_str();
  s->callback([&] { action = [&] { cmd_split(split, out); }; });

  TrainOtArgs tot;
  s = app.add_subcommand("train-ot", "Train the transport potentials");
  add_common(s, tot.common);
  s->add_option("--samples", tot.samples)->required()->check(CLI::ExistingFile);
  s->add_option("--split", tot.split)->required()->check(CLI::ExistingFile);
  s->add_option("--max-steps", tot.max_steps);
  s->add_option("--seed", tot.seed);
  s->add_option("--lr-f", tot.lr_f);
  s->add_option("--lr-g", tot.lr_g);
  s->add_option("--batch-size", tot.batch_size);
  s->add_option("--eval-every", tot.eval_every);
  s->add_option("--patience", tot.patience);
  s->add_option("--f-update-every", tot.f_update_every);
  s->add_option("--val-fraction", tot.val_fraction);
  s->add_option("--source-mode", tot.source_mode, "uniform or score");
  s->add_option("--inference", tot.inference, "g, f or auto");
  s->add_option("--convention", tot.convention, "source_transport or as_written");
  s->callback([&] { action = [&] { cmd_train_ot(tot, out); }; });

  TrainQrArgs tqr;
  s = app.add_subcommand("train-qr", "Train the linear quantile-regression baseline");
  add_common(s, tqr.common);
  s->add_option("--samples", tqr.samples)->required()->check(CLI::ExistingFile);
  s->add_option("--split", tqr.split)->required()->check(CLI::ExistingFile);
  s->add_option("--levels", tqr.levels, "Comma-separated quantile levels");
  s->add_option("--steps", tqr.steps);
  s->add_option("--lr", tqr.lr);
  s->add_option("--seed", tqr.seed);
  s->callback([&] { action = [&] { cmd_train_qr(tqr, out); }; });

  EvaluateArgs ev;
  s = app.add_subcommand("evaluate", "Calibration metrics for one variant");
  add_common(s, ev.common);
  s->add_option("--samples", ev.samples)->required()->check(CLI::ExistingFile);
  s->add_option("--variant", ev.variant, "base, ot or qr")->required();
  s->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
  s->add_option("--split", ev.split, "Evaluate on the test questions of this split")->check(CLI::ExistingFile);
  s->add_option("--positive-rule", ev.positive_rule, "any_success or all_success");
  s->callback([&] { action = [&] { cmd_evaluate(ev, out); }; });

  AllocateArgs al;
  s = app.add_subcommand("allocate", "Per-question sample budgets");
  add_common(s, al.common);
  s->add_option("--pools", al.pools)->required()->check(CLI::ExistingFile);
  s->add_option("--variant", al.variant, "base, ot or qr")->required();
  s->add_option("--checkpoint", al.checkpoint)->check(CLI::ExistingFile);
  s->add_option("--confidence", al.confidence, "Target confidence C")->capture_default_str();
  s->add_option("--beta", al.beta, "Allocate from the single quantile at this level");
  s->add_option("--n-max", al.n_max)->capture_default_str();
  s->callback([&] { action = [&] { cmd_allocate(al, out); }; });

  SimulateArgs sim;
  s = app.add_subcommand("simulate", "Best-of-N cost-accuracy sweep");
  add_common(s, sim.common);
  s->add_option("--pools", sim.pools)->required()->check(CLI::ExistingFile);
  s->add_option("--variant", sim.variant, "base, ot or qr")->required();
  s->add_option("--checkpoint", sim.checkpoint)->check(CLI::ExistingFile);
  s->add_option("--sweep", sim.sweep, "c or beta")->required();
  s->add_option("--trials", sim.trials);
  s->add_option("--n-max", sim.n_max);
  s->add_option("--seed", sim.seed);
  s->callback([&] { action = [&] { cmd_simulate(sim, out); }; });

  ReportArgs rep;
  s = app.add_subcommand("report", "Summarize result CSVs, optionally with SVG charts");
  s->add_option("--in-dir", rep.in_dir)->required();
  s->add_option("--out-dir", rep.out_dir, "Defaults to --in-dir");
  s->add_flag("--svg", rep.svg, "Also write SVG charts");
  s->callback([&] { action = [&] { cmd_report(rep, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    action();
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace condot::cli
