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

// Acceptance run: one PASS/FAIL line per criterion A1..A8.
//
// Usage: condot_acceptance [--only A1,A3,...] [--work-dir DIR]
// Exit status is 0 iff every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "condot/bon_sim.hpp"
#include "condot/cli.hpp"
#include "condot/dual_loss.hpp"
#include "condot/ias.hpp"
#include "condot/io.hpp"
#include "condot/metrics.hpp"
#include "condot/picnn.hpp"
#include "condot/quantile_models.hpp"
#include "condot/rng.hpp"
#include "condot/synthetic.hpp"
#include "condot/trainer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace condot;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PicnnConfig random_small_config(Xoshiro256& r) {
  PicnnConfig c;
  c.input_dim = 1 + static_cast<int>(r.below(3));
  c.embed_dims = {2 + static_cast<int>(r.below(3))};
  c.hidden_dim_context = 2 + static_cast<int>(r.below(3));
  c.hidden_dim_convex = 2 + static_cast<int>(r.below(4));
  c.num_layers = 1 + static_cast<int>(r.below(2));
  return c;
}

PicnnPotential perturbed(const PicnnConfig& c, Xoshiro256& r, double scale) {
  auto p = init_potential(c, r.next());
  for (auto& v : p.params()) v += scale * r.normal();
  p.project_nonnegative();
  return p;
}

// Gradient exactness of both dual losses under both conventions.
Outcome a1() {
  const auto t0 = Clock::now();
  Xoshiro256 r(2024);
  double worst = 0.0, worst_plain = 0.0;
  std::size_t coords = 0, kink_coords = 0, max_params = 0;
  for (int t = 0; t < 20; ++t) {
    const auto c = random_small_config(r);
    auto g = perturbed(c, r, 0.1);
    auto f = perturbed(c, r, 0.1);
    max_params = std::max(max_params, g.num_params());
    if (g.num_params() > 200) return {false, fmt("config %d has %zu parameters (> 200)", t, g.num_params())};
    const int n = 8;
    DualBatch b;
    b.x.resize(n);
    b.y.resize(n);
    b.contexts.resize(c.input_dim, n);
    for (int i = 0; i < n; ++i) {
      b.x(i) = r.uniform();
      b.y(i) = r.uniform();
      for (int k = 0; k < c.input_dim; ++k) b.contexts(k, i) = r.normal();
    }
    for (auto conv : {DualConvention::source_transport, DualConvention::as_written})
      for (auto which : {DualLoss::f, DualLoss::g}) {
        const auto lg = loss_gradients(g, f, b, which, conv);
        PicnnPotential& target = which == DualLoss::f ? f : g;
        std::vector<double> steps;
        const auto fd = oracle::central_fd_gradient_piecewise(
            [&] { return dual_loss_value(g, f, b, which, conv); }, [&] { return testing::gate_signature({&g, &f}, b.contexts); },
            target.params(), 1e-3, 1e-7, &steps);
        const auto plain =
            oracle::central_fd_gradient([&] { return dual_loss_value(g, f, b, which, conv); }, target.params(), 1e-3);
        for (std::size_t i = 0; i < fd.size(); ++i) {
          worst_plain = std::max(worst_plain, oracle::scaled_error(lg.grad[i], plain[i]));
          worst = std::max(worst, oracle::scaled_error(lg.grad[i], fd[i]));
          ++coords;
          if (steps[i] < 1e-3) ++kink_coords;
        }
      }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0,
          fmt("max rel err %.3e (<= 1e-4) over %zu coordinates, <= %zu params/net; %zu stencils straddled a ReLU "
              "kink and used a smaller step (fixed step 1e-3 everywhere: %.3e); %.1fs (< 60s)",
              worst, coords, max_params, kink_coords, worst_plain, secs)};
}

// No quantile crossing and convexity over random potentials.
Outcome a2() {
  const auto t0 = Clock::now();
  Xoshiro256 r(77);
  int crossings = 0, convexity = 0;
  double worst_gap = -INFINITY;
  for (int t = 0; t < 1000; ++t) {
    auto c = random_small_config(r);
    c.hidden_dim_convex = 4 + static_cast<int>(r.below(8));
    const auto pot = perturbed(c, r, 1.0);
    const OtQuantileModel model(pot, SourceMode::uniform, InferencePotential::g);
    std::vector<double> h(static_cast<std::size_t>(c.input_dim));
    for (auto& v : h) v = r.normal();
    double b1 = r.uniform(), b2 = r.uniform();
    if (b1 > b2) std::swap(b1, b2);
    if (model.quantile(b1, h) > model.quantile(b2, h)) ++crossings;
    const double y1 = 3 * r.normal(), y2 = 3 * r.normal(), lam = r.uniform();
    const double gap = pot.value(lam * y1 + (1 - lam) * y2, h) - (lam * pot.value(y1, h) + (1 - lam) * pot.value(y2, h));
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-9) ++convexity;
  }
  const double secs = seconds_since(t0);
  return {crossings == 0 && convexity == 0 && secs < 10.0,
          fmt("%d crossings, %d convexity violations (max gap %.2e, tol 1e-9) over 1000 draws; %.1fs (< 10s)", crossings,
              convexity, worst_gap, secs)};
}

// Unconditional transport U(0,1) -> U(0.2,0.7).
Outcome a3() {
  const auto t0 = Clock::now();
  CalibrationDataset tr, va;
  tr.hidden_dim = va.hidden_dim = 2;
  Xoshiro256 r(5);
  for (int i = 0; i < 4000; ++i) {
    CalibrationSample s;
    s.question_id = "q" + std::to_string(i);
    s.hidden = {1.0, -0.5};
    s.n_rollouts = 1;
    s.p_emp = 0.2 + 0.5 * r.uniform();
    (i < 3000 ? tr : va).samples.push_back(s);
  }
  PicnnConfig pc;
  pc.input_dim = 2;
  pc.embed_dims = {8};
  pc.hidden_dim_context = 8;
  pc.hidden_dim_convex = 16;
  pc.num_layers = 2;
  TrainConfig tc;
  tc.max_steps = 20000;
  tc.eval_every = 100;
  tc.lr_decay_every = 5000;
  const auto res = train(tr, va, pc, tc);
  const PicnnPotential& map = res.inference == InferencePotential::g ? res.g : res.f;
  const std::vector<double> h{1.0, -0.5};
  double worst = 0.0;
  for (int k = 1; k <= 19; ++k) {
    const double x = 0.05 * k;
    worst = std::max(worst, std::fabs(map.dy(x, h) - oracle::uniform_ot_map(x, 0.2, 0.7)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 0.05 && res.steps_run <= 20000 && secs < 300.0,
          fmt("max |T(x) - (0.2 + 0.5x)| = %.4f (<= 0.05) after %ld steps; %.1fs (< 300s)", worst, res.steps_run, secs)};
}

// Shared by A4 and A5: the conditional fixture and its trained models.
struct ConditionalFixture {
  SyntheticData data;
  CalibrationDataset train_inner, val, test;
  TrainResult ot;
  double train_secs = 0.0;
};

const ConditionalFixture& conditional_fixture() {
  static const ConditionalFixture fx = [] {
    ConditionalFixture f;
    SyntheticConfig sc;
    sc.family = Family::uniform_band;
    sc.n_questions = 2000;
    sc.n_rollouts = 8;
    sc.prm_noise_sd = 0.5;
    sc.seed = 11;
    f.data = generate_dataset(sc);
    const auto outer = group_split(f.data.dataset, 0.8, 42);
    const auto train_all = f.data.dataset.subset(outer.train_questions, "train");
    f.test = f.data.dataset.subset(outer.test_questions, "test");
    const auto inner = group_split(train_all, 0.8, derive_seed(42, 4));
    f.train_inner = train_all.subset(inner.train_questions, "train_inner");
    f.val = train_all.subset(inner.test_questions, "val");
    PicnnConfig pc;
    pc.input_dim = sc.hidden_dim;
    TrainConfig tc;  // patience 175 evaluations, min_delta 1e-4
    const auto t0 = Clock::now();
    f.ot = train(f.train_inner, f.val, pc, tc);
    f.train_secs = seconds_since(t0);
    return f;
  }();
  return fx;
}

// Conditional quantile recovery on held-out questions.
Outcome a4() {
  const auto& fx = conditional_fixture();
  const auto t0 = Clock::now();
  const auto model = fx.ot.model(SourceMode::uniform);
  const auto levels = default_levels();
  double err = 0.0;
  for (const auto& s : fx.test.samples)
    for (double b : levels) err += std::fabs(model.quantile(b, s.hidden) - fx.data.oracle.quantile(b, s.hidden));
  err /= static_cast<double>(fx.test.samples.size() * levels.size());

  const auto base = evaluate_variant(Variant::base, nullptr, fx.test);
  const auto ot = evaluate_variant(Variant::ot, &model, fx.test);
  // constant-median baseline: the median of the training targets at every level
  std::vector<double> targets;
  for (const auto& s : fx.train_inner.samples) targets.push_back(s.p_emp);
  std::nth_element(targets.begin(), targets.begin() + static_cast<long>(targets.size() / 2), targets.end());
  const double median = targets[targets.size() / 2];
  struct Constant final : QuantileModel {
    double c;
    explicit Constant(double v) : c(v) {}
    double quantile(double, std::span<const double>) const override { return c; }
  } constant(median);
  const double wql_const = wql(constant, fx.test, levels);

  // The error a perfect learner of the p_emp distribution would still show
  // against the quantiles of p: averaged over the held-out latent values.
  double floor = 0.0;
  for (const auto& s : fx.test.samples) {
    const double a = fx.data.oracle.latent(s.hidden);
    floor += oracle::binomial_floor_uniform(0.6 * a, 0.6 * a + 0.4, 8, levels);
  }
  floor /= static_cast<double>(fx.test.samples.size());
  const double secs = seconds_since(t0) + fx.train_secs;
  const bool ok = err <= 0.08 && ot.ece < base.ece && *ot.wql < wql_const && secs < 900.0;
  return {ok, fmt("mean |Q - Q*| = %.4f (<= 0.08); ECE ot %.4f < raw %.4f; WQL ot %.4f < const-median %.4f; "
                  "%ld steps, early stop %s; binomial-noise floor %.4f; %.0fs (< 900s)",
                  err, ot.ece, base.ece, *ot.wql, wql_const, fx.ot.steps_run, fx.ot.stopped_early ? "yes" : "no",
                  floor, secs)};
}

// QR crosses, OT does not, on the same fixture.
Outcome a5() {
  const auto& fx = conditional_fixture();
  QrTrainConfig qc;
  const auto levels = default_levels();
  const auto qr = qr_train(fx.train_inner, levels, qc);
  const auto ot = fx.ot.model(SourceMode::uniform);
  int qr_cross = 0, ot_cross = 0, n = 0;
  for (const auto& s : fx.test.samples) {
    if (n == 1000) break;
    ++n;
    bool q = false, o = false;
    for (std::size_t i = 1; i < levels.size(); ++i) {
      q = q || qr.quantile(levels[i], s.hidden) < qr.quantile(levels[i - 1], s.hidden);
      o = o || ot.quantile(levels[i], s.hidden) < ot.quantile(levels[i - 1], s.hidden);
    }
    qr_cross += q ? 1 : 0;
    ot_cross += o ? 1 : 0;
  }
  return {n == 1000 && qr_cross >= 1 && ot_cross == 0,
          fmt("prm_noise_sd 0.5; over %d held-out h: QR crossings %d (>= 1), OT crossings %d (== 0)", n, qr_cross,
              ot_cross)};
}

// Closed form equals direct search; posterior two-point case.
Outcome a6() {
  const auto t0 = Clock::now();
  int mismatches = 0, cells = 0;
  for (int i = 1; i <= 99; ++i)
    for (double c : {0.5, 0.9, 0.99, 0.999}) {
      const double p = i / 100.0;
      const int ref = std::min(oracle::enumerate_min_n(p, c, 64), 64);
      ++cells;
      if (n_ias_closed_form(p, c, 64).n != ref || n_star(p, c, 64).n != ref) ++mismatches;
    }
  const std::vector<double> grid{0.2, 0.8};
  const int ref = oracle::enumerate_posterior_n(grid, 0.9, 64);
  const int got = allocate_posterior_values(grid, 0.9, 64).n;
  const double secs = seconds_since(t0);
  return {mismatches == 0 && got == ref && ref == 8 && secs < 1.0,
          fmt("%d/%d grid mismatches; posterior {0.2,0.8} C=0.9 -> %d (enumeration %d); %.3fs (< 1s)", mismatches, cells,
              got, ref, secs)};
}

// Simulator sanity with an oracle-calibrated model.
Outcome a7() {
  const auto t0 = Clock::now();
  SyntheticConfig sc;
  sc.n_questions = 200;
  sc.ranking_strength = 1.0;
  sc.seed = 21;
  const auto pools = generate_pools(sc, 64);
  const OracleQuantileModel oracle_model(make_oracle(sc));
  SimConfig cfg;
  cfg.n_trials = 100;
  cfg.seed = 5;
  cfg.variant = Variant::ot;
  const auto c_sweep = sweep_c(pools, PosteriorAllocator(oracle_model, pools, default_levels(), cfg.n_max), cfg);
  const auto b_sweep = sweep_beta(pools, oracle_model, cfg);
  double worst_drop = 0.0;
  bool budget_c = true, budget_b = true;
  for (std::size_t i = 1; i < c_sweep.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j)
      worst_drop = std::max(worst_drop, c_sweep[j].mean_accuracy - c_sweep[i].mean_accuracy);
    budget_c = budget_c && c_sweep[i].mean_normalized_budget >= c_sweep[i - 1].mean_normalized_budget;
  }
  for (std::size_t i = 1; i < b_sweep.size(); ++i)
    budget_b = budget_b && b_sweep[i].mean_normalized_budget <= b_sweep[i - 1].mean_normalized_budget;
  const double secs = seconds_since(t0);
  return {worst_drop <= 0.02 && budget_c && budget_b && secs < 120.0,
          fmt("accuracy %.3f -> %.3f, largest drop %.4f (<= 0.02); budget %.3f -> %.3f nondecreasing in C: %s; "
              "beta-sweep budget nonincreasing: %s; %.1fs (< 120s)",
              c_sweep.front().mean_accuracy, c_sweep.back().mean_accuracy, worst_drop,
              c_sweep.front().mean_normalized_budget, c_sweep.back().mean_normalized_budget, budget_c ? "yes" : "no",
              budget_b ? "yes" : "no", secs)};
}

// Byte-identical reruns of the CLI pipeline.
Outcome a8(const fs::path& work) {
  const char* config = R"({"picnn": {"input_dim": 8, "embed_dims": [16], "hidden_dim_context": 8,
    "hidden_dim_convex": 8, "num_layers": 2}, "train": {"max_steps": 300, "eval_every": 50, "seed": 3}})";
  auto pipeline = [&](const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    io::write_text(dir / "config.json", config);
    const auto d = dir.string();
    const std::vector<std::vector<std::string>> steps{
        {"synth", "--family", "uniform_band", "--questions", "60", "--seed", "7", "--hidden-dim", "8", "--out-dir", d},
        {"split", "--samples", d + "/samples.jsonl", "--seed", "42", "--out-dir", d},
        {"train-ot", "--samples", d + "/samples.jsonl", "--split", d + "/split.json", "--config", d + "/config.json",
         "--out-dir", d},
        {"evaluate", "--samples", d + "/samples.jsonl", "--split", d + "/split.json", "--variant", "ot",
         "--checkpoint", d + "/checkpoint_ot.json", "--out-dir", d},
        {"simulate", "--pools", d + "/pools.jsonl", "--variant", "ot", "--checkpoint", d + "/checkpoint_ot.json",
         "--sweep", "c", "--trials", "20", "--seed", "9", "--out-dir", d}};
    std::ostringstream out, err;
    for (const auto& s : steps)
      if (cli::run(s, out, err) != 0) throw std::runtime_error(s[0] + ": " + err.str());
  };
  pipeline(work / "run_a");
  pipeline(work / "run_b");
  int compared = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(work / "run_a")) {
    const auto name = e.path().filename();
    const auto ext = name.extension();
    if (ext != ".csv" && ext != ".json" && ext != ".jsonl") continue;
    ++compared;
    if (!fs::exists(work / "run_b" / name) || io::read_text(e.path()) != io::read_text(work / "run_b" / name))
      ++differing;
  }
  return {compared >= 8 && differing == 0, fmt("%d output files compared, %d differ", compared, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria A1..A8"};
  std::string only;
  std::string work = (fs::temp_directory_path() / "condot_acceptance").string();
  app.add_option("--only", only, "Comma-separated subset, e.g. A1,A6");
  app.add_option("--work-dir", work, "Scratch directory for A8");
  CLI11_PARSE(app, argc, argv);

  std::set<std::string> selected;
  std::stringstream ss(only);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) selected.insert(item);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5}, {"A6", a6}, {"A7", a7},
      {"A8", [&] { return a8(work); }}};
  bool all = true;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("%s %s  %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
