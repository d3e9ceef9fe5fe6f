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

#include "condot/bon_sim.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "condot/error.hpp"
#include "condot/io.hpp"

namespace condot {

std::vector<double> default_c_levels() {
  return {0.5, 0.683, 0.799, 0.872, 0.919, 0.949, 0.968, 0.980, 0.9874, 0.999};
}

void SimConfig::validate() const {
  if (n_trials < 1) throw ValidationError("simulate: n_trials must be >= 1");
  if (n_max < 1) throw ValidationError("simulate: n_max must be >= 1");
  for (double c : c_levels)
    if (!(c > 0.0 && c < 1.0)) throw ValidationError("simulate: every C must lie in (0,1)");
  if (!(fixed_c_for_beta_sweep > 0.0 && fixed_c_for_beta_sweep < 1.0))
    throw ValidationError("simulate: fixed C must lie in (0,1)");
  for (double b : beta_levels)
    if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("simulate: beta levels must lie in [0,1]");
}

bool run_trial(const CandidatePool& pool, int n, Xoshiro256& rng) {
  const std::size_t size = pool.candidates.size();
  if (size == 0) throw ValidationError("run_trial: empty pool '" + pool.question_id + "'");
  if (n < 1) throw ValidationError("run_trial: n must be >= 1");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(n), size);

  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(size - i));
    std::swap(idx[i], idx[j]);
    const double s = pool.candidates[idx[i]].score;
    if (s > best_score) {
      best_score = s;
      best = idx[i];
    }
  }
  return pool.candidates[best].correct;
}

std::uint64_t trial_seed(std::uint64_t seed, const std::string& question_id, int trial) {
  return derive_seed(seed, fnv1a64(question_id), static_cast<std::uint64_t>(trial));
}

BaseAllocator::BaseAllocator(const std::vector<CandidatePool>& pools, int n_max) : n_max_(n_max) {
  for (const auto& p : pools) scores_.push_back(p.question_score);
}

AllocationResult BaseAllocator::allocate(std::size_t pool_index, double confidence) const {
  return allocate_base(scores_.at(pool_index), AllocationRequest{confidence, n_max_, {}});
}

PosteriorAllocator::PosteriorAllocator(const QuantileModel& model, const std::vector<CandidatePool>& pools,
                                       std::vector<double> grid, int n_max)
    : n_max_(n_max) {
  for (double beta : grid)
    if (!model.supports(beta)) throw ValidationError("posterior allocator: model lacks level " + std::to_string(beta));
  quantiles_ = model.quantile_grid(grid, context_matrix(pools));
}

AllocationResult PosteriorAllocator::allocate(std::size_t pool_index, double confidence) const {
  const Eigen::VectorXd col = quantiles_.col(static_cast<Eigen::Index>(pool_index));
  return allocate_posterior_values(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                                   confidence, n_max_);
}

namespace {

// Runs all trials for fixed per-question budgets. Accumulation is in
// (question, trial) order.
SweepPoint simulate_point(const std::vector<CandidatePool>& pools, const std::vector<int>& budgets, double control,
                          const SimConfig& config) {
  SweepPoint pt;
  pt.control = control;
  pt.min_n = std::numeric_limits<int>::max();
  std::size_t correct = 0;
  double budget_sum = 0.0;
  for (std::size_t q = 0; q < pools.size(); ++q) {
    const int n = budgets[q];
    pt.min_n = std::min(pt.min_n, n);
    pt.max_n = std::max(pt.max_n, n);
    budget_sum += static_cast<double>(n);
    for (int t = 0; t < config.n_trials; ++t) {
      Xoshiro256 rng(trial_seed(config.seed, pools[q].question_id, t));
      if (run_trial(pools[q], n, rng)) ++correct;
    }
  }
  const double nq = static_cast<double>(pools.size());
  pt.mean_accuracy = static_cast<double>(correct) / (nq * config.n_trials);
  pt.mean_n = budget_sum / nq;
  pt.mean_normalized_budget = pt.mean_n / config.n_max;
  return pt;
}

}  // namespace

std::vector<SweepPoint> sweep_c(const std::vector<CandidatePool>& pools, const PoolAllocator& allocator,
                                const SimConfig& config) {
  config.validate();
  if (pools.empty()) throw ValidationError("simulate: no pools");
  std::vector<SweepPoint> out;
  for (double c : config.c_levels) {
    std::vector<int> budgets;
    for (std::size_t q = 0; q < pools.size(); ++q) {
      const AllocationResult r = allocator.allocate(q, c);
      budgets.push_back(std::clamp(r.n, 1, config.n_max));
    }
    out.push_back(simulate_point(pools, budgets, c, config));
  }
  return out;
}

std::vector<SweepPoint> sweep_beta(const std::vector<CandidatePool>& pools, const QuantileModel& model,
                                   const SimConfig& config) {
  config.validate();
  if (pools.empty()) throw ValidationError("simulate: no pools");
  for (double b : config.beta_levels)
    if (!model.supports(b)) throw ValidationError("simulate: model lacks level " + std::to_string(b));
  const Eigen::MatrixXd q = model.quantile_grid(config.beta_levels, context_matrix(pools));
  std::vector<SweepPoint> out;
  for (std::size_t l = 0; l < config.beta_levels.size(); ++l) {
    std::vector<int> budgets;
    for (std::size_t i = 0; i < pools.size(); ++i) {
      const double p = q(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i));
      budgets.push_back(n_ias_closed_form(p, config.fixed_c_for_beta_sweep, config.n_max).n);
    }
    out.push_back(simulate_point(pools, budgets, config.beta_levels[l], config));
  }
  return out;
}

double full_pool_accuracy(const std::vector<CandidatePool>& pools) {
  if (pools.empty()) throw ValidationError("full_pool_accuracy: no pools");
  std::size_t correct = 0;
  for (const auto& p : pools) {
    auto it = std::max_element(p.candidates.begin(), p.candidates.end(),
                               [](const Candidate& a, const Candidate& b) { return a.score < b.score; });
    if (it->correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pools.size());
}

std::string sweep_csv(const std::vector<SweepPoint>& points, const std::string& control_kind,
                      std::size_t n_questions, const SimConfig& config) {
  using io::format_double;
  std::string out = "variant,control_kind,control,mean_accuracy,mean_norm_budget,n_questions,n_trials,seed\n";
  for (const auto& p : points) {
    out += to_string(config.variant) + "," + control_kind + "," + format_double(p.control) + "," +
           format_double(p.mean_accuracy) + "," + format_double(p.mean_normalized_budget) + "," +
           std::to_string(n_questions) + "," + std::to_string(config.n_trials) + "," + std::to_string(config.seed) +
           "\n";
  }
  return out;
}

}  // namespace condot
