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
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condot/data_model.hpp"
#include "condot/ias.hpp"
#include "condot/metrics.hpp"
#include "condot/rng.hpp"

namespace condot {

/// Ten confidence levels from 0.5 to 0.999.
std::vector<double> default_c_levels();

struct SimConfig {
  int n_trials = 100;
  int n_max = 64;
  std::vector<double> c_levels = default_c_levels();
  std::vector<double> beta_levels = default_levels();
  double fixed_c_for_beta_sweep = 0.9;
  std::uint64_t seed = 0;
  Variant variant = Variant::base;

  void validate() const;
};

struct SweepPoint {
  double control = 0.0;  // C or beta
  double mean_accuracy = 0.0;
  double mean_normalized_budget = 0.0;  // mean N_i / n_max
  int min_n = 0;
  int max_n = 0;
  double mean_n = 0.0;
};

/// Draws min(n, |pool|) candidates without replacement and reports whether
/// the highest-scoring draw is correct (ties go to the earlier draw).
bool run_trial(const CandidatePool& pool, int n, Xoshiro256& rng);

/// Seed of the stream for one (question, trial) pair.
std::uint64_t trial_seed(std::uint64_t seed, const std::string& question_id, int trial);

/// Per-question budget for a confidence level.
class PoolAllocator {
 public:
  virtual ~PoolAllocator() = default;
  virtual AllocationResult allocate(std::size_t pool_index, double confidence) const = 0;
};

/// Bernoulli rule on each pool's question_score.
class BaseAllocator final : public PoolAllocator {
 public:
  BaseAllocator(const std::vector<CandidatePool>& pools, int n_max);
  AllocationResult allocate(std::size_t pool_index, double confidence) const override;

 private:
  std::vector<double> scores_;
  int n_max_;
};

/// Posterior-averaged rule; grid quantiles are computed once per pool.
class PosteriorAllocator final : public PoolAllocator {
 public:
  PosteriorAllocator(const QuantileModel& model, const std::vector<CandidatePool>& pools, std::vector<double> grid,
                     int n_max);
  AllocationResult allocate(std::size_t pool_index, double confidence) const override;

 private:
  Eigen::MatrixXd quantiles_;  // levels x pools
  int n_max_;
};

/// Every question gets the same budget.
class FixedAllocator final : public PoolAllocator {
 public:
  explicit FixedAllocator(int n) : n_(n) {}
  AllocationResult allocate(std::size_t, double) const override { return {n_, false}; }

 private:
  int n_;
};

std::vector<SweepPoint> sweep_c(const std::vector<CandidatePool>& pools, const PoolAllocator& allocator,
                                const SimConfig& config);

std::vector<SweepPoint> sweep_beta(const std::vector<CandidatePool>& pools, const QuantileModel& model,
                                   const SimConfig& config);

/// Accuracy when every question sees its whole pool: the correctness of
/// each pool's top-scoring candidate, averaged over questions.
double full_pool_accuracy(const std::vector<CandidatePool>& pools);

/// CSV columns: variant,control_kind,control,mean_accuracy,mean_norm_budget,n_questions,n_trials,seed
std::string sweep_csv(const std::vector<SweepPoint>& points, const std::string& control_kind,
                      std::size_t n_questions, const SimConfig& config);

}  // namespace condot
