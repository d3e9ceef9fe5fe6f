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

#include <span>
#include <vector>

#include "condot/quantile_models.hpp"

namespace condot {

struct AllocationRequest {
  double confidence = 0.9;  // C in (0, 1)
  int n_max = 64;
  std::vector<double> quantile_grid = default_levels();

  void validate() const;
};

struct AllocationResult {
  int n = 1;
  bool saturated = false;  // criterion never met, n == n_max

  bool operator==(const AllocationResult&) const = default;
};

// Success probabilities within this distance of 0 or 1 take the boundary
// rules: p near 1 needs one sample, p near 0 saturates the budget.
inline constexpr double kBoundaryEps = 1e-12;

/// Smallest n in [1, n_max] with 1 - (1 - p)^n >= C, by direct search.
AllocationResult n_star(double p, double confidence, int n_max);

/// min(ceil(log(1 - C) / log(1 - p)), n_max), floored at 1. The ratio is
/// nudged down by 1e-9 before the ceiling so exact integers are not pushed
/// up by rounding residue.
AllocationResult n_ias_closed_form(double p, double confidence, int n_max);

/// Bernoulli rule on the uncalibrated question-level score.
AllocationResult allocate_base(double score, const AllocationRequest& req);

/// Smallest n with mean_m [1 - (1 - p_m)^n] >= C where p_m = Q(beta_m | h)
/// over the request's quantile grid.
AllocationResult allocate_posterior(const QuantileModel& model, std::span<const double> h,
                                    const AllocationRequest& req);

/// Same rule given the grid quantiles directly.
AllocationResult allocate_posterior_values(std::span<const double> grid_quantiles, double confidence, int n_max);

/// Closed-form rule on the single quantile Q(beta | h).
AllocationResult allocate_beta_point(const QuantileModel& model, std::span<const double> h, double beta,
                                     const AllocationRequest& req);

}  // namespace condot
