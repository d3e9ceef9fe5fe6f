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

#include "condot/ias.hpp"

#include <cmath>

#include "condot/error.hpp"

namespace condot {

void AllocationRequest::validate() const {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("allocation: confidence must lie in (0,1)");
  if (n_max < 1) throw ValidationError("allocation: n_max must be >= 1");
}

namespace {

void check(double confidence, int n_max) { AllocationRequest{confidence, n_max, {}}.validate(); }

// Boundary rules shared by every single-probability allocator.
bool boundary(double p, int n_max, AllocationResult& out) {
  if (p >= 1.0 - kBoundaryEps) {
    out = {1, false};
    return true;
  }
  if (p <= kBoundaryEps) {
    out = {n_max, true};
    return true;
  }
  return false;
}

}  // namespace

AllocationResult n_star(double p, double confidence, int n_max) {
  check(confidence, n_max);
  AllocationResult out;
  if (boundary(p, n_max, out)) return out;
  for (int n = 1; n <= n_max; ++n)
    if (1.0 - std::pow(1.0 - p, n) >= confidence) return {n, false};
  return {n_max, true};
}

AllocationResult n_ias_closed_form(double p, double confidence, int n_max) {
  check(confidence, n_max);
  AllocationResult out;
  if (boundary(p, n_max, out)) return out;
  const double ratio = std::log(1.0 - confidence) / std::log(1.0 - p);
  const double n = std::ceil(ratio - 1e-9);
  if (n > static_cast<double>(n_max)) return {n_max, true};
  return {std::max(1, static_cast<int>(n)), false};
}

AllocationResult allocate_base(double score, const AllocationRequest& req) {
  req.validate();
  return n_star(score, req.confidence, req.n_max);
}

AllocationResult allocate_posterior_values(std::span<const double> grid_quantiles, double confidence, int n_max) {
  check(confidence, n_max);
  if (grid_quantiles.empty()) throw ValidationError("allocate_posterior: empty quantile grid");
  const double m = static_cast<double>(grid_quantiles.size());
  for (int n = 1; n <= n_max; ++n) {
    double mean = 0.0;
    for (double p : grid_quantiles) mean += 1.0 - std::pow(1.0 - p, n);
    if (mean / m >= confidence) return {n, false};
  }
  return {n_max, true};
}

AllocationResult allocate_posterior(const QuantileModel& model, std::span<const double> h,
                                    const AllocationRequest& req) {
  req.validate();
  std::vector<double> q;
  q.reserve(req.quantile_grid.size());
  for (double beta : req.quantile_grid) {
    if (!model.supports(beta)) throw ValidationError("allocate_posterior: model lacks level " + std::to_string(beta));
    q.push_back(model.quantile(beta, h));
  }
  return allocate_posterior_values(q, req.confidence, req.n_max);
}

AllocationResult allocate_beta_point(const QuantileModel& model, std::span<const double> h, double beta,
                                     const AllocationRequest& req) {
  req.validate();
  if (!model.supports(beta)) throw ValidationError("allocate_beta_point: unsupported level " + std::to_string(beta));
  return n_ias_closed_form(model.quantile(beta, h), req.confidence, req.n_max);
}

}  // namespace condot
