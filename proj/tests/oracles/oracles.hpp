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

// Independent reference computations used by the tests and by
// verify_fixtures. Nothing here calls into the library under test except
// where noted; values derived from these functions are what the tests
// compare against.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace oracle {

/// splitmix64 and xoshiro256** transcribed from their reference C code.
std::uint64_t splitmix64(std::uint64_t& state);

class RefXoshiro {
 public:
  explicit RefXoshiro(std::uint64_t seed);
  std::uint64_t next();
  std::uint64_t below(std::uint64_t n);  // rejection on the low residue class

 private:
  std::uint64_t s_[4];
};

/// Training questions of a grouped split: Fisher-Yates over `questions`,
/// first floor(f Q + 1/2) (clamped to [1, Q-1]) entries, sorted.
std::vector<std::string> reference_split_train(std::vector<std::string> questions, double train_fraction,
                                               std::uint64_t seed);

/// Parameter after one bias-corrected Adam step from zero moments.
double adam_first_step(double param, double grad, double lr, double beta1, double beta2, double eps);

/// Smallest n in [1, n_max] with 1 - (1 - p)^n >= C found by repeated
/// multiplication; n_max + 1 when none.
int enumerate_min_n(double p, double confidence, int n_max);

/// Smallest n with mean_m [1 - (1 - p_m)^n] >= C. `trace`, when given,
/// receives the mean for n = 1..n_max. Returns n_max + 1 when none.
int enumerate_posterior_n(const std::vector<double>& p, double confidence, int n_max,
                          std::vector<double>* trace = nullptr);

/// ECE with explicit bin edges e_j = lo + j (hi - lo) / B, membership
/// e_j <= p < e_{j+1} (last bin closed), found by linear scan.
double ece_reference(const std::vector<double>& preds, const std::vector<double>& targets, int bins, double lo,
                     double hi);

double trapezoid(const std::function<double(double)>& f, const std::vector<double>& grid);

/// Central differences of `loss` in every coordinate of `params`.
std::vector<double> central_fd_gradient(const std::function<double()>& loss, std::span<double> params, double step);

/// Central differences for a piecewise-smooth loss. `regime` returns the
/// active-set signature (for example the signs of every ReLU input); when
/// the signature at params[i] +- step differs from the one at params[i] the
/// stencil straddles a kink, so the step is halved until it does not (down
/// to `min_step`). `steps`, when given, receives the step used per
/// coordinate.
std::vector<double> central_fd_gradient_piecewise(const std::function<double()>& loss,
                                                  const std::function<std::vector<bool>()>& regime,
                                                  std::span<double> params, double step, double min_step,
                                                  std::vector<double>* steps = nullptr);

/// |a - b| / max(1, |a|, |b|).
double scaled_error(double a, double b);

/// Monotone map pushing U(0,1) onto U(lo, hi).
double uniform_ot_map(double x, double lo, double hi);

/// Mean over `levels` of |q_emp(beta) - q_true(beta)| where p ~ U(lo, hi)
/// and p_emp = Binomial(n, p) / n: the error of a perfectly calibrated
/// learner of p_emp measured against the quantiles of p.
double binomial_floor_uniform(double lo, double hi, int n_rollouts, const std::vector<double>& levels);

}  // namespace oracle
