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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "condot/data_model.hpp"
#include "condot/quantile_models.hpp"
#include "condot/rng.hpp"

namespace condot {

enum class Family { uniform_band, logit_normal };

std::string to_string(Family f);
Family parse_family(const std::string& s);

struct SyntheticConfig {
  Family family = Family::uniform_band;
  int hidden_dim = 16;
  int n_questions = 100;
  int prefixes_per_question = 4;
  int n_rollouts = 8;
  double prm_bias = 1.5;  // logit-space optimism of the uncalibrated score
  double prm_noise_sd = 0.5;
  double ranking_strength = 1.0;  // alpha: separation of correct vs incorrect candidate scores
  std::uint64_t seed = 0;

  void validate() const;
};

/// Inverse standard normal CDF: the piecewise rational approximation with
/// breakpoints at 0.02425 and 1 - 0.02425 (relative error below 1.15e-9),
/// followed by one Halley refinement step. Returns -inf at 0 and +inf at 1.
double inverse_normal_cdf(double p);

double sigmoid(double x);
double logit(double p);

/// The ground truth behind a synthetic dataset: success probability given h
/// has a closed-form conditional quantile function.
///   latent a(h) = sigmoid(w . h / sqrt(d)) for a fixed unit vector w
///   uniform_band: p ~ U(0.6a, 0.6a + 0.4)
///   logit_normal: p = sigmoid(2a - 1 + 0.8 z), z ~ N(0, 1)
struct SyntheticOracle {
  Family family = Family::uniform_band;
  std::vector<double> direction;  // unit vector w

  double latent(std::span<const double> h) const;
  double quantile(double beta, std::span<const double> h) const;
  double draw_p(std::span<const double> h, Xoshiro256& rng) const;
};

double oracle_quantile(const SyntheticOracle& oracle, double beta, std::span<const double> h);

/// The oracle as a QuantileModel.
class OracleQuantileModel final : public QuantileModel {
 public:
  explicit OracleQuantileModel(SyntheticOracle oracle) : oracle_(std::move(oracle)) {}
  double quantile(double beta, std::span<const double> h) const override;
  const SyntheticOracle& oracle() const { return oracle_; }

 private:
  SyntheticOracle oracle_;
};

struct SyntheticData {
  CalibrationDataset dataset;
  SyntheticOracle oracle;
  std::vector<double> true_p;  // latent success probability per sample
};

SyntheticOracle make_oracle(const SyntheticConfig& config);

/// prefixes_per_question samples per question. Question i is "q<i>"; its
/// prefix 0 hidden state is the question-level hidden state shared with
/// generate_pools.
SyntheticData generate_dataset(const SyntheticConfig& config);

/// One pool per question: p_true from the family, correct ~ Bernoulli(p_true),
/// score = sigmoid(alpha (2 correct - 1) + N(0, 1)), question_score = mean
/// candidate score. `true_p`, when given, receives p_true per pool.
std::vector<CandidatePool> generate_pools(const SyntheticConfig& config, int n_candidates = 64,
                                          std::vector<double>* true_p = nullptr);

void save_oracle(const std::filesystem::path& path, const SyntheticOracle& oracle);
SyntheticOracle load_oracle(const std::filesystem::path& path);

}  // namespace condot
