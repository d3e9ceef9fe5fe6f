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

#include "condot/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "condot/error.hpp"
#include "condot/io.hpp"
#include "condot/rng.hpp"

namespace condot {

std::string to_string(Family f) { return f == Family::uniform_band ? "uniform_band" : "logit_normal"; }

Family parse_family(const std::string& s) {
  if (s == "uniform_band") return Family::uniform_band;
  if (s == "logit_normal") return Family::logit_normal;
  throw ValidationError("unknown family '" + s + "' (expected uniform_band or logit_normal)");
}

void SyntheticConfig::validate() const {
  if (hidden_dim < 1) throw ValidationError("synth: hidden_dim must be >= 1");
  if (n_questions < 1) throw ValidationError("synth: n_questions must be >= 1");
  if (prefixes_per_question < 1) throw ValidationError("synth: prefixes_per_question must be >= 1");
  if (n_rollouts < 1) throw ValidationError("synth: n_rollouts must be >= 1");
  if (!(prm_noise_sd >= 0.0)) throw ValidationError("synth: prm_noise_sd must be nonnegative");
}

double inverse_normal_cdf(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  constexpr double p_high = 1.0 - p_low;

  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("inverse_normal_cdf: argument outside [0,1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= p_high) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against the erfc-based cdf; the upper half works with
  // 1 - p, which is exact there, to keep tail residuals accurate.
  const double e = p <= 0.5 ? 0.5 * std::erfc(-x / std::sqrt(2.0)) - p : (1.0 - p) - 0.5 * std::erfc(x / std::sqrt(2.0));
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

namespace {
constexpr double kBandWidth = 0.4;
constexpr double kBandSlope = 0.6;
constexpr double kLogitScale = 0.8;

// stream tags
constexpr std::uint64_t kDirectionTag = 0x6469726563740001ULL;
constexpr std::uint64_t kHiddenTag = 0x68696464656e0002ULL;
constexpr std::uint64_t kOutcomeTag = 0x6f7574636f6d0003ULL;
constexpr std::uint64_t kPoolTag = 0x706f6f6c00000004ULL;

std::vector<double> draw_hidden(std::uint64_t seed, int question, int prefix, int dim) {
  Xoshiro256 rng(derive_seed(seed, kHiddenTag ^ static_cast<std::uint64_t>(question), static_cast<std::uint64_t>(prefix)));
  std::vector<double> h(static_cast<std::size_t>(dim));
  for (double& v : h) v = rng.normal();
  return h;
}

std::string question_name(int q) { return "q" + std::to_string(q); }
}  // namespace

double SyntheticOracle::latent(std::span<const double> h) const {
  if (h.size() != direction.size()) throw ValidationError("oracle: context dimension mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) dot += direction[i] * h[i];
  return sigmoid(dot / std::sqrt(static_cast<double>(h.size())));
}

double SyntheticOracle::quantile(double beta, std::span<const double> h) const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("oracle: level outside [0,1]");
  const double a = latent(h);
  if (family == Family::uniform_band) {
    const double lo = kBandSlope * a;
    return lo + beta * kBandWidth;
  }
  if (beta == 0.0) return 0.0;
  if (beta == 1.0) return 1.0;
  return sigmoid(2.0 * a - 1.0 + kLogitScale * inverse_normal_cdf(beta));
}

double SyntheticOracle::draw_p(std::span<const double> h, Xoshiro256& rng) const {
  const double a = latent(h);
  if (family == Family::uniform_band) return kBandSlope * a + kBandWidth * rng.uniform();
  return sigmoid(2.0 * a - 1.0 + kLogitScale * rng.normal());
}

double oracle_quantile(const SyntheticOracle& oracle, double beta, std::span<const double> h) {
  return oracle.quantile(beta, h);
}

double OracleQuantileModel::quantile(double beta, std::span<const double> h) const {
  return std::clamp(oracle_.quantile(beta, h), 0.0, 1.0);
}

SyntheticOracle make_oracle(const SyntheticConfig& config) {
  config.validate();
  SyntheticOracle o;
  o.family = config.family;
  Xoshiro256 rng(derive_seed(config.seed, kDirectionTag));
  o.direction.resize(static_cast<std::size_t>(config.hidden_dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : o.direction) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& v : o.direction) v /= norm;
  return o;
}

SyntheticData generate_dataset(const SyntheticConfig& config) {
  SyntheticData out;
  out.oracle = make_oracle(config);
  out.dataset.name = "synthetic_" + to_string(config.family);
  out.dataset.hidden_dim = static_cast<std::size_t>(config.hidden_dim);
  const bool identity_score = config.prm_bias == 0.0 && config.prm_noise_sd == 0.0;

  for (int q = 0; q < config.n_questions; ++q) {
    for (int j = 0; j < config.prefixes_per_question; ++j) {
      Xoshiro256 rng(derive_seed(config.seed, kOutcomeTag ^ static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(j)));
      CalibrationSample s;
      s.question_id = question_name(q);
      s.prefix_index = j;
      s.hidden = draw_hidden(config.seed, q, j, config.hidden_dim);
      const double p = out.oracle.draw_p(s.hidden, rng);
      s.n_rollouts = config.n_rollouts;
      for (int r = 0; r < config.n_rollouts; ++r)
        if (rng.bernoulli(p)) ++s.n_correct;
      s.p_emp = static_cast<double>(s.n_correct) / static_cast<double>(s.n_rollouts);
      const double noise = rng.normal();
      if (identity_score) {
        s.score = p;
      } else {
        const double pc = std::clamp(p, 1e-6, 1.0 - 1e-6);
        s.score = sigmoid(logit(pc) + config.prm_bias + config.prm_noise_sd * noise);
      }
      out.true_p.push_back(p);
      out.dataset.samples.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<CandidatePool> generate_pools(const SyntheticConfig& config, int n_candidates, std::vector<double>* true_p) {
  if (n_candidates < 1) throw ValidationError("synth: n_candidates must be >= 1");
  const SyntheticOracle oracle = make_oracle(config);
  std::vector<CandidatePool> pools;
  if (true_p) true_p->clear();
  for (int q = 0; q < config.n_questions; ++q) {
    Xoshiro256 rng(derive_seed(config.seed, kPoolTag, static_cast<std::uint64_t>(q)));
    CandidatePool pool;
    pool.question_id = question_name(q);
    pool.question_hidden = draw_hidden(config.seed, q, 0, config.hidden_dim);
    const double p = oracle.draw_p(pool.question_hidden, rng);
    double sum = 0.0;
    for (int c = 0; c < n_candidates; ++c) {
      Candidate cand;
      cand.correct = rng.bernoulli(p);
      const double sign = cand.correct ? 1.0 : -1.0;
      cand.score = sigmoid(config.ranking_strength * sign + rng.normal());
      sum += cand.score;
      pool.candidates.push_back(cand);
    }
    pool.question_score = std::clamp(sum / n_candidates, 0.0, 1.0);
    if (true_p) true_p->push_back(p);
    pools.push_back(std::move(pool));
  }
  return pools;
}

void save_oracle(const std::filesystem::path& path, const SyntheticOracle& oracle) {
  nlohmann::json obj;
  obj["family"] = to_string(oracle.family);
  obj["direction"] = oracle.direction;
  io::write_text(path, obj.dump(2) + "\n");
}

SyntheticOracle load_oracle(const std::filesystem::path& path) {
  try {
    const auto obj = nlohmann::json::parse(io::read_text(path));
    SyntheticOracle o;
    o.family = parse_family(obj.at("family").get<std::string>());
    o.direction = obj.at("direction").get<std::vector<double>>();
    if (o.direction.empty()) throw ValidationError("oracle file has an empty direction");
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed oracle file " + path.string() + ": " + e.what());
  }
}

}  // namespace condot
