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
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace condot {

/// One calibration record: an uncalibrated PRM score, the PRM hidden state
/// for the prefix, and the rollout outcome counts behind the empirical
/// success probability.
struct CalibrationSample {
  std::string question_id;
  int prefix_index = 0;
  double score = 0.0;
  std::vector<double> hidden;
  int n_rollouts = 1;
  int n_correct = 0;
  double p_emp = 0.0;  // n_correct / n_rollouts, validated on load
};

struct CalibrationDataset {
  std::string name;
  std::size_t hidden_dim = 0;
  std::vector<CalibrationSample> samples;

  /// Distinct question ids in order of first appearance.
  std::vector<std::string> question_ids() const;

  /// Samples whose question is in `questions`, file order preserved.
  CalibrationDataset subset(const std::set<std::string>& questions, std::string name) const;
};

struct Candidate {
  double score = 0.0;
  bool correct = false;
};

/// Pre-generated candidates for one question, consumed by the Best-of-N
/// simulator in place of live sampling.
struct CandidatePool {
  std::string question_id;
  std::vector<double> question_hidden;
  double question_score = 0.0;
  std::vector<Candidate> candidates;
};

struct SplitAssignment {
  std::set<std::string> train_questions;
  std::set<std::string> test_questions;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;

  bool operator==(const SplitAssignment&) const = default;
};

enum class DatasetFormat { jsonl };

/// Validates one sample against a declared hidden dimension. Throws
/// ValidationError with `context` prefixed to the message.
void validate_sample(const CalibrationSample& s, std::size_t hidden_dim, const std::string& context);

CalibrationDataset parse_dataset(std::istream& in, std::string name);
CalibrationDataset load_dataset(const std::filesystem::path& path,
                                DatasetFormat format = DatasetFormat::jsonl);
void write_dataset(std::ostream& out, const CalibrationDataset& ds);
void save_dataset(const std::filesystem::path& path, const CalibrationDataset& ds);

std::vector<CandidatePool> parse_pools(std::istream& in);
std::vector<CandidatePool> load_pools(const std::filesystem::path& path);
void write_pools(std::ostream& out, const std::vector<CandidatePool>& pools);
void save_pools(const std::filesystem::path& path, const std::vector<CandidatePool>& pools);

/// Grouped shuffle split at the question level. The question list (order of
/// first appearance) is Fisher-Yates shuffled with Xoshiro256(seed); the
/// first round_half_up(train_fraction * Q) questions, clamped to [1, Q-1],
/// form the training side.
SplitAssignment group_split(const CalibrationDataset& ds, double train_fraction, std::uint64_t seed);

void save_split(const std::filesystem::path& path, const SplitAssignment& split);
SplitAssignment load_split(const std::filesystem::path& path);

}  // namespace condot
