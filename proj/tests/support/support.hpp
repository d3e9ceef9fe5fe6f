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

#include <filesystem>
#include <functional>
#include <string>

#include "condot/data_model.hpp"
#include "condot/picnn.hpp"
#include "condot/quantile_models.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

condot::CalibrationSample make_sample(const std::string& qid, int prefix, double score, std::vector<double> hidden,
                                      int n_rollouts, int n_correct);

/// `questions` questions with `per_question` samples each, hidden_dim d.
condot::CalibrationDataset toy_dataset(int questions, int per_question, int d = 2);

/// Signs of every gate pre-activation of `pots` on `contexts`: the active set
/// of the ReLU gates, used to keep finite-difference stencils off kinks.
std::vector<bool> gate_signature(const std::vector<const condot::PicnnPotential*>& pots,
                                 const Eigen::MatrixXd& contexts);

/// QuantileModel backed by a function of (beta, h), unclamped.
class FnModel final : public condot::QuantileModel {
 public:
  using Fn = std::function<double(double, std::span<const double>)>;
  explicit FnModel(Fn fn) : fn_(std::move(fn)) {}
  double quantile(double beta, std::span<const double> h) const override { return fn_(beta, h); }

 private:
  Fn fn_;
};

/// Constant quantile model.
inline FnModel constant_model(double c) {
  return FnModel([c](double, std::span<const double>) { return c; });
}

}  // namespace testing
