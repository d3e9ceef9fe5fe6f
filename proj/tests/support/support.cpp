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

#include "support.hpp"

#include <atomic>
#include <unistd.h>

namespace testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("condot_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

condot::CalibrationSample make_sample(const std::string& qid, int prefix, double score, std::vector<double> hidden,
                                      int n_rollouts, int n_correct) {
  condot::CalibrationSample s;
  s.question_id = qid;
  s.prefix_index = prefix;
  s.score = score;
  s.hidden = std::move(hidden);
  s.n_rollouts = n_rollouts;
  s.n_correct = n_correct;
  s.p_emp = static_cast<double>(n_correct) / n_rollouts;
  return s;
}

condot::CalibrationDataset toy_dataset(int questions, int per_question, int d) {
  condot::CalibrationDataset ds;
  ds.name = "toy";
  ds.hidden_dim = static_cast<std::size_t>(d);
  for (int q = 0; q < questions; ++q)
    for (int k = 0; k < per_question; ++k) {
      std::vector<double> h(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) h[static_cast<std::size_t>(i)] = 0.1 * q - 0.05 * k + 0.01 * i;
      ds.samples.push_back(make_sample("q" + std::to_string(q), k, 0.5, h, 8, (q + k) % 9));
    }
  return ds;
}

std::vector<bool> gate_signature(const std::vector<const condot::PicnnPotential*>& pots,
                                 const Eigen::MatrixXd& contexts) {
  std::vector<bool> sig;
  const Eigen::VectorXd ys = Eigen::VectorXd::Zero(contexts.cols());
  for (const auto* p : pots) {
    condot::PicnnTrace t;
    p->forward(ys, contexts, t);
    for (const auto& g : t.gate_pre)
      for (Eigen::Index i = 0; i < g.size(); ++i) sig.push_back(g.data()[i] > 0.0);
  }
  return sig;
}

}  // namespace testing
