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

#include <iosfwd>
#include <string>
#include <vector>

#include "condot/bon_sim.hpp"
#include "condot/ias.hpp"
#include "condot/metrics.hpp"
#include "condot/picnn.hpp"
#include "condot/quantile_models.hpp"
#include "condot/synthetic.hpp"
#include "condot/trainer.hpp"

namespace condot::cli {

/// Every tunable of every subcommand. Loaded from a JSON document whose
/// top-level sections mirror the members below; command-line flags override
/// file values.
struct RunConfig {
  SyntheticConfig synthetic;
  int n_candidates = 64;
  PicnnConfig picnn;
  TrainConfig train;
  double val_fraction = 0.2;  // share of training questions held out for early stopping
  QrTrainConfig qr;
  std::vector<double> qr_levels = default_levels();
  EvalConfig eval;
  int curve_samples = 8;  // samples written to quantile_curves_<variant>.csv
  SimConfig sim;

  void validate() const;
};

/// Parses a JSON config. Unknown keys are rejected.
RunConfig parse_run_config(const std::string& json_text);

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on invalid input or usage, 2 on a runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace condot::cli
