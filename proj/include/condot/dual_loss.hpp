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

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "condot/picnn.hpp"

namespace condot {

/// One minibatch: source draws x, target draws y, and their contexts
/// (column j of `contexts` belongs to (x_j, y_j)).
struct DualBatch {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::MatrixXd contexts;

  Eigen::Index size() const { return x.size(); }
};

enum class DualLoss { f, g };

/// Which variable feeds the gradient of g.
///
/// source_transport: grad g maps source to target, so the inference map is
///   T(x, h) = d/dx g(x, h):
///     loss_f = mean_y f(y) - mean_x f(g'(x))
///     loss_g = -mean_x [ x g'(x) - f(g'(x)) ]
/// as_written: the two objectives with g' applied to target draws and the
///   g-potential in the first term of loss_f:
///     loss_f = mean_x g(x) - mean_y f(g'(y))
///     loss_g = -mean_y [ y g'(y) - f(g'(y)) ]
///   loss_f then has no term that anchors f, so this form is kept for
///   reference evaluation rather than training.
enum class DualConvention { source_transport, as_written };

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. the potential being updated (f for DualLoss::f, g otherwise)
};

/// Loss value and exact parameter gradient. For DualLoss::g the gradient
/// flows through g' (mixed second derivatives in y and parameters).
/// Throws NumericError on a non-finite loss or gradient.
LossGradient loss_gradients(const PicnnPotential& g, const PicnnPotential& f, const DualBatch& batch,
                            DualLoss which, DualConvention convention = DualConvention::source_transport);

/// Batched (value, d/dy) of an arbitrary potential; lets the loss be
/// evaluated on closed-form potentials.
using PotentialFn = std::function<PotentialEval(const Eigen::VectorXd& ys, const Eigen::MatrixXd& contexts)>;

/// Loss value only.
double dual_loss_value(const PotentialFn& g, const PotentialFn& f, const DualBatch& batch, DualLoss which,
                       DualConvention convention = DualConvention::source_transport);
double dual_loss_value(const PicnnPotential& g, const PicnnPotential& f, const DualBatch& batch, DualLoss which,
                       DualConvention convention = DualConvention::source_transport);

}  // namespace condot
