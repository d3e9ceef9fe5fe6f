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

#include "condot/dual_loss.hpp"

#include <cmath>

#include "condot/error.hpp"

namespace condot {

using Eigen::VectorXd;

namespace {

struct Terms {
  const VectorXd& anchor;   // points where the first-term potential is evaluated
  const VectorXd& mapped;   // points fed through g'
};

Terms select_terms(const DualBatch& b, DualConvention c) {
  return c == DualConvention::source_transport ? Terms{b.y, b.x} : Terms{b.x, b.y};
}

void check_batch(const DualBatch& b) {
  if (b.size() == 0) throw ValidationError("dual loss: empty batch");
  if (b.y.size() != b.size() || b.contexts.cols() != b.size())
    throw ValidationError("dual loss: batch arrays disagree in length");
}

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("dual loss: non-finite ") + what);
  return v;
}

}  // namespace

LossGradient loss_gradients(const PicnnPotential& g, const PicnnPotential& f, const DualBatch& batch,
                            DualLoss which, DualConvention convention) {
  check_batch(batch);
  const Terms t = select_terms(batch, convention);
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  PicnnTrace g_trace;
  const PotentialEval g_mapped = g.forward(t.mapped, batch.contexts, g_trace);
  const VectorXd& transported = g_mapped.dy;

  LossGradient out;
  if (which == DualLoss::f) {
    out.grad.assign(f.num_params(), 0.0);
    PicnnTrace f_trace;
    if (convention == DualConvention::source_transport) {
      // one pass over [anchor; transported] sharing the context path
      VectorXd ys(2 * n);
      ys << t.anchor, transported;
      const PotentialEval fe = f.forward(ys, batch.contexts, f_trace, 2);
      out.loss = fe.value.head(n).mean() - fe.value.tail(n).mean();
      VectorXd w(2 * n);
      w << VectorXd::Constant(n, inv_n), VectorXd::Constant(n, -inv_n);
      f.backward(f_trace, w, VectorXd(), out.grad);
    } else {
      const PotentialEval fe = f.forward(transported, batch.contexts, f_trace);
      out.loss = g.evaluate(t.anchor, batch.contexts).value.mean() - fe.value.mean();
      f.backward(f_trace, VectorXd::Constant(n, -inv_n), VectorXd(), out.grad);
    }
  } else {
    // d/dθg of -(m g'(m) - f(g'(m))) = -(m - f'(g'(m))) d/dθg g'(m)
    const PotentialEval f_transported = f.evaluate(transported, batch.contexts);
    out.loss = -(t.mapped.cwiseProduct(transported) - f_transported.value).mean();
    const VectorXd dy_weight = -(t.mapped - f_transported.dy) * inv_n;
    out.grad.assign(g.num_params(), 0.0);
    g.backward(g_trace, VectorXd(), dy_weight, out.grad);
  }

  finite_or_throw(out.loss, "loss");
  for (double v : out.grad) finite_or_throw(v, "gradient");
  return out;
}

double dual_loss_value(const PotentialFn& g, const PotentialFn& f, const DualBatch& batch, DualLoss which,
                       DualConvention convention) {
  check_batch(batch);
  const Terms t = select_terms(batch, convention);
  const PotentialEval g_mapped = g(t.mapped, batch.contexts);
  const PotentialEval f_transported = f(g_mapped.dy, batch.contexts);
  double loss;
  if (which == DualLoss::f) {
    const PotentialFn& anchor_pot = (convention == DualConvention::source_transport) ? f : g;
    loss = anchor_pot(t.anchor, batch.contexts).value.mean() - f_transported.value.mean();
  } else {
    loss = -(t.mapped.cwiseProduct(g_mapped.dy) - f_transported.value).mean();
  }
  return finite_or_throw(loss, "loss");
}

double dual_loss_value(const PicnnPotential& g, const PicnnPotential& f, const DualBatch& batch, DualLoss which,
                       DualConvention convention) {
  auto wrap = [](const PicnnPotential& p) -> PotentialFn {
    return [&p](const VectorXd& ys, const Eigen::MatrixXd& c) { return p.evaluate(ys, c); };
  };
  return dual_loss_value(wrap(g), wrap(f), batch, which, convention);
}

}  // namespace condot
