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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace condot {

/// Architecture of a partially input-convex potential over a scalar input y
/// and a context vector h.
struct PicnnConfig {
  int input_dim = 16;                  // dimension of h
  std::vector<int> embed_dims{64, 32};  // MLP widths; last entry is the width of u_0
  int hidden_dim_context = 32;
  int hidden_dim_convex = 32;
  int num_layers = 3;  // convex hidden layers; an affine scalar output layer follows

  void validate() const;
  bool operator==(const PicnnConfig&) const = default;
};

/// Location of one named parameter array inside the flat parameter vector.
/// Matrices are stored column-major.
struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  bool nonnegative = false;  // z-to-z weights

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Per-batch forward values of a potential and its derivative in y.
struct PotentialEval {
  Eigen::VectorXd value;
  Eigen::VectorXd dy;
};

/// Activations recorded by a forward pass for the reverse pass.
/// Context-only quantities are stored once per distinct context; quantities
/// that depend on y are stored per batch column.
struct PicnnTrace {
  int repeat = 1;
  Eigen::VectorXd ys;
  std::vector<Eigen::MatrixXd> embed_x;  // embedding inputs, then u_0
  std::vector<Eigen::MatrixXd> u;        // u_0..u_L, one column per context
  std::vector<Eigen::MatrixXd> gate_pre;  // B_k u_k + b_k, one column per context
  std::vector<Eigen::MatrixXd> gate;      // relu of gate_pre, tiled to the batch
  std::vector<Eigen::RowVectorXd> ygate;  // C_k u_k + c_k, tiled to the batch
  std::vector<Eigen::MatrixXd> s, sd;     // pre-activations and d/dy
  std::vector<Eigen::MatrixXd> z, zd;     // layer inputs z_k and d/dy (index 0 unused)
  std::vector<Eigen::MatrixXd> sig;       // sigmoid(s_k) for hidden layers
};

/// Partially input-convex network with its own context-embedding MLP.
///
/// Context path:  u_0 = mlp(h), u_{k+1} = tanh(A_k u_k + a_k).
/// Convex path, layers k = 0..L (layer L is the scalar output):
///   s_k = W_k (z_k * relu(B_k u_k + b_k)) + w_k * y * (C_k u_k + c_k) + D_k u_k + d_k
///   z_{k+1} = softplus(s_k) for k < L, output = s_L.
/// z_0 = 0, so layer 0 has no z-to-z or gate parameters. With W_k >= 0 the
/// output is convex in y for every fixed h.
///
/// All derivative machinery assumes scalar y: the forward pass carries the
/// tangent ds/dy alongside each pre-activation, and `backward`
/// back-propagates through both, so parameter gradients of expressions
/// containing d(output)/dy are exact.
class PicnnPotential {
 public:
  PicnnPotential() = default;
  explicit PicnnPotential(PicnnConfig config);  // all parameters zero

  const PicnnConfig& config() const { return config_; }
  const std::vector<ParamBlock>& layout() const { return layout_; }
  const ParamBlock& block(const std::string& name) const;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }

  Eigen::Map<Eigen::MatrixXd> matrix(const std::string& name);
  Eigen::Map<const Eigen::MatrixXd> matrix(const std::string& name) const;

  /// u_0 for a single context vector.
  Eigen::VectorXd embed_context(std::span<const double> h) const;

  double value(double y, std::span<const double> h) const;
  double dy(double y, std::span<const double> h) const;

  /// Batched evaluation. `ys` holds `repeat` consecutive blocks of
  /// contexts.cols() entries; ys[j] pairs with context column j % n. The
  /// context path runs once per column of `contexts`.
  PotentialEval evaluate(const Eigen::VectorXd& ys, const Eigen::MatrixXd& contexts, int repeat = 1) const;

  /// As evaluate(), recording activations in `trace` for backward().
  PotentialEval forward(const Eigen::VectorXd& ys, const Eigen::MatrixXd& contexts, PicnnTrace& trace,
                        int repeat = 1) const;

  /// Adds to `grad` the parameter gradient of
  ///   sum_j value_weight[j] * value(y_j, h_j) + dy_weight[j] * dy(y_j, h_j)
  /// for the batch recorded in `trace`. Either weight vector may be empty,
  /// meaning all zeros.
  void backward(const PicnnTrace& trace, const Eigen::VectorXd& value_weight, const Eigen::VectorXd& dy_weight,
                std::span<double> grad) const;

  /// forward() followed by backward().
  void accumulate_gradient(const Eigen::VectorXd& ys, const Eigen::MatrixXd& contexts,
                           const Eigen::VectorXd& value_weight, const Eigen::VectorXd& dy_weight,
                           std::span<double> grad, int repeat = 1) const;

  /// Clamps every z-to-z weight to max(0, w). Other parameters untouched.
  void project_nonnegative();

  bool operator==(const PicnnPotential& o) const {
    return config_ == o.config_ && params_ == o.params_;
  }

 private:
  Eigen::Map<const Eigen::MatrixXd> mat(std::size_t block_index) const;
  Eigen::Map<Eigen::MatrixXd> grad_mat(std::span<double> grad, std::size_t block_index) const;

  PicnnConfig config_;
  std::vector<ParamBlock> layout_;
  std::vector<double> params_;

  // Block indices, resolved once at construction.
  std::vector<std::size_t> embed_w_, embed_b_;
  std::vector<std::size_t> ctx_w_, ctx_b_;
  struct ConvexLayer {
    long z_w = -1, z_gate_w = -1, z_gate_b = -1;  // absent for layer 0
    std::size_t y_w = 0, y_gate_w = 0, y_gate_b = 0, u_w = 0, bias = 0;
  };
  std::vector<ConvexLayer> convex_;
};

/// Weights uniform on [-a, a], a = sqrt(6 / (fan_in + fan_out)) per weight
/// array; biases zero; z-to-z weights replaced by their absolute value.
PicnnPotential init_potential(const PicnnConfig& config, std::uint64_t seed);

/// Packs a single context vector as a one-column matrix.
Eigen::MatrixXd as_column(std::span<const double> h);

}  // namespace condot
