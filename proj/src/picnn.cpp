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

#include "condot/picnn.hpp"

#include <cmath>

#include "condot/error.hpp"
#include "condot/rng.hpp"

namespace condot {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void PicnnConfig::validate() const {
  if (input_dim < 1) throw ValidationError("picnn: input_dim must be >= 1");
  if (embed_dims.empty()) throw ValidationError("picnn: embed_dims must be non-empty");
  for (int w : embed_dims)
    if (w < 1) throw ValidationError("picnn: embed widths must be >= 1");
  if (hidden_dim_context < 1 || hidden_dim_convex < 1)
    throw ValidationError("picnn: hidden widths must be >= 1");
  if (num_layers < 1) throw ValidationError("picnn: num_layers must be >= 1");
}

namespace {

bool is_bias_name(const std::string& name) {
  return name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
}

}  // namespace

PicnnPotential::PicnnPotential(PicnnConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols, bool nonneg = false) {
    layout_.push_back(ParamBlock{std::move(name), rows, cols, offset, nonneg});
    offset += layout_.back().size();
    return layout_.size() - 1;
  };

  int in = config_.input_dim;
  for (std::size_t i = 0; i < config_.embed_dims.size(); ++i) {
    const int out = config_.embed_dims[i];
    embed_w_.push_back(add("embed." + std::to_string(i) + ".weight", out, in));
    embed_b_.push_back(add("embed." + std::to_string(i) + ".bias", out, 1));
    in = out;
  }

  const int L = config_.num_layers;
  std::vector<int> u_width(static_cast<std::size_t>(L) + 1, config_.hidden_dim_context);
  u_width[0] = config_.embed_dims.back();
  for (int k = 0; k < L; ++k) {
    const auto ks = std::to_string(k);
    ctx_w_.push_back(add("context." + ks + ".weight", u_width[k + 1], u_width[k]));
    ctx_b_.push_back(add("context." + ks + ".bias", u_width[k + 1], 1));
  }

  const int nz = config_.hidden_dim_convex;
  for (int k = 0; k <= L; ++k) {
    const auto pre = "convex." + std::to_string(k) + ".";
    const int out = (k == L) ? 1 : nz;
    const int nu = u_width[k];
    ConvexLayer layer;
    if (k >= 1) {
      layer.z_w = static_cast<long>(add(pre + "z_weight", out, nz, true));
      layer.z_gate_w = static_cast<long>(add(pre + "z_gate.weight", nz, nu));
      layer.z_gate_b = static_cast<long>(add(pre + "z_gate.bias", nz, 1));
    }
    layer.y_w = add(pre + "y_weight", out, 1);
    layer.y_gate_w = add(pre + "y_gate.weight", 1, nu);
    layer.y_gate_b = add(pre + "y_gate.bias", 1, 1);
    layer.u_w = add(pre + "u_weight", out, nu);
    layer.bias = add(pre + "bias", out, 1);
    convex_.push_back(layer);
  }
  params_.assign(offset, 0.0);
}

const ParamBlock& PicnnPotential::block(const std::string& name) const {
  for (const auto& b : layout_)
    if (b.name == name) return b;
  throw ValidationError("picnn: no parameter named '" + name + "'");
}

Eigen::Map<MatrixXd> PicnnPotential::matrix(const std::string& name) {
  const auto& b = block(name);
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const MatrixXd> PicnnPotential::matrix(const std::string& name) const {
  const auto& b = block(name);
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const MatrixXd> PicnnPotential::mat(std::size_t i) const {
  const auto& b = layout_[i];
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<MatrixXd> PicnnPotential::grad_mat(std::span<double> grad, std::size_t i) const {
  const auto& b = layout_[i];
  return {grad.data() + b.offset, b.rows, b.cols};
}

MatrixXd as_column(std::span<const double> h) {
  MatrixXd m(static_cast<Eigen::Index>(h.size()), 1);
  for (std::size_t i = 0; i < h.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = h[i];
  return m;
}

namespace {

MatrixXd tile(const MatrixXd& m, int repeat) { return repeat == 1 ? m : MatrixXd(m.replicate(1, repeat)); }

// Sum of the `repeat` column blocks of m.
MatrixXd fold(const MatrixXd& m, int repeat) {
  if (repeat == 1) return m;
  const Eigen::Index n = m.cols() / repeat;
  MatrixXd out = m.leftCols(n);
  for (int r = 1; r < repeat; ++r) out += m.middleCols(r * n, n);
  return out;
}

}  // namespace

PotentialEval PicnnPotential::forward(const VectorXd& ys, const MatrixXd& contexts, PicnnTrace& tr,
                                      int repeat) const {
  if (contexts.rows() != config_.input_dim)
    throw ValidationError("picnn: context dimension " + std::to_string(contexts.rows()) + " != " +
                          std::to_string(config_.input_dim));
  if (repeat < 1 || contexts.cols() * repeat != ys.size()) throw ValidationError("picnn: batch size mismatch");
  tr.repeat = repeat;
  tr.ys = ys;

  const std::size_t n_embed = embed_w_.size();
  tr.embed_x.assign(n_embed + 1, MatrixXd());
  tr.embed_x[0] = contexts;
  for (std::size_t i = 0; i < n_embed; ++i) {
    MatrixXd p = mat(embed_w_[i]) * tr.embed_x[i];
    p.colwise() += mat(embed_b_[i]).col(0);
    tr.embed_x[i + 1] = (i + 1 < n_embed) ? MatrixXd(p.array().tanh().matrix()) : p;
  }

  const auto L = static_cast<std::size_t>(config_.num_layers);
  tr.u.assign(L + 1, MatrixXd());
  tr.u[0] = tr.embed_x.back();
  for (std::size_t k = 0; k < L; ++k) {
    MatrixXd p = mat(ctx_w_[k]) * tr.u[k];
    p.colwise() += mat(ctx_b_[k]).col(0);
    tr.u[k + 1] = p.array().tanh().matrix();
  }

  for (auto* v : {&tr.s, &tr.sd, &tr.z, &tr.zd, &tr.gate_pre, &tr.gate, &tr.sig}) v->assign(L + 1, MatrixXd());
  tr.ygate.assign(L + 1, RowVectorXd());

  const RowVectorXd yrow = ys.transpose();
  for (std::size_t k = 0; k <= L; ++k) {
    const ConvexLayer& c = convex_[k];
    const MatrixXd& u = tr.u[k];
    MatrixXd yg_n = mat(c.y_gate_w) * u;
    yg_n.array() += mat(c.y_gate_b)(0, 0);
    MatrixXd base_n = mat(c.u_w) * u;
    base_n.colwise() += mat(c.bias).col(0);

    const RowVectorXd yg = tile(yg_n, repeat);
    const auto yw = mat(c.y_w).col(0);
    MatrixXd s = tile(base_n, repeat);
    s.noalias() += yw * (yrow.array() * yg.array()).matrix();
    MatrixXd sd = yw * yg;
    if (k >= 1) {
      MatrixXd gp = mat(static_cast<std::size_t>(c.z_gate_w)) * u;
      gp.colwise() += mat(static_cast<std::size_t>(c.z_gate_b)).col(0);
      MatrixXd g = tile(gp.cwiseMax(0.0), repeat);
      const auto W = mat(static_cast<std::size_t>(c.z_w));
      s.noalias() += W * tr.z[k].cwiseProduct(g);
      sd.noalias() += W * tr.zd[k].cwiseProduct(g);
      tr.gate_pre[k] = std::move(gp);
      tr.gate[k] = std::move(g);
    }
    if (!s.allFinite() || !sd.allFinite())
      throw NumericError("picnn: non-finite activation at convex layer " + std::to_string(k));
    if (k < L) {
      // softplus and its derivative share exp(-|s|)
      const ArrayXXd sa = s.array();
      const ArrayXXd e = (-sa.abs()).exp();
      const ArrayXXd sig = (sa >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
      tr.z[k + 1] = (sa.max(0.0) + e.log1p()).matrix();
      tr.zd[k + 1] = (sig * sd.array()).matrix();
      tr.sig[k] = sig.matrix();
    }
    tr.ygate[k] = yg;
    tr.s[k] = std::move(s);
    tr.sd[k] = std::move(sd);
  }
  return PotentialEval{tr.s[L].row(0).transpose(), tr.sd[L].row(0).transpose()};
}

PotentialEval PicnnPotential::evaluate(const VectorXd& ys, const MatrixXd& contexts, int repeat) const {
  PicnnTrace tr;
  return forward(ys, contexts, tr, repeat);
}

Eigen::VectorXd PicnnPotential::embed_context(std::span<const double> h) const {
  if (static_cast<int>(h.size()) != config_.input_dim)
    throw ValidationError("picnn: context dimension mismatch");
  VectorXd x = as_column(h).col(0);
  for (std::size_t i = 0; i < embed_w_.size(); ++i) {
    VectorXd p = mat(embed_w_[i]) * x + mat(embed_b_[i]).col(0);
    x = (i + 1 < embed_w_.size()) ? VectorXd(p.array().tanh().matrix()) : p;
  }
  return x;
}

double PicnnPotential::value(double y, std::span<const double> h) const {
  VectorXd ys(1);
  ys(0) = y;
  return evaluate(ys, as_column(h)).value(0);
}

double PicnnPotential::dy(double y, std::span<const double> h) const {
  VectorXd ys(1);
  ys(0) = y;
  return evaluate(ys, as_column(h)).dy(0);
}

void PicnnPotential::accumulate_gradient(const VectorXd& ys, const MatrixXd& contexts, const VectorXd& value_weight,
                                         const VectorXd& dy_weight, std::span<double> grad, int repeat) const {
  PicnnTrace tr;
  forward(ys, contexts, tr, repeat);
  backward(tr, value_weight, dy_weight, grad);
}

void PicnnPotential::backward(const PicnnTrace& tr, const VectorXd& value_weight, const VectorXd& dy_weight,
                              std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ValidationError("picnn: gradient buffer size mismatch");
  const Eigen::Index B = tr.ys.size();
  const int R = tr.repeat;
  if ((value_weight.size() != 0 && value_weight.size() != B) || (dy_weight.size() != 0 && dy_weight.size() != B))
    throw ValidationError("picnn: weight vector size mismatch");
  const auto L = static_cast<std::size_t>(config_.num_layers);

  MatrixXd sbar = MatrixXd::Zero(1, B);
  MatrixXd sdbar = MatrixXd::Zero(1, B);
  if (value_weight.size()) sbar.row(0) = value_weight.transpose();
  if (dy_weight.size()) sdbar.row(0) = dy_weight.transpose();
  const RowVectorXd yrow = tr.ys.transpose();

  std::vector<MatrixXd> ubar(L + 1);
  for (std::size_t k = 0; k <= L; ++k) ubar[k] = MatrixXd::Zero(tr.u[k].rows(), tr.u[k].cols());

  for (std::size_t k = L + 1; k-- > 0;) {
    const ConvexLayer& c = convex_[k];
    const MatrixXd& u = tr.u[k];
    const RowVectorXd& yg = tr.ygate[k];
    const auto yw = mat(c.y_w).col(0);

    // y path: s += w (y .* yg), s' += w yg
    const RowVectorXd y_yg = (yrow.array() * yg.array()).matrix();
    grad_mat(grad, c.y_w).col(0).noalias() += sbar * y_yg.transpose() + sdbar * yg.transpose();
    const MatrixXd ygbar =
        fold(((yw.transpose() * sbar).array() * yrow.array() + (yw.transpose() * sdbar).array()).matrix(), R);
    grad_mat(grad, c.y_gate_w).noalias() += ygbar * u.transpose();
    grad_mat(grad, c.y_gate_b)(0, 0) += ygbar.sum();
    ubar[k].noalias() += mat(c.y_gate_w).transpose() * ygbar;

    // context-only path: s += D u + d
    const MatrixXd sbar_n = fold(sbar, R);
    grad_mat(grad, c.u_w).noalias() += sbar_n * u.transpose();
    grad_mat(grad, c.bias).col(0) += sbar_n.rowwise().sum();
    ubar[k].noalias() += mat(c.u_w).transpose() * sbar_n;

    if (k == 0) break;

    // z path: s += W (z .* g), s' += W (z' .* g)
    const auto zw = static_cast<std::size_t>(c.z_w);
    const auto gw = static_cast<std::size_t>(c.z_gate_w);
    const auto gb = static_cast<std::size_t>(c.z_gate_b);
    const MatrixXd& z = tr.z[k];
    const MatrixXd& zd = tr.zd[k];
    const MatrixXd& g = tr.gate[k];
    const auto W = mat(zw);
    grad_mat(grad, zw).noalias() += sbar * z.cwiseProduct(g).transpose() + sdbar * zd.cwiseProduct(g).transpose();
    const MatrixXd m = W.transpose() * sbar;
    const MatrixXd md = W.transpose() * sdbar;
    const MatrixXd gbar = fold(z.cwiseProduct(m) + zd.cwiseProduct(md), R);
    const MatrixXd rbar = (tr.gate_pre[k].array() > 0.0).select(gbar, 0.0);
    grad_mat(grad, gw).noalias() += rbar * u.transpose();
    grad_mat(grad, gb).col(0) += rbar.rowwise().sum();
    ubar[k].noalias() += mat(gw).transpose() * rbar;

    // through z_k = softplus(s_{k-1}), z'_k = sigmoid(s_{k-1}) s'_{k-1}
    const ArrayXXd zbar = g.array() * m.array();
    const ArrayXXd zdbar = g.array() * md.array();
    const ArrayXXd sig = tr.sig[k - 1].array();
    sbar = (zbar * sig + zdbar * sig * (1.0 - sig) * tr.sd[k - 1].array()).matrix();
    sdbar = (zdbar * sig).matrix();
  }

  for (std::size_t k = L; k >= 1; --k) {
    const MatrixXd pbar = (ubar[k].array() * (1.0 - tr.u[k].array().square())).matrix();
    grad_mat(grad, ctx_w_[k - 1]).noalias() += pbar * tr.u[k - 1].transpose();
    grad_mat(grad, ctx_b_[k - 1]).col(0) += pbar.rowwise().sum();
    ubar[k - 1].noalias() += mat(ctx_w_[k - 1]).transpose() * pbar;
  }

  MatrixXd xbar = std::move(ubar[0]);
  const std::size_t n_embed = embed_w_.size();
  for (std::size_t i = n_embed; i-- > 0;) {
    MatrixXd pbar = (i + 1 < n_embed)
                        ? MatrixXd((xbar.array() * (1.0 - tr.embed_x[i + 1].array().square())).matrix())
                        : xbar;
    grad_mat(grad, embed_w_[i]).noalias() += pbar * tr.embed_x[i].transpose();
    grad_mat(grad, embed_b_[i]).col(0) += pbar.rowwise().sum();
    if (i > 0) xbar = mat(embed_w_[i]).transpose() * pbar;
  }
}

void PicnnPotential::project_nonnegative() {
  for (const auto& b : layout_) {
    if (!b.nonnegative) continue;
    for (std::size_t i = 0; i < b.size(); ++i) {
      double& w = params_[b.offset + i];
      if (w < 0.0) w = 0.0;
    }
  }
}

PicnnPotential init_potential(const PicnnConfig& config, std::uint64_t seed) {
  PicnnPotential pot(config);
  Xoshiro256 rng(seed);
  auto params = pot.params();
  for (const auto& b : pot.layout()) {
    if (is_bias_name(b.name)) continue;
    const double a = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
    for (std::size_t i = 0; i < b.size(); ++i) {
      double w = a * (2.0 * rng.uniform() - 1.0);
      if (b.nonnegative) w = std::abs(w);
      params[b.offset + i] = w;
    }
  }
  return pot;
}

}  // namespace condot
