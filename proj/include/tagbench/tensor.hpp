/*
 * Copyright 2026 The tagbench authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tagbench/rng.hpp"

namespace tagbench::ad {

using Shape = std::vector<int>;

int64_t numel(const Shape& s);

struct Node;

/// Value handle into the autodiff graph. Copies share the node. Tensors are
/// 32-bit float storage; reductions that feed losses/metrics accumulate in
/// 64-bit.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value);
  static Tensor scalar(float value);
  static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const;
  int dim(int i) const;
  int ndim() const;
  int64_t size() const;

  float* data();
  const float* data() const;
  const std::vector<float>& values() const;

  /// Gradient buffer; allocated (zero) on first access.
  float* grad();
  const std::vector<float>& grad_values() const;
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool v);

  float item() const;  // scalar tensors only

  std::shared_ptr<Node> node() const { return n_; }
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

 private:
  std::shared_ptr<Node> n_;
};

struct Node {
  Shape shape;
  std::vector<float> x;  // values
  std::vector<float> g;  // gradient, empty until touched
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(Node&)> backward;  // scatter grad into parents
  uint64_t seq = 0;

  int64_t size() const { return static_cast<int64_t>(x.size()); }
  float* grad_buf();  // allocate zeros on demand
};

/// Reverse-mode sweep from a scalar loss. Gradients of leaves accumulate
/// across calls (running backward twice doubles them); gradients of interior
/// nodes are reset per sweep.
void backward(const Tensor& loss);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float c);
Tensor mul_scalar(const Tensor& a, float c);
Tensor rsub_const(float c, const Tensor& a);  // c - a
Tensor reciprocal(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_(const Tensor& a);
Tensor exp_(const Tensor& a);
/// ln(max(a, floor)); zero gradient where the floor is active.
Tensor log_clamp(const Tensor& a, float floor);
/// Multiply by a scalar tensor (grad flows to both).
Tensor scale_by(const Tensor& a, const Tensor& s);
/// Add a tensor broadcast across the leading batch axis: x [B, ...] + c [...].
Tensor add_bcast0(const Tensor& x, const Tensor& c);

// ---- linear algebra ----
/// [M,K] x [K,N] -> [M,N]; ta/tb treat an argument as transposed.
Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);
/// y [R,C] + b [C] on every row.
Tensor add_bias_rows(const Tensor& y, const Tensor& b);
/// x [B,N] * W^T [N,M] + b: the dense layer.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor softmax_rows(const Tensor& a);  // [R,C], softmax over C

// ---- reductions ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
/// [A,M,N] -> [A,N], mean over the middle axis.
Tensor mean_axis1(const Tensor& a);

// ---- shape ----
Tensor reshape(const Tensor& a, Shape shape);
Tensor narrow(const Tensor& a, int axis, int start, int len);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// [B,C,F,T] -> [B,T,C*F] (sequence view for recurrent/attention back ends).
Tensor permute_to_seq(const Tensor& a);

// ---- convolution / pooling ----
Tensor conv2d(const Tensor& x, const Tensor& w, int stride_h, int stride_w,
              int pad_h, int pad_w);
Tensor conv1d(const Tensor& x, const Tensor& w, int stride, int pad_l, int pad_r);
inline Tensor conv1d(const Tensor& x, const Tensor& w, int stride, int pad) {
  return conv1d(x, w, stride, pad, pad);
}
Tensor max_pool2d(const Tensor& x, int kh, int kw, int sh, int sw);
Tensor max_pool1d(const Tensor& x, int k, int s);
/// [B,C,spatial...] -> [B,C]; gradient routes to the (first) argmax.
Tensor global_max_pool(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);
/// x [B,C,spatial...] scaled per channel by g [B,C].
Tensor channel_scale(const Tensor& x, const Tensor& g);

// ---- normalization / regularization / loss ----
struct BatchNormStats {
  std::vector<float> running_mean;
  std::vector<float> running_var;
};
/// Channel axis 1. Train mode normalizes over batch*spatial and updates the
/// running stats (momentum 0.1, unbiased running variance); eval mode applies
/// the running stats.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, bool training, float momentum = 0.1f,
                  float eps = 1e-5f);
/// Normalize the last axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);
/// Inverted dropout with an explicit seed; identity when training is false.
Tensor dropout(const Tensor& x, float p, bool training, uint64_t seed);
/// Mean binary cross-entropy on logits, log-sum-exp stable form.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

}  // namespace tagbench::ad
