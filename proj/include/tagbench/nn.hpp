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

#include <string>
#include <vector>

#include "tagbench/tensor.hpp"

namespace tagbench::nn {

using ad::BatchNormStats;
using ad::Tensor;

struct ParamRef {
  std::string name;
  Tensor t;
};

struct BufferRef {
  std::string name;
  std::vector<float>* values;
};

struct Collector {
  std::vector<ParamRef> params;
  std::vector<BufferRef> buffers;

  void param(const std::string& name, const Tensor& t) { params.push_back({name, t}); }
  void buffer(const std::string& name, std::vector<float>* v) { buffers.push_back({name, v}); }
};

// Kaiming-uniform fan-in init, the default for conv/dense weights.
Tensor kaiming_uniform(ad::Shape shape, int64_t fan_in, Rng& rng);
// Random orthogonal square matrix (QR of a gaussian), for GRU recurrent weights.
Tensor orthogonal(int n, Rng& rng);

struct Conv2d {
  Tensor w;  // [Co, Ci, kh, kw]
  int sh = 1, sw = 1, ph = 0, pw = 0;

  static Conv2d make(int c_in, int c_out, int kh, int kw, int sh, int sw, int ph, int pw, Rng& rng);
  Tensor operator()(const Tensor& x) const { return ad::conv2d(x, w, sh, sw, ph, pw); }
  void collect(const std::string& prefix, Collector& c) const { c.param(prefix + ".weight", w); }
};

struct Conv1d {
  Tensor w;  // [Co, Ci, k]
  int stride = 1, pad_l = 0, pad_r = 0;

  static Conv1d make(int c_in, int c_out, int k, int stride, int pad_l, int pad_r, Rng& rng);
  Tensor operator()(const Tensor& x) const { return ad::conv1d(x, w, stride, pad_l, pad_r); }
  void collect(const std::string& prefix, Collector& c) const { c.param(prefix + ".weight", w); }
};

struct BatchNorm {
  Tensor gamma, beta;
  BatchNormStats stats;

  static BatchNorm make(int channels);
  Tensor operator()(const Tensor& x, bool training) {
    return ad::batch_norm(x, gamma, beta, stats, training);
  }
  void collect(const std::string& prefix, Collector& c) {
    c.param(prefix + ".gamma", gamma);
    c.param(prefix + ".beta", beta);
    c.buffer(prefix + ".running_mean", &stats.running_mean);
    c.buffer(prefix + ".running_var", &stats.running_var);
  }
};

struct Dense {
  Tensor w;  // [out, in]
  Tensor b;  // [out]

  static Dense make(int in, int out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return ad::linear(x, w, b); }
  void collect(const std::string& prefix, Collector& c) const {
    c.param(prefix + ".weight", w);
    c.param(prefix + ".bias", b);
  }
};

struct LayerNorm {
  Tensor gamma, beta;

  static LayerNorm make(int dim);
  Tensor operator()(const Tensor& x) const { return ad::layer_norm(x, gamma, beta); }
  void collect(const std::string& prefix, Collector& c) const {
    c.param(prefix + ".gamma", gamma);
    c.param(prefix + ".beta", beta);
  }
};

/// Stacked GRU. Input [B,T,N], returns all top-layer outputs [B,T,H]; the last
/// time step is the summary state.
struct GRU {
  struct Layer {
    Tensor w_ir, w_iz, w_in;  // [H, N_in]
    Tensor w_hr, w_hz, w_hn;  // [H, H]
    Tensor b_ir, b_iz, b_in, b_hr, b_hz, b_hn;
  };
  std::vector<Layer> layers;
  int hidden = 0;

  static GRU make(int input, int hidden, int n_layers, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, Collector& c) const;
};

/// Squeeze-and-excitation over [B,C,L].
struct SEBlock {
  Dense fc1, fc2;
  int channels = 0, reduction = 0;

  static SEBlock make(int channels, int reduction, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, Collector& c) const;
};

/// Post-norm Transformer encoder block (multi-head self-attention + 2-layer
/// feed-forward, residual connections, layer norm).
struct TransformerBlock {
  Tensor wq, wk, wv, wo;  // [D, D]
  Tensor bq, bk, bv, bo;  // [D]
  LayerNorm ln1, ln2;
  Dense ff1, ff2;
  int heads = 0, dim = 0;

  static TransformerBlock make(int dim, int heads, int ff_hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const;  // [B,T,D] -> [B,T,D]
  /// Attention sublayer only (no residual/norm), exposed for unit tests.
  Tensor attention(const Tensor& x) const;
  void collect(const std::string& prefix, Collector& c);
};

}  // namespace tagbench::nn
