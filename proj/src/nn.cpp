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

#include "tagbench/nn.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>

#include "tagbench/errors.hpp"

namespace tagbench::nn {

using ad::concat;
using ad::narrow;
using ad::reshape;

Tensor kaiming_uniform(ad::Shape shape, int64_t fan_in, Rng& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
  std::vector<float> data(static_cast<size_t>(ad::numel(shape)));
  for (auto& v : data) v = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor::from(std::move(shape), std::move(data), true);
}

Tensor orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    if (r(i, i) < 0) q.col(i) = -q.col(i);  // sign convention for uniqueness
  }
  std::vector<float> data(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) data[static_cast<size_t>(i) * n + j] = static_cast<float>(q(i, j));
  }
  return Tensor::from({n, n}, std::move(data), true);
}

Conv2d Conv2d::make(int c_in, int c_out, int kh, int kw, int sh, int sw, int ph, int pw, Rng& rng) {
  Conv2d l;
  l.w = kaiming_uniform({c_out, c_in, kh, kw}, static_cast<int64_t>(c_in) * kh * kw, rng);
  l.sh = sh;
  l.sw = sw;
  l.ph = ph;
  l.pw = pw;
  return l;
}

Conv1d Conv1d::make(int c_in, int c_out, int k, int stride, int pad_l, int pad_r, Rng& rng) {
  Conv1d l;
  l.w = kaiming_uniform({c_out, c_in, k}, static_cast<int64_t>(c_in) * k, rng);
  l.stride = stride;
  l.pad_l = pad_l;
  l.pad_r = pad_r;
  return l;
}

BatchNorm BatchNorm::make(int channels) {
  BatchNorm l;
  l.gamma = Tensor::full({channels}, 1.0f);
  l.gamma.set_requires_grad(true);
  l.beta = Tensor::zeros({channels}, true);
  l.stats.running_mean.assign(static_cast<size_t>(channels), 0.0f);
  l.stats.running_var.assign(static_cast<size_t>(channels), 1.0f);
  return l;
}

Dense Dense::make(int in, int out, Rng& rng) {
  Dense l;
  l.w = kaiming_uniform({out, in}, in, rng);
  l.b = Tensor::zeros({out}, true);
  return l;
}

LayerNorm LayerNorm::make(int dim) {
  LayerNorm l;
  l.gamma = Tensor::full({dim}, 1.0f);
  l.gamma.set_requires_grad(true);
  l.beta = Tensor::zeros({dim}, true);
  return l;
}

GRU GRU::make(int input, int hidden, int n_layers, Rng& rng) {
  GRU g;
  g.hidden = hidden;
  for (int l = 0; l < n_layers; ++l) {
    const int in = l == 0 ? input : hidden;
    Layer layer;
    layer.w_ir = kaiming_uniform({hidden, in}, in, rng);
    layer.w_iz = kaiming_uniform({hidden, in}, in, rng);
    layer.w_in = kaiming_uniform({hidden, in}, in, rng);
    layer.w_hr = orthogonal(hidden, rng);
    layer.w_hz = orthogonal(hidden, rng);
    layer.w_hn = orthogonal(hidden, rng);
    layer.b_ir = Tensor::zeros({hidden}, true);
    layer.b_iz = Tensor::zeros({hidden}, true);
    layer.b_in = Tensor::zeros({hidden}, true);
    layer.b_hr = Tensor::zeros({hidden}, true);
    layer.b_hz = Tensor::zeros({hidden}, true);
    layer.b_hn = Tensor::zeros({hidden}, true);
    g.layers.push_back(std::move(layer));
  }
  return g;
}

Tensor GRU::operator()(const Tensor& x) const {
  if (x.ndim() != 3) throw ShapeMismatch("gru: expected [B,T,N]");
  const int B = x.dim(0), T = x.dim(1);

  std::vector<Tensor> seq;
  seq.reserve(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    seq.push_back(reshape(narrow(x, 1, t, 1), {B, x.dim(2)}));
  }

  for (const Layer& L : layers) {
    Tensor h = Tensor::zeros({B, hidden});
    std::vector<Tensor> out;
    out.reserve(seq.size());
    for (const Tensor& xt : seq) {
      Tensor r = ad::sigmoid(ad::add(ad::linear(xt, L.w_ir, L.b_ir), ad::linear(h, L.w_hr, L.b_hr)));
      Tensor z = ad::sigmoid(ad::add(ad::linear(xt, L.w_iz, L.b_iz), ad::linear(h, L.w_hz, L.b_hz)));
      Tensor n = ad::tanh_(ad::add(ad::linear(xt, L.w_in, L.b_in),
                                   ad::mul(r, ad::linear(h, L.w_hn, L.b_hn))));
      h = ad::add(ad::mul(ad::rsub_const(1.0f, z), n), ad::mul(z, h));
      out.push_back(h);
    }
    seq = std::move(out);
  }

  std::vector<Tensor> stacked;
  stacked.reserve(seq.size());
  for (const Tensor& h : seq) stacked.push_back(reshape(h, {B, 1, hidden}));
  return concat(stacked, 1);  // [B,T,H]
}

void GRU::collect(const std::string& prefix, Collector& c) const {
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    const Layer& L = layers[l];
    c.param(p + ".w_ir", L.w_ir);
    c.param(p + ".w_iz", L.w_iz);
    c.param(p + ".w_in", L.w_in);
    c.param(p + ".w_hr", L.w_hr);
    c.param(p + ".w_hz", L.w_hz);
    c.param(p + ".w_hn", L.w_hn);
    c.param(p + ".b_ir", L.b_ir);
    c.param(p + ".b_iz", L.b_iz);
    c.param(p + ".b_in", L.b_in);
    c.param(p + ".b_hr", L.b_hr);
    c.param(p + ".b_hz", L.b_hz);
    c.param(p + ".b_hn", L.b_hn);
  }
}

SEBlock SEBlock::make(int channels, int reduction, Rng& rng) {
  if (channels % reduction != 0) {
    throw ShapeMismatch("squeeze_excitation: channels must be divisible by the reduction");
  }
  SEBlock s;
  s.channels = channels;
  s.reduction = reduction;
  s.fc1 = Dense::make(channels, channels / reduction, rng);
  s.fc2 = Dense::make(channels / reduction, channels, rng);
  return s;
}

Tensor SEBlock::operator()(const Tensor& x) const {
  Tensor s = ad::global_avg_pool(x);                  // [B,C]
  Tensor gate = ad::sigmoid(fc2(ad::relu(fc1(s))));   // [B,C]
  return ad::channel_scale(x, gate);
}

void SEBlock::collect(const std::string& prefix, Collector& c) const {
  fc1.collect(prefix + ".fc1", c);
  fc2.collect(prefix + ".fc2", c);
}

TransformerBlock TransformerBlock::make(int dim, int heads, int ff_hidden, Rng& rng) {
  if (dim % heads != 0) throw ShapeMismatch("attention: dim must be divisible by heads");
  TransformerBlock b;
  b.dim = dim;
  b.heads = heads;
  b.wq = kaiming_uniform({dim, dim}, dim, rng);
  b.wk = kaiming_uniform({dim, dim}, dim, rng);
  b.wv = kaiming_uniform({dim, dim}, dim, rng);
  b.wo = kaiming_uniform({dim, dim}, dim, rng);
  b.bq = Tensor::zeros({dim}, true);
  b.bk = Tensor::zeros({dim}, true);
  b.bv = Tensor::zeros({dim}, true);
  b.bo = Tensor::zeros({dim}, true);
  b.ln1 = LayerNorm::make(dim);
  b.ln2 = LayerNorm::make(dim);
  b.ff1 = Dense::make(dim, ff_hidden, rng);
  b.ff2 = Dense::make(ff_hidden, dim, rng);
  return b;
}

Tensor TransformerBlock::attention(const Tensor& x) const {
  if (x.ndim() != 3 || x.dim(2) != dim) throw ShapeMismatch("attention: expected [B,T,D]");
  const int B = x.dim(0), T = x.dim(1);
  const int dh = dim / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  std::vector<Tensor> per_batch;
  per_batch.reserve(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    Tensor xb = reshape(narrow(x, 0, b, 1), {T, dim});
    Tensor q = ad::linear(xb, wq, bq);
    Tensor k = ad::linear(xb, wk, bk);
    Tensor v = ad::linear(xb, wv, bv);
    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Tensor qh = narrow(q, 1, h * dh, dh);
      Tensor kh = narrow(k, 1, h * dh, dh);
      Tensor vh = narrow(v, 1, h * dh, dh);
      Tensor scores = ad::mul_scalar(ad::matmul(qh, kh, false, true), scale);  // [T,T]
      Tensor attn = ad::softmax_rows(scores);
      head_outs.push_back(ad::matmul(attn, vh));  // [T,dh]
    }
    Tensor merged = concat(head_outs, 1);  // [T,D]
    per_batch.push_back(reshape(ad::linear(merged, wo, bo), {1, T, dim}));
  }
  return concat(per_batch, 0);
}

Tensor TransformerBlock::operator()(const Tensor& x) const {
  const int B = x.dim(0), T = x.dim(1);
  Tensor h = ln1(ad::add(x, attention(x)));
  Tensor flat = reshape(h, {B * T, dim});
  Tensor ff = ff2(ad::relu(ff1(flat)));
  Tensor out = ln2(ad::add(h, reshape(ff, {B, T, dim})));
  return out;
}

void TransformerBlock::collect(const std::string& prefix, Collector& c) {
  c.param(prefix + ".wq", wq);
  c.param(prefix + ".wk", wk);
  c.param(prefix + ".wv", wv);
  c.param(prefix + ".wo", wo);
  c.param(prefix + ".bq", bq);
  c.param(prefix + ".bk", bk);
  c.param(prefix + ".bv", bv);
  c.param(prefix + ".bo", bo);
  ln1.collect(prefix + ".ln1", c);
  ln2.collect(prefix + ".ln2", c);
  ff1.collect(prefix + ".ff1", c);
  ff2.collect(prefix + ".ff2", c);
}

}  // namespace tagbench::nn
