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

#include "tagbench/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "tagbench/errors.hpp"

namespace tagbench::ad {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

float* Node::grad_buf() {
  if (g.size() != x.size()) g.assign(x.size(), 0.0f);
  return g.data();
}

namespace {

std::atomic<uint64_t> g_seq{0};

std::shared_ptr<Node> new_node(Shape shape) {
  auto n = std::make_shared<Node>();
  for (int d : shape) {
    if (d <= 0) throw ShapeMismatch("tensor extents must be positive");
  }
  n->x.assign(static_cast<size_t>(numel(shape)), 0.0f);
  n->shape = std::move(shape);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

Tensor raw(Shape shape) { return Tensor(new_node(std::move(shape))); }

// Wire the graph only when a gradient can flow.
Tensor attach(Tensor out, std::vector<Tensor> parents, std::function<void(Node&)> bw) {
  bool need = false;
  for (const auto& p : parents) {
    if (p.defined() && p.requires_grad()) need = true;
  }
  if (need) {
    Node& n = *out.node();
    n.requires_grad = true;
    n.parents = std::move(parents);
    n.backward = std::move(bw);
  }
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw ShapeMismatch(std::string(op) + ": shape mismatch");
}

// accumulate go into p's grad if it participates
bool wants_grad(const Tensor& p) { return p.defined() && p.node()->requires_grad; }

}  // namespace

const Shape& Tensor::shape() const { return n_->shape; }
int Tensor::dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
int Tensor::ndim() const { return static_cast<int>(n_->shape.size()); }
int64_t Tensor::size() const { return n_->size(); }
float* Tensor::data() { return n_->x.data(); }
const float* Tensor::data() const { return n_->x.data(); }
const std::vector<float>& Tensor::values() const { return n_->x; }
float* Tensor::grad() { return n_->grad_buf(); }
const std::vector<float>& Tensor::grad_values() const { return n_->g; }
bool Tensor::has_grad() const { return !n_->g.empty(); }
void Tensor::zero_grad() {
  if (!n_->g.empty()) std::fill(n_->g.begin(), n_->g.end(), 0.0f);
}
bool Tensor::requires_grad() const { return n_->requires_grad; }
void Tensor::set_requires_grad(bool v) { n_->requires_grad = v; }

float Tensor::item() const {
  if (size() != 1) throw ShapeMismatch("item(): tensor is not scalar");
  return n_->x[0];
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Tensor t = raw(std::move(shape));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::full(Shape shape, float value) {
  Tensor t = raw(std::move(shape));
  std::fill(t.node()->x.begin(), t.node()->x.end(), value);
  return t;
}

Tensor Tensor::scalar(float value) { return full({1}, value); }

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != numel(shape)) {
    throw ShapeMismatch("Tensor::from: data length does not match shape");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->x = std::move(data);
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev, bool requires_grad) {
  Tensor t = raw(std::move(shape));
  for (auto& v : t.node()->x) v = rng.normal_f() * stddev;
  t.set_requires_grad(requires_grad);
  return t;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw BackwardOnNonScalar("backward: loss must be a defined scalar tensor");
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) return;  // nothing reachable needs gradients

  // iterative post-order DFS over grad-requiring nodes
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].node().get();
      ++idx;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-sweep scratch. Leaf gradients accumulate
  // across sweeps: each sweep is computed into a fresh buffer and added once,
  // so repeating backward contributes bitwise-identical terms.
  std::vector<std::pair<Node*, std::vector<float>>> stashed;
  for (Node* n : order) {
    if (n->backward) {
      n->g.assign(n->x.size(), 0.0f);
    } else if (!n->g.empty()) {
      stashed.emplace_back(n, std::move(n->g));
      n->g.clear();
    }
  }
  root->grad_buf()[0] = 1.0f;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }

  for (auto& [n, old] : stashed) {
    float* g = n->grad_buf();
    for (size_t i = 0; i < old.size(); ++i) g[i] += old[i];
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = raw(a.shape());
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
  return attach(out, {a, b}, [](Node& n) {
    const float* go = n.g.data();
    for (int k = 0; k < 2; ++k) {
      if (!wants_grad(n.parents[k])) continue;
      float* gp = n.parents[k].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] += go[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return attach(out, {a, b}, [](Node& n) {
    const float* go = n.g.data();
    if (wants_grad(n.parents[0])) {
      float* gp = n.parents[0].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] += go[i];
    }
    if (wants_grad(n.parents[1])) {
      float* gp = n.parents[1].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] -= go[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return attach(out, {a, b}, [](Node& n) {
    const float* go = n.g.data();
    const float* pa = n.parents[0].data();
    const float* pb = n.parents[1].data();
    if (wants_grad(n.parents[0])) {
      float* gp = n.parents[0].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] += go[i] * pb[i];
    }
    if (wants_grad(n.parents[1])) {
      float* gp = n.parents[1].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] += go[i] * pa[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, float c) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + c;
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) gp[i] += n.g[static_cast<size_t>(i)];
  });
}

Tensor mul_scalar(const Tensor& a, float c) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
  return attach(out, {a}, [c](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) gp[i] += n.g[static_cast<size_t>(i)] * c;
  });
}

Tensor rsub_const(float c, const Tensor& a) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = c - a.data()[i];
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) gp[i] -= n.g[static_cast<size_t>(i)];
  });
}

Tensor reciprocal(const Tensor& a) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = 1.0f / a.data()[i];
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      float y = n.x[static_cast<size_t>(i)];
      gp[i] -= n.g[static_cast<size_t>(i)] * y * y;
    }
  });
}

Tensor relu(const Tensor& a) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = std::max(0.0f, a.data()[i]);
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      if (n.x[static_cast<size_t>(i)] > 0.0f) gp[i] += n.g[static_cast<size_t>(i)];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) {
    float z = a.data()[i];
    out.data()[i] = z >= 0.0f ? 1.0f / (1.0f + std::exp(-z))
                              : std::exp(z) / (1.0f + std::exp(z));
  }
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      float y = n.x[static_cast<size_t>(i)];
      gp[i] += n.g[static_cast<size_t>(i)] * y * (1.0f - y);
    }
  });
}

Tensor tanh_(const Tensor& a) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = std::tanh(a.data()[i]);
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      float y = n.x[static_cast<size_t>(i)];
      gp[i] += n.g[static_cast<size_t>(i)] * (1.0f - y * y);
    }
  });
}

Tensor exp_(const Tensor& a) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = std::exp(a.data()[i]);
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      gp[i] += n.g[static_cast<size_t>(i)] * n.x[static_cast<size_t>(i)];
    }
  });
}

Tensor log_clamp(const Tensor& a, float floor) {
  Tensor out = raw(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) {
    out.data()[i] = std::log(std::max(a.data()[i], floor));
  }
  return attach(out, {a}, [floor](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    const float* px = n.parents[0].data();
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      if (px[i] > floor) gp[i] += n.g[static_cast<size_t>(i)] / px[i];
    }
  });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw ShapeMismatch("scale_by: scale must be scalar");
  Tensor out = raw(a.shape());
  const float k = s.data()[0];
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * k;
  return attach(out, {a, s}, [](Node& n) {
    const float k = n.parents[1].data()[0];
    const float* pa = n.parents[0].data();
    if (wants_grad(n.parents[0])) {
      float* gp = n.parents[0].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] += n.g[static_cast<size_t>(i)] * k;
    }
    if (wants_grad(n.parents[1])) {
      double acc = 0.0;
      for (int64_t i = 0; i < n.size(); ++i) {
        acc += static_cast<double>(n.g[static_cast<size_t>(i)]) * pa[i];
      }
      n.parents[1].node()->grad_buf()[0] += static_cast<float>(acc);
    }
  });
}

Tensor add_bcast0(const Tensor& x, const Tensor& c) {
  if (x.ndim() < 2) throw ShapeMismatch("add_bcast0: x must have a batch axis");
  Shape rest(x.shape().begin() + 1, x.shape().end());
  if (rest != c.shape()) throw ShapeMismatch("add_bcast0: trailing shape mismatch");
  const int64_t inner = c.size();
  const int b = x.dim(0);
  Tensor out = raw(x.shape());
  for (int i = 0; i < b; ++i) {
    const float* px = x.data() + static_cast<int64_t>(i) * inner;
    float* po = out.data() + static_cast<int64_t>(i) * inner;
    for (int64_t j = 0; j < inner; ++j) po[j] = px[j] + c.data()[j];
  }
  return attach(out, {x, c}, [inner, b](Node& n) {
    const float* go = n.g.data();
    if (wants_grad(n.parents[0])) {
      float* gp = n.parents[0].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] += go[i];
    }
    if (wants_grad(n.parents[1])) {
      float* gc = n.parents[1].node()->grad_buf();
      for (int i = 0; i < b; ++i) {
        const float* g = go + static_cast<int64_t>(i) * inner;
        for (int64_t j = 0; j < inner; ++j) gc[j] += g[j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  if (a.ndim() != 2 || b.ndim() != 2) throw ShapeMismatch("matmul: operands must be 2-D");
  const int m = ta ? a.dim(1) : a.dim(0);
  const int ka = ta ? a.dim(0) : a.dim(1);
  const int kb = tb ? b.dim(1) : b.dim(0);
  const int n = tb ? b.dim(0) : b.dim(1);
  if (ka != kb) throw ShapeMismatch("matmul: inner dimensions disagree");

  Tensor out = raw({m, n});
  ConstMatMap A(a.data(), a.dim(0), a.dim(1));
  ConstMatMap B(b.data(), b.dim(0), b.dim(1));
  MatMap C(out.data(), m, n);
  if (!ta && !tb) C.noalias() = A * B;
  else if (ta && !tb) C.noalias() = A.transpose() * B;
  else if (!ta && tb) C.noalias() = A * B.transpose();
  else C.noalias() = A.transpose() * B.transpose();

  return attach(out, {a, b}, [ta, tb, m, n](Node& node) {
    const Tensor& a_ = node.parents[0];
    const Tensor& b_ = node.parents[1];
    ConstMatMap A(a_.data(), a_.dim(0), a_.dim(1));
    ConstMatMap B(b_.data(), b_.dim(0), b_.dim(1));
    ConstMatMap GO(node.g.data(), m, n);
    if (wants_grad(a_)) {
      MatMap GA(a_.node()->grad_buf(), a_.dim(0), a_.dim(1));
      if (!ta && !tb) GA.noalias() += GO * B.transpose();
      else if (ta && !tb) GA.noalias() += B * GO.transpose();
      else if (!ta && tb) GA.noalias() += GO * B;
      else GA.noalias() += B.transpose() * GO.transpose();
    }
    if (wants_grad(b_)) {
      MatMap GB(b_.node()->grad_buf(), b_.dim(0), b_.dim(1));
      if (!ta && !tb) GB.noalias() += A.transpose() * GO;
      else if (ta && !tb) GB.noalias() += A * GO;
      else if (!ta && tb) GB.noalias() += GO.transpose() * A;
      else GB.noalias() += GO.transpose() * A.transpose();
    }
  });
}

Tensor add_bias_rows(const Tensor& y, const Tensor& b) {
  if (y.ndim() != 2 || b.ndim() != 1 || y.dim(1) != b.dim(0)) {
    throw ShapeMismatch("add_bias_rows: expected [R,C] + [C]");
  }
  const int rows = y.dim(0), cols = y.dim(1);
  Tensor out = raw(y.shape());
  for (int r = 0; r < rows; ++r) {
    const float* py = y.data() + static_cast<int64_t>(r) * cols;
    float* po = out.data() + static_cast<int64_t>(r) * cols;
    for (int c = 0; c < cols; ++c) po[c] = py[c] + b.data()[c];
  }
  return attach(out, {y, b}, [rows, cols](Node& n) {
    const float* go = n.g.data();
    if (wants_grad(n.parents[0])) {
      float* gp = n.parents[0].node()->grad_buf();
      for (int64_t i = 0; i < n.size(); ++i) gp[i] += go[i];
    }
    if (wants_grad(n.parents[1])) {
      float* gb = n.parents[1].node()->grad_buf();
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) gb[c] += go[static_cast<int64_t>(r) * cols + c];
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_bias_rows(matmul(x, w, false, true), b);
}

Tensor softmax_rows(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeMismatch("softmax_rows: expected 2-D input");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out = raw(a.shape());
  for (int r = 0; r < rows; ++r) {
    const float* pa = a.data() + static_cast<int64_t>(r) * cols;
    float* po = out.data() + static_cast<int64_t>(r) * cols;
    float mx = pa[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, pa[c]);
    double denom = 0.0;
    for (int c = 0; c < cols; ++c) denom += std::exp(static_cast<double>(pa[c] - mx));
    for (int c = 0; c < cols; ++c) {
      po[c] = static_cast<float>(std::exp(static_cast<double>(pa[c] - mx)) / denom);
    }
  }
  return attach(out, {a}, [rows, cols](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int r = 0; r < rows; ++r) {
      const float* y = n.x.data() + static_cast<int64_t>(r) * cols;
      const float* go = n.g.data() + static_cast<int64_t>(r) * cols;
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += static_cast<double>(go[c]) * y[c];
      float* g = gp + static_cast<int64_t>(r) * cols;
      for (int c = 0; c < cols; ++c) {
        g[c] += y[c] * (go[c] - static_cast<float>(dot));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  Tensor out = raw({1});
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += a.data()[i];
  out.data()[0] = static_cast<float>(acc);
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    const float g = n.g[0];
    for (int64_t i = 0; i < n.parents[0].size(); ++i) gp[i] += g;
  });
}

Tensor mean_all(const Tensor& a) {
  Tensor out = raw({1});
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += a.data()[i];
  out.data()[0] = static_cast<float>(acc / static_cast<double>(a.size()));
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    const float g = n.g[0] / static_cast<float>(n.parents[0].size());
    for (int64_t i = 0; i < n.parents[0].size(); ++i) gp[i] += g;
  });
}

Tensor mean_axis1(const Tensor& a) {
  if (a.ndim() != 3) throw ShapeMismatch("mean_axis1: expected 3-D input");
  const int A = a.dim(0), M = a.dim(1), N = a.dim(2);
  Tensor out = raw({A, N});
  for (int i = 0; i < A; ++i) {
    for (int k = 0; k < N; ++k) {
      double acc = 0.0;
      for (int j = 0; j < M; ++j) {
        acc += a.data()[(static_cast<int64_t>(i) * M + j) * N + k];
      }
      out.data()[static_cast<int64_t>(i) * N + k] = static_cast<float>(acc / M);
    }
  }
  return attach(out, {a}, [A, M, N](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int i = 0; i < A; ++i) {
      for (int k = 0; k < N; ++k) {
        const float g = n.g[static_cast<int64_t>(i) * N + k] / static_cast<float>(M);
        for (int j = 0; j < M; ++j) {
          gp[(static_cast<int64_t>(i) * M + j) * N + k] += g;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) throw ShapeMismatch("reshape: element count mismatch");
  Tensor out = raw(std::move(shape));
  std::copy(a.data(), a.data() + a.size(), out.data());
  return attach(out, {a}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) gp[i] += n.g[static_cast<size_t>(i)];
  });
}

namespace {

// split a shape at `axis` into (outer, extent, inner) strides
void axis_strides(const Shape& s, int axis, int64_t& outer, int64_t& extent, int64_t& inner) {
  outer = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  extent = s[static_cast<size_t>(axis)];
  inner = 1;
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace

Tensor narrow(const Tensor& a, int axis, int start, int len) {
  if (axis < 0 || axis >= a.ndim()) throw ShapeMismatch("narrow: bad axis");
  if (start < 0 || len <= 0 || start + len > a.dim(axis)) {
    throw ShapeMismatch("narrow: slice out of bounds");
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  int64_t outer, extent, inner;
  axis_strides(a.shape(), axis, outer, extent, inner);

  Tensor out = raw(std::move(out_shape));
  for (int64_t o = 0; o < outer; ++o) {
    const float* src = a.data() + (o * extent + start) * inner;
    float* dst = out.data() + o * len * inner;
    std::copy(src, src + static_cast<int64_t>(len) * inner, dst);
  }
  return attach(out, {a}, [outer, extent, inner, start, len](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t o = 0; o < outer; ++o) {
      const float* src = n.g.data() + o * len * inner;
      float* dst = gp + (o * extent + start) * inner;
      for (int64_t i = 0; i < static_cast<int64_t>(len) * inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("concat: no inputs");
  const Shape& base = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(base.size())) throw ShapeMismatch("concat: bad axis");
  int total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != static_cast<int>(base.size())) throw ShapeMismatch("concat: rank mismatch");
    for (int i = 0; i < p.ndim(); ++i) {
      if (i != axis && p.dim(i) != base[static_cast<size_t>(i)]) {
        throw ShapeMismatch("concat: off-axis extents differ");
      }
    }
    total += p.dim(axis);
  }
  Shape out_shape = base;
  out_shape[static_cast<size_t>(axis)] = total;
  int64_t outer, extent, inner;
  axis_strides(out_shape, axis, outer, extent, inner);

  Tensor out = raw(out_shape);
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const int len = p.dim(axis);
    for (int64_t o = 0; o < outer; ++o) {
      const float* src = p.data() + o * len * inner;
      float* dst = out.data() + (o * extent + off) * inner;
      std::copy(src, src + static_cast<int64_t>(len) * inner, dst);
    }
    off += len;
  }
  return attach(out, parts, [outer, extent, inner, offsets](Node& n) {
    for (size_t k = 0; k < n.parents.size(); ++k) {
      if (!wants_grad(n.parents[k])) continue;
      float* gp = n.parents[k].node()->grad_buf();
      const int64_t part_len = n.parents[k].size() / (outer * inner);
      for (int64_t o = 0; o < outer; ++o) {
        const float* src = n.g.data() + (o * extent + offsets[k]) * inner;
        float* dst = gp + o * part_len * inner;
        for (int64_t i = 0; i < part_len * inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor permute_to_seq(const Tensor& a) {
  if (a.ndim() != 4) throw ShapeMismatch("permute_to_seq: expected [B,C,F,T]");
  const int B = a.dim(0), C = a.dim(1), F = a.dim(2), T = a.dim(3);
  Tensor out = raw({B, T, C * F});
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      for (int f = 0; f < F; ++f) {
        const float* src = a.data() + ((static_cast<int64_t>(b) * C + c) * F + f) * T;
        for (int t = 0; t < T; ++t) {
          out.data()[(static_cast<int64_t>(b) * T + t) * (C * F) + c * F + f] = src[t];
        }
      }
    }
  }
  return attach(out, {a}, [B, C, F, T](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        for (int f = 0; f < F; ++f) {
          float* dst = gp + ((static_cast<int64_t>(b) * C + c) * F + f) * T;
          for (int t = 0; t < T; ++t) {
            dst[t] += n.g[(static_cast<int64_t>(b) * T + t) * (C * F) + c * F + f];
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

namespace {

struct Conv2dDims {
  int b, ci, h, w, co, kh, kw, sh, sw, ph, pw, oh, ow;
};

Conv2dDims conv2d_dims(const Tensor& x, const Tensor& w, int sh, int sw, int ph, int pw) {
  if (x.ndim() != 4 || w.ndim() != 4) throw ShapeMismatch("conv2d: expected [B,C,H,W] and [Co,Ci,kh,kw]");
  Conv2dDims d{};
  d.b = x.dim(0);
  d.ci = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.co = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.sh = sh;
  d.sw = sw;
  d.ph = ph;
  d.pw = pw;
  if (w.dim(1) != d.ci) throw ShapeMismatch("conv2d: channel mismatch");
  if (sh <= 0 || sw <= 0 || ph < 0 || pw < 0) throw ShapeMismatch("conv2d: bad stride/padding");
  if (d.h + 2 * ph < d.kh || d.w + 2 * pw < d.kw) throw ShapeMismatch("conv2d: kernel exceeds padded input");
  d.oh = (d.h + 2 * ph - d.kh) / sh + 1;
  d.ow = (d.w + 2 * pw - d.kw) / sw + 1;
  return d;
}

// col is [Ci*kh*kw, oh*ow]
void im2col(const float* x, const Conv2dDims& d, float* col) {
  const int64_t cols = static_cast<int64_t>(d.oh) * d.ow;
  for (int c = 0; c < d.ci; ++c) {
    for (int ki = 0; ki < d.kh; ++ki) {
      for (int kj = 0; kj < d.kw; ++kj) {
        float* row = col + ((static_cast<int64_t>(c) * d.kh + ki) * d.kw + kj) * cols;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.sh - d.ph + ki;
          if (ih < 0 || ih >= d.h) {
            std::fill(row + static_cast<int64_t>(oh) * d.ow, row + (static_cast<int64_t>(oh) + 1) * d.ow, 0.0f);
            continue;
          }
          const float* src = x + (static_cast<int64_t>(c) * d.h + ih) * d.w;
          float* dst = row + static_cast<int64_t>(oh) * d.ow;
          for (int ow = 0; ow < d.ow; ++ow) {
            const int iw = ow * d.sw - d.pw + kj;
            dst[ow] = (iw >= 0 && iw < d.w) ? src[iw] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const Conv2dDims& d, float* gx) {
  const int64_t cols = static_cast<int64_t>(d.oh) * d.ow;
  for (int c = 0; c < d.ci; ++c) {
    for (int ki = 0; ki < d.kh; ++ki) {
      for (int kj = 0; kj < d.kw; ++kj) {
        const float* row = col + ((static_cast<int64_t>(c) * d.kh + ki) * d.kw + kj) * cols;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.sh - d.ph + ki;
          if (ih < 0 || ih >= d.h) continue;
          float* dst = gx + (static_cast<int64_t>(c) * d.h + ih) * d.w;
          const float* src = row + static_cast<int64_t>(oh) * d.ow;
          for (int ow = 0; ow < d.ow; ++ow) {
            const int iw = ow * d.sw - d.pw + kj;
            if (iw >= 0 && iw < d.w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride_h, int stride_w, int pad_h, int pad_w) {
  const Conv2dDims d = conv2d_dims(x, w, stride_h, stride_w, pad_h, pad_w);
  const int64_t k = static_cast<int64_t>(d.ci) * d.kh * d.kw;
  const int64_t cols = static_cast<int64_t>(d.oh) * d.ow;

  Tensor out = raw({d.b, d.co, d.oh, d.ow});
  std::vector<float> col(static_cast<size_t>(k * cols));
  ConstMatMap W(w.data(), d.co, k);
  for (int b = 0; b < d.b; ++b) {
    im2col(x.data() + static_cast<int64_t>(b) * d.ci * d.h * d.w, d, col.data());
    ConstMatMap Col(col.data(), k, cols);
    MatMap O(out.data() + static_cast<int64_t>(b) * d.co * cols, d.co, cols);
    O.noalias() = W * Col;
  }

  return attach(out, {x, w}, [d, k, cols](Node& n) {
    const Tensor& x_ = n.parents[0];
    const Tensor& w_ = n.parents[1];
    const bool need_x = wants_grad(x_);
    const bool need_w = wants_grad(w_);
    std::vector<float> col(static_cast<size_t>(k * cols));
    ConstMatMap W(w_.data(), d.co, k);
    for (int b = 0; b < d.b; ++b) {
      ConstMatMap GO(n.g.data() + static_cast<int64_t>(b) * d.co * cols, d.co, cols);
      if (need_w) {
        im2col(x_.data() + static_cast<int64_t>(b) * d.ci * d.h * d.w, d, col.data());
        ConstMatMap Col(col.data(), k, cols);
        MatMap GW(w_.node()->grad_buf(), d.co, k);
        GW.noalias() += GO * Col.transpose();
      }
      if (need_x) {
        MatMap ColG(col.data(), k, cols);
        ColG.noalias() = W.transpose() * GO;
        col2im_add(col.data(), d,
                   x_.node()->grad_buf() + static_cast<int64_t>(b) * d.ci * d.h * d.w);
      }
    }
  });
}

namespace {

struct Conv1dDims {
  int b, ci, l, co, k, s, pl, pr, ol;
};

Conv1dDims conv1d_dims(const Tensor& x, const Tensor& w, int s, int pl, int pr) {
  if (x.ndim() != 3 || w.ndim() != 3) throw ShapeMismatch("conv1d: expected [B,C,L] and [Co,Ci,k]");
  Conv1dDims d{};
  d.b = x.dim(0);
  d.ci = x.dim(1);
  d.l = x.dim(2);
  d.co = w.dim(0);
  d.k = w.dim(2);
  d.s = s;
  d.pl = pl;
  d.pr = pr;
  if (w.dim(1) != d.ci) throw ShapeMismatch("conv1d: channel mismatch");
  if (s <= 0 || pl < 0 || pr < 0) throw ShapeMismatch("conv1d: bad stride/padding");
  if (d.l + pl + pr < d.k) throw ShapeMismatch("conv1d: kernel exceeds padded input");
  d.ol = (d.l + pl + pr - d.k) / s + 1;
  return d;
}

void im2col_1d(const float* x, const Conv1dDims& d, float* col) {
  for (int c = 0; c < d.ci; ++c) {
    for (int ki = 0; ki < d.k; ++ki) {
      float* row = col + (static_cast<int64_t>(c) * d.k + ki) * d.ol;
      const float* src = x + static_cast<int64_t>(c) * d.l;
      for (int o = 0; o < d.ol; ++o) {
        const int i = o * d.s - d.pl + ki;
        row[o] = (i >= 0 && i < d.l) ? src[i] : 0.0f;
      }
    }
  }
}

void col2im_1d_add(const float* col, const Conv1dDims& d, float* gx) {
  for (int c = 0; c < d.ci; ++c) {
    for (int ki = 0; ki < d.k; ++ki) {
      const float* row = col + (static_cast<int64_t>(c) * d.k + ki) * d.ol;
      float* dst = gx + static_cast<int64_t>(c) * d.l;
      for (int o = 0; o < d.ol; ++o) {
        const int i = o * d.s - d.pl + ki;
        if (i >= 0 && i < d.l) dst[i] += row[o];
      }
    }
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, int stride, int pad_l, int pad_r) {
  const Conv1dDims d = conv1d_dims(x, w, stride, pad_l, pad_r);
  const int64_t k = static_cast<int64_t>(d.ci) * d.k;

  Tensor out = raw({d.b, d.co, d.ol});
  std::vector<float> col(static_cast<size_t>(k * d.ol));
  ConstMatMap W(w.data(), d.co, k);
  for (int b = 0; b < d.b; ++b) {
    im2col_1d(x.data() + static_cast<int64_t>(b) * d.ci * d.l, d, col.data());
    ConstMatMap Col(col.data(), k, d.ol);
    MatMap O(out.data() + static_cast<int64_t>(b) * d.co * d.ol, d.co, d.ol);
    O.noalias() = W * Col;
  }

  return attach(out, {x, w}, [d, k](Node& n) {
    const Tensor& x_ = n.parents[0];
    const Tensor& w_ = n.parents[1];
    const bool need_x = wants_grad(x_);
    const bool need_w = wants_grad(w_);
    std::vector<float> col(static_cast<size_t>(k * d.ol));
    ConstMatMap W(w_.data(), d.co, k);
    for (int b = 0; b < d.b; ++b) {
      ConstMatMap GO(n.g.data() + static_cast<int64_t>(b) * d.co * d.ol, d.co, d.ol);
      if (need_w) {
        im2col_1d(x_.data() + static_cast<int64_t>(b) * d.ci * d.l, d, col.data());
        ConstMatMap Col(col.data(), k, d.ol);
        MatMap GW(w_.node()->grad_buf(), d.co, k);
        GW.noalias() += GO * Col.transpose();
      }
      if (need_x) {
        MatMap ColG(col.data(), k, d.ol);
        ColG.noalias() = W.transpose() * GO;
        col2im_1d_add(col.data(), d, x_.node()->grad_buf() + static_cast<int64_t>(b) * d.ci * d.l);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

Tensor max_pool2d(const Tensor& x, int kh, int kw, int sh, int sw) {
  if (x.ndim() != 4) throw ShapeMismatch("max_pool2d: expected [B,C,H,W]");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (kh <= 0 || kw <= 0 || sh <= 0 || sw <= 0) throw ShapeMismatch("max_pool2d: bad kernel/stride");
  if (kh > H || kw > W) throw ShapeMismatch("max_pool2d: kernel exceeds input");
  const int OH = (H - kh) / sh + 1;
  const int OW = (W - kw) / sw + 1;

  Tensor out = raw({B, C, OH, OW});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.size()));
  int64_t oi = 0;
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const float* plane = x.data() + (static_cast<int64_t>(b) * C + c) * H * W;
      const int64_t base = (static_cast<int64_t>(b) * C + c) * H * W;
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow, ++oi) {
          float best = -std::numeric_limits<float>::infinity();
          int64_t best_idx = -1;
          for (int i = 0; i < kh; ++i) {
            const int ih = oh * sh + i;
            for (int j = 0; j < kw; ++j) {
              const int iw = ow * sw + j;
              const float v = plane[static_cast<int64_t>(ih) * W + iw];
              if (v > best) {  // ties keep the lowest flat index
                best = v;
                best_idx = base + static_cast<int64_t>(ih) * W + iw;
              }
            }
          }
          out.data()[oi] = best;
          (*arg)[static_cast<size_t>(oi)] = best_idx;
        }
      }
    }
  }
  return attach(out, {x}, [arg](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      gp[(*arg)[static_cast<size_t>(i)]] += n.g[static_cast<size_t>(i)];
    }
  });
}

Tensor max_pool1d(const Tensor& x, int k, int s) {
  if (x.ndim() != 3) throw ShapeMismatch("max_pool1d: expected [B,C,L]");
  const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
  if (k <= 0 || s <= 0 || k > L) throw ShapeMismatch("max_pool1d: bad kernel/stride");
  const int OL = (L - k) / s + 1;

  Tensor out = raw({B, C, OL});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.size()));
  int64_t oi = 0;
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const float* row = x.data() + (static_cast<int64_t>(b) * C + c) * L;
      const int64_t base = (static_cast<int64_t>(b) * C + c) * L;
      for (int o = 0; o < OL; ++o, ++oi) {
        float best = -std::numeric_limits<float>::infinity();
        int64_t best_idx = -1;
        for (int i = 0; i < k; ++i) {
          const float v = row[o * s + i];
          if (v > best) {
            best = v;
            best_idx = base + o * s + i;
          }
        }
        out.data()[oi] = best;
        (*arg)[static_cast<size_t>(oi)] = best_idx;
      }
    }
  }
  return attach(out, {x}, [arg](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      gp[(*arg)[static_cast<size_t>(i)]] += n.g[static_cast<size_t>(i)];
    }
  });
}

Tensor global_max_pool(const Tensor& x) {
  if (x.ndim() < 3) throw ShapeMismatch("global_max_pool: expected [B,C,spatial...]");
  const int B = x.dim(0), C = x.dim(1);
  const int64_t S = x.size() / (static_cast<int64_t>(B) * C);
  Tensor out = raw({B, C});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(B) * C);
  for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
    const float* src = x.data() + bc * S;
    float best = src[0];
    int64_t best_i = 0;
    for (int64_t i = 1; i < S; ++i) {
      if (src[i] > best) {
        best = src[i];
        best_i = i;
      }
    }
    out.data()[bc] = best;
    (*arg)[static_cast<size_t>(bc)] = bc * S + best_i;
  }
  return attach(out, {x}, [arg](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      gp[(*arg)[static_cast<size_t>(i)]] += n.g[static_cast<size_t>(i)];
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() < 3) throw ShapeMismatch("global_avg_pool: expected [B,C,spatial...]");
  const int B = x.dim(0), C = x.dim(1);
  const int64_t S = x.size() / (static_cast<int64_t>(B) * C);
  Tensor out = raw({B, C});
  for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
    const float* src = x.data() + bc * S;
    double acc = 0.0;
    for (int64_t i = 0; i < S; ++i) acc += src[i];
    out.data()[bc] = static_cast<float>(acc / static_cast<double>(S));
  }
  return attach(out, {x}, [S](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t bc = 0; bc < n.size(); ++bc) {
      const float g = n.g[static_cast<size_t>(bc)] / static_cast<float>(S);
      float* dst = gp + bc * S;
      for (int64_t i = 0; i < S; ++i) dst[i] += g;
    }
  });
}

Tensor channel_scale(const Tensor& x, const Tensor& g) {
  if (x.ndim() < 3 || g.ndim() != 2 || g.dim(0) != x.dim(0) || g.dim(1) != x.dim(1)) {
    throw ShapeMismatch("channel_scale: expected x [B,C,...] and gate [B,C]");
  }
  const int64_t BC = static_cast<int64_t>(x.dim(0)) * x.dim(1);
  const int64_t S = x.size() / BC;
  Tensor out = raw(x.shape());
  for (int64_t bc = 0; bc < BC; ++bc) {
    const float k = g.data()[bc];
    const float* src = x.data() + bc * S;
    float* dst = out.data() + bc * S;
    for (int64_t i = 0; i < S; ++i) dst[i] = src[i] * k;
  }
  return attach(out, {x, g}, [BC, S](Node& n) {
    const float* px = n.parents[0].data();
    const float* pg = n.parents[1].data();
    if (wants_grad(n.parents[0])) {
      float* gx = n.parents[0].node()->grad_buf();
      for (int64_t bc = 0; bc < BC; ++bc) {
        const float k = pg[bc];
        for (int64_t i = 0; i < S; ++i) gx[bc * S + i] += n.g[static_cast<size_t>(bc * S + i)] * k;
      }
    }
    if (wants_grad(n.parents[1])) {
      float* gg = n.parents[1].node()->grad_buf();
      for (int64_t bc = 0; bc < BC; ++bc) {
        double acc = 0.0;
        for (int64_t i = 0; i < S; ++i) {
          acc += static_cast<double>(n.g[static_cast<size_t>(bc * S + i)]) * px[bc * S + i];
        }
        gg[bc] += static_cast<float>(acc);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// batch norm / layer norm / dropout / loss
// ---------------------------------------------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, bool training, float momentum, float eps) {
  if (x.ndim() < 2) throw ShapeMismatch("batch_norm: expected [B,C,...]");
  const int B = x.dim(0), C = x.dim(1);
  if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 || beta.dim(0) != C) {
    throw ShapeMismatch("batch_norm: affine parameter shape mismatch");
  }
  const int64_t S = x.size() / (static_cast<int64_t>(B) * C);
  const int64_t n = static_cast<int64_t>(B) * S;
  if (stats.running_mean.size() != static_cast<size_t>(C)) {
    stats.running_mean.assign(static_cast<size_t>(C), 0.0f);
    stats.running_var.assign(static_cast<size_t>(C), 1.0f);
  }

  auto mean = std::make_shared<std::vector<float>>(static_cast<size_t>(C));
  auto invstd = std::make_shared<std::vector<float>>(static_cast<size_t>(C));

  if (training) {
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int b = 0; b < B; ++b) {
        const float* src = x.data() + (static_cast<int64_t>(b) * C + c) * S;
        for (int64_t i = 0; i < S; ++i) acc += src[i];
      }
      const double m = acc / static_cast<double>(n);
      double var = 0.0;
      for (int b = 0; b < B; ++b) {
        const float* src = x.data() + (static_cast<int64_t>(b) * C + c) * S;
        for (int64_t i = 0; i < S; ++i) {
          const double d = src[i] - m;
          var += d * d;
        }
      }
      var /= static_cast<double>(n);
      (*mean)[static_cast<size_t>(c)] = static_cast<float>(m);
      (*invstd)[static_cast<size_t>(c)] = static_cast<float>(1.0 / std::sqrt(var + eps));
      const double unbiased = n > 1 ? var * static_cast<double>(n) / (n - 1) : var;
      stats.running_mean[static_cast<size_t>(c)] =
          (1.0f - momentum) * stats.running_mean[static_cast<size_t>(c)] + momentum * static_cast<float>(m);
      stats.running_var[static_cast<size_t>(c)] =
          (1.0f - momentum) * stats.running_var[static_cast<size_t>(c)] + momentum * static_cast<float>(unbiased);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      (*mean)[static_cast<size_t>(c)] = stats.running_mean[static_cast<size_t>(c)];
      (*invstd)[static_cast<size_t>(c)] =
          1.0f / std::sqrt(stats.running_var[static_cast<size_t>(c)] + eps);
    }
  }

  Tensor out = raw(x.shape());
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const float m = (*mean)[static_cast<size_t>(c)];
      const float is = (*invstd)[static_cast<size_t>(c)];
      const float ga = gamma.data()[c];
      const float be = beta.data()[c];
      const float* src = x.data() + (static_cast<int64_t>(b) * C + c) * S;
      float* dst = out.data() + (static_cast<int64_t>(b) * C + c) * S;
      for (int64_t i = 0; i < S; ++i) dst[i] = (src[i] - m) * is * ga + be;
    }
  }

  return attach(out, {x, gamma, beta}, [B, C, S, n, mean, invstd, training](Node& node) {
    const Tensor& x_ = node.parents[0];
    const Tensor& gamma_ = node.parents[1];
    const bool need_x = wants_grad(x_);
    const bool need_g = wants_grad(gamma_);
    const bool need_b = wants_grad(node.parents[2]);

    for (int c = 0; c < C; ++c) {
      const float m = (*mean)[static_cast<size_t>(c)];
      const float is = (*invstd)[static_cast<size_t>(c)];
      const float ga = gamma_.data()[c];
      double sum_go = 0.0, sum_go_xhat = 0.0;
      for (int b = 0; b < B; ++b) {
        const int64_t off = (static_cast<int64_t>(b) * C + c) * S;
        const float* go = node.g.data() + off;
        const float* px = x_.data() + off;
        for (int64_t i = 0; i < S; ++i) {
          sum_go += go[i];
          sum_go_xhat += static_cast<double>(go[i]) * (px[i] - m) * is;
        }
      }
      if (need_b) node.parents[2].node()->grad_buf()[c] += static_cast<float>(sum_go);
      if (need_g) gamma_.node()->grad_buf()[c] += static_cast<float>(sum_go_xhat);
      if (need_x) {
        float* gx = x_.node()->grad_buf();
        const float mean_go = static_cast<float>(sum_go / static_cast<double>(n));
        const float mean_go_xhat = static_cast<float>(sum_go_xhat / static_cast<double>(n));
        for (int b = 0; b < B; ++b) {
          const int64_t off = (static_cast<int64_t>(b) * C + c) * S;
          const float* go = node.g.data() + off;
          const float* px = x_.data() + off;
          float* dst = gx + off;
          if (training) {
            for (int64_t i = 0; i < S; ++i) {
              const float xhat = (px[i] - m) * is;
              dst[i] += ga * is * (go[i] - mean_go - xhat * mean_go_xhat);
            }
          } else {
            for (int64_t i = 0; i < S; ++i) dst[i] += ga * is * go[i];
          }
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  if (x.ndim() < 1) throw ShapeMismatch("layer_norm: empty shape");
  const int D = x.dim(x.ndim() - 1);
  if (gamma.ndim() != 1 || gamma.dim(0) != D || beta.ndim() != 1 || beta.dim(0) != D) {
    throw ShapeMismatch("layer_norm: affine parameter shape mismatch");
  }
  const int64_t rows = x.size() / D;

  auto mean = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  auto invstd = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  Tensor out = raw(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const float* src = x.data() + r * D;
    double acc = 0.0;
    for (int i = 0; i < D; ++i) acc += src[i];
    const double m = acc / D;
    double var = 0.0;
    for (int i = 0; i < D; ++i) {
      const double d = src[i] - m;
      var += d * d;
    }
    var /= D;
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*mean)[static_cast<size_t>(r)] = static_cast<float>(m);
    (*invstd)[static_cast<size_t>(r)] = is;
    float* dst = out.data() + r * D;
    for (int i = 0; i < D; ++i) {
      dst[i] = (src[i] - static_cast<float>(m)) * is * gamma.data()[i] + beta.data()[i];
    }
  }

  return attach(out, {x, gamma, beta}, [rows, D, mean, invstd](Node& node) {
    const Tensor& x_ = node.parents[0];
    const Tensor& gamma_ = node.parents[1];
    const bool need_x = wants_grad(x_);
    const bool need_g = wants_grad(gamma_);
    const bool need_b = wants_grad(node.parents[2]);

    for (int64_t r = 0; r < rows; ++r) {
      const float m = (*mean)[static_cast<size_t>(r)];
      const float is = (*invstd)[static_cast<size_t>(r)];
      const float* go = node.g.data() + r * D;
      const float* px = x_.data() + r * D;
      if (need_g || need_b) {
        for (int i = 0; i < D; ++i) {
          if (need_g) gamma_.node()->grad_buf()[i] += go[i] * (px[i] - m) * is;
          if (need_b) node.parents[2].node()->grad_buf()[i] += go[i];
        }
      }
      if (need_x) {
        double sum_gh = 0.0, sum_gh_xhat = 0.0;
        for (int i = 0; i < D; ++i) {
          const double gh = static_cast<double>(go[i]) * gamma_.data()[i];
          sum_gh += gh;
          sum_gh_xhat += gh * (px[i] - m) * is;
        }
        const float mg = static_cast<float>(sum_gh / D);
        const float mgx = static_cast<float>(sum_gh_xhat / D);
        float* gx = x_.node()->grad_buf() + r * D;
        for (int i = 0; i < D; ++i) {
          const float xhat = (px[i] - m) * is;
          const float gh = go[i] * gamma_.data()[i];
          gx[i] += is * (gh - mg - xhat * mgx);
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, float p, bool training, uint64_t seed) {
  if (p < 0.0f || p >= 1.0f) throw InvalidConfig("dropout: p must be in [0, 1)");
  if (!training || p == 0.0f) return x;
  auto mask = std::make_shared<std::vector<float>>(static_cast<size_t>(x.size()));
  Rng rng(seed);
  const float keep_scale = 1.0f / (1.0f - p);
  Tensor out = raw(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    const float m = rng.uniform() < p ? 0.0f : keep_scale;
    (*mask)[static_cast<size_t>(i)] = m;
    out.data()[i] = x.data()[i] * m;
  }
  return attach(out, {x}, [mask](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    float* gp = n.parents[0].node()->grad_buf();
    for (int64_t i = 0; i < n.size(); ++i) {
      gp[i] += n.g[static_cast<size_t>(i)] * (*mask)[static_cast<size_t>(i)];
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  check_same_shape(logits, targets, "bce_with_logits");
  Tensor out = raw({1});
  double acc = 0.0;
  for (int64_t i = 0; i < logits.size(); ++i) {
    const double z = logits.data()[i];
    const double t = targets.data()[i];
    acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
  }
  out.data()[0] = static_cast<float>(acc / static_cast<double>(logits.size()));
  return attach(out, {logits, targets}, [](Node& n) {
    if (!wants_grad(n.parents[0])) return;
    const Tensor& z_ = n.parents[0];
    const Tensor& t_ = n.parents[1];
    const float g = n.g[0] / static_cast<float>(z_.size());
    float* gp = z_.node()->grad_buf();
    for (int64_t i = 0; i < z_.size(); ++i) {
      const float z = z_.data()[i];
      const float s = z >= 0.0f ? 1.0f / (1.0f + std::exp(-z)) : std::exp(z) / (1.0f + std::exp(z));
      gp[i] += g * (s - t_.data()[i]);
    }
  });
}

}  // namespace tagbench::ad
