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

#include <cmath>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include "tagbench/audio.hpp"
#include "tagbench/rng.hpp"
#include "tagbench/tensor.hpp"

namespace testutil {

using tagbench::AudioClip;
using tagbench::Rng;
namespace ad = tagbench::ad;

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() /
           ("tagbench_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p;
}

inline AudioClip sine_clip(double freq, double seconds, int rate, double amp = 0.5,
                           const std::string& id = "sine") {
  const auto n = static_cast<size_t>(seconds * rate);
  std::vector<float> s(n);
  for (size_t i = 0; i < n; ++i) {
    s[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate));
  }
  return tagbench::make_clip(std::move(s), rate, id);
}

inline double rms(const std::vector<float>& x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// ---------------------------------------------------------------------------
// naive DFT oracle, independent of the library FFT
// ---------------------------------------------------------------------------

// magnitude of bin k of an N-point DFT over x[0..N)
inline double dft_bin_mag(const float* x, int n, int k) {
  double re = 0.0, im = 0.0;
  const double w = -2.0 * M_PI * k / n;
  // incremental rotation keeps this O(n) without per-sample trig calls
  const double cs = std::cos(w), sn = std::sin(w);
  double cr = 1.0, ci = 0.0;
  for (int i = 0; i < n; ++i) {
    re += x[i] * cr;
    im += x[i] * ci;
    const double nr = cr * cs - ci * sn;
    ci = cr * sn + ci * cs;
    cr = nr;
  }
  return std::sqrt(re * re + im * im);
}

// dominant frequency of a clip via a brute-force DFT on a centered window
inline double peak_frequency(const AudioClip& clip, int fft_size = 8192) {
  const int64_t len = clip.length();
  const int n = static_cast<int>(std::min<int64_t>(fft_size, len));
  const int64_t start = (len - n) / 2;
  const float* x = clip.samples.data() + start;
  double best = -1.0;
  int best_k = 0;
  for (int k = 1; k < n / 2; ++k) {
    const double m = dft_bin_mag(x, n, k);
    if (m > best) {
      best = m;
      best_k = k;
    }
  }
  return static_cast<double>(best_k) * clip.sample_rate / n;
}

inline double bin_width(const AudioClip& clip, int fft_size = 8192) {
  const int n = static_cast<int>(std::min<int64_t>(fft_size, clip.length()));
  return static_cast<double>(clip.sample_rate) / n;
}

// ---------------------------------------------------------------------------
// central finite-difference gradient checker
// ---------------------------------------------------------------------------

struct GradCheckResult {
  bool ok = true;
  double worst_err = 0.0;
  std::string detail;
};

// fn() must rebuild the graph from the current contents of `inputs`.
// Relative tolerance with a small absolute floor for near-zero entries.
inline GradCheckResult check_gradients(const std::function<ad::Tensor()>& fn,
                                       std::vector<ad::Tensor> inputs, double h = 1e-2,
                                       double rtol = 1e-3, double atol = 1e-4) {
  GradCheckResult res;
  for (auto& t : inputs) t.zero_grad();
  ad::Tensor loss = fn();
  ad::backward(loss);

  std::vector<std::vector<float>> analytic;
  for (auto& t : inputs) {
    analytic.push_back(t.has_grad() ? t.grad_values() : std::vector<float>(t.size(), 0.0f));
  }

  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    ad::Tensor& t = inputs[ti];
    for (int64_t i = 0; i < t.size(); ++i) {
      const float saved = t.data()[i];
      t.data()[i] = saved + static_cast<float>(h);
      const double fp = fn().item();
      t.data()[i] = saved - static_cast<float>(h);
      const double fm = fn().item();
      t.data()[i] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[ti][static_cast<size_t>(i)];
      const double err = std::fabs(fd - an);
      const double tol = atol + rtol * std::max(std::fabs(fd), std::fabs(an));
      if (err > tol) {
        res.ok = false;
        if (err > res.worst_err) {
          res.detail = "input " + std::to_string(ti) + " elem " + std::to_string(i) +
                       ": fd=" + std::to_string(fd) + " analytic=" + std::to_string(an);
        }
      }
      res.worst_err = std::max(res.worst_err, err);
    }
  }
  return res;
}

// random tensor with entries in [-1,1], optionally pushed away from zero so
// kinked ops (relu, max pools) stay locally linear under the FD step
inline ad::Tensor rand_tensor(ad::Shape shape, Rng& rng, bool requires_grad = true,
                              double kink_margin = 0.0) {
  std::vector<float> data(static_cast<size_t>(ad::numel(shape)));
  for (auto& v : data) {
    double x = rng.uniform(-1.0, 1.0);
    if (kink_margin > 0.0 && std::fabs(x) < kink_margin) {
      x = x >= 0.0 ? x + kink_margin : x - kink_margin;
    }
    v = static_cast<float>(x);
  }
  return ad::Tensor::from(std::move(shape), std::move(data), requires_grad);
}

// entries are a shuffled equally spaced grid: pairwise gaps stay larger than
// the FD step so pooling argmaxes cannot flip
inline ad::Tensor distinct_tensor(ad::Shape shape, Rng& rng, double gap = 0.04,
                                  bool requires_grad = true) {
  const int64_t n = ad::numel(shape);
  std::vector<float> data(static_cast<size_t>(n));
  std::vector<int64_t> ranks(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) ranks[static_cast<size_t>(i)] = i;
  for (int64_t i = n; i > 1; --i) {
    const int64_t j = rng.uniform_int(0, i - 1);
    std::swap(ranks[static_cast<size_t>(i - 1)], ranks[static_cast<size_t>(j)]);
  }
  const double mid = static_cast<double>(n - 1) / 2.0;
  for (int64_t i = 0; i < n; ++i) {
    data[static_cast<size_t>(i)] = static_cast<float>((ranks[static_cast<size_t>(i)] - mid) * gap);
  }
  return ad::Tensor::from(std::move(shape), std::move(data), requires_grad);
}

// fixed random projection makes the scalar loss sensitive to every output
inline ad::Tensor weighted_sum(const ad::Tensor& out, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> w(static_cast<size_t>(out.size()));
  for (auto& v : w) v = static_cast<float>(rng.uniform(0.5, 1.5) * (rng.bernoulli(0.5) ? 1 : -1));
  ad::Tensor weights = ad::Tensor::from(out.shape(), std::move(w), false);
  return ad::sum_all(ad::mul(out, weights));
}

}  // namespace testutil
