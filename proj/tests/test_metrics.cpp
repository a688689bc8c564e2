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

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tagbench/errors.hpp"
#include "tagbench/metrics.hpp"

using namespace tagbench;
using testutil::Rng;

namespace {

// O(N^2) pairwise oracle for ROC-AUC
double roc_oracle(const std::vector<double>& s, const std::vector<uint8_t>& y) {
  double num = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

// prefix brute-force oracle for average precision with grouped ties
double pr_oracle(std::vector<double> s, std::vector<uint8_t> y) {
  std::vector<size_t> idx(s.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return s[a] > s[b]; });
  int64_t n_pos = 0;
  for (uint8_t v : y) n_pos += v;
  double ap = 0.0, r_prev = 0.0;
  int64_t tp = 0, seen = 0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j < idx.size() && s[idx[j]] == s[idx[i]]) ++j;
    for (size_t k = i; k < j; ++k) {
      ++seen;
      tp += y[idx[k]];
    }
    const double r = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double p = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (r - r_prev) * p;
    r_prev = r;
    i = j;
  }
  return ap;
}

std::pair<std::vector<double>, std::vector<uint8_t>> random_instance(Rng& rng, bool ties) {
  const int n = static_cast<int>(rng.uniform_int(2, 64));
  std::vector<double> s(static_cast<size_t>(n));
  std::vector<uint8_t> y(static_cast<size_t>(n));
  int n_pos = 0;
  for (int i = 0; i < n; ++i) {
    s[static_cast<size_t>(i)] =
        ties ? static_cast<double>(rng.uniform_int(0, 5)) / 5.0 : rng.uniform();
    y[static_cast<size_t>(i)] = rng.bernoulli(0.4) ? 1 : 0;
    n_pos += y[static_cast<size_t>(i)];
  }
  if (n_pos == 0) y[0] = 1;
  if (n_pos == n) y[0] = 0;
  return {s, y};
}

}  // namespace

TEST_CASE("roc_auc spec examples") {
  std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  std::vector<uint8_t> y = {0, 0, 1, 1};
  CHECK(roc_auc(s, y) == doctest::Approx(0.75));  // 3 of 4 pairs ordered

  std::vector<double> sep = {0.1, 0.2, 0.8, 0.9};
  std::vector<uint8_t> ysep = {0, 0, 1, 1};
  CHECK(roc_auc(sep, ysep) == doctest::Approx(1.0));

  std::vector<double> equal = {0.5, 0.5, 0.5, 0.5};
  CHECK(roc_auc(equal, ysep) == doctest::Approx(0.5));
}

TEST_CASE("pr_auc spec examples") {
  std::vector<double> s = {0.9, 0.8, 0.7};
  std::vector<uint8_t> y = {1, 0, 1};
  CHECK(pr_auc(s, y) == doctest::Approx(1.0 * 0.5 + (2.0 / 3.0) * 0.5));

  std::vector<uint8_t> all_pos = {1, 1, 1};
  CHECK(pr_auc(s, all_pos) == doctest::Approx(1.0));

  std::vector<double> s4 = {0.9, 0.8, 0.7, 0.1};
  std::vector<uint8_t> last_pos = {0, 0, 0, 1};
  CHECK(pr_auc(s4, last_pos) == doctest::Approx(0.25));
}

TEST_CASE("degenerate label errors") {
  std::vector<double> s = {0.1, 0.9};
  std::vector<uint8_t> ones = {1, 1};
  std::vector<uint8_t> zeros = {0, 0};
  CHECK_THROWS_AS(roc_auc(s, ones), DegenerateLabels);
  CHECK_THROWS_AS(roc_auc(s, zeros), DegenerateLabels);
  CHECK_THROWS_AS(pr_auc(s, zeros), DegenerateLabels);
}

TEST_CASE("roc_auc matches the pairwise oracle on random instances, with ties") {
  Rng rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    auto [s, y] = random_instance(rng, trial % 2 == 0);
    CHECK(std::fabs(roc_auc(s, y) - roc_oracle(s, y)) < 1e-9);
  }
}

TEST_CASE("pr_auc matches the prefix oracle on random instances, with ties") {
  Rng rng(102);
  for (int trial = 0; trial < 300; ++trial) {
    auto [s, y] = random_instance(rng, trial % 2 == 1);
    CHECK(std::fabs(pr_auc(s, y) - pr_oracle(s, y)) < 1e-9);
  }
}

TEST_CASE("roc_auc is invariant under strictly increasing transforms") {
  Rng rng(103);
  for (int trial = 0; trial < 50; ++trial) {
    auto [s, y] = random_instance(rng, false);
    const double base = roc_auc(s, y);
    std::vector<double> exp_s(s.size()), affine_s(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
      exp_s[i] = std::exp(s[i]);
      affine_s[i] = 3.0 * s[i] + 7.0;
    }
    CHECK(roc_auc(exp_s, y) == doctest::Approx(base).epsilon(1e-12));
    CHECK(roc_auc(affine_s, y) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("roc_auc(s) + roc_auc(-s) = 1 without ties") {
  Rng rng(104);
  for (int trial = 0; trial < 50; ++trial) {
    auto [s, y] = random_instance(rng, false);
    std::vector<double> neg(s.size());
    for (size_t i = 0; i < s.size(); ++i) neg[i] = -s[i];
    CHECK(roc_auc(s, y) + roc_auc(neg, y) == doctest::Approx(1.0).epsilon(1e-12));
  }
}
