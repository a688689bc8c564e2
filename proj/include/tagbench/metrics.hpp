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
#include <span>

namespace tagbench {

/// Mann-Whitney statistic: (#{pos > neg} + 0.5 * #{pos == neg}) / (n_pos * n_neg),
/// computed by rank sums in O(N log N). Throws DegenerateLabels when only one
/// class is present.
double roc_auc(std::span<const double> scores, std::span<const uint8_t> labels);

/// Average precision with tied scores grouped (equal scores enter the ranking
/// together). Throws DegenerateLabels when there are no positives.
double pr_auc(std::span<const double> scores, std::span<const uint8_t> labels);

}  // namespace tagbench
