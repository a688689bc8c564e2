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

#include <optional>
#include <string>
#include <vector>

namespace tagbench {

/// Published reference results on the licensed datasets. These are shipped as
/// labeled baseline data only; reproducing them needs the full MTAT / MSD /
/// MTG-Jamendo audio and is outside desk scale. They are never mixed into a
/// measured-results column.
struct BaselineRow {
  std::string model;      // arch id; 128-mel variants as "<arch> (128 mel)"
  std::string dataset;    // mtat | msd | jamendo
  double roc_auc;
  double pr_auc;
  std::string note;       // provenance notes (e.g. corrected typos)
};

const std::vector<BaselineRow>& baseline_table();

std::optional<BaselineRow> baseline_lookup(const std::string& model, const std::string& dataset);

/// Rendered table (TSV): model, dataset, published_roc_auc, published_pr_auc, note.
std::string baseline_table_tsv();

}  // namespace tagbench
