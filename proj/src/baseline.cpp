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

#include "tagbench/baseline.hpp"

#include <cstdio>
#include <sstream>

namespace tagbench {

const std::vector<BaselineRow>& baseline_table() {
  static const std::vector<BaselineRow> rows = {
      {"fcn", "mtat", 0.9005, 0.4295, ""},
      {"fcn", "msd", 0.8744, 0.2970, ""},
      {"fcn", "jamendo", 0.8255, 0.2801, ""},
      {"fcn (128 mel)", "mtat", 0.8994, 0.4236, ""},
      {"fcn (128 mel)", "msd", 0.8742, 0.2963, ""},
      {"fcn (128 mel)", "jamendo", 0.8245, 0.2792, ""},
      {"musicnn", "mtat", 0.9106, 0.4493, ""},
      {"musicnn", "msd", 0.8803, 0.2983, ""},
      {"musicnn", "jamendo", 0.8226, 0.2713, ""},
      {"musicnn (128 mel)", "mtat", 0.9092, 0.4546, ""},
      {"musicnn (128 mel)", "msd", 0.8788, 0.3036, "PR-AUC published as 3036; corrected to 0.3036"},
      {"musicnn (128 mel)", "jamendo", 0.8275, 0.2810, ""},
      {"sample_level", "mtat", 0.9058, 0.4422, ""},
      {"sample_level", "msd", 0.8789, 0.2959, ""},
      {"sample_level", "jamendo", 0.8208, 0.2742, ""},
      {"sample_level_se", "mtat", 0.9103, 0.4520, ""},
      {"sample_level_se", "msd", 0.8838, 0.3109, ""},
      {"sample_level_se", "jamendo", 0.8233, 0.2784, ""},
      {"crnn", "mtat", 0.8722, 0.3625, ""},
      {"crnn", "msd", 0.8499, 0.2469, ""},
      {"crnn", "jamendo", 0.7978, 0.2358, ""},
      {"crnn (128 mel)", "mtat", 0.8703, 0.3601, ""},
      {"crnn (128 mel)", "msd", 0.8460, 0.2330, ""},
      {"crnn (128 mel)", "jamendo", 0.7984, 0.2378, ""},
      {"self_attention", "mtat", 0.9077, 0.4445, ""},
      {"self_attention", "msd", 0.8810, 0.3103, ""},
      {"self_attention", "jamendo", 0.8261, 0.2883, ""},
      {"harmonic_cnn", "mtat", 0.9127, 0.4611, ""},
      {"harmonic_cnn", "msd", 0.8898, 0.3298, ""},
      {"harmonic_cnn", "jamendo", 0.8322, 0.2956, ""},
      {"short_chunk", "mtat", 0.9126, 0.4590, ""},
      {"short_chunk", "msd", 0.8883, 0.3251, ""},
      {"short_chunk", "jamendo", 0.8324, 0.2976, ""},
      {"short_chunk_res", "mtat", 0.9129, 0.4614, ""},
      {"short_chunk_res", "msd", 0.8898, 0.3280, ""},
      {"short_chunk_res", "jamendo", 0.8316, 0.2951, ""},
  };
  return rows;
}

std::optional<BaselineRow> baseline_lookup(const std::string& model, const std::string& dataset) {
  for (const auto& r : baseline_table()) {
    if (r.model == model && r.dataset == dataset) return r;
  }
  return std::nullopt;
}

std::string baseline_table_tsv() {
  std::ostringstream os;
  os << "model\tdataset\tpublished_roc_auc\tpublished_pr_auc\tnote\n";
  char buf[32];
  for (const auto& r : baseline_table()) {
    std::snprintf(buf, sizeof(buf), "%.4f", r.roc_auc);
    os << r.model << '\t' << r.dataset << '\t' << buf;
    std::snprintf(buf, sizeof(buf), "%.4f", r.pr_auc);
    os << '\t' << buf << '\t' << r.note << '\n';
  }
  return os.str();
}

}  // namespace tagbench
