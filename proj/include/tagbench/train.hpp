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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tagbench/checkpoint.hpp"
#include "tagbench/data.hpp"
#include "tagbench/deform.hpp"
#include "tagbench/models.hpp"
#include "tagbench/optim.hpp"

namespace tagbench {

// ---- model <-> checkpoint glue ----
std::vector<NamedArray> snapshot_arrays(const Model& model);  // parameters + buffers
void load_arrays(Model& model, const std::vector<NamedArray>& arrays);
void save_model(const std::filesystem::path& path, const Model& model, int epoch,
                double val_loss, uint64_t seed);
Model load_model(const std::filesystem::path& path);

// ---- training ----
enum class TrainMode { auto_select, chunk_level, song_level };
std::string train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
  int max_epochs = 200;
  int batch_size = 16;
  uint64_t seed = 0;
  TrainMode mode = TrainMode::auto_select;
  OptimizerConfig opt;
  std::filesystem::path out_dir;  // receives checkpoint.bin(.json)
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  Phase phase = Phase::adam;
  double lr = 0.0;
  bool improved = false;
};

struct TrainRun {
  std::vector<EpochStats> history;
  std::filesystem::path best_checkpoint;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  int64_t optimizer_steps = 0;
  TrainMode resolved_mode = TrainMode::chunk_level;
};

/// Epochs of BCE minimization with the scheduled ADAM/SGD mixture.
/// Chunk-level training draws one uniform random chunk per clip per epoch;
/// song-level feeds the receptive-field window from the clip start. The model
/// is left holding the best-validation-loss weights.
TrainRun train(Model& model, const Dataset& dataset, const TrainConfig& config);

// ---- prediction / evaluation ----

/// Evenly spaced evaluation chunk starts: round(i * (len - window) / 15) for
/// i = 0..15, or the single start 0 when the clip fits in one window.
std::vector<int64_t> eval_chunk_starts(int64_t clip_len, int64_t window);

/// 16 evenly spaced chunks over [0, max(0, len - input_length)], scores
/// averaged after the sigmoid; a clip no longer than the input window is a
/// single forward pass.
std::vector<double> predict_clip(Model& model, const AudioClip& clip);

struct TagMetrics {
  std::string tag;
  int n_pos = 0;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  bool degenerate = false;  // excluded from the macro means
};

struct EvalReport {
  std::string model_id;
  std::string dataset_id;
  std::string split;
  std::string deformation;  // spec string, "none" for identity
  int n_clips = 0;
  double macro_roc_auc = 0.0;
  double macro_pr_auc = 0.0;
  std::vector<TagMetrics> per_tag;
};

struct EvalOptions {
  std::string model_id = "model";
  uint64_t noise_seed = 0;
  int threads = 0;  // 0: use TAGBENCH_THREADS, else 1
};

using Predictor = std::function<std::vector<double>(const AudioClip&, const ManifestEntry&)>;

EvalReport evaluate(const Predictor& predictor, const Dataset& dataset, Split split,
                    const Deformation& deformation, const EvalOptions& options);
EvalReport evaluate_model(Model& model, const Dataset& dataset, Split split,
                          const Deformation& deformation, EvalOptions options);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json);
void write_report_tsv(const std::filesystem::path& path, const EvalReport& report);
std::string report_tsv_string(const EvalReport& report);

/// Worker-thread cap from TAGBENCH_THREADS (default 1).
int tagbench_threads();

}  // namespace tagbench
