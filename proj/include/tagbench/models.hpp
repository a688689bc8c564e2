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

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tagbench/audio.hpp"
#include "tagbench/nn.hpp"
#include "tagbench/tensor.hpp"

namespace tagbench {

enum class Arch {
  fcn,
  musicnn,
  sample_level,
  sample_level_se,
  crnn,
  self_attention,
  harmonic_cnn,
  short_chunk,
  short_chunk_res,
};

constexpr int kNumArchs = 9;
std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);
std::vector<Arch> all_archs();

// Stride plans are part of the architecture contract.
inline constexpr int kFcnPoolStrides[4][2] = {{2, 4}, {4, 5}, {3, 8}, {4, 8}};
inline constexpr int kCrnnPoolStrides[4][2] = {{2, 2}, {3, 3}, {4, 4}, {4, 4}};
inline constexpr int kSampleLevelStages = 10;  // 3^10 = 59049 samples -> extent 1
inline constexpr int kShortChunkBlocks = 7;    // 2^7 = 128 mel bins -> extent 1

struct ModelConfig {
  Arch arch = Arch::short_chunk;
  int n_mels = 128;           // 0 for raw/harmonic input models
  int64_t input_length = 0;   // samples at 16 kHz
  int n_tags = 50;
  float width_mult = 1.0f;    // scales channel widths for desk-scale runs
  int gru_hidden = 128;
  int attn_heads = 8;
  int attn_blocks = 2;
  int ff_mult = 4;
  int se_reduction = 16;
  float dropout_p = 0.5f;
  int n_harmonics = 6;
  int n_bands = 128;

  static ModelConfig defaults(Arch arch);
  void validate() const;  // throws InvalidConfig
  std::string to_json() const;
  static ModelConfig from_json(const std::string& json);
};

enum class Mode { train, eval };

struct ReceptiveField {
  int freq_bins = 0;           // input bands covered (0 for raw waveform models)
  double time_seconds = 0.0;   // chunk length; full input for song-level models
  bool song_level = false;
};

ReceptiveField receptive_field(const ModelConfig& config);

namespace detail {
struct ArchImpl;
}

/// A built, parameterized network. Train-mode instances belong to a single
/// training context; eval-mode forward on an unchanging model is thread-safe.
class Model {
 public:
  Model(ModelConfig config, uint64_t seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelConfig& config() const { return config_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  /// Build the arch input representation for sliced chunks (all must be
  /// exactly config.input_length samples at 16 kHz).
  ad::Tensor prepare_batch(std::span<const AudioClip> chunks);

  /// Representation batch -> logits [B, n_tags].
  ad::Tensor forward(const ad::Tensor& input);

  /// prepare + forward + sigmoid for a batch of chunks, eval or train mode.
  ad::Tensor forward_chunks(std::span<const AudioClip> chunks);

  nn::Collector collect() const;
  int64_t param_count() const;
  std::string describe() const;

  /// Reseeds the dropout stream (called at the start of a training run).
  void reset_dropout_stream(uint64_t seed);

  /// Test hook: the post-pool vertical-filter branch of Musicnn, [B,C,T].
  ad::Tensor musicnn_vertical_features(const ad::Tensor& input);
  /// Test hook: the pre-pool conv maps of each vertical filter family.
  std::vector<ad::Tensor> musicnn_vertical_conv_maps(const ad::Tensor& input);

 private:
  ModelConfig config_;
  Mode mode_ = Mode::eval;
  uint64_t dropout_base_ = 0;
  uint64_t dropout_counter_ = 0;
  std::unique_ptr<detail::ArchImpl> impl_;
};

Model build_model(const ModelConfig& config, uint64_t seed);

/// Table-style row for the `models` listing.
struct ModelListing {
  std::string arch;
  double input_seconds;
  int64_t input_samples;
  int n_mels;  // 0 = raw / harmonic
  bool song_level;
};
std::vector<ModelListing> model_listings();

}  // namespace tagbench
