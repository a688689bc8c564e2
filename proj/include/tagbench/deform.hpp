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
#include <string>
#include <vector>

#include "tagbench/audio.hpp"

namespace tagbench {

enum class DeformKind { none, pitch_shift, time_stretch, drc, white_noise };

/// Feed-forward compressor settings. The speech / music_standard values are
/// engineering placeholders standing in for unpublished broadcast presets;
/// behavior, never the preset numbers, is what the tests assert.
struct CompressorPreset {
  std::string name;
  double threshold_db = -20.0;
  double ratio = 2.0;
  double knee_db = 6.0;
  double attack_ms = 10.0;
  double release_ms = 200.0;
  double makeup_db = 0.0;

  static CompressorPreset speech();
  static CompressorPreset music_standard();
  static CompressorPreset by_name(const std::string& name);
};

struct Deformation {
  DeformKind kind = DeformKind::none;
  double param = 0.0;  // semitones, stretch rate, or noise mix weight
  CompressorPreset preset;

  /// CLI string: pitch:-1, stretch:1.4142, drc:speech, noise:0.4, none.
  std::string spec_string() const;
  static Deformation parse(const std::string& spec);

  static Deformation none_();
  static Deformation pitch(int semitones);
  static Deformation stretch(double rate);
  static Deformation drc_(const std::string& preset_name);
  static Deformation noise(double alpha);
};

/// Length- and rate-preserving pitch shift by n semitones (phase-vocoder
/// stretch plus resampling back to the original length).
AudioClip pitch_shift(const AudioClip& clip, int semitones);

/// Pitch-preserving time stretch; output length = round(len / rate)
/// (rate > 1 is faster/shorter). Phase vocoder, FFT 2048, hop 256.
AudioClip time_stretch(const AudioClip& clip, double rate);

/// Feed-forward dynamic range compression: peak envelope follower with
/// attack/release smoothing, soft-knee gain computer, makeup gain.
AudioClip dynamic_range_compress(const AudioClip& clip, const CompressorPreset& preset);

/// x_mixed = (1 - alpha) x + alpha * noise, seeded Gaussian noise scaled to
/// the signal RMS, clipped to [-1, 1].
AudioClip add_white_noise(const AudioClip& clip, double alpha, uint64_t seed);

/// Applies a deformation; the white-noise stream is derived from
/// (noise_seed, clip.source_id) so parallel evaluation order cannot matter.
AudioClip apply_deformation(const Deformation& d, const AudioClip& clip, uint64_t noise_seed);

/// The eight test-time settings, in the fixed reporting order:
/// pitch -1/+1, stretch 2^-1/2 / 2^1/2, drc speech/music_standard,
/// noise 0.1/0.4. The identity transform is not included.
std::vector<Deformation> deformation_suite();

}  // namespace tagbench
