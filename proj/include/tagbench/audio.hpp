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
#include <filesystem>
#include <string>
#include <vector>

namespace tagbench {

/// Mono sample buffer. Immutable by convention once constructed; every DSP
/// routine and deformation takes clips by const reference and returns new ones.
struct AudioClip {
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = 0;         // Hz
  std::string source_id;

  int64_t length() const { return static_cast<int64_t>(samples.size()); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Validating constructor: non-empty, positive rate, |x| <= 1 + 1e-6.
/// Does not clip; producers are responsible for staying in range.
AudioClip make_clip(std::vector<float> samples, int sample_rate, std::string source_id);

enum class WavFormat { pcm16, float32 };

/// Reads RIFF/WAVE, PCM-16 or IEEE-float-32, 1-2 channels. Stereo is downmixed
/// by averaging; integer samples are scaled by 1/2^15; input is clipped to
/// [-1, 1] at this boundary.
AudioClip load_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavFormat format = WavFormat::pcm16);

/// Band-limited rate conversion (windowed-sinc, Kaiser beta 8.6, 64 zero
/// crossings). Output length = round(len * target_rate / source_rate).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Same interpolation kernel, arbitrary ratio: stretches the waveform onto
/// exactly new_length samples while keeping the sample-rate label.
AudioClip resample_to_length(const AudioClip& clip, int64_t new_length);

/// Samples [start, start+length); missing tail is zero-padded so the result
/// always has exactly `length` samples. Sample rate is preserved.
AudioClip slice_chunk(const AudioClip& clip, int64_t start, int64_t length);

}  // namespace tagbench
