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

#include <complex>
#include <filesystem>
#include <vector>

#include "tagbench/audio.hpp"

namespace tagbench {

constexpr int kPipelineRate = 16000;
constexpr int kNFft = 512;
constexpr int kHop = 256;
constexpr double kLogPowerFloor = 1e-10;

namespace detail {
// in-place complex FFT, n must be a power of two
void fft(std::complex<double>* a, int n, bool inverse);
}  // namespace detail

/// One-sided STFT, frame-major storage: bin(b, t) = c[t * n_bins + b].
struct Stft {
  int n_fft = 0;
  int hop = 0;
  int n_bins = 0;
  int n_frames = 0;
  std::vector<std::complex<double>> c;

  std::complex<double> at(int bin, int frame) const { return c[static_cast<size_t>(frame) * n_bins + bin]; }
};

/// Hann window, reflect center padding; n_frames = 1 + floor(len / hop).
Stft stft(const AudioClip& clip, int n_fft = kNFft, int hop = kHop);

/// Triangular mel filterbank (Slaney scale, area-normalized), row-major
/// weights [n_mels x (n_fft/2 + 1)].
struct FilterbankMatrix {
  int n_mels = 0;
  int n_bins = 0;
  std::vector<double> weights;

  double at(int mel, int bin) const { return weights[static_cast<size_t>(mel) * n_bins + bin]; }
};

FilterbankMatrix mel_filterbank(int n_mels, int n_fft = kNFft, int sample_rate = kPipelineRate);

/// Natural-log mel power spectrogram, row-major [n_mels x n_frames].
struct MelSpectrogram {
  int n_mels = 0;
  int n_frames = 0;
  int hop = kHop;
  int sample_rate = kPipelineRate;
  std::vector<float> values;

  float at(int mel, int frame) const { return values[static_cast<size_t>(mel) * n_frames + frame]; }
};

MelSpectrogram mel_spectrogram(const AudioClip& clip, int n_mels);

// Slaney mel scale conversions.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Geometry of the harmonic front end: 128 mel-spaced band centers, each
/// stacked with harmonics 1..6. Row h*n_bands+b filters around (h+1)*f_b with
/// half-bandwidth alpha * band spacing; rows above Nyquist are dead.
struct HarmonicGeometry {
  int n_harmonics = 0;
  int n_bands = 0;
  int n_bins = 0;
  double nyquist = 0;
  std::vector<double> center_freqs;     // [n_bands]
  std::vector<double> row_centers;      // [n_harmonics * n_bands], clipped to Nyquist
  std::vector<double> norm_distance;    // |f_bin - center| / half_bw, 1e9 on dead rows
};

HarmonicGeometry harmonic_geometry(int n_bands = 128, int n_harmonics = 6,
                                   int n_fft = kNFft, int sample_rate = kPipelineRate);

/// Log-compressed harmonic stack of the STFT magnitude,
/// values[(h * n_bands + b) * n_frames + t].
struct HarmonicTensor {
  int n_harmonics = 0;
  int n_bands = 0;
  int n_frames = 0;
  std::vector<double> center_freqs;
  float alpha = 1.0f;
  std::vector<float> values;

  float at(int h, int band, int frame) const {
    return values[(static_cast<size_t>(h) * n_bands + band) * n_frames + frame];
  }
};

HarmonicTensor harmonic_representation(const AudioClip& clip, int n_bands = 128,
                                       int n_harmonics = 6, double alpha = 1.0);

/// Debug dump: one row per band, tab-separated frames.
void write_matrix_tsv(const std::filesystem::path& path, const float* values,
                      int rows, int cols);

}  // namespace tagbench
