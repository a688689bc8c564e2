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

#include "tagbench/dsp.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "tagbench/errors.hpp"

namespace tagbench {

namespace detail {

void fft(std::complex<double>* a, int n, bool inverse) {
  if (n <= 1) return;
  if ((n & (n - 1)) != 0) throw InvalidConfig("fft: size must be a power of two");

  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (int len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / len * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (int i = 0; i < n; ++i) a[i] /= n;
  }
}

}  // namespace detail

namespace {

// reflect-mode index (librosa style: the edge sample is not repeated)
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  int64_t period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  }
  return w;
}

}  // namespace

Stft stft(const AudioClip& clip, int n_fft, int hop) {
  if (clip.samples.empty()) throw InvalidConfig("stft: empty clip");
  const int64_t len = clip.length();
  const int n_bins = n_fft / 2 + 1;
  const int n_frames = static_cast<int>(1 + len / hop);
  const auto window = hann_window(n_fft);

  Stft out;
  out.n_fft = n_fft;
  out.hop = hop;
  out.n_bins = n_bins;
  out.n_frames = n_frames;
  out.c.resize(static_cast<size_t>(n_frames) * n_bins);

  std::vector<std::complex<double>> buf(static_cast<size_t>(n_fft));
  const int64_t pad = n_fft / 2;
  for (int t = 0; t < n_frames; ++t) {
    const int64_t frame_start = static_cast<int64_t>(t) * hop - pad;
    for (int i = 0; i < n_fft; ++i) {
      int64_t src = reflect_index(frame_start + i, len);
      buf[static_cast<size_t>(i)] = clip.samples[static_cast<size_t>(src)] * window[static_cast<size_t>(i)];
    }
    detail::fft(buf.data(), n_fft, false);
    for (int b = 0; b < n_bins; ++b) {
      out.c[static_cast<size_t>(t) * n_bins + b] = buf[static_cast<size_t>(b)];
    }
  }
  return out;
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double brk_hz = 1000.0;
  const double brk_mel = brk_hz / f_sp;  // 15
  if (hz < brk_hz) return hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return brk_mel + std::log(hz / brk_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double brk_hz = 1000.0;
  const double brk_mel = brk_hz / f_sp;
  if (mel < brk_mel) return mel * f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return brk_hz * std::exp(logstep * (mel - brk_mel));
}

FilterbankMatrix mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  const int n_bins = n_fft / 2 + 1;
  if (n_mels <= 0) throw InvalidBandCount("mel_filterbank: n_mels must be positive");
  if (n_mels > n_fft / 2) throw InvalidBandCount("mel_filterbank: n_mels exceeds n_fft/2");

  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[static_cast<size_t>(i)] = mel_to_hz(mel_max * i / (n_mels + 1));
  }

  FilterbankMatrix fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_bins;
  fb.weights.assign(static_cast<size_t>(n_mels) * n_bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    const double f_lo = edges[static_cast<size_t>(m)];
    const double f_c = edges[static_cast<size_t>(m) + 1];
    const double f_hi = edges[static_cast<size_t>(m) + 2];
    const double norm = 2.0 / (f_hi - f_lo);
    for (int b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / n_fft;
      double w = 0.0;
      if (f > f_lo && f < f_hi) {
        w = f <= f_c ? (f - f_lo) / (f_c - f_lo) : (f_hi - f) / (f_hi - f_c);
      }
      fb.weights[static_cast<size_t>(m) * n_bins + b] = w * norm;
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, int n_mels) {
  if (clip.sample_rate != kPipelineRate) {
    throw WrongSampleRate("mel_spectrogram: expected 16 kHz input, got " +
                          std::to_string(clip.sample_rate) + " Hz (resample first)");
  }
  const Stft s = stft(clip);
  const FilterbankMatrix fb = mel_filterbank(n_mels);

  MelSpectrogram out;
  out.n_mels = n_mels;
  out.n_frames = s.n_frames;
  out.values.resize(static_cast<size_t>(n_mels) * s.n_frames);

  using RowMatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatD power(s.n_bins, s.n_frames);
  for (int t = 0; t < s.n_frames; ++t) {
    for (int b = 0; b < s.n_bins; ++b) power(b, t) = std::norm(s.at(b, t));
  }
  Eigen::Map<const RowMatD> W(fb.weights.data(), n_mels, s.n_bins);
  RowMatD mel = W * power;
  for (int m = 0; m < n_mels; ++m) {
    for (int t = 0; t < s.n_frames; ++t) {
      out.values[static_cast<size_t>(m) * s.n_frames + t] =
          static_cast<float>(std::log(std::max(mel(m, t), kLogPowerFloor)));
    }
  }
  return out;
}

HarmonicGeometry harmonic_geometry(int n_bands, int n_harmonics, int n_fft, int sample_rate) {
  HarmonicGeometry g;
  g.n_harmonics = n_harmonics;
  g.n_bands = n_bands;
  g.n_bins = n_fft / 2 + 1;
  g.nyquist = sample_rate / 2.0;

  const double mel_max = hz_to_mel(g.nyquist);
  const double mel_step = mel_max / (n_bands + 1);
  g.center_freqs.resize(static_cast<size_t>(n_bands));
  for (int b = 0; b < n_bands; ++b) {
    g.center_freqs[static_cast<size_t>(b)] = mel_to_hz(mel_step * (b + 1));
  }

  g.row_centers.resize(static_cast<size_t>(n_harmonics) * n_bands);
  g.norm_distance.assign(static_cast<size_t>(n_harmonics) * n_bands * g.n_bins, 1e9);
  for (int h = 0; h < n_harmonics; ++h) {
    for (int b = 0; b < n_bands; ++b) {
      const size_t row = static_cast<size_t>(h) * n_bands + b;
      const double center = (h + 1) * g.center_freqs[static_cast<size_t>(b)];
      g.row_centers[row] = std::min(center, g.nyquist);
      if (center > g.nyquist) continue;  // dead row, stays at 1e9
      // half-bandwidth at alpha = 1: one mel grid step around the center
      const double half_bw = mel_to_hz(hz_to_mel(center) + mel_step) - center;
      for (int k = 0; k < g.n_bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / n_fft;
        g.norm_distance[row * g.n_bins + k] = std::fabs(f - center) / half_bw;
      }
    }
  }
  return g;
}

HarmonicTensor harmonic_representation(const AudioClip& clip, int n_bands, int n_harmonics,
                                       double alpha) {
  if (clip.sample_rate != kPipelineRate) {
    throw WrongSampleRate("harmonic_representation: expected 16 kHz input");
  }
  if (alpha <= 0.0) throw InvalidConfig("harmonic_representation: alpha must be positive");
  const Stft s = stft(clip);
  const HarmonicGeometry g = harmonic_geometry(n_bands, n_harmonics);

  HarmonicTensor out;
  out.n_harmonics = n_harmonics;
  out.n_bands = n_bands;
  out.n_frames = s.n_frames;
  out.center_freqs = g.center_freqs;
  out.alpha = static_cast<float>(alpha);
  out.values.resize(static_cast<size_t>(n_harmonics) * n_bands * s.n_frames);

  const int n_rows = n_harmonics * n_bands;
  using RowMatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatD W(n_rows, g.n_bins);
  for (int r = 0; r < n_rows; ++r) {
    for (int k = 0; k < g.n_bins; ++k) {
      W(r, k) = std::max(0.0, 1.0 - g.norm_distance[static_cast<size_t>(r) * g.n_bins + k] / alpha);
    }
  }
  RowMatD mag(g.n_bins, s.n_frames);
  for (int t = 0; t < s.n_frames; ++t) {
    for (int b = 0; b < s.n_bins; ++b) mag(b, t) = std::abs(s.at(b, t));
  }
  RowMatD resp = W * mag;
  for (int r = 0; r < n_rows; ++r) {
    for (int t = 0; t < s.n_frames; ++t) {
      out.values[static_cast<size_t>(r) * s.n_frames + t] =
          static_cast<float>(std::log(std::max(resp(r, t), kLogPowerFloor)));
    }
  }
  return out;
}

void write_matrix_tsv(const std::filesystem::path& path, const float* values, int rows, int cols) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path.string());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c) f << '\t';
      f << values[static_cast<size_t>(r) * cols + c];
    }
    f << '\n';
  }
}

}  // namespace tagbench
