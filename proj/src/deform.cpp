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

#include "tagbench/deform.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "tagbench/dsp.hpp"
#include "tagbench/errors.hpp"
#include "tagbench/rng.hpp"

namespace tagbench {

CompressorPreset CompressorPreset::speech() {
  return {"speech", -24.0, 4.0, 6.0, 5.0, 100.0, 0.0};
}

CompressorPreset CompressorPreset::music_standard() {
  return {"music_standard", -20.0, 2.5, 6.0, 10.0, 200.0, 0.0};
}

CompressorPreset CompressorPreset::by_name(const std::string& name) {
  if (name == "speech") return speech();
  if (name == "music_standard") return music_standard();
  throw InvalidConfig("unknown compressor preset: " + name);
}

std::string Deformation::spec_string() const {
  char buf[48];
  switch (kind) {
    case DeformKind::none: return "none";
    case DeformKind::pitch_shift:
      std::snprintf(buf, sizeof(buf), "pitch:%+d", static_cast<int>(param));
      return buf;
    case DeformKind::time_stretch:
      std::snprintf(buf, sizeof(buf), "stretch:%.4f", param);
      return buf;
    case DeformKind::drc: return "drc:" + preset.name;
    case DeformKind::white_noise:
      std::snprintf(buf, sizeof(buf), "noise:%.2f", param);
      return buf;
  }
  return "none";
}

Deformation Deformation::none_() { return {}; }

Deformation Deformation::pitch(int semitones) {
  Deformation d;
  d.kind = DeformKind::pitch_shift;
  d.param = semitones;
  return d;
}

Deformation Deformation::stretch(double rate) {
  if (rate <= 0.0) throw InvalidConfig("time_stretch rate must be positive");
  Deformation d;
  d.kind = DeformKind::time_stretch;
  d.param = rate;
  return d;
}

Deformation Deformation::drc_(const std::string& preset_name) {
  Deformation d;
  d.kind = DeformKind::drc;
  d.preset = CompressorPreset::by_name(preset_name);
  return d;
}

Deformation Deformation::noise(double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw InvalidConfig("noise mix weight must be in [0, 1]");
  Deformation d;
  d.kind = DeformKind::white_noise;
  d.param = alpha;
  return d;
}

Deformation Deformation::parse(const std::string& spec) {
  if (spec == "none") return none_();
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InvalidConfig("bad deformation spec: " + spec);
  const std::string head = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  try {
    if (head == "pitch") return pitch(std::stoi(arg));
    if (head == "stretch") return stretch(std::stod(arg));
    if (head == "drc") return drc_(arg);
    if (head == "noise") return noise(std::stod(arg));
  } catch (const std::logic_error&) {
    throw InvalidConfig("bad deformation parameter: " + spec);
  }
  throw InvalidConfig("unknown deformation kind: " + head);
}

std::vector<Deformation> deformation_suite() {
  return {
      Deformation::pitch(-1),
      Deformation::pitch(1),
      Deformation::stretch(std::pow(2.0, -0.5)),
      Deformation::stretch(std::pow(2.0, 0.5)),
      Deformation::drc_("speech"),
      Deformation::drc_("music_standard"),
      Deformation::noise(0.1),
      Deformation::noise(0.4),
  };
}

namespace {

constexpr int kPvFft = 2048;
constexpr int kPvHop = 256;

double princarg(double phase) {
  return phase - 2.0 * M_PI * std::round(phase / (2.0 * M_PI));
}

// librosa-style phase vocoder on the STFT: synthesis hop equals the analysis
// hop; analysis positions step through the frames at `rate`, magnitudes are
// linearly interpolated and per-bin phase advances are accumulated.
std::vector<float> phase_vocoder(const AudioClip& clip, double rate, int64_t out_len) {
  const Stft s = stft(clip, kPvFft, kPvHop);
  const int n_bins = s.n_bins;

  std::vector<double> steps;
  for (double t = 0.0; t < static_cast<double>(s.n_frames); t += rate) steps.push_back(t);
  const int out_frames = static_cast<int>(steps.size());

  std::vector<double> phase_acc(static_cast<size_t>(n_bins));
  std::vector<double> bin_freq(static_cast<size_t>(n_bins));
  for (int b = 0; b < n_bins; ++b) {
    bin_freq[static_cast<size_t>(b)] = 2.0 * M_PI * b / kPvFft;
    phase_acc[static_cast<size_t>(b)] = std::arg(s.at(b, 0));
  }

  // overlap-add synthesis with Hann window and squared-window normalization
  std::vector<double> window(kPvFft);
  for (int i = 0; i < kPvFft; ++i) window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / kPvFft);

  const int64_t synth_len = static_cast<int64_t>(out_frames - 1) * kPvHop + kPvFft;
  std::vector<double> out(static_cast<size_t>(synth_len), 0.0);
  std::vector<double> norm(static_cast<size_t>(synth_len), 0.0);
  std::vector<std::complex<double>> frame(static_cast<size_t>(kPvFft));

  for (int of = 0; of < out_frames; ++of) {
    const double t = steps[static_cast<size_t>(of)];
    const int t0 = static_cast<int>(t);
    const int t1 = std::min(t0 + 1, s.n_frames - 1);
    const double frac = t - t0;

    for (int b = 0; b < n_bins; ++b) {
      const std::complex<double> c0 = s.at(b, t0);
      const std::complex<double> c1 = s.at(b, t1);
      const double mag = (1.0 - frac) * std::abs(c0) + frac * std::abs(c1);
      frame[static_cast<size_t>(b)] = std::polar(mag, phase_acc[static_cast<size_t>(b)]);
      // advance by the measured inter-frame phase increment
      const double dphi = princarg(std::arg(c1) - std::arg(c0) - bin_freq[static_cast<size_t>(b)] * kPvHop);
      phase_acc[static_cast<size_t>(b)] += bin_freq[static_cast<size_t>(b)] * kPvHop + dphi;
    }
    for (int b = n_bins; b < kPvFft; ++b) {
      frame[static_cast<size_t>(b)] = std::conj(frame[static_cast<size_t>(kPvFft - b)]);
    }
    detail::fft(frame.data(), kPvFft, true);

    const int64_t off = static_cast<int64_t>(of) * kPvHop;
    for (int i = 0; i < kPvFft; ++i) {
      out[static_cast<size_t>(off + i)] += frame[static_cast<size_t>(i)].real() * window[static_cast<size_t>(i)];
      norm[static_cast<size_t>(off + i)] += window[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    }
  }

  // trim the centering pad and fix the length exactly
  std::vector<float> res(static_cast<size_t>(out_len), 0.0f);
  const int64_t pad = kPvFft / 2;
  for (int64_t i = 0; i < out_len; ++i) {
    const int64_t j = i + pad;
    if (j < synth_len && norm[static_cast<size_t>(j)] > 1e-8) {
      const double v = out[static_cast<size_t>(j)] / norm[static_cast<size_t>(j)];
      res[static_cast<size_t>(i)] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
  }
  return res;
}

}  // namespace

AudioClip time_stretch(const AudioClip& clip, double rate) {
  if (rate <= 0.0) throw InvalidConfig("time_stretch: rate must be positive");
  const int64_t out_len = std::llround(static_cast<double>(clip.length()) / rate);
  std::vector<float> samples = phase_vocoder(clip, rate, std::max<int64_t>(out_len, 1));
  AudioClip out;
  out.samples = std::move(samples);
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  return out;
}

AudioClip pitch_shift(const AudioClip& clip, int semitones) {
  if (semitones == 0) {
    AudioClip out = clip;
    return out;
  }
  // stretch longer by 2^(-n/12), then squeeze back onto the original length:
  // spectral content scales by 2^(n/12)
  const double factor = std::pow(2.0, semitones / 12.0);
  AudioClip stretched = time_stretch(clip, 1.0 / factor);
  return resample_to_length(stretched, clip.length());
}

AudioClip dynamic_range_compress(const AudioClip& clip, const CompressorPreset& preset) {
  if (preset.ratio < 1.0 || preset.attack_ms <= 0.0 || preset.release_ms <= 0.0) {
    throw InvalidConfig("compressor preset: ratio >= 1 and positive attack/release required");
  }
  const double sr = clip.sample_rate;
  const double att = std::exp(-1.0 / (preset.attack_ms * 1e-3 * sr));
  const double rel = std::exp(-1.0 / (preset.release_ms * 1e-3 * sr));
  const double T = preset.threshold_db;
  const double knee = preset.knee_db;
  const double slope = 1.0 / preset.ratio;

  std::vector<float> out(clip.samples.size());
  double env = 0.0;
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    const double x = clip.samples[i];
    const double level = std::fabs(x);
    const double coef = level > env ? att : rel;
    env = coef * env + (1.0 - coef) * level;

    const double level_db = 20.0 * std::log10(std::max(env, 1e-10));
    double out_db;
    const double over = level_db - T;
    if (2.0 * over < -knee) {
      out_db = level_db;
    } else if (2.0 * std::fabs(over) <= knee) {
      // quadratic soft knee
      out_db = level_db + (slope - 1.0) * (over + knee / 2.0) * (over + knee / 2.0) / (2.0 * knee);
    } else {
      out_db = T + over * slope;
    }
    const double gain_db = out_db - level_db + preset.makeup_db;
    const double y = x * std::pow(10.0, gain_db / 20.0);
    out[i] = static_cast<float>(std::clamp(y, -1.0, 1.0));
  }
  AudioClip res;
  res.samples = std::move(out);
  res.sample_rate = clip.sample_rate;
  res.source_id = clip.source_id;
  return res;
}

AudioClip add_white_noise(const AudioClip& clip, double alpha, uint64_t seed) {
  if (alpha < 0.0 || alpha > 1.0) throw InvalidConfig("add_white_noise: alpha must be in [0, 1]");
  double energy = 0.0;
  for (float v : clip.samples) energy += static_cast<double>(v) * v;
  const double rms = std::sqrt(energy / static_cast<double>(clip.samples.size()));

  Rng rng(seed);
  std::vector<float> out(clip.samples.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double noise = rng.normal() * rms;
    const double v = (1.0 - alpha) * clip.samples[i] + alpha * noise;
    out[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  AudioClip res;
  res.samples = std::move(out);
  res.sample_rate = clip.sample_rate;
  res.source_id = clip.source_id;
  return res;
}

AudioClip apply_deformation(const Deformation& d, const AudioClip& clip, uint64_t noise_seed) {
  switch (d.kind) {
    case DeformKind::none: return clip;
    case DeformKind::pitch_shift: return pitch_shift(clip, static_cast<int>(d.param));
    case DeformKind::time_stretch: return time_stretch(clip, d.param);
    case DeformKind::drc: return dynamic_range_compress(clip, d.preset);
    case DeformKind::white_noise:
      return add_white_noise(clip, d.param, mix_seed(noise_seed, hash_str(clip.source_id)));
  }
  return clip;
}

}  // namespace tagbench
