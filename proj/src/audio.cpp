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

#include "tagbench/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tagbench/errors.hpp"

namespace tagbench {

AudioClip make_clip(std::vector<float> samples, int sample_rate, std::string source_id) {
  if (samples.empty()) throw InvalidConfig("AudioClip: empty sample buffer");
  if (sample_rate <= 0) throw InvalidConfig("AudioClip: sample_rate must be positive");
  for (float v : samples) {
    if (!(std::fabs(v) <= 1.0f + 1e-6f)) {
      throw InvalidConfig("AudioClip: sample magnitude exceeds 1 + 1e-6");
    }
  }
  AudioClip clip;
  clip.samples = std::move(samples);
  clip.sample_rate = sample_rate;
  clip.source_id = std::move(source_id);
  return clip;
}

namespace {

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingFile(path.string());
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0) {
    throw UnsupportedEncoding("not a RIFF/WAVE file: " + path.string());
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    uint32_t chunk_len = read_u32(raw.data() + pos + 4);
    size_t body = pos + 8;
    if (body + chunk_len > raw.size()) chunk_len = static_cast<uint32_t>(raw.size() - body);
    if (std::memcmp(id, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = read_u16(raw.data() + body);
      channels = read_u16(raw.data() + body + 2);
      rate = read_u32(raw.data() + body + 4);
      bits = read_u16(raw.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = raw.data() + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw UnsupportedEncoding("missing fmt/data chunk: " + path.string());
  if (channels < 1 || channels > 2) throw UnsupportedEncoding("unsupported channel count");
  if (!((format == kFormatPcm && bits == 16) || (format == kFormatFloat && bits == 32))) {
    throw UnsupportedEncoding("only PCM-16 and IEEE-float-32 WAV are supported");
  }

  size_t bytes_per_sample = bits / 8;
  size_t frame_bytes = bytes_per_sample * channels;
  size_t n_frames = data_len / frame_bytes;
  if (n_frames == 0) throw UnsupportedEncoding("empty data chunk: " + path.string());

  std::vector<float> samples(n_frames);
  for (size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const uint8_t* p = data + i * frame_bytes + c * bytes_per_sample;
      if (format == kFormatPcm) {
        int16_t v = static_cast<int16_t>(read_u16(p));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        uint32_t u = read_u32(p);
        float v;
        std::memcpy(&v, &u, 4);
        acc += v;
      }
    }
    acc /= channels;
    samples[i] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return make_clip(std::move(samples), static_cast<int>(rate), path.stem().string());
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavFormat format) {
  const bool pcm = format == WavFormat::pcm16;
  const uint16_t bits = pcm ? 16 : 32;
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_len = n * (bits / 8);

  std::vector<uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<uint32_t>(clip.sample_rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);

  for (float v : clip.samples) {
    if (pcm) {
      long q = std::lrint(static_cast<double>(v) * 32768.0);
      q = std::clamp<long>(q, -32768, 32767);
      put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
    } else {
      uint32_t u;
      std::memcpy(&u, &v, 4);
      put_u32(out, u);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoFailure("short write: " + path.string());
}

namespace {

// Kaiser window support
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  double half = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

constexpr int kZeroCrossings = 64;
constexpr int kTableDensity = 512;  // kernel samples per zero crossing
constexpr double kKaiserBeta = 8.6;

// sinc(v) * kaiser(v / 64) tabulated on v in [0, 64]
const std::vector<double>& sinc_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kZeroCrossings * kTableDensity + 2);
    double denom = bessel_i0(kKaiserBeta);
    for (size_t i = 0; i < t.size(); ++i) {
      double v = static_cast<double>(i) / kTableDensity;
      if (v >= kZeroCrossings) {
        t[i] = 0.0;
        continue;
      }
      double s = v == 0.0 ? 1.0 : std::sin(M_PI * v) / (M_PI * v);
      double r = v / kZeroCrossings;
      double w = bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / denom;
      t[i] = s * w;
    }
    return t;
  }();
  return table;
}

double kernel_at(double v) {
  v = std::fabs(v);
  if (v >= kZeroCrossings) return 0.0;
  double idx = v * kTableDensity;
  size_t i = static_cast<size_t>(idx);
  double frac = idx - static_cast<double>(i);
  const auto& t = sinc_table();
  return t[i] * (1.0 - frac) + t[i + 1] * frac;
}

}  // namespace

namespace {

std::vector<float> resample_core(const std::vector<float>& in, double ratio, int64_t out_len) {
  const int64_t in_len = static_cast<int64_t>(in.size());
  // cutoff scales the kernel when downsampling so the passband stays below
  // the output Nyquist
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kZeroCrossings / cutoff;

  std::vector<float> out(static_cast<size_t>(std::max<int64_t>(out_len, 1)), 0.0f);
  for (int64_t m = 0; m < out_len; ++m) {
    const double t = static_cast<double>(m) / ratio;
    int64_t k_lo = static_cast<int64_t>(std::ceil(t - half_width));
    int64_t k_hi = static_cast<int64_t>(std::floor(t + half_width));
    k_lo = std::max<int64_t>(k_lo, 0);
    k_hi = std::min<int64_t>(k_hi, in_len - 1);
    double acc = 0.0;
    for (int64_t k = k_lo; k <= k_hi; ++k) {
      acc += static_cast<double>(in[static_cast<size_t>(k)]) *
             kernel_at((static_cast<double>(k) - t) * cutoff);
    }
    out[static_cast<size_t>(m)] = static_cast<float>(std::clamp(acc * cutoff, -1.0, 1.0));
  }
  return out;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw InvalidConfig("resample: target_rate must be positive");
  if (target_rate == clip.sample_rate) {
    AudioClip out = clip;
    return out;
  }
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const int64_t out_len = std::llround(static_cast<double>(clip.length()) * ratio);
  return make_clip(resample_core(clip.samples, ratio, out_len), target_rate, clip.source_id);
}

AudioClip resample_to_length(const AudioClip& clip, int64_t new_length) {
  if (new_length <= 0) throw InvalidConfig("resample_to_length: length must be positive");
  const double ratio = static_cast<double>(new_length) / static_cast<double>(clip.length());
  return make_clip(resample_core(clip.samples, ratio, new_length), clip.sample_rate,
                   clip.source_id);
}

AudioClip slice_chunk(const AudioClip& clip, int64_t start, int64_t length) {
  if (start < 0) throw InvalidConfig("slice_chunk: start must be >= 0");
  if (length <= 0) throw InvalidConfig("slice_chunk: length must be > 0");
  std::vector<float> out(static_cast<size_t>(length), 0.0f);
  const int64_t in_len = clip.length();
  const int64_t copy_end = std::min(start + length, in_len);
  for (int64_t i = start; i < copy_end; ++i) {
    out[static_cast<size_t>(i - start)] = clip.samples[static_cast<size_t>(i)];
  }
  AudioClip res;
  res.samples = std::move(out);
  res.sample_rate = clip.sample_rate;
  res.source_id = clip.source_id;
  return res;
}

}  // namespace tagbench
