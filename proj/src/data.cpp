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

#include "tagbench/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "tagbench/dsp.hpp"
#include "tagbench/errors.hpp"
#include "tagbench/rng.hpp"

namespace tagbench {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw MalformedRow("unknown split: " + name);
}

std::vector<size_t> Manifest::split_indices(Split s) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == s) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::string> split_tsv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingFile(path.string());

  std::string line;
  if (!std::getline(f, line)) throw MalformedRow("empty manifest: " + path.string());
  auto header = split_tsv_line(line);
  if (header.size() != 3 + kTagArity || header[0] != "clip_id" || header[1] != "path" ||
      header[2] != "split") {
    throw BadTagArity("manifest header must be clip_id, path, split + " +
                      std::to_string(kTagArity) + " tag columns");
  }

  Manifest m;
  m.dataset_id = path.stem().string();
  m.tag_vocab.assign(header.begin() + 3, header.end());

  std::unordered_set<std::string> seen;
  size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tsv_line(line);
    if (fields.size() != 3 + kTagArity) {
      throw BadTagArity("row " + std::to_string(line_no) + ": expected " +
                        std::to_string(3 + kTagArity) + " fields, got " +
                        std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.clip_id = fields[0];
    e.path = fields[1];
    e.split = split_from_name(fields[2]);
    if (e.clip_id.empty() || e.path.empty()) {
      throw MalformedRow("row " + std::to_string(line_no) + ": empty clip_id or path");
    }
    if (!seen.insert(e.clip_id).second) throw DuplicateClipId(e.clip_id);
    e.tags.reserve(kTagArity);
    for (int t = 0; t < kTagArity; ++t) {
      const std::string& v = fields[static_cast<size_t>(3 + t)];
      if (v == "0") e.tags.push_back(0);
      else if (v == "1") e.tags.push_back(1);
      else throw MalformedRow("row " + std::to_string(line_no) + ": tag values must be 0 or 1");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path.string());
  f << "clip_id\tpath\tsplit";
  for (const auto& t : manifest.tag_vocab) f << '\t' << t;
  f << '\n';
  for (const auto& e : manifest.entries) {
    f << e.clip_id << '\t' << e.path << '\t' << split_name(e.split);
    for (uint8_t t : e.tags) f << '\t' << (t ? '1' : '0');
    f << '\n';
  }
}

Split mtat_split(int folder_index) {
  if (folder_index < 0 || folder_index > 15) {
    throw OutOfRange("mtat_split: folder index must be in 0..15");
  }
  if (folder_index <= 11) return Split::train;
  if (folder_index == 12) return Split::valid;
  return Split::test;
}

DatasetConvention convention_from_name(const std::string& name) {
  if (name == "mtat") return DatasetConvention::mtat;
  if (name == "msd") return DatasetConvention::msd;
  if (name == "jamendo") return DatasetConvention::jamendo;
  throw InvalidConfig("unknown dataset convention: " + name);
}

SplitReport validate_split_counts(const Manifest& manifest, DatasetConvention convention) {
  SplitReport report;
  size_t n_train = manifest.split_indices(Split::train).size();
  size_t n_valid = manifest.split_indices(Split::valid).size();
  size_t n_test = manifest.split_indices(Split::test).size();
  size_t total = manifest.entries.size();

  auto warn = [&](const std::string& msg) {
    report.clean = false;
    report.warnings.push_back(msg);
  };

  switch (convention) {
    case DatasetConvention::msd:
      if (n_train != 201680) warn("train count " + std::to_string(n_train) + " != published 201680");
      if (n_valid != 11774) warn("valid count " + std::to_string(n_valid) + " != published 11774");
      if (n_test != 28435) warn("test count " + std::to_string(n_test) + " != published 28435");
      break;
    case DatasetConvention::mtat:
      if (total != 25877) warn("total count " + std::to_string(total) + " != published 25877");
      break;
    case DatasetConvention::jamendo:
      if (total != 55701) warn("total count " + std::to_string(total) + " != published 55701 (split-0)");
      break;
  }
  return report;
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxRules = 8;
const char* kRuleNames[kMaxRules] = {"tone_220",  "tone_440",  "tone_880", "tone_1760",
                                     "tone_3520", "tremolo_660", "noise_burst", "chirp_up"};

// One component per tag rule; presence of the component defines the label.
void render_component(int rule, std::vector<double>& buf, int sr, double amp, Rng& rng) {
  const size_t n = buf.size();
  auto add_tone = [&](double freq) {
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (size_t i = 0; i < n; ++i) {
      buf[i] += amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / sr + phase);
    }
  };
  switch (rule) {
    case 0: add_tone(220.0); break;
    case 1: add_tone(440.0); break;
    case 2: add_tone(880.0); break;
    case 3: add_tone(1760.0); break;
    case 4: add_tone(3520.0); break;
    case 5: {  // 660 Hz carrier with 6 Hz amplitude modulation
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const double gain = amp * std::sqrt(8.0 / 3.0);  // match the RMS of an unmodulated tone
      for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const double am = 0.5 * (1.0 + std::sin(2.0 * M_PI * 6.0 * t));
        buf[i] += gain * am * std::sin(2.0 * M_PI * 660.0 * t + phase);
      }
      break;
    }
    case 6: {  // periodic white-noise bursts, 100 ms every 500 ms
      const size_t burst = static_cast<size_t>(0.1 * sr);
      const size_t period = static_cast<size_t>(0.5 * sr);
      for (size_t i = 0; i < n; ++i) {
        const double v = rng.normal();  // keep the stream in lockstep
        if (i % period < burst) buf[i] += amp * 0.5 * v;
      }
      break;
    }
    case 7: {  // linear chirp 1 kHz -> 3 kHz, repeating every 2 s
      const double repeat = 2.0;
      for (size_t i = 0; i < n; ++i) {
        const double t = std::fmod(static_cast<double>(i) / sr, repeat);
        const double f0 = 1000.0, f1 = 3000.0;
        const double phase = 2.0 * M_PI * (f0 * t + 0.5 * (f1 - f0) / repeat * t * t);
        buf[i] += amp * std::sin(phase);
      }
      break;
    }
    default: break;
  }
}

}  // namespace

std::vector<std::string> synthetic_tag_names(int n_active_tags) {
  std::vector<std::string> names;
  for (int i = 0; i < kTagArity; ++i) {
    if (i < n_active_tags && i < kMaxRules) {
      names.emplace_back(kRuleNames[i]);
    } else {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "unused_%02d", i);
      names.emplace_back(buf);
    }
  }
  return names;
}

Manifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.n_clips <= 0 || spec.clip_seconds <= 0.0) {
    throw InvalidConfig("generate_synthetic: n_clips and clip_seconds must be positive");
  }
  const int n_rules = std::min(spec.n_active_tags, kMaxRules);
  if (n_rules <= 0) throw InvalidConfig("generate_synthetic: need at least one tag rule");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string() + ": " + ec.message());

  Manifest m;
  m.dataset_id = "synthetic";
  m.tag_vocab = synthetic_tag_names(n_rules);

  const int sr = kPipelineRate;
  const size_t n_samples = static_cast<size_t>(std::llround(spec.clip_seconds * sr));
  const int n_train = static_cast<int>(std::floor(0.70 * spec.n_clips));
  const int n_valid = static_cast<int>(std::floor(0.85 * spec.n_clips)) - n_train;

  for (int c = 0; c < spec.n_clips; ++c) {
    Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(c)));
    std::vector<uint8_t> present(static_cast<size_t>(n_rules), 0);
    int count = 0;
    for (int r = 0; r < n_rules; ++r) {
      present[static_cast<size_t>(r)] = rng.bernoulli(0.5) ? 1 : 0;
      count += present[static_cast<size_t>(r)];
    }
    if (count == 0) present[static_cast<size_t>(c % n_rules)] = 1;  // at least one component

    std::vector<double> buf(n_samples, 0.0);
    for (int r = 0; r < n_rules; ++r) {
      if (!present[static_cast<size_t>(r)]) continue;
      const double amp = rng.uniform(0.12, 0.22);
      render_component(r, buf, sr, amp, rng);
    }
    double peak = 0.0;
    for (double v : buf) peak = std::max(peak, std::fabs(v));
    const double scale = peak > 0.95 ? 0.95 / peak : 1.0;

    std::vector<float> samples(n_samples);
    for (size_t i = 0; i < n_samples; ++i) samples[i] = static_cast<float>(buf[i] * scale);

    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04d", c);
    const std::string wav_name = std::string(name) + ".wav";
    write_wav(out_dir / wav_name, make_clip(std::move(samples), sr, name));

    ManifestEntry e;
    e.clip_id = name;
    e.path = wav_name;
    e.split = c < n_train ? Split::train : (c < n_train + n_valid ? Split::valid : Split::test);
    e.tags.assign(kTagArity, 0);
    for (int r = 0; r < n_rules; ++r) e.tags[static_cast<size_t>(r)] = present[static_cast<size_t>(r)];
    m.entries.push_back(std::move(e));
  }

  save_manifest(m, out_dir / "manifest.tsv");
  return m;
}

Dataset Dataset::load(const std::filesystem::path& manifest_path) {
  Dataset d;
  d.manifest = load_manifest(manifest_path);
  d.root = manifest_path.parent_path();
  d.clips.reserve(d.manifest.entries.size());
  for (const auto& e : d.manifest.entries) {
    AudioClip clip = load_wav(d.root / e.path);
    if (clip.sample_rate != kPipelineRate) clip = resample(clip, kPipelineRate);
    clip.source_id = e.clip_id;
    d.clips.push_back(std::move(clip));
  }
  return d;
}

}  // namespace tagbench
