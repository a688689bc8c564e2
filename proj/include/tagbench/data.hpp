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

#include "tagbench/audio.hpp"

namespace tagbench {

constexpr int kTagArity = 50;

enum class Split { train, valid, test };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
  std::string clip_id;
  std::string path;  // relative to the manifest location
  Split split = Split::train;
  std::vector<uint8_t> tags;  // kTagArity bits
};

struct Manifest {
  std::string dataset_id;
  std::vector<std::string> tag_vocab;  // kTagArity names
  std::vector<ManifestEntry> entries;

  std::vector<size_t> split_indices(Split s) const;
};

/// TSV with header: clip_id, path, split, then exactly 50 tag columns.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// MTAT folder convention: folders 0-11 train, 12 valid, 13-15 test.
Split mtat_split(int folder_index);

enum class DatasetConvention { mtat, msd, jamendo };
DatasetConvention convention_from_name(const std::string& name);

struct SplitReport {
  bool clean = true;
  std::vector<std::string> warnings;
};

/// Compares manifest counts against the published split conventions
/// (MSD 201680/11774/28435, MTAT total 25877, Jamendo split-0 total 55701).
/// Mismatches are warnings, never errors.
SplitReport validate_split_counts(const Manifest& manifest, DatasetConvention convention);

/// Desk-scale synthetic dataset: clips are seeded mixtures of sines in
/// distinct bands, a tremolo tone, noise bursts and a chirp; each active tag
/// is true iff its component is present. Tag columns are padded to arity 50.
struct SyntheticSpec {
  int n_clips = 100;
  double clip_seconds = 30.0;
  uint64_t seed = 0;
  int n_active_tags = 8;  // up to 8 component rules
};

std::vector<std::string> synthetic_tag_names(int n_active_tags);

/// Writes <out_dir>/clip_XXXX.wav files and <out_dir>/manifest.tsv, returns
/// the manifest. Deterministic for a fixed spec.
Manifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Manifest plus decoded audio, resampled to 16 kHz. Loads everything into
/// memory (desk scale).
struct Dataset {
  Manifest manifest;
  std::filesystem::path root;
  std::vector<AudioClip> clips;  // parallel to manifest.entries

  static Dataset load(const std::filesystem::path& manifest_path);
};

}  // namespace tagbench
