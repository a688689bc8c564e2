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

/// Flat binary container of named float32 arrays with shape headers.
/// Little-endian, bit-exact round trip. A JSON sidecar (written next to the
/// container as <path>.json) carries arch id, config, epoch and val loss.
struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

void write_array_container(const std::filesystem::path& path,
                           const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_array_container(const std::filesystem::path& path);

struct CheckpointMeta {
  std::string arch;
  std::string config_json;  // serialized ModelConfig
  int epoch = 0;
  double val_loss = 0.0;
  uint64_t seed = 0;
};

void write_checkpoint_sidecar(const std::filesystem::path& container_path,
                              const CheckpointMeta& meta);
CheckpointMeta read_checkpoint_sidecar(const std::filesystem::path& container_path);

}  // namespace tagbench
