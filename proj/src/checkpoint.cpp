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

#include "tagbench/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tagbench/errors.hpp"

namespace tagbench {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'B', 'C'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw IoFailure("checkpoint container truncated");
  return v;
}

}  // namespace

void write_array_container(const std::filesystem::path& path,
                           const std::vector<NamedArray>& arrays) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path.string());
  f.write(kMagic, 4);
  put<uint32_t>(f, kVersion);
  put<uint64_t>(f, arrays.size());
  for (const auto& a : arrays) {
    put<uint32_t>(f, static_cast<uint32_t>(a.name.size()));
    f.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put<uint32_t>(f, static_cast<uint32_t>(a.shape.size()));
    for (int d : a.shape) put<int64_t>(f, d);
    put<uint64_t>(f, a.data.size());
    f.write(reinterpret_cast<const char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  }
  if (!f) throw IoFailure("short write: " + path.string());
}

std::vector<NamedArray> read_array_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingFile(path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoFailure("not a checkpoint container: " + path.string());
  }
  const uint32_t version = get<uint32_t>(f);
  if (version != kVersion) throw IoFailure("unsupported checkpoint version");
  const uint64_t count = get<uint64_t>(f);
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    const uint32_t name_len = get<uint32_t>(f);
    a.name.resize(name_len);
    f.read(a.name.data(), name_len);
    const uint32_t ndim = get<uint32_t>(f);
    a.shape.resize(ndim);
    for (uint32_t d = 0; d < ndim; ++d) a.shape[d] = static_cast<int>(get<int64_t>(f));
    const uint64_t n = get<uint64_t>(f);
    a.data.resize(n);
    f.read(reinterpret_cast<char*>(a.data.data()),
           static_cast<std::streamsize>(n * sizeof(float)));
    if (!f) throw IoFailure("checkpoint container truncated");
    arrays.push_back(std::move(a));
  }
  return arrays;
}

void write_checkpoint_sidecar(const std::filesystem::path& container_path,
                              const CheckpointMeta& meta) {
  nlohmann::json j;
  j["schema"] = "tagbench-checkpoint";
  j["version"] = 1;
  j["arch"] = meta.arch;
  j["config"] = nlohmann::json::parse(meta.config_json);
  j["epoch"] = meta.epoch;
  j["val_loss"] = meta.val_loss;
  j["seed"] = meta.seed;
  std::filesystem::path p = container_path;
  p += ".json";
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + p.string());
  f << j.dump(2) << '\n';
}

CheckpointMeta read_checkpoint_sidecar(const std::filesystem::path& container_path) {
  std::filesystem::path p = container_path;
  p += ".json";
  std::ifstream f(p);
  if (!f) throw MissingFile(p.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure("bad checkpoint sidecar: " + std::string(e.what()));
  }
  CheckpointMeta meta;
  meta.arch = j.at("arch").get<std::string>();
  meta.config_json = j.at("config").dump();
  meta.epoch = j.at("epoch").get<int>();
  meta.val_loss = j.at("val_loss").get<double>();
  meta.seed = j.value("seed", 0ULL);
  return meta;
}

}  // namespace tagbench
