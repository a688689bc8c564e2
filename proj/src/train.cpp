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

#include "tagbench/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "tagbench/errors.hpp"
#include "tagbench/metrics.hpp"

namespace tagbench {

using ad::Tensor;

// ---------------------------------------------------------------------------
// checkpoint glue
// ---------------------------------------------------------------------------

std::vector<NamedArray> snapshot_arrays(const Model& model) {
  nn::Collector c = model.collect();
  std::vector<NamedArray> arrays;
  arrays.reserve(c.params.size() + c.buffers.size());
  for (const auto& p : c.params) {
    arrays.push_back({p.name, p.t.shape(), p.t.values()});
  }
  for (const auto& b : c.buffers) {
    arrays.push_back({b.name, {static_cast<int>(b.values->size())}, *b.values});
  }
  return arrays;
}

void load_arrays(Model& model, const std::vector<NamedArray>& arrays) {
  std::unordered_map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;

  nn::Collector c = model.collect();
  for (auto& p : c.params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw IoFailure("checkpoint missing parameter " + p.name);
    const NamedArray& a = *it->second;
    if (static_cast<int64_t>(a.data.size()) != p.t.size()) {
      throw IoFailure("checkpoint shape mismatch for " + p.name);
    }
    std::copy(a.data.begin(), a.data.end(), p.t.data());
  }
  for (auto& b : c.buffers) {
    auto it = by_name.find(b.name);
    if (it == by_name.end()) throw IoFailure("checkpoint missing buffer " + b.name);
    if (it->second->data.size() != b.values->size()) {
      throw IoFailure("checkpoint shape mismatch for " + b.name);
    }
    *b.values = it->second->data;
  }
}

void save_model(const std::filesystem::path& path, const Model& model, int epoch,
                double val_loss, uint64_t seed) {
  write_array_container(path, snapshot_arrays(model));
  CheckpointMeta meta;
  meta.arch = arch_name(model.config().arch);
  meta.config_json = model.config().to_json();
  meta.epoch = epoch;
  meta.val_loss = val_loss;
  meta.seed = seed;
  write_checkpoint_sidecar(path, meta);
}

Model load_model(const std::filesystem::path& path) {
  CheckpointMeta meta = read_checkpoint_sidecar(path);
  ModelConfig config = ModelConfig::from_json(meta.config_json);
  Model model(config, meta.seed);
  load_arrays(model, read_array_container(path));
  return model;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

std::string train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::auto_select: return "auto";
    case TrainMode::chunk_level: return "chunk";
    case TrainMode::song_level: return "song";
  }
  return "?";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "auto") return TrainMode::auto_select;
  if (name == "chunk") return TrainMode::chunk_level;
  if (name == "song") return TrainMode::song_level;
  throw InvalidConfig("unknown train mode: " + name);
}

namespace {

Tensor targets_for(const Dataset& data, const std::vector<size_t>& idx, int n_tags) {
  Tensor t = Tensor::zeros({static_cast<int>(idx.size()), n_tags});
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& tags = data.manifest.entries[idx[i]].tags;
    for (int k = 0; k < n_tags && k < static_cast<int>(tags.size()); ++k) {
      t.data()[static_cast<int64_t>(i) * n_tags + k] = tags[static_cast<size_t>(k)] ? 1.0f : 0.0f;
    }
  }
  return t;
}

// Representations of repeated identical windows (song-level training, the
// deterministic validation chunks) are constant across epochs and cached.
// The harmonic front end is excluded: its representation depends on the
// trainable bandwidth.
using RepCache = std::map<std::pair<size_t, int64_t>, Tensor>;

Tensor prepared_batch(Model& model, const Dataset& data, const std::vector<size_t>& batch,
                      const std::vector<int64_t>& starts, RepCache* cache) {
  const int64_t L = model.config().input_length;
  if (!cache) {
    std::vector<AudioClip> chunks;
    chunks.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      chunks.push_back(slice_chunk(data.clips[batch[i]], starts[i], L));
    }
    return model.prepare_batch(chunks);
  }
  std::vector<Tensor> parts;
  parts.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const std::pair<size_t, int64_t> key{batch[i], starts[i]};
    auto it = cache->find(key);
    if (it == cache->end()) {
      std::vector<AudioClip> one = {slice_chunk(data.clips[batch[i]], starts[i], L)};
      it = cache->emplace(key, model.prepare_batch(one)).first;
    }
    parts.push_back(it->second);
  }
  return parts.size() == 1 ? parts[0] : ad::concat(parts, 0);
}

double batch_loss_step(Model& model, const Dataset& data, const std::vector<size_t>& batch,
                       const std::vector<int64_t>& starts, Optimizer* opt, RepCache* cache) {
  Tensor x = prepared_batch(model, data, batch, starts, cache);
  Tensor logits = model.forward(x);
  Tensor loss = ad::bce_with_logits(logits, targets_for(data, batch, model.config().n_tags));
  if (opt) {
    opt->zero_grad();
    ad::backward(loss);
    opt->step();
  }
  return loss.item();
}

}  // namespace

TrainRun train(Model& model, const Dataset& dataset, const TrainConfig& config) {
  const auto train_idx = dataset.manifest.split_indices(Split::train);
  const auto valid_idx = dataset.manifest.split_indices(Split::valid);
  if (train_idx.empty()) throw EmptySplit("train split is empty");
  if (valid_idx.empty()) throw EmptySplit("valid split is empty");
  if (config.batch_size <= 0) throw InvalidConfig("batch_size must be positive");
  if (config.out_dir.empty()) throw InvalidConfig("train: out_dir is required");

  const Arch arch = model.config().arch;
  const bool song_capable = arch == Arch::fcn || arch == Arch::crnn;
  const int64_t L = model.config().input_length;

  TrainMode mode = config.mode;
  if (mode == TrainMode::song_level && !song_capable) {
    throw ModeMismatch("song-level training is only defined for fcn and crnn");
  }
  if (mode == TrainMode::auto_select) {
    if (song_capable) {
      int64_t min_len = dataset.clips.empty() ? 0 : dataset.clips[train_idx[0]].length();
      for (size_t i : train_idx) min_len = std::min(min_len, dataset.clips[i].length());
      // clips longer than the receptive field flip fcn/crnn to chunk level
      mode = min_len > L ? TrainMode::chunk_level : TrainMode::song_level;
    } else {
      mode = TrainMode::chunk_level;
    }
  }
  const bool chunked = mode == TrainMode::chunk_level;

  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  const std::filesystem::path ckpt_path = config.out_dir / "checkpoint.bin";

  std::vector<Tensor> params;
  {
    nn::Collector c = model.collect();
    for (auto& p : c.params) params.push_back(p.t);
  }
  Optimizer opt(params, config.opt);
  model.reset_dropout_stream(config.seed);

  TrainRun run;
  run.resolved_mode = mode;
  run.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<NamedArray> best_arrays;

  const bool cacheable = arch != Arch::harmonic_cnn;
  RepCache rep_cache;
  RepCache* train_cache = cacheable && !chunked ? &rep_cache : nullptr;
  RepCache* val_cache = cacheable ? &rep_cache : nullptr;

  std::vector<size_t> order(train_idx);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // deterministic per-epoch stream: shuffling + chunk starts
    Rng rng(mix_seed(config.seed, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    model.set_mode(Mode::train);
    double train_loss = 0.0;
    int64_t seen = 0;
    for (size_t off = 0; off < order.size(); off += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), off + static_cast<size_t>(config.batch_size));
      std::vector<size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(off),
                                order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<int64_t> starts;
      starts.reserve(batch.size());
      for (size_t i : batch) {
        const int64_t span = std::max<int64_t>(0, dataset.clips[i].length() - L);
        starts.push_back(chunked && span > 0 ? rng.uniform_int(0, span) : 0);
      }
      const double loss = batch_loss_step(model, dataset, batch, starts, &opt, train_cache);
      train_loss += loss * static_cast<double>(batch.size());
      seen += static_cast<int64_t>(batch.size());
      ++run.optimizer_steps;
    }
    train_loss /= static_cast<double>(seen);

    model.set_mode(Mode::eval);
    double val_loss = 0.0;
    int64_t val_seen = 0;
    for (size_t off = 0; off < valid_idx.size(); off += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(valid_idx.size(), off + static_cast<size_t>(config.batch_size));
      std::vector<size_t> batch(valid_idx.begin() + static_cast<std::ptrdiff_t>(off),
                                valid_idx.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<int64_t> starts;
      for (size_t i : batch) {
        const int64_t span = std::max<int64_t>(0, dataset.clips[i].length() - L);
        starts.push_back(chunked ? span / 2 : 0);  // deterministic validation chunk
      }
      const double loss = batch_loss_step(model, dataset, batch, starts, nullptr, val_cache);
      val_loss += loss * static_cast<double>(batch.size());
      val_seen += static_cast<int64_t>(batch.size());
    }
    val_loss /= static_cast<double>(val_seen);

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = train_loss;
    st.val_loss = val_loss;
    st.phase = opt.phase();
    st.lr = opt.lr();

    const ScheduleEvent ev = opt.schedule_update(val_loss);
    st.improved = ev.improved;
    if (ev.improved) {
      run.best_val_loss = val_loss;
      run.best_epoch = epoch;
      best_arrays = snapshot_arrays(model);
      save_model(ckpt_path, model, epoch, val_loss, config.seed);
    }
    run.history.push_back(st);
    if (ev.finished) break;
  }

  if (!best_arrays.empty()) load_arrays(model, best_arrays);
  run.best_checkpoint = ckpt_path;
  return run;
}

// ---------------------------------------------------------------------------
// prediction / evaluation
// ---------------------------------------------------------------------------

namespace {
constexpr int kEvalChunks = 16;
constexpr int kPredictSubBatch = 8;
}  // namespace

std::vector<int64_t> eval_chunk_starts(int64_t clip_len, int64_t window) {
  std::vector<int64_t> starts;
  if (clip_len <= window) {
    starts.push_back(0);  // degenerate spacing: one window covers the clip
  } else {
    const double span = static_cast<double>(clip_len - window);
    for (int i = 0; i < kEvalChunks; ++i) {
      starts.push_back(std::llround(span * i / (kEvalChunks - 1)));
    }
  }
  return starts;
}

std::vector<double> predict_clip(Model& model, const AudioClip& clip) {
  if (clip.samples.empty()) throw InvalidConfig("predict_clip: empty clip");
  const int64_t L = model.config().input_length;
  const std::vector<int64_t> starts = eval_chunk_starts(clip.length(), L);

  const Mode saved = model.mode();
  model.set_mode(Mode::eval);
  const int n_tags = model.config().n_tags;
  std::vector<double> acc(static_cast<size_t>(n_tags), 0.0);
  for (size_t off = 0; off < starts.size(); off += kPredictSubBatch) {
    const size_t end = std::min(starts.size(), off + kPredictSubBatch);
    std::vector<AudioClip> chunks;
    for (size_t i = off; i < end; ++i) chunks.push_back(slice_chunk(clip, starts[i], L));
    Tensor scores = model.forward_chunks(chunks);
    for (size_t b = 0; b < chunks.size(); ++b) {
      for (int k = 0; k < n_tags; ++k) {
        acc[static_cast<size_t>(k)] += scores.data()[static_cast<int64_t>(b) * n_tags + k];
      }
    }
  }
  model.set_mode(saved);
  for (auto& v : acc) v /= static_cast<double>(starts.size());
  return acc;
}

int tagbench_threads() {
  const char* env = std::getenv("TAGBENCH_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

EvalReport evaluate(const Predictor& predictor, const Dataset& dataset, Split split,
                    const Deformation& deformation, const EvalOptions& options) {
  const auto idx = dataset.manifest.split_indices(split);
  if (idx.empty()) throw EmptySplit("evaluate: split " + split_name(split) + " is empty");

  const int n_tags = static_cast<int>(dataset.manifest.tag_vocab.size());
  std::vector<std::vector<double>> scores(idx.size());

  const int threads = std::max(1, options.threads > 0 ? options.threads : tagbench_threads());
  auto work = [&](size_t i) {
    const AudioClip& clip = dataset.clips[idx[i]];
    const AudioClip deformed = apply_deformation(deformation, clip, options.noise_seed);
    scores[i] = predictor(deformed, dataset.manifest.entries[idx[i]]);
  };
  if (threads <= 1 || idx.size() <= 1) {
    for (size_t i = 0; i < idx.size(); ++i) work(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(threads, static_cast<int>(idx.size()));
    pool.reserve(static_cast<size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) {
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < idx.size(); i = next.fetch_add(1)) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  EvalReport report;
  report.model_id = options.model_id;
  report.dataset_id = dataset.manifest.dataset_id;
  report.split = split_name(split);
  report.deformation = deformation.spec_string();
  report.n_clips = static_cast<int>(idx.size());

  double roc_sum = 0.0, pr_sum = 0.0;
  int n_valid = 0;
  for (int k = 0; k < n_tags; ++k) {
    TagMetrics tm;
    tm.tag = dataset.manifest.tag_vocab[static_cast<size_t>(k)];
    std::vector<double> s(idx.size());
    std::vector<uint8_t> y(idx.size());
    int n_pos = 0;
    for (size_t i = 0; i < idx.size(); ++i) {
      s[i] = scores[i][static_cast<size_t>(k)];
      y[i] = dataset.manifest.entries[idx[i]].tags[static_cast<size_t>(k)];
      n_pos += y[i] ? 1 : 0;
    }
    tm.n_pos = n_pos;
    if (n_pos == 0 || n_pos == static_cast<int>(idx.size())) {
      tm.degenerate = true;
      tm.roc_auc = std::numeric_limits<double>::quiet_NaN();
      tm.pr_auc = std::numeric_limits<double>::quiet_NaN();
    } else {
      tm.roc_auc = roc_auc(s, y);
      tm.pr_auc = pr_auc(s, y);
      roc_sum += tm.roc_auc;
      pr_sum += tm.pr_auc;
      ++n_valid;
    }
    report.per_tag.push_back(std::move(tm));
  }
  report.macro_roc_auc = n_valid > 0 ? roc_sum / n_valid : std::numeric_limits<double>::quiet_NaN();
  report.macro_pr_auc = n_valid > 0 ? pr_sum / n_valid : std::numeric_limits<double>::quiet_NaN();
  return report;
}

EvalReport evaluate_model(Model& model, const Dataset& dataset, Split split,
                          const Deformation& deformation, EvalOptions options) {
  // one model shared across worker threads: eval-mode forward is read-only
  model.set_mode(Mode::eval);
  Predictor p = [&model](const AudioClip& clip, const ManifestEntry&) {
    return predict_clip(model, clip);
  };
  return evaluate(p, dataset, split, deformation, options);
}

// ---------------------------------------------------------------------------
// report serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json metric_json(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::string fmt_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["schema"] = "tagbench-eval";
  j["version"] = 1;
  j["model"] = report.model_id;
  j["dataset"] = report.dataset_id;
  j["split"] = report.split;
  j["deformation"] = report.deformation;
  j["n_clips"] = report.n_clips;
  j["macro_roc_auc"] = metric_json(report.macro_roc_auc);
  j["macro_pr_auc"] = metric_json(report.macro_pr_auc);
  j["tags"] = nlohmann::json::array();
  for (const auto& t : report.per_tag) {
    j["tags"].push_back({{"tag", t.tag},
                         {"n_pos", t.n_pos},
                         {"roc_auc", metric_json(t.roc_auc)},
                         {"pr_auc", metric_json(t.pr_auc)},
                         {"degenerate", t.degenerate}});
  }
  return j.dump(2);
}

EvalReport report_from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure("bad eval report json: " + std::string(e.what()));
  }
  if (j.value("schema", "") != "tagbench-eval" || j.value("version", 0) != 1) {
    throw ConfigError("eval report schema mismatch");
  }
  EvalReport r;
  r.model_id = j.at("model").get<std::string>();
  r.dataset_id = j.at("dataset").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.deformation = j.at("deformation").get<std::string>();
  r.n_clips = j.value("n_clips", 0);
  auto metric = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  r.macro_roc_auc = metric(j.at("macro_roc_auc"));
  r.macro_pr_auc = metric(j.at("macro_pr_auc"));
  for (const auto& t : j.at("tags")) {
    TagMetrics tm;
    tm.tag = t.at("tag").get<std::string>();
    tm.n_pos = t.at("n_pos").get<int>();
    tm.roc_auc = metric(t.at("roc_auc"));
    tm.pr_auc = metric(t.at("pr_auc"));
    tm.degenerate = t.value("degenerate", false);
    r.per_tag.push_back(std::move(tm));
  }
  return r;
}

std::string report_tsv_string(const EvalReport& report) {
  std::ostringstream os;
  os << "model\tdataset\tsplit\tdeformation\ttag\tn_pos\troc_auc\tpr_auc\n";
  const std::string prefix = report.model_id + '\t' + report.dataset_id + '\t' + report.split +
                             '\t' + report.deformation + '\t';
  for (const auto& t : report.per_tag) {
    os << prefix << t.tag << '\t' << t.n_pos << '\t' << fmt_metric(t.roc_auc) << '\t'
       << fmt_metric(t.pr_auc) << '\n';
  }
  int total_pos = 0;
  for (const auto& t : report.per_tag) total_pos += t.n_pos;
  os << prefix << "macro\t" << total_pos << '\t' << fmt_metric(report.macro_roc_auc) << '\t'
     << fmt_metric(report.macro_pr_auc) << '\n';
  return os.str();
}

void write_report_tsv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path.string());
  f << report_tsv_string(report);
}

}  // namespace tagbench
