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

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tagbench/errors.hpp"
#include "tagbench/train.hpp"

using namespace tagbench;
using namespace testutil;

namespace {

// small synthetic dataset shared across the training tests
const Dataset& tiny_dataset() {
  static const Dataset d = [] {
    SyntheticSpec spec;
    spec.n_clips = 12;
    spec.clip_seconds = 3.2;
    spec.seed = 5;
    auto dir = temp_dir("train_data");
    generate_synthetic(spec, dir);
    return Dataset::load(dir / "manifest.tsv");
  }();
  return d;
}

ModelConfig tiny_musicnn() {
  ModelConfig cfg = ModelConfig::defaults(Arch::musicnn);
  cfg.width_mult = 0.25f;
  return cfg;
}

}  // namespace

TEST_CASE("eval_chunk_starts follows the evenly spaced formula") {
  // oracle: round(i * (len - window) / 15)
  const int64_t len = 480000, window = 59049;
  auto starts = eval_chunk_starts(len, window);
  REQUIRE(starts.size() == 16);
  for (int i = 0; i < 16; ++i) {
    CHECK(starts[static_cast<size_t>(i)] ==
          std::llround(static_cast<double>(i) * (len - window) / 15.0));
  }
  CHECK(starts.front() == 0);
  CHECK(starts.back() == len - window);

  // degenerate spacing: clip no longer than the window
  CHECK(eval_chunk_starts(window, window) == std::vector<int64_t>{0});
  CHECK(eval_chunk_starts(100, window) == std::vector<int64_t>{0});
}

TEST_CASE("1-epoch run on 4 train clips with batch 2 takes exactly 2 optimizer steps") {
  SyntheticSpec spec;
  spec.n_clips = 5;
  spec.clip_seconds = 3.2;
  spec.seed = 77;
  auto dir = temp_dir("steps");
  Manifest m = generate_synthetic(spec, dir);
  for (int i = 0; i < 4; ++i) m.entries[static_cast<size_t>(i)].split = Split::train;
  m.entries[4].split = Split::valid;
  save_manifest(m, dir / "manifest.tsv");
  Dataset data = Dataset::load(dir / "manifest.tsv");

  Model model(tiny_musicnn(), 1);
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.batch_size = 2;
  tc.seed = 1;
  tc.out_dir = temp_dir("steps_out");
  TrainRun run = train(model, data, tc);
  CHECK(run.optimizer_steps == 2);
  CHECK(run.history.size() == 1);
}

TEST_CASE("train errors: empty split and mode mismatch") {
  Model model(tiny_musicnn(), 1);
  TrainConfig tc;
  tc.out_dir = temp_dir("err_out");

  Dataset no_valid = tiny_dataset();
  for (auto& e : no_valid.manifest.entries) {
    if (e.split == Split::valid) e.split = Split::train;
  }
  CHECK_THROWS_AS(train(model, no_valid, tc), EmptySplit);

  TrainConfig song;
  song.out_dir = tc.out_dir;
  song.mode = TrainMode::song_level;
  Dataset data = tiny_dataset();
  CHECK_THROWS_AS(train(model, data, song), ModeMismatch);  // musicnn is chunk-level
}

TEST_CASE("short training run: best checkpoint tracks the minimum validation loss") {
  Model model(tiny_musicnn(), 3);
  TrainConfig tc;
  tc.max_epochs = 4;
  tc.batch_size = 4;
  tc.seed = 3;
  tc.opt.adam_lr = 1e-3;
  tc.out_dir = temp_dir("best_out");
  TrainRun run = train(model, tiny_dataset(), tc);
  REQUIRE(!run.history.empty());

  double best = 1e30;
  int best_epoch = 0;
  for (const auto& st : run.history) {
    if (st.val_loss < best) {
      best = st.val_loss;
      best_epoch = st.epoch;
    }
  }
  CHECK(run.best_epoch == best_epoch);
  CHECK(run.best_val_loss == doctest::Approx(best));
  CHECK(std::filesystem::exists(run.best_checkpoint));

  // the checkpoint sidecar records the best epoch
  CheckpointMeta meta = read_checkpoint_sidecar(run.best_checkpoint);
  CHECK(meta.epoch == best_epoch);
  CHECK(meta.val_loss == doctest::Approx(best));

  // reloading the checkpoint reproduces the model's predictions bitwise
  Model loaded = load_model(run.best_checkpoint);
  const AudioClip& clip = tiny_dataset().clips[0];
  auto s1 = predict_clip(model, clip);
  auto s2 = predict_clip(loaded, clip);
  REQUIRE(s1.size() == s2.size());
  for (size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == s2[i]);
}

TEST_CASE("predict_clip on a zero-logit model returns 0.5 everywhere") {
  Model model(tiny_musicnn(), 4);
  nn::Collector c = model.collect();
  for (auto& p : c.params) {
    if (p.name.rfind("head.", 0) == 0) std::fill(p.t.data(), p.t.data() + p.t.size(), 0.0f);
  }
  auto scores = predict_clip(model, tiny_dataset().clips[1]);
  REQUIRE(scores.size() == 50);
  for (double s : scores) CHECK(s == doctest::Approx(0.5));
}

TEST_CASE("predict_clip on an exactly window-sized clip equals one forward pass") {
  Model model(tiny_musicnn(), 5);
  model.set_mode(Mode::eval);
  const ModelConfig& cfg = model.config();
  AudioClip clip = slice_chunk(tiny_dataset().clips[2], 0, cfg.input_length);
  auto scores = predict_clip(model, clip);

  std::vector<AudioClip> batch = {clip};
  ad::Tensor direct = model.forward_chunks(batch);
  for (int k = 0; k < 50; ++k) {
    CHECK(scores[static_cast<size_t>(k)] == doctest::Approx(direct.data()[k]).epsilon(1e-7));
  }
}

TEST_CASE("evaluate with the oracle predictor reaches perfect macro AUCs") {
  const Dataset& data = tiny_dataset();
  Predictor oracle = [](const AudioClip&, const ManifestEntry& e) {
    std::vector<double> s(e.tags.size());
    for (size_t i = 0; i < e.tags.size(); ++i) s[i] = e.tags[i] ? 1.0 : 0.0;
    return s;
  };
  EvalOptions opts;
  opts.model_id = "oracle";
  EvalReport r = evaluate(oracle, data, Split::train, Deformation::none_(), opts);
  CHECK(r.macro_roc_auc == doctest::Approx(1.0));
  CHECK(r.macro_pr_auc == doctest::Approx(1.0));
  // padded tag columns are degenerate and flagged, never averaged
  int degenerate = 0;
  for (const auto& t : r.per_tag) degenerate += t.degenerate ? 1 : 0;
  CHECK(degenerate >= 42);
}

TEST_CASE("evaluate on an empty split throws") {
  const Dataset& data = tiny_dataset();
  Predictor oracle = [](const AudioClip&, const ManifestEntry& e) {
    return std::vector<double>(e.tags.size(), 0.5);
  };
  Dataset no_test = data;
  for (auto& e : no_test.manifest.entries) {
    if (e.split == Split::test) e.split = Split::train;
  }
  CHECK_THROWS_AS(evaluate(oracle, no_test, Split::test, Deformation::none_(), {}), EmptySplit);
}

TEST_CASE("evaluate with deformation none equals evaluating untouched clips bitwise") {
  Model model(tiny_musicnn(), 6);
  EvalOptions opts;
  EvalReport a = evaluate_model(model, tiny_dataset(), Split::test, Deformation::none_(), opts);
  EvalReport b = evaluate_model(model, tiny_dataset(), Split::test, Deformation::none_(), opts);
  CHECK(report_to_json(a) == report_to_json(b));
}

TEST_CASE("evaluate is thread-count invariant") {
  Model model(tiny_musicnn(), 7);
  EvalOptions one;
  one.threads = 1;
  EvalOptions four;
  four.threads = 4;
  EvalReport a = evaluate_model(model, tiny_dataset(), Split::test, Deformation::noise(0.1), one);
  EvalReport b = evaluate_model(model, tiny_dataset(), Split::test, Deformation::noise(0.1), four);
  CHECK(report_to_json(a) == report_to_json(b));
}

TEST_CASE("report serialization round trips and the TSV schema is exact") {
  Model model(tiny_musicnn(), 8);
  EvalOptions opts;
  opts.model_id = "musicnn";
  EvalReport r = evaluate_model(model, tiny_dataset(), Split::test, Deformation::none_(), opts);

  EvalReport back = report_from_json(report_to_json(r));
  CHECK(back.model_id == r.model_id);
  CHECK(back.per_tag.size() == r.per_tag.size());
  CHECK(report_to_json(back) == report_to_json(r));

  const std::string tsv = report_tsv_string(r);
  CHECK(tsv.rfind("model\tdataset\tsplit\tdeformation\ttag\tn_pos\troc_auc\tpr_auc\n", 0) == 0);
  // one row per tag plus the macro row plus the header
  const auto lines = std::count(tsv.begin(), tsv.end(), '\n');
  CHECK(lines == 1 + 50 + 1);

  CHECK_THROWS_AS(report_from_json("{\"schema\":\"other\"}"), ConfigError);
}

TEST_CASE("predict_clip mean is stable under chunk-order permutation") {
  // the accumulation is fixed-order over evenly spaced starts; permuting the
  // processing order of clips cannot change any per-clip score
  Model model(tiny_musicnn(), 9);
  const AudioClip& clip = tiny_dataset().clips[0];
  auto s1 = predict_clip(model, clip);
  auto s2 = predict_clip(model, clip);
  CHECK(s1 == s2);
}
