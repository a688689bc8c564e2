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

#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "tagbench/audio.hpp"
#include "tagbench/cli.hpp"
#include "tagbench/data.hpp"

using namespace tagbench;
using namespace testutil;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run(std::initializer_list<std::string> args) { return run_cli(std::vector<std::string>(args)); }

struct CliFixture {
  std::filesystem::path root = temp_dir("cli");
  std::filesystem::path data_dir = root / "data";
  std::filesystem::path manifest;

  CliFixture() {
    SyntheticSpec spec;
    spec.n_clips = 10;
    spec.clip_seconds = 3.2;
    spec.seed = 17;
    generate_synthetic(spec, data_dir);
    manifest = data_dir / "manifest.tsv";
  }
};

}  // namespace

TEST_CASE("cli: models and synth succeed") {
  CHECK(run({"models"}) == 0);
  auto dir = temp_dir("cli_synth");
  CHECK(run({"synth", "--out", (dir / "d").string(), "--n-clips", "6", "--seconds", "0.5"}) == 0);
  CHECK(std::filesystem::exists(dir / "d" / "manifest.tsv"));
  CHECK(std::filesystem::exists(dir / "d" / "resolved_config.json"));
}

TEST_CASE("cli: config errors exit 2, data errors exit 3") {
  CliFixture fx;
  // missing manifest -> data error
  CHECK(run({"train", "--arch", "musicnn", "--manifest", "/nope/m.tsv", "--out",
             (fx.root / "o1").string()}) == 3);
  // unknown arch -> config error
  CHECK(run({"train", "--arch", "resnet50", "--manifest", fx.manifest.string(), "--out",
             (fx.root / "o2").string()}) == 2);
  // unknown deform spec -> config error
  CHECK(run({"perturb", "--deform", "wobble:1", "--out", (fx.root / "o3").string(),
             (fx.data_dir / "clip_0000.wav").string()}) == 2);
  // report with no inputs -> config error
  CHECK(run({"report", "--out", (fx.root / "o4").string()}) == 2);
}

TEST_CASE("cli: train writes history, checkpoint and resolved config; eval and report chain") {
  CliFixture fx;
  const auto train_out = fx.root / "train";
  CHECK(run({"train", "--arch", "musicnn", "--manifest", fx.manifest.string(), "--out",
             train_out.string(), "--epochs", "2", "--seed", "7", "--batch", "4",
             "--width-mult", "0.25"}) == 0);
  CHECK(std::filesystem::exists(train_out / "checkpoint.bin"));
  CHECK(std::filesystem::exists(train_out / "checkpoint.bin.json"));
  CHECK(std::filesystem::exists(train_out / "resolved_config.json"));

  const std::string hist = slurp(train_out / "history.tsv");
  CHECK(hist.rfind("epoch\ttrain_loss\tval_loss\tphase\tlr\n", 0) == 0);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 3);  // header + 2 epochs

  const auto eval_out = fx.root / "eval";
  CHECK(run({"eval", "--checkpoint", (train_out / "checkpoint.bin").string(), "--manifest",
             fx.manifest.string(), "--out", eval_out.string(), "--split", "test",
             "--baseline-table"}) == 0);
  CHECK(std::filesystem::exists(eval_out / "report_none.json"));
  CHECK(std::filesystem::exists(eval_out / "report_none.tsv"));

  // published values are rendered in clearly labeled columns
  const std::string published = slurp(eval_out / "baseline_published.tsv");
  CHECK(published.find("0.9127") != std::string::npos);  // harmonic_cnn mtat roc
  CHECK(published.find("0.4611") != std::string::npos);
  CHECK(published.find("0.3036") != std::string::npos);  // corrected musicnn(128) msd pr
  CHECK(published.find("corrected") != std::string::npos);
  const std::string cmp = slurp(eval_out / "baseline_comparison.tsv");
  CHECK(cmp.find("measured_roc_auc") != std::string::npos);
  CHECK(cmp.find("published_roc_auc") != std::string::npos);

  const auto eval_noise = fx.root / "eval_noise";
  CHECK(run({"eval", "--checkpoint", (train_out / "checkpoint.bin").string(), "--manifest",
             fx.manifest.string(), "--out", eval_noise.string(), "--deform", "noise:0.4"}) == 0);

  const auto report_out = fx.root / "report";
  CHECK(run({"report", "--out", report_out.string(),
             (eval_out / "report_none.json").string(),
             (eval_noise / "report_noise_0.40.json").string()}) == 0);
  const std::string comparison = slurp(report_out / "comparison.tsv");
  CHECK(comparison.find("none") != std::string::npos);
  CHECK(comparison.find("noise:0.40") != std::string::npos);
  const std::string longcsv = slurp(report_out / "long.csv");
  // rows = reports x 2 metrics + header
  CHECK(std::count(longcsv.begin(), longcsv.end(), '\n') == 1 + 2 * 2);
}

TEST_CASE("cli: rerunning train with the same seed gives a bitwise-identical history") {
  CliFixture fx;
  const auto out_a = fx.root / "det_a";
  const auto out_b = fx.root / "det_b";
  for (const auto& out : {out_a, out_b}) {
    CHECK(run({"train", "--arch", "musicnn", "--manifest", fx.manifest.string(), "--out",
               out.string(), "--epochs", "2", "--seed", "11", "--batch", "4",
               "--width-mult", "0.25"}) == 0);
  }
  CHECK(slurp(out_a / "history.tsv") == slurp(out_b / "history.tsv"));
}

TEST_CASE("cli: perturb on wav files and manifest test-only enforcement") {
  CliFixture fx;
  const auto out = fx.root / "perturb";
  const auto in_wav = fx.data_dir / "clip_0000.wav";
  CHECK(run({"perturb", "--deform", "noise:0.4", "--out", out.string(), in_wav.string()}) == 0);
  AudioClip original = load_wav(in_wav);
  AudioClip deformed = load_wav(out / "clip_0000.wav");
  CHECK(deformed.length() == original.length());  // mixing preserves length

  const auto out2 = fx.root / "perturb_stretch";
  CHECK(run({"perturb", "--deform", "stretch:0.7071", "--out", out2.string(),
             in_wav.string()}) == 0);
  AudioClip stretched = load_wav(out2 / "clip_0000.wav");
  CHECK(stretched.length() == std::llround(original.length() / 0.7071));

  // manifest mode deforms only the test split
  const auto out3 = fx.root / "perturb_manifest";
  CHECK(run({"perturb", "--deform", "noise:0.1", "--out", out3.string(), "--manifest",
             fx.manifest.string()}) == 0);
  Manifest m = load_manifest(fx.manifest);
  for (const auto& e : m.entries) {
    const bool exists = std::filesystem::exists(out3 / (e.clip_id + ".wav"));
    CHECK(exists == (e.split == Split::test));
  }

  // naming a train clip explicitly is refused
  std::string train_id;
  for (const auto& e : m.entries) {
    if (e.split == Split::train) {
      train_id = e.clip_id;
      break;
    }
  }
  CHECK(run({"perturb", "--deform", "noise:0.1", "--out", (fx.root / "refuse").string(),
             "--manifest", fx.manifest.string(), "--clip-id", train_id}) == 2);
}

TEST_CASE("cli: output directory lock rejects concurrent runs") {
  auto dir = temp_dir("cli_lock");
  const auto out = dir / "locked";
  std::filesystem::create_directories(out);
  std::ofstream(out / ".tagbench.lock") << "held\n";
  CHECK(run({"synth", "--out", out.string(), "--n-clips", "2", "--seconds", "0.1"}) == 2);
}

TEST_CASE("cli binary: the installed entry point behaves like run_cli") {
  const std::string bin = TAGBENCH_BIN_PATH;
  CHECK(std::system((bin + " models > /dev/null").c_str()) == 0);
  const int code = std::system((bin + " eval --checkpoint /nope.bin --manifest /nope.tsv "
                                      "--out /tmp/tagbench_cli_bin_out 2> /dev/null")
                                   .c_str());
  CHECK(WEXITSTATUS(code) == 3);
}
