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

#include "tagbench/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tagbench/baseline.hpp"
#include "tagbench/data.hpp"
#include "tagbench/deform.hpp"
#include "tagbench/errors.hpp"
#include "tagbench/train.hpp"

namespace tagbench {

namespace {

// One command at a time per output directory.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    path_ = dir / ".tagbench.lock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw ConfigError("output directory is locked by another run: " + path_.string());
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] ssize_t n = ::write(fd_, pid.data(), pid.size());
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path.string());
  f << text;
}

void write_resolved_config(const std::filesystem::path& out_dir, const nlohmann::json& j) {
  write_text(out_dir / "resolved_config.json", j.dump(2) + "\n");
}

std::string baseline_model_name(const ModelConfig& config) {
  std::string name = arch_name(config.arch);
  const bool mel_variant = config.arch == Arch::fcn || config.arch == Arch::musicnn ||
                           config.arch == Arch::crnn;
  if (mel_variant && config.n_mels == 128) name += " (128 mel)";
  return name;
}

std::string sanitize(const std::string& spec) {
  std::string out;
  for (char c : spec) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.')
                                 ? c
                                 : '_';
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string arch, manifest, out, mode = "auto", config_path, convention;
  int epochs = 200, batch = 16, n_mels = -1, gru_hidden = -1;
  uint64_t seed = 0;
  double width_mult = 1.0, adam_lr = -1.0, sgd_lr = -1.0;
  int patience = -1;
};

int cmd_train(TrainArgs a) {
  if (!a.config_path.empty()) {
    std::ifstream f(a.config_path);
    if (!f) throw MissingFile(a.config_path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig("bad config json: " + std::string(e.what()));
    }
    // config file fills anything the command line left at its default
    if (a.arch.empty()) a.arch = j.value("arch", a.arch);
    if (a.manifest.empty()) a.manifest = j.value("manifest", a.manifest);
    if (a.out.empty()) a.out = j.value("out", a.out);
  }
  if (a.arch.empty()) throw InvalidConfig("--arch is required");
  if (a.manifest.empty()) throw InvalidConfig("--manifest is required");
  if (a.out.empty()) throw InvalidConfig("--out is required");

  ModelConfig mc = ModelConfig::defaults(arch_from_name(a.arch));
  if (a.n_mels > 0) mc.n_mels = a.n_mels;
  if (a.gru_hidden > 0) mc.gru_hidden = a.gru_hidden;
  mc.width_mult = static_cast<float>(a.width_mult);
  mc.validate();

  TrainConfig tc;
  tc.max_epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.seed = a.seed;
  tc.mode = train_mode_from_name(a.mode);
  tc.out_dir = a.out;
  if (a.adam_lr > 0) tc.opt.adam_lr = a.adam_lr;
  if (a.sgd_lr > 0) tc.opt.sgd_lr = a.sgd_lr;
  if (a.patience > 0) tc.opt.patience = a.patience;

  DirLock lock(tc.out_dir);
  if (!std::filesystem::exists(a.manifest)) throw MissingFile(a.manifest);
  Dataset dataset = Dataset::load(a.manifest);
  if (!a.convention.empty()) {
    SplitReport sr = validate_split_counts(dataset.manifest, convention_from_name(a.convention));
    for (const auto& w : sr.warnings) std::cerr << "warning: " << w << '\n';
  }

  Model model = build_model(mc, a.seed);
  TrainRun run = train(model, dataset, tc);

  std::ostringstream hist;
  hist << "epoch\ttrain_loss\tval_loss\tphase\tlr\n";
  for (const auto& st : run.history) {
    char row[160];
    std::snprintf(row, sizeof(row), "%d\t%.8f\t%.8f\t%s\t%.8g\n", st.epoch, st.train_loss,
                  st.val_loss, phase_name(st.phase).c_str(), st.lr);
    hist << row;
  }
  write_text(tc.out_dir / "history.tsv", hist.str());

  nlohmann::json rc;
  rc["command"] = "train";
  rc["arch"] = a.arch;
  rc["manifest"] = a.manifest;
  rc["out"] = a.out;
  rc["epochs"] = a.epochs;
  rc["batch"] = a.batch;
  rc["seed"] = a.seed;
  rc["mode_requested"] = a.mode;
  rc["mode_resolved"] = train_mode_name(run.resolved_mode);
  rc["model_config"] = nlohmann::json::parse(mc.to_json());
  rc["optimizer"] = {{"adam_lr", tc.opt.adam_lr}, {"sgd_lr", tc.opt.sgd_lr},
                     {"patience", tc.opt.patience}, {"lr_decay", tc.opt.lr_decay},
                     {"max_decays", tc.opt.max_decays}};
  write_resolved_config(tc.out_dir, rc);

  std::cout << "trained " << a.arch << " for " << run.history.size()
            << " epochs; best val loss " << fmt(run.best_val_loss) << " at epoch "
            << run.best_epoch << "\ncheckpoint: " << run.best_checkpoint.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, manifest, out, split = "test", deform = "none", model_id, convention;
  bool robustness = false, baseline = false;
  uint64_t seed = 0;
  int threads = 0;
};

int cmd_eval(EvalArgs a) {
  if (a.checkpoint.empty()) throw InvalidConfig("--checkpoint is required");
  if (a.manifest.empty()) throw InvalidConfig("--manifest is required");
  if (a.out.empty()) throw InvalidConfig("--out is required");

  DirLock lock(a.out);
  if (!std::filesystem::exists(a.manifest)) throw MissingFile(a.manifest);
  Model model = load_model(a.checkpoint);
  Dataset dataset = Dataset::load(a.manifest);
  if (!a.convention.empty()) {
    SplitReport sr = validate_split_counts(dataset.manifest, convention_from_name(a.convention));
    for (const auto& w : sr.warnings) std::cerr << "warning: " << w << '\n';
  }

  EvalOptions opts;
  opts.model_id = a.model_id.empty() ? arch_name(model.config().arch) : a.model_id;
  opts.noise_seed = a.seed;
  opts.threads = a.threads;
  const Split split = split_from_name(a.split);
  const std::filesystem::path out_dir(a.out);

  std::vector<Deformation> deformations;
  if (a.robustness) {
    deformations.push_back(Deformation::none_());
    for (const auto& d : deformation_suite()) deformations.push_back(d);
  } else {
    deformations.push_back(Deformation::parse(a.deform));
  }

  std::vector<EvalReport> reports;
  for (const auto& d : deformations) {
    EvalReport r = evaluate_model(model, dataset, split, d, opts);
    const std::string stem = "report_" + sanitize(r.deformation);
    write_text(out_dir / (stem + ".json"), report_to_json(r) + "\n");
    write_report_tsv(out_dir / (stem + ".tsv"), r);
    std::cout << r.deformation << ": macro ROC-AUC " << fmt(r.macro_roc_auc)
              << ", macro PR-AUC " << fmt(r.macro_pr_auc) << '\n';
    reports.push_back(std::move(r));
  }

  if (a.robustness) {
    std::ostringstream os;
    os << "model\tmetric";
    for (const auto& r : reports) os << '\t' << r.deformation;
    os << '\n';
    for (const char* metric : {"roc_auc", "pr_auc"}) {
      os << opts.model_id << '\t' << metric;
      for (const auto& r : reports) {
        os << '\t' << fmt(metric == std::string("roc_auc") ? r.macro_roc_auc : r.macro_pr_auc);
      }
      os << '\n';
    }
    write_text(out_dir / "robustness.tsv", os.str());
  }

  if (a.baseline) {
    // published reference values live in their own clearly labeled columns,
    // never in the measured columns
    write_text(out_dir / "baseline_published.tsv", baseline_table_tsv());
    std::ostringstream os;
    os << "model\tmeasured_dataset\tmeasured_split\tmeasured_deformation\tmeasured_roc_auc\t"
          "measured_pr_auc\tpublished_dataset\tpublished_roc_auc\tpublished_pr_auc\tnote\n";
    const std::string bname = baseline_model_name(model.config());
    const EvalReport& r0 = reports.front();
    for (const char* ds : {"mtat", "msd", "jamendo"}) {
      if (auto row = baseline_lookup(bname, ds)) {
        os << bname << '\t' << r0.dataset_id << '\t' << r0.split << '\t' << r0.deformation
           << '\t' << fmt(r0.macro_roc_auc) << '\t' << fmt(r0.macro_pr_auc) << '\t' << row->dataset
           << '\t' << fmt(row->roc_auc) << '\t' << fmt(row->pr_auc) << '\t' << row->note << '\n';
      }
    }
    write_text(out_dir / "baseline_comparison.tsv", os.str());
  }

  nlohmann::json rc;
  rc["command"] = "eval";
  rc["checkpoint"] = a.checkpoint;
  rc["manifest"] = a.manifest;
  rc["out"] = a.out;
  rc["split"] = a.split;
  rc["robustness"] = a.robustness;
  rc["baseline_table"] = a.baseline;
  rc["seed"] = a.seed;
  rc["model_id"] = opts.model_id;
  nlohmann::json dl = nlohmann::json::array();
  for (const auto& d : deformations) dl.push_back(d.spec_string());
  rc["deformations"] = dl;
  write_resolved_config(out_dir, rc);
  return 0;
}

// ---------------------------------------------------------------------------
// perturb
// ---------------------------------------------------------------------------

struct PerturbArgs {
  std::vector<std::string> inputs;
  std::string deform, out, manifest, clip_id;
  uint64_t seed = 0;
};

int cmd_perturb(PerturbArgs a) {
  if (a.deform.empty()) throw InvalidConfig("--deform is required");
  if (a.out.empty()) throw InvalidConfig("--out is required");
  const Deformation d = Deformation::parse(a.deform);
  DirLock lock(a.out);
  const std::filesystem::path out_dir(a.out);

  std::vector<std::pair<std::filesystem::path, std::string>> jobs;  // path, id
  if (!a.manifest.empty()) {
    Manifest m = load_manifest(a.manifest);
    const auto root = std::filesystem::path(a.manifest).parent_path();
    for (const auto& e : m.entries) {
      if (!a.clip_id.empty() && e.clip_id != a.clip_id) continue;
      if (e.split != Split::test) {
        if (!a.clip_id.empty()) {
          // deformations are a test-set probe; train/valid stay untouched
          throw InvalidConfig("refusing to deform clip " + e.clip_id + " from the " +
                              split_name(e.split) + " split; deformations are test-only");
        }
        continue;
      }
      jobs.emplace_back(root / e.path, e.clip_id);
    }
    if (!a.clip_id.empty() && jobs.empty()) {
      throw InvalidConfig("clip_id not found in manifest: " + a.clip_id);
    }
  } else {
    if (a.inputs.empty()) throw InvalidConfig("no input WAV files given");
    for (const auto& p : a.inputs) jobs.emplace_back(p, std::filesystem::path(p).stem().string());
  }

  for (const auto& [path, id] : jobs) {
    AudioClip clip = load_wav(path);
    clip.source_id = id;
    AudioClip out = apply_deformation(d, clip, a.seed);
    write_wav(out_dir / (id + ".wav"), out);
  }

  nlohmann::json rc;
  rc["command"] = "perturb";
  rc["deform"] = d.spec_string();
  rc["out"] = a.out;
  rc["seed"] = a.seed;
  rc["n_files"] = jobs.size();
  write_resolved_config(out_dir, rc);
  std::cout << "wrote " << jobs.size() << " deformed file(s) to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_report(ReportArgs a) {
  if (a.inputs.empty()) throw InvalidConfig("no report files given");
  if (a.out.empty()) throw InvalidConfig("--out is required");
  DirLock lock(a.out);
  const std::filesystem::path out_dir(a.out);

  std::vector<EvalReport> reports;
  for (const auto& p : a.inputs) {
    std::ifstream f(p);
    if (!f) throw MissingFile(p);
    std::stringstream ss;
    ss << f.rdbuf();
    reports.push_back(report_from_json(ss.str()));  // schema mismatch -> ConfigError
  }

  // stable deformation column order: first appearance across inputs
  std::vector<std::string> deforms;
  for (const auto& r : reports) {
    if (std::find(deforms.begin(), deforms.end(), r.deformation) == deforms.end()) {
      deforms.push_back(r.deformation);
    }
  }

  // comparison: one row per (model, dataset, split, metric), macro values
  std::vector<std::string> keys;
  std::map<std::string, std::map<std::string, const EvalReport*>> grid;
  for (const auto& r : reports) {
    const std::string key = r.model_id + '\t' + r.dataset_id + '\t' + r.split;
    if (!grid.count(key)) keys.push_back(key);
    grid[key][r.deformation] = &r;
  }
  std::ostringstream cmp;
  cmp << "model\tdataset\tsplit\tmetric";
  for (const auto& d : deforms) cmp << '\t' << d;
  cmp << '\n';
  for (const auto& key : keys) {
    for (const char* metric : {"roc_auc", "pr_auc"}) {
      cmp << key << '\t' << metric;
      for (const auto& d : deforms) {
        auto it = grid[key].find(d);
        if (it == grid[key].end()) {
          cmp << "\t";
        } else {
          cmp << '\t'
              << fmt(metric == std::string("roc_auc") ? it->second->macro_roc_auc
                                                      : it->second->macro_pr_auc);
        }
      }
      cmp << '\n';
    }
  }
  write_text(out_dir / "comparison.tsv", cmp.str());

  // long format for external plotting
  std::ostringstream lng;
  lng << "model,deformation,metric,value\n";
  for (const auto& r : reports) {
    lng << r.model_id << ',' << r.deformation << ",roc_auc," << fmt(r.macro_roc_auc) << '\n';
    lng << r.model_id << ',' << r.deformation << ",pr_auc," << fmt(r.macro_pr_auc) << '\n';
  }
  write_text(out_dir / "long.csv", lng.str());

  nlohmann::json rc;
  rc["command"] = "report";
  rc["inputs"] = a.inputs;
  rc["out"] = a.out;
  write_resolved_config(out_dir, rc);
  std::cout << "merged " << reports.size() << " report(s) into " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// models / synth
// ---------------------------------------------------------------------------

int cmd_models() {
  std::printf("%-16s %10s %12s %7s %s\n", "arch", "input_sec", "input_smpls", "mel", "training");
  for (const auto& m : model_listings()) {
    std::printf("%-16s %10.2f %12lld %7s %s\n", m.arch.c_str(), m.input_seconds,
                static_cast<long long>(m.input_samples),
                m.n_mels > 0 ? std::to_string(m.n_mels).c_str() : "-",
                m.song_level ? "song-level" : "chunk-level");
  }
  return 0;
}

struct SynthArgs {
  std::string out;
  int n_clips = 100;
  double seconds = 30.0;
  uint64_t seed = 0;
  int tags = 8;
};

int cmd_synth(SynthArgs a) {
  if (a.out.empty()) throw InvalidConfig("--out is required");
  DirLock lock(a.out);
  SyntheticSpec spec;
  spec.n_clips = a.n_clips;
  spec.clip_seconds = a.seconds;
  spec.seed = a.seed;
  spec.n_active_tags = a.tags;
  Manifest m = generate_synthetic(spec, a.out);

  nlohmann::json rc;
  rc["command"] = "synth";
  rc["out"] = a.out;
  rc["n_clips"] = a.n_clips;
  rc["seconds"] = a.seconds;
  rc["seed"] = a.seed;
  rc["tags"] = a.tags;
  write_resolved_config(a.out, rc);
  std::cout << "wrote " << m.entries.size() << " clips and manifest to "
            << (std::filesystem::path(a.out) / "manifest.tsv").string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"benchmark toolkit for content-based automatic music tagging"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model on a manifest");
  train_cmd->add_option("--arch", ta.arch, "architecture id (see `tagbench models`)");
  train_cmd->add_option("--manifest", ta.manifest, "manifest TSV path");
  train_cmd->add_option("--out", ta.out, "output directory");
  train_cmd->add_option("--config", ta.config_path, "JSON config (flags take precedence)");
  train_cmd->add_option("--epochs", ta.epochs, "max epochs");
  train_cmd->add_option("--batch", ta.batch, "batch size");
  train_cmd->add_option("--seed", ta.seed, "rng seed");
  train_cmd->add_option("--mode", ta.mode, "auto|chunk|song");
  train_cmd->add_option("--width-mult", ta.width_mult, "channel width multiplier");
  train_cmd->add_option("--n-mels", ta.n_mels, "mel bands override (96 or 128)");
  train_cmd->add_option("--gru-hidden", ta.gru_hidden, "GRU hidden size (crnn)");
  train_cmd->add_option("--adam-lr", ta.adam_lr, "ADAM learning rate");
  train_cmd->add_option("--sgd-lr", ta.sgd_lr, "SGD learning rate after the switch");
  train_cmd->add_option("--patience", ta.patience, "plateau patience (epochs)");
  train_cmd->add_option("--check-convention", ta.convention, "warn on split-count mismatch (mtat|msd|jamendo)");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "checkpoint .bin path");
  eval_cmd->add_option("--manifest", ea.manifest, "manifest TSV path");
  eval_cmd->add_option("--out", ea.out, "output directory");
  eval_cmd->add_option("--split", ea.split, "train|valid|test (default test)");
  eval_cmd->add_option("--deform", ea.deform, "deformation spec (e.g. noise:0.4)");
  eval_cmd->add_flag("--robustness", ea.robustness, "evaluate none + the 8-deformation suite");
  eval_cmd->add_flag("--baseline-table", ea.baseline, "render published reference values");
  eval_cmd->add_option("--seed", ea.seed, "noise seed");
  eval_cmd->add_option("--threads", ea.threads, "worker threads (default TAGBENCH_THREADS)");
  eval_cmd->add_option("--model-id", ea.model_id, "model id for reports");
  eval_cmd->add_option("--check-convention", ea.convention, "warn on split-count mismatch");

  PerturbArgs pa;
  auto* perturb_cmd = app.add_subcommand("perturb", "write deformed copies of WAV files");
  perturb_cmd->add_option("inputs", pa.inputs, "input WAV files");
  perturb_cmd->add_option("--deform", pa.deform, "deformation spec string");
  perturb_cmd->add_option("--out", pa.out, "output directory");
  perturb_cmd->add_option("--manifest", pa.manifest, "manifest mode: deform the test split");
  perturb_cmd->add_option("--clip-id", pa.clip_id, "single clip from the manifest");
  perturb_cmd->add_option("--seed", pa.seed, "noise seed");

  ReportArgs ra;
  auto* report_cmd = app.add_subcommand("report", "merge eval reports into comparison tables");
  report_cmd->add_option("inputs", ra.inputs, "eval report JSON files");
  report_cmd->add_option("--out", ra.out, "output directory");

  auto* models_cmd = app.add_subcommand("models", "list architectures and their input setups");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic desk-scale dataset");
  synth_cmd->add_option("--out", sa.out, "output directory");
  synth_cmd->add_option("--n-clips", sa.n_clips, "number of clips");
  synth_cmd->add_option("--seconds", sa.seconds, "clip length in seconds");
  synth_cmd->add_option("--seed", sa.seed, "rng seed");
  synth_cmd->add_option("--tags", sa.tags, "active tag rules (1..8)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(ta);
    if (eval_cmd->parsed()) return cmd_eval(ea);
    if (perturb_cmd->parsed()) return cmd_perturb(pa);
    if (report_cmd->parsed()) return cmd_report(ra);
    if (models_cmd->parsed()) return cmd_models();
    if (synth_cmd->parsed()) return cmd_synth(sa);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace tagbench
