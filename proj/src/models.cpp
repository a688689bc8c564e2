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

#include "tagbench/models.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "tagbench/dsp.hpp"
#include "tagbench/errors.hpp"

namespace tagbench {

using ad::Tensor;
using nn::BatchNorm;
using nn::Conv1d;
using nn::Conv2d;
using nn::Dense;

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::fcn: return "fcn";
    case Arch::musicnn: return "musicnn";
    case Arch::sample_level: return "sample_level";
    case Arch::sample_level_se: return "sample_level_se";
    case Arch::crnn: return "crnn";
    case Arch::self_attention: return "self_attention";
    case Arch::harmonic_cnn: return "harmonic_cnn";
    case Arch::short_chunk: return "short_chunk";
    case Arch::short_chunk_res: return "short_chunk_res";
  }
  return "?";
}

Arch arch_from_name(const std::string& name) {
  for (Arch a : all_archs()) {
    if (arch_name(a) == name) return a;
  }
  throw InvalidConfig("unknown arch: " + name);
}

std::vector<Arch> all_archs() {
  return {Arch::fcn,          Arch::musicnn,      Arch::sample_level,
          Arch::sample_level_se, Arch::crnn,      Arch::self_attention,
          Arch::harmonic_cnn, Arch::short_chunk,  Arch::short_chunk_res};
}

namespace {

int64_t table1_input_length(Arch a) {
  switch (a) {
    case Arch::fcn:
    case Arch::crnn: return 465600;  // 29.1 s
    case Arch::musicnn: return 48000;  // 3 s
    case Arch::sample_level:
    case Arch::sample_level_se:
    case Arch::short_chunk:
    case Arch::short_chunk_res: return 59049;  // 3.69 s, 3^10
    case Arch::self_attention: return 240000;  // 15 s
    case Arch::harmonic_cnn: return 80000;  // 5 s
  }
  return 0;
}

bool is_mel_arch(Arch a) {
  return a == Arch::fcn || a == Arch::musicnn || a == Arch::crnn ||
         a == Arch::self_attention || a == Arch::short_chunk || a == Arch::short_chunk_res;
}

int frames_for(int64_t samples) { return static_cast<int>(1 + samples / kHop); }

int scale_ch(int base, float mult, int multiple = 8, int min_ch = 8) {
  int v = std::max(min_ch, static_cast<int>(std::lround(base * mult)));
  return (v + multiple - 1) / multiple * multiple;
}

}  // namespace

ModelConfig ModelConfig::defaults(Arch arch) {
  ModelConfig c;
  c.arch = arch;
  c.input_length = table1_input_length(arch);
  switch (arch) {
    case Arch::fcn:
    case Arch::musicnn:
    case Arch::crnn: c.n_mels = 96; break;
    case Arch::self_attention:
    case Arch::short_chunk:
    case Arch::short_chunk_res: c.n_mels = 128; break;
    default: c.n_mels = 0; break;
  }
  return c;
}

void ModelConfig::validate() const {
  if (input_length != table1_input_length(arch)) {
    throw InvalidConfig("input_length must be " + std::to_string(table1_input_length(arch)) +
                        " samples for " + arch_name(arch));
  }
  if (is_mel_arch(arch)) {
    if (n_mels != 96 && n_mels != 128) {
      throw InvalidConfig("n_mels must be 96 or 128 for " + arch_name(arch));
    }
  }
  if (n_tags <= 0) throw InvalidConfig("n_tags must be positive");
  if (width_mult <= 0.0f) throw InvalidConfig("width_mult must be positive");
  if (gru_hidden <= 0 || attn_heads <= 0 || attn_blocks <= 0 || ff_mult <= 0 ||
      se_reduction <= 0) {
    throw InvalidConfig("hyperparameters must be positive");
  }
  if (dropout_p < 0.0f || dropout_p >= 1.0f) throw InvalidConfig("dropout_p must be in [0, 1)");
  if (arch == Arch::harmonic_cnn && (n_bands <= 0 || n_harmonics <= 0)) {
    throw InvalidConfig("harmonic front end needs positive n_bands/n_harmonics");
  }
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["arch"] = arch_name(arch);
  j["n_mels"] = n_mels;
  j["input_length"] = input_length;
  j["n_tags"] = n_tags;
  j["width_mult"] = width_mult;
  j["gru_hidden"] = gru_hidden;
  j["attn_heads"] = attn_heads;
  j["attn_blocks"] = attn_blocks;
  j["ff_mult"] = ff_mult;
  j["se_reduction"] = se_reduction;
  j["dropout_p"] = dropout_p;
  j["n_harmonics"] = n_harmonics;
  j["n_bands"] = n_bands;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig("bad model config json: " + std::string(e.what()));
  }
  ModelConfig c = defaults(arch_from_name(j.at("arch").get<std::string>()));
  c.n_mels = j.value("n_mels", c.n_mels);
  c.input_length = j.value("input_length", c.input_length);
  c.n_tags = j.value("n_tags", c.n_tags);
  c.width_mult = j.value("width_mult", c.width_mult);
  c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
  c.attn_heads = j.value("attn_heads", c.attn_heads);
  c.attn_blocks = j.value("attn_blocks", c.attn_blocks);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.se_reduction = j.value("se_reduction", c.se_reduction);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.n_harmonics = j.value("n_harmonics", c.n_harmonics);
  c.n_bands = j.value("n_bands", c.n_bands);
  return c;
}

ReceptiveField receptive_field(const ModelConfig& config) {
  ReceptiveField rf;
  rf.song_level = config.arch == Arch::fcn || config.arch == Arch::crnn;
  rf.time_seconds = static_cast<double>(config.input_length) / kPipelineRate;
  if (is_mel_arch(config.arch)) {
    rf.freq_bins = config.n_mels;
  } else if (config.arch == Arch::harmonic_cnn) {
    rf.freq_bins = config.n_bands;
  } else {
    rf.freq_bins = 0;
  }
  return rf;
}

namespace detail {

struct ForwardCtx {
  bool training = false;
  uint64_t seed = 0;
  uint64_t site = 0;
  uint64_t next() { return mix_seed(seed, site++); }
};

struct ArchImpl {
  ModelConfig cfg;
  explicit ArchImpl(ModelConfig c) : cfg(std::move(c)) {}
  virtual ~ArchImpl() = default;
  virtual Tensor forward(const Tensor& x, ForwardCtx& ctx) = 0;
  virtual Tensor prepare(std::span<const AudioClip> chunks) = 0;
  virtual void collect(nn::Collector& c) = 0;
  virtual std::string describe() const = 0;
};

namespace {

void check_chunk(const AudioClip& clip, int64_t expected_len) {
  if (clip.sample_rate != kPipelineRate) {
    throw WrongSampleRate("model input must be 16 kHz audio");
  }
  if (clip.length() != expected_len) {
    throw ShapeMismatch("model input chunk must be exactly " + std::to_string(expected_len) +
                        " samples, got " + std::to_string(clip.length()));
  }
}

Tensor mel_batch(std::span<const AudioClip> chunks, int n_mels, int64_t expected_len) {
  const int B = static_cast<int>(chunks.size());
  const int T = frames_for(expected_len);
  Tensor x = Tensor::zeros({B, 1, n_mels, T});
  for (int b = 0; b < B; ++b) {
    check_chunk(chunks[static_cast<size_t>(b)], expected_len);
    MelSpectrogram m = mel_spectrogram(chunks[static_cast<size_t>(b)], n_mels);
    std::copy(m.values.begin(), m.values.end(),
              x.data() + static_cast<int64_t>(b) * n_mels * T);
  }
  return x;
}

Tensor raw_batch(std::span<const AudioClip> chunks, int64_t expected_len) {
  const int B = static_cast<int>(chunks.size());
  Tensor x = Tensor::zeros({B, 1, static_cast<int>(expected_len)});
  for (int b = 0; b < B; ++b) {
    check_chunk(chunks[static_cast<size_t>(b)], expected_len);
    const auto& s = chunks[static_cast<size_t>(b)].samples;
    std::copy(s.begin(), s.end(), x.data() + static_cast<int64_t>(b) * expected_len);
  }
  return x;
}

}  // namespace

// --------------------------------------------------------------------------
// FCN: 4 conv3x3 blocks with the (2,4)(4,5)(3,8)(4,8) max-pool stride plan
// --------------------------------------------------------------------------
struct FcnImpl : ArchImpl {
  std::vector<Conv2d> convs;
  std::vector<BatchNorm> bns;
  Dense head;
  std::vector<int> widths;

  FcnImpl(ModelConfig c, Rng& rng) : ArchImpl(std::move(c)) {
    const int base[4] = {64, 128, 128, 128};
    int in_ch = 1;
    for (int i = 0; i < 4; ++i) {
      const int out_ch = scale_ch(base[i], cfg.width_mult);
      widths.push_back(out_ch);
      convs.push_back(Conv2d::make(in_ch, out_ch, 3, 3, 1, 1, 1, 1, rng));
      bns.push_back(BatchNorm::make(out_ch));
      in_ch = out_ch;
    }
    head = Dense::make(in_ch, cfg.n_tags, rng);
  }

  Tensor forward(const Tensor& input, ForwardCtx& ctx) override {
    Tensor x = input;
    for (int i = 0; i < 4; ++i) {
      x = ad::relu(bns[static_cast<size_t>(i)](convs[static_cast<size_t>(i)](x), ctx.training));
      x = ad::max_pool2d(x, kFcnPoolStrides[i][0], kFcnPoolStrides[i][1],
                         kFcnPoolStrides[i][0], kFcnPoolStrides[i][1]);
    }
    x = ad::global_max_pool(x);
    x = ad::dropout(x, cfg.dropout_p, ctx.training, ctx.next());
    return head(x);
  }

  Tensor prepare(std::span<const AudioClip> chunks) override {
    return mel_batch(chunks, cfg.n_mels, cfg.input_length);
  }

  void collect(nn::Collector& c) override {
    for (int i = 0; i < 4; ++i) {
      convs[static_cast<size_t>(i)].collect("conv" + std::to_string(i + 1), c);
      bns[static_cast<size_t>(i)].collect("bn" + std::to_string(i + 1), c);
    }
    head.collect("head", c);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "fcn: mel " << cfg.n_mels << " x " << frames_for(cfg.input_length)
       << ", conv3x3 widths [";
    for (size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    os << "], pool strides (2,4)(4,5)(3,8)(4,8), global max pool, dense -> "
       << cfg.n_tags;
    return os.str();
  }
};

// --------------------------------------------------------------------------
// Musicnn: vertical timbral filters (max-pooled across frequency) plus
// horizontal temporal filters on the frequency-averaged input
// --------------------------------------------------------------------------
struct MusicnnImpl : ArchImpl {
  static constexpr int kVertHeights[2] = {38, 67};
  static constexpr int kHorizWidths[4] = {32, 64, 128, 165};

  std::vector<Conv2d> vconv;
  std::vector<BatchNorm> vbn;
  std::vector<Conv1d> hconv;
  std::vector<BatchNorm> hbn;
  Conv1d mid1, mid2;
  BatchNorm midbn1, midbn2;
  Dense dense1, head;
  int vert_ch, horiz_ch, mid_ch, dense_units;

  MusicnnImpl(ModelConfig c, Rng& rng) : ArchImpl(std::move(c)) {
    vert_ch = scale_ch(64, cfg.width_mult);
    horiz_ch = scale_ch(16, cfg.width_mult, 4, 4);
    mid_ch = scale_ch(64, cfg.width_mult);
    dense_units = std::max(16, static_cast<int>(std::lround(200 * cfg.width_mult)));
    for (int h : kVertHeights) {
      vconv.push_back(Conv2d::make(1, vert_ch, h, 7, 1, 1, 0, 3, rng));
      vbn.push_back(BatchNorm::make(vert_ch));
    }
    for (int w : kHorizWidths) {
      // asymmetric same-padding keeps even kernels time-aligned
      hconv.push_back(Conv1d::make(1, horiz_ch, w, 1, (w - 1) / 2, w / 2, rng));
      hbn.push_back(BatchNorm::make(horiz_ch));
    }
    const int front_ch = 2 * vert_ch + 4 * horiz_ch;
    mid1 = Conv1d::make(front_ch, mid_ch, 7, 1, 3, 3, rng);
    midbn1 = BatchNorm::make(mid_ch);
    mid2 = Conv1d::make(mid_ch, mid_ch, 7, 1, 3, 3, rng);
    midbn2 = BatchNorm::make(mid_ch);
    dense1 = Dense::make(2 * mid_ch, dense_units, rng);
    head = Dense::make(dense_units, cfg.n_tags, rng);
  }

  std::vector<Tensor> vertical_maps(const Tensor& input, ForwardCtx& ctx) {
    std::vector<Tensor> maps;
    for (size_t i = 0; i < vconv.size(); ++i) {
      maps.push_back(ad::relu(vbn[i](vconv[i](input), ctx.training)));
    }
    return maps;
  }

  Tensor vertical(const Tensor& input, ForwardCtx& ctx) {
    std::vector<Tensor> branches;
    for (Tensor& t : vertical_maps(input, ctx)) {
      const int f = t.dim(2);
      t = ad::max_pool2d(t, f, 1, f, 1);  // pitch invariance: pool the full freq axis
      branches.push_back(ad::reshape(t, {t.dim(0), t.dim(1), t.dim(3)}));
    }
    return ad::concat(branches, 1);  // [B, 2*vert_ch, T]
  }

  Tensor horizontal(const Tensor& input, ForwardCtx& ctx) {
    const int B = input.dim(0), F = input.dim(2), T = input.dim(3);
    Tensor m = ad::mean_axis1(ad::reshape(input, {B, F, T}));  // [B,T]
    m = ad::reshape(m, {B, 1, T});
    std::vector<Tensor> branches;
    for (size_t i = 0; i < hconv.size(); ++i) {
      branches.push_back(ad::relu(hbn[i](hconv[i](m), ctx.training)));
    }
    return ad::concat(branches, 1);  // [B, 4*horiz_ch, T]
  }

  Tensor forward(const Tensor& input, ForwardCtx& ctx) override {
    Tensor f = ad::concat({vertical(input, ctx), horizontal(input, ctx)}, 1);
    f = ad::relu(midbn1(mid1(f), ctx.training));
    f = ad::relu(midbn2(mid2(f), ctx.training));
    Tensor pooled = ad::concat({ad::global_max_pool(f), ad::global_avg_pool(f)}, 1);
    Tensor d = ad::relu(dense1(pooled));
    d = ad::dropout(d, cfg.dropout_p, ctx.training, ctx.next());
    return head(d);
  }

  Tensor prepare(std::span<const AudioClip> chunks) override {
    return mel_batch(chunks, cfg.n_mels, cfg.input_length);
  }

  void collect(nn::Collector& c) override {
    for (size_t i = 0; i < vconv.size(); ++i) {
      vconv[i].collect("vert" + std::to_string(kVertHeights[i]), c);
      vbn[i].collect("vert" + std::to_string(kVertHeights[i]) + ".bn", c);
    }
    for (size_t i = 0; i < hconv.size(); ++i) {
      hconv[i].collect("horiz" + std::to_string(kHorizWidths[i]), c);
      hbn[i].collect("horiz" + std::to_string(kHorizWidths[i]) + ".bn", c);
    }
    mid1.collect("mid1", c);
    midbn1.collect("mid1.bn", c);
    mid2.collect("mid2", c);
    midbn2.collect("mid2.bn", c);
    dense1.collect("dense1", c);
    head.collect("head", c);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "musicnn: mel " << cfg.n_mels << " x " << frames_for(cfg.input_length)
       << ", vertical filters {38,67}x7 -> max over frequency, horizontal filters "
          "{32,64,128,165} on freq-mean, 1d mid-end width " << mid_ch
       << ", dense " << dense_units << " -> " << cfg.n_tags;
    return os.str();
  }
};

// --------------------------------------------------------------------------
// Sample-level CNN: ten stride-3 stages on the raw waveform (3^10 = 59049),
// optionally with squeeze-and-excitation blocks after each stage
// --------------------------------------------------------------------------
struct SampleLevelImpl : ArchImpl {
  bool use_se;
  std::vector<Conv1d> convs;
  std::vector<BatchNorm> bns;
  std::vector<nn::SEBlock> ses;
  Dense head;
  std::vector<int> widths;

  SampleLevelImpl(ModelConfig c, bool se, Rng& rng) : ArchImpl(std::move(c)), use_se(se) {
    const int base[kSampleLevelStages] = {64, 64, 128, 128, 256, 256, 512, 512, 512, 512};
    int in_ch = 1;
    for (int i = 0; i < kSampleLevelStages; ++i) {
      const int out_ch = scale_ch(base[i], cfg.width_mult, 16, 16);
      widths.push_back(out_ch);
      if (i == 0) {
        convs.push_back(Conv1d::make(in_ch, out_ch, 3, 3, 0, 0, rng));  // frame layer
      } else {
        convs.push_back(Conv1d::make(in_ch, out_ch, 3, 1, 1, 1, rng));
      }
      bns.push_back(BatchNorm::make(out_ch));
      if (use_se) ses.push_back(nn::SEBlock::make(out_ch, std::min(cfg.se_reduction, out_ch), rng));
      in_ch = out_ch;
    }
    head = Dense::make(in_ch, cfg.n_tags, rng);
  }

  Tensor forward(const Tensor& input, ForwardCtx& ctx) override {
    Tensor x = input;
    for (int i = 0; i < kSampleLevelStages; ++i) {
      x = ad::relu(bns[static_cast<size_t>(i)](convs[static_cast<size_t>(i)](x), ctx.training));
      if (i > 0) x = ad::max_pool1d(x, 3, 3);
      if (use_se) x = ses[static_cast<size_t>(i)](x);
    }
    x = ad::global_max_pool(x);  // temporal extent is already 1 for 3^10 input
    x = ad::dropout(x, cfg.dropout_p, ctx.training, ctx.next());
    return head(x);
  }

  Tensor prepare(std::span<const AudioClip> chunks) override {
    return raw_batch(chunks, cfg.input_length);
  }

  void collect(nn::Collector& c) override {
    for (int i = 0; i < kSampleLevelStages; ++i) {
      const std::string p = "stage" + std::to_string(i + 1);
      convs[static_cast<size_t>(i)].collect(p + ".conv", c);
      bns[static_cast<size_t>(i)].collect(p + ".bn", c);
      if (use_se) ses[static_cast<size_t>(i)].collect(p + ".se", c);
    }
    head.collect("head", c);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << (use_se ? "sample_level_se" : "sample_level") << ": raw " << cfg.input_length
       << " samples, 10 stride-3 stages (k=3), widths [";
    for (size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    os << "]" << (use_se ? ", SE blocks" : "") << ", dense -> " << cfg.n_tags;
    return os.str();
  }
};

// --------------------------------------------------------------------------
// CRNN: 4 conv3x3 blocks, then a 2-layer GRU over the time axis
// --------------------------------------------------------------------------
struct CrnnImpl : ArchImpl {
  std::vector<Conv2d> convs;
  std::vector<BatchNorm> bns;
  nn::GRU gru;
  Dense head;
  std::vector<int> widths;
  int freq_out = 0, time_out = 0;

  CrnnImpl(ModelConfig c, Rng& rng) : ArchImpl(std::move(c)) {
    const int base[4] = {64, 128, 128, 128};
    int in_ch = 1;
    for (int i = 0; i < 4; ++i) {
      const int out_ch = scale_ch(base[i], cfg.width_mult);
      widths.push_back(out_ch);
      convs.push_back(Conv2d::make(in_ch, out_ch, 3, 3, 1, 1, 1, 1, rng));
      bns.push_back(BatchNorm::make(out_ch));
      in_ch = out_ch;
    }
    freq_out = cfg.n_mels;
    time_out = frames_for(cfg.input_length);
    for (auto& s : kCrnnPoolStrides) {
      freq_out = (freq_out - s[0]) / s[0] + 1;
      time_out = (time_out - s[1]) / s[1] + 1;
    }
    gru = nn::GRU::make(in_ch * freq_out, cfg.gru_hidden, 2, rng);
    head = Dense::make(cfg.gru_hidden, cfg.n_tags, rng);
  }

  Tensor forward(const Tensor& input, ForwardCtx& ctx) override {
    Tensor x = input;
    for (int i = 0; i < 4; ++i) {
      x = ad::relu(bns[static_cast<size_t>(i)](convs[static_cast<size_t>(i)](x), ctx.training));
      x = ad::max_pool2d(x, kCrnnPoolStrides[i][0], kCrnnPoolStrides[i][1],
                         kCrnnPoolStrides[i][0], kCrnnPoolStrides[i][1]);
    }
    Tensor seq = ad::permute_to_seq(x);          // [B, T', C*F']
    Tensor out = gru(seq);                       // [B, T', H]
    const int T = out.dim(1);
    Tensor last = ad::reshape(ad::narrow(out, 1, T - 1, 1), {out.dim(0), out.dim(2)});
    last = ad::dropout(last, cfg.dropout_p, ctx.training, ctx.next());
    return head(last);
  }

  Tensor prepare(std::span<const AudioClip> chunks) override {
    return mel_batch(chunks, cfg.n_mels, cfg.input_length);
  }

  void collect(nn::Collector& c) override {
    for (int i = 0; i < 4; ++i) {
      convs[static_cast<size_t>(i)].collect("conv" + std::to_string(i + 1), c);
      bns[static_cast<size_t>(i)].collect("bn" + std::to_string(i + 1), c);
    }
    gru.collect("gru", c);
    head.collect("head", c);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "crnn: mel " << cfg.n_mels << " x " << frames_for(cfg.input_length)
       << ", conv3x3 widths [";
    for (size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    os << "], pool (2,2)(3,3)(4,4)(4,4), 2-layer GRU hidden " << cfg.gru_hidden
       << ", dense -> " << cfg.n_tags;
    return os.str();
  }
};

// --------------------------------------------------------------------------
// Self-attention: strided 2-layer CNN front end, sinusoidal positions,
// post-norm Transformer encoder blocks, mean over time
// --------------------------------------------------------------------------
struct SelfAttentionImpl : ArchImpl {
  Conv2d conv1, conv2;
  BatchNorm bn1, bn2;
  std::vector<nn::TransformerBlock> blocks;
  Dense head;
  Tensor pos;  // [T', D] constant
  int ch1, ch2, dim = 0, seq_len = 0;

  SelfAttentionImpl(ModelConfig c, Rng& rng) : ArchImpl(std::move(c)) {
    ch1 = scale_ch(64, cfg.width_mult);
    ch2 = scale_ch(32, cfg.width_mult);
    conv1 = Conv2d::make(1, ch1, 3, 3, 1, 1, 1, 1, rng);
    bn1 = BatchNorm::make(ch1);
    conv2 = Conv2d::make(ch1, ch2, 3, 3, 1, 1, 1, 1, rng);
    bn2 = BatchNorm::make(ch2);

    int f = cfg.n_mels, t = frames_for(cfg.input_length);
    f = (f - 4) / 4 + 1;
    t = (t - 4) / 4 + 1;
    f = (f - 4) / 4 + 1;
    t = (t - 4) / 4 + 1;
    dim = ch2 * f;
    seq_len = t;
    if (dim % cfg.attn_heads != 0) {
      throw InvalidConfig("attention embed dim " + std::to_string(dim) +
                          " not divisible by " + std::to_string(cfg.attn_heads) + " heads");
    }
    for (int i = 0; i < cfg.attn_blocks; ++i) {
      blocks.push_back(nn::TransformerBlock::make(dim, cfg.attn_heads, cfg.ff_mult * dim, rng));
    }
    head = Dense::make(dim, cfg.n_tags, rng);

    pos = Tensor::zeros({seq_len, dim});
    for (int p = 0; p < seq_len; ++p) {
      for (int i = 0; i < dim; i += 2) {
        const double angle = p / std::pow(10000.0, static_cast<double>(i) / dim);
        pos.data()[static_cast<int64_t>(p) * dim + i] = static_cast<float>(std::sin(angle));
        if (i + 1 < dim) {
          pos.data()[static_cast<int64_t>(p) * dim + i + 1] = static_cast<float>(std::cos(angle));
        }
      }
    }
  }

  Tensor forward(const Tensor& input, ForwardCtx& ctx) override {
    Tensor x = ad::relu(bn1(conv1(input), ctx.training));
    x = ad::max_pool2d(x, 4, 4, 4, 4);
    x = ad::relu(bn2(conv2(x), ctx.training));
    x = ad::max_pool2d(x, 4, 4, 4, 4);
    Tensor seq = ad::permute_to_seq(x);  // [B, T', D]
    if (seq.dim(1) != seq_len || seq.dim(2) != dim) {
      throw ShapeMismatch("self_attention: input does not match the configured shape");
    }
    seq = ad::add_bcast0(seq, pos);
    for (auto& b : blocks) seq = b(seq);
    Tensor pooled = ad::mean_axis1(seq);  // [B, D]
    pooled = ad::dropout(pooled, cfg.dropout_p, ctx.training, ctx.next());
    return head(pooled);
  }

  Tensor prepare(std::span<const AudioClip> chunks) override {
    return mel_batch(chunks, cfg.n_mels, cfg.input_length);
  }

  void collect(nn::Collector& c) override {
    conv1.collect("conv1", c);
    bn1.collect("bn1", c);
    conv2.collect("conv2", c);
    bn2.collect("bn2", c);
    for (size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].collect("encoder" + std::to_string(i + 1), c);
    }
    head.collect("head", c);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "self_attention: mel " << cfg.n_mels << " x " << frames_for(cfg.input_length)
       << ", 2 conv blocks (pool 4x4) -> seq " << seq_len << " x " << dim << ", "
       << cfg.attn_blocks << " encoder blocks with " << cfg.attn_heads
       << " heads, mean over time, dense -> " << cfg.n_tags;
    return os.str();
  }
};

// --------------------------------------------------------------------------
// Short-chunk CNN (plain and residual): 7 conv3x3 blocks with 2x2 pooling
// --------------------------------------------------------------------------
struct ShortChunkImpl : ArchImpl {
  struct Block {
    Conv2d conv1, conv2, down;
    BatchNorm bn1, bn2, bn_down;
    bool channels_change = false;
  };
  bool residual;
  int in_channels;
  std::vector<Block> blocks;
  std::vector<int> widths;
  Dense head;

  ShortChunkImpl(ModelConfig c, bool res, int input_channels, Rng& rng)
      : ArchImpl(std::move(c)), residual(res), in_channels(input_channels) {
    const int base[kShortChunkBlocks] = {64, 128, 128, 128, 256, 256, 512};
    int in_ch = in_channels;
    for (int i = 0; i < kShortChunkBlocks; ++i) {
      const int out_ch = scale_ch(base[i], cfg.width_mult);
      widths.push_back(out_ch);
      Block b;
      b.conv1 = Conv2d::make(in_ch, out_ch, 3, 3, 1, 1, 1, 1, rng);
      b.bn1 = BatchNorm::make(out_ch);
      if (residual) {
        b.conv2 = Conv2d::make(out_ch, out_ch, 3, 3, 1, 1, 1, 1, rng);
        b.bn2 = BatchNorm::make(out_ch);
        b.channels_change = in_ch != out_ch;
        if (b.channels_change) {
          b.down = Conv2d::make(in_ch, out_ch, 1, 1, 1, 1, 0, 0, rng);
          b.bn_down = BatchNorm::make(out_ch);
        }
      }
      blocks.push_back(std::move(b));
      in_ch = out_ch;
    }
    head = Dense::make(in_ch, cfg.n_tags, rng);
  }

  Tensor forward(const Tensor& input, ForwardCtx& ctx) override {
    Tensor x = input;
    for (auto& b : blocks) {
      if (!residual) {
        x = ad::relu(b.bn1(b.conv1(x), ctx.training));
      } else {
        Tensor branch = b.bn2(b.conv2(ad::relu(b.bn1(b.conv1(x), ctx.training))), ctx.training);
        Tensor skip = b.channels_change ? b.bn_down(b.down(x), ctx.training) : x;
        x = ad::relu(ad::add(branch, skip));
      }
      x = ad::max_pool2d(x, 2, 2, 2, 2);
    }
    x = ad::global_max_pool(x);
    x = ad::dropout(x, cfg.dropout_p, ctx.training, ctx.next());
    return head(x);
  }

  Tensor prepare(std::span<const AudioClip> chunks) override {
    return mel_batch(chunks, cfg.n_mels, cfg.input_length);
  }

  void collect(nn::Collector& c) override {
    for (size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i + 1);
      blocks[i].conv1.collect(p + ".conv1", c);
      blocks[i].bn1.collect(p + ".bn1", c);
      if (residual) {
        blocks[i].conv2.collect(p + ".conv2", c);
        blocks[i].bn2.collect(p + ".bn2", c);
        if (blocks[i].channels_change) {
          blocks[i].down.collect(p + ".down", c);
          blocks[i].bn_down.collect(p + ".bn_down", c);
        }
      }
    }
    head.collect("head", c);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << (residual ? "short_chunk_res" : "short_chunk") << ": input channels " << in_channels
       << ", 7 conv3x3 blocks" << (residual ? " (residual)" : "") << " widths [";
    for (size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    os << "], pool 2x2 each (2^7 = 128), global max pool, dense -> " << cfg.n_tags;
    return os.str();
  }
};

// --------------------------------------------------------------------------
// Harmonic CNN: trainable-bandwidth harmonic front end feeding a
// short-chunk-style back end on the [6 x 128 x T] stack
// --------------------------------------------------------------------------
struct HarmonicImpl : ArchImpl {
  Tensor alpha;        // trainable bandwidth scalar, shared by all filters
  Tensor norm_dist;    // constant [n_harmonics*n_bands, n_bins]
  std::unique_ptr<ShortChunkImpl> backend;

  HarmonicImpl(ModelConfig c, Rng& rng) : ArchImpl(c) {
    alpha = Tensor::full({1}, 1.0f);
    alpha.set_requires_grad(true);
    HarmonicGeometry g = harmonic_geometry(cfg.n_bands, cfg.n_harmonics);
    std::vector<float> nd(g.norm_distance.size());
    for (size_t i = 0; i < nd.size(); ++i) nd[i] = static_cast<float>(g.norm_distance[i]);
    norm_dist = Tensor::from({cfg.n_harmonics * cfg.n_bands, g.n_bins}, std::move(nd));
    ModelConfig backend_cfg = c;
    backend = std::make_unique<ShortChunkImpl>(backend_cfg, false, cfg.n_harmonics, rng);
  }

  Tensor prepare(std::span<const AudioClip> chunks) override {
    const int B = static_cast<int>(chunks.size());
    const int T = frames_for(cfg.input_length);
    // W(alpha) = relu(1 - dist / alpha), shared across the batch
    Tensor w = ad::relu(ad::rsub_const(1.0f, ad::scale_by(norm_dist, ad::reciprocal(alpha))));
    std::vector<Tensor> parts;
    parts.reserve(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
      check_chunk(chunks[static_cast<size_t>(b)], cfg.input_length);
      Stft s = stft(chunks[static_cast<size_t>(b)]);
      Tensor mag = Tensor::zeros({s.n_bins, s.n_frames});
      for (int t = 0; t < s.n_frames; ++t) {
        for (int k = 0; k < s.n_bins; ++k) {
          mag.data()[static_cast<int64_t>(k) * s.n_frames + t] =
              static_cast<float>(std::abs(s.at(k, t)));
        }
      }
      Tensor h = ad::log_clamp(ad::matmul(w, mag), static_cast<float>(kLogPowerFloor));
      parts.push_back(ad::reshape(h, {1, cfg.n_harmonics, cfg.n_bands, T}));
    }
    return ad::concat(parts, 0);
  }

  Tensor forward(const Tensor& input, ForwardCtx& ctx) override {
    return backend->forward(input, ctx);
  }

  void collect(nn::Collector& c) override {
    c.param("frontend.alpha", alpha);
    backend->collect(c);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "harmonic_cnn: " << cfg.n_harmonics << " x " << cfg.n_bands << " x "
       << frames_for(cfg.input_length)
       << " harmonic stack (trainable bandwidth alpha), back end "
       << backend->describe();
    return os.str();
  }
};

}  // namespace detail

Model::Model(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(mix_seed(seed, hash_str(arch_name(config_.arch))));
  switch (config_.arch) {
    case Arch::fcn: impl_ = std::make_unique<detail::FcnImpl>(config_, rng); break;
    case Arch::musicnn: impl_ = std::make_unique<detail::MusicnnImpl>(config_, rng); break;
    case Arch::sample_level:
      impl_ = std::make_unique<detail::SampleLevelImpl>(config_, false, rng);
      break;
    case Arch::sample_level_se:
      impl_ = std::make_unique<detail::SampleLevelImpl>(config_, true, rng);
      break;
    case Arch::crnn: impl_ = std::make_unique<detail::CrnnImpl>(config_, rng); break;
    case Arch::self_attention:
      impl_ = std::make_unique<detail::SelfAttentionImpl>(config_, rng);
      break;
    case Arch::harmonic_cnn: impl_ = std::make_unique<detail::HarmonicImpl>(config_, rng); break;
    case Arch::short_chunk:
      impl_ = std::make_unique<detail::ShortChunkImpl>(config_, false, 1, rng);
      break;
    case Arch::short_chunk_res:
      impl_ = std::make_unique<detail::ShortChunkImpl>(config_, true, 1, rng);
      break;
  }
  dropout_base_ = mix_seed(seed, 0x44524f50ULL);  // dropout stream
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Tensor Model::prepare_batch(std::span<const AudioClip> chunks) {
  if (chunks.empty()) throw ShapeMismatch("prepare_batch: empty batch");
  return impl_->prepare(chunks);
}

Tensor Model::forward(const Tensor& input) {
  detail::ForwardCtx ctx;
  ctx.training = mode_ == Mode::train;
  ctx.seed = ctx.training ? mix_seed(dropout_base_, dropout_counter_++) : 0;
  return impl_->forward(input, ctx);
}

Tensor Model::forward_chunks(std::span<const AudioClip> chunks) {
  return ad::sigmoid(forward(prepare_batch(chunks)));
}

nn::Collector Model::collect() const {
  nn::Collector c;
  impl_->collect(c);
  return c;
}

int64_t Model::param_count() const {
  nn::Collector c = collect();
  int64_t n = 0;
  for (const auto& p : c.params) n += p.t.size();
  return n;
}

std::string Model::describe() const { return impl_->describe(); }

void Model::reset_dropout_stream(uint64_t seed) {
  dropout_base_ = mix_seed(seed, 0x44524f50ULL);
  dropout_counter_ = 0;
}

Tensor Model::musicnn_vertical_features(const Tensor& input) {
  auto* m = dynamic_cast<detail::MusicnnImpl*>(impl_.get());
  if (!m) throw InvalidConfig("vertical features are only defined for musicnn");
  detail::ForwardCtx ctx;
  ctx.training = false;
  return m->vertical(input, ctx);
}

std::vector<Tensor> Model::musicnn_vertical_conv_maps(const Tensor& input) {
  auto* m = dynamic_cast<detail::MusicnnImpl*>(impl_.get());
  if (!m) throw InvalidConfig("vertical conv maps are only defined for musicnn");
  detail::ForwardCtx ctx;
  ctx.training = false;
  return m->vertical_maps(input, ctx);
}

Model build_model(const ModelConfig& config, uint64_t seed) { return Model(config, seed); }

std::vector<ModelListing> model_listings() {
  std::vector<ModelListing> out;
  for (Arch a : all_archs()) {
    ModelConfig c = ModelConfig::defaults(a);
    ReceptiveField rf = receptive_field(c);
    out.push_back({arch_name(a), rf.time_seconds, c.input_length,
                   is_mel_arch(a) ? c.n_mels : 0, rf.song_level});
  }
  return out;
}

}  // namespace tagbench
