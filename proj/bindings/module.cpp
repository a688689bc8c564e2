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

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tagbench/audio.hpp"
#include "tagbench/baseline.hpp"
#include "tagbench/cli.hpp"
#include "tagbench/data.hpp"
#include "tagbench/deform.hpp"
#include "tagbench/dsp.hpp"
#include "tagbench/errors.hpp"
#include "tagbench/metrics.hpp"
#include "tagbench/models.hpp"
#include "tagbench/train.hpp"

namespace py = pybind11;
using namespace tagbench;

namespace {

AudioClip clip_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> samples,
                          int sample_rate, const std::string& source_id) {
  py::buffer_info buf = samples.request();
  if (buf.ndim != 1) throw InvalidConfig("samples must be a 1-D array");
  const float* p = static_cast<const float*>(buf.ptr);
  return make_clip(std::vector<float>(p, p + buf.size), sample_rate, source_id);
}

py::array_t<float> to_array(const std::vector<float>& v, std::vector<py::ssize_t> shape) {
  py::array_t<float> out(shape);
  std::copy(v.begin(), v.end(), static_cast<float*>(out.request().ptr));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "music auto-tagging benchmark toolkit (C++ core)";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);

  py::class_<AudioClip>(m, "AudioClip")
      .def(py::init(&clip_from_array), py::arg("samples"), py::arg("sample_rate"),
           py::arg("source_id") = "clip")
      .def_property_readonly("samples",
                             [](const AudioClip& c) {
                               return to_array(c.samples, {static_cast<py::ssize_t>(c.samples.size())});
                             })
      .def_readonly("sample_rate", &AudioClip::sample_rate)
      .def_readonly("source_id", &AudioClip::source_id)
      .def("__len__", [](const AudioClip& c) { return c.samples.size(); })
      .def("seconds", &AudioClip::seconds);

  m.def("load_wav", [](const std::string& p) { return load_wav(p); }, py::arg("path"));
  m.def(
      "write_wav",
      [](const std::string& p, const AudioClip& c, bool float32) {
        write_wav(p, c, float32 ? WavFormat::float32 : WavFormat::pcm16);
      },
      py::arg("path"), py::arg("clip"), py::arg("float32") = false);
  m.def("resample", &resample, py::arg("clip"), py::arg("target_rate"));
  m.def("slice_chunk", &slice_chunk, py::arg("clip"), py::arg("start"), py::arg("length"));

  m.def(
      "stft",
      [](const AudioClip& clip, int n_fft, int hop) {
        Stft s = stft(clip, n_fft, hop);
        py::array_t<std::complex<double>> out({s.n_bins, s.n_frames});
        auto* p = static_cast<std::complex<double>*>(out.request().ptr);
        for (int b = 0; b < s.n_bins; ++b) {
          for (int t = 0; t < s.n_frames; ++t) {
            p[static_cast<int64_t>(b) * s.n_frames + t] = s.at(b, t);
          }
        }
        return out;
      },
      py::arg("clip"), py::arg("n_fft") = kNFft, py::arg("hop") = kHop);

  m.def(
      "mel_filterbank",
      [](int n_mels, int n_fft, int sample_rate) {
        FilterbankMatrix fb = mel_filterbank(n_mels, n_fft, sample_rate);
        py::array_t<double> out({fb.n_mels, fb.n_bins});
        std::copy(fb.weights.begin(), fb.weights.end(), static_cast<double*>(out.request().ptr));
        return out;
      },
      py::arg("n_mels"), py::arg("n_fft") = kNFft, py::arg("sample_rate") = kPipelineRate);

  m.def(
      "mel_spectrogram",
      [](const AudioClip& clip, int n_mels) {
        MelSpectrogram ms = mel_spectrogram(clip, n_mels);
        return to_array(ms.values, {ms.n_mels, ms.n_frames});
      },
      py::arg("clip"), py::arg("n_mels"));

  m.def(
      "harmonic_representation",
      [](const AudioClip& clip, int n_bands, int n_harmonics, double alpha) {
        HarmonicTensor h = harmonic_representation(clip, n_bands, n_harmonics, alpha);
        return to_array(h.values, {h.n_harmonics, h.n_bands, h.n_frames});
      },
      py::arg("clip"), py::arg("n_bands") = 128, py::arg("n_harmonics") = 6,
      py::arg("alpha") = 1.0);

  m.def("pitch_shift", &pitch_shift, py::arg("clip"), py::arg("semitones"));
  m.def("time_stretch", &time_stretch, py::arg("clip"), py::arg("rate"));
  m.def(
      "dynamic_range_compress",
      [](const AudioClip& clip, const std::string& preset) {
        return dynamic_range_compress(clip, CompressorPreset::by_name(preset));
      },
      py::arg("clip"), py::arg("preset") = "speech");
  m.def("add_white_noise", &add_white_noise, py::arg("clip"), py::arg("alpha"),
        py::arg("seed") = 0);
  m.def(
      "apply_deformation",
      [](const std::string& spec, const AudioClip& clip, uint64_t seed) {
        return apply_deformation(Deformation::parse(spec), clip, seed);
      },
      py::arg("spec"), py::arg("clip"), py::arg("seed") = 0);
  m.def("deformation_suite", [] {
    std::vector<std::string> specs;
    for (const auto& d : deformation_suite()) specs.push_back(d.spec_string());
    return specs;
  });

  m.def(
      "roc_auc",
      [](std::vector<double> scores, std::vector<int> labels) {
        std::vector<uint8_t> y(labels.begin(), labels.end());
        return roc_auc(scores, y);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "pr_auc",
      [](std::vector<double> scores, std::vector<int> labels) {
        std::vector<uint8_t> y(labels.begin(), labels.end());
        return pr_auc(scores, y);
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "generate_synthetic",
      [](const std::string& out_dir, int n_clips, double seconds, uint64_t seed, int tags) {
        SyntheticSpec spec;
        spec.n_clips = n_clips;
        spec.clip_seconds = seconds;
        spec.seed = seed;
        spec.n_active_tags = tags;
        generate_synthetic(spec, out_dir);
        return (std::filesystem::path(out_dir) / "manifest.tsv").string();
      },
      py::arg("out_dir"), py::arg("n_clips") = 100, py::arg("seconds") = 30.0,
      py::arg("seed") = 0, py::arg("tags") = 8);

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& arch, uint64_t seed, int n_mels, double width_mult,
                       int gru_hidden) {
             ModelConfig c = ModelConfig::defaults(arch_from_name(arch));
             if (n_mels > 0) c.n_mels = n_mels;
             c.width_mult = static_cast<float>(width_mult);
             if (gru_hidden > 0) c.gru_hidden = gru_hidden;
             return Model(c, seed);
           }),
           py::arg("arch"), py::arg("seed") = 0, py::arg("n_mels") = -1,
           py::arg("width_mult") = 1.0, py::arg("gru_hidden") = -1)
      .def("predict",
           [](Model& model, const AudioClip& clip) {
             std::vector<double> s = predict_clip(model, clip);
             py::array_t<double> out({static_cast<py::ssize_t>(s.size())});
             std::copy(s.begin(), s.end(), static_cast<double*>(out.request().ptr));
             return out;
           })
      .def("param_count", &Model::param_count)
      .def("describe", &Model::describe)
      .def("input_length", [](const Model& m_) { return m_.config().input_length; })
      .def("config_json", [](const Model& m_) { return m_.config().to_json(); });

  m.def("load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));

  m.def("model_listings", [] {
    py::list rows;
    for (const auto& l : model_listings()) {
      py::dict d;
      d["arch"] = l.arch;
      d["input_seconds"] = l.input_seconds;
      d["input_samples"] = l.input_samples;
      d["n_mels"] = l.n_mels;
      d["song_level"] = l.song_level;
      rows.append(d);
    }
    return rows;
  });

  m.def("baseline_table", [] {
    py::list rows;
    for (const auto& r : baseline_table()) {
      py::dict d;
      d["model"] = r.model;
      d["dataset"] = r.dataset;
      d["roc_auc"] = r.roc_auc;
      d["pr_auc"] = r.pr_auc;
      d["note"] = r.note;
      rows.append(d);
    }
    return rows;
  });

  m.def("run_cli", &run_cli, py::arg("args"),
        "run a tagbench CLI command (train/eval/perturb/report/models/synth); returns the exit code");
}
