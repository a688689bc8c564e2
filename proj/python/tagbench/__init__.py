# Copyright 2026 The tagbench authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the tagbench music auto-tagging benchmark toolkit."""

from tagbench._core import (
    AudioClip,
    ConfigError,
    DataError,
    Model,
    add_white_noise,
    apply_deformation,
    baseline_table,
    deformation_suite,
    dynamic_range_compress,
    generate_synthetic,
    harmonic_representation,
    load_model,
    load_wav,
    mel_filterbank,
    mel_spectrogram,
    model_listings,
    pitch_shift,
    pr_auc,
    resample,
    roc_auc,
    run_cli,
    slice_chunk,
    stft,
    time_stretch,
    write_wav,
)

__all__ = [
    "AudioClip",
    "ConfigError",
    "DataError",
    "Model",
    "add_white_noise",
    "apply_deformation",
    "baseline_table",
    "deformation_suite",
    "dynamic_range_compress",
    "generate_synthetic",
    "harmonic_representation",
    "load_model",
    "load_wav",
    "mel_filterbank",
    "mel_spectrogram",
    "model_listings",
    "pitch_shift",
    "pr_auc",
    "resample",
    "roc_auc",
    "run_cli",
    "slice_chunk",
    "stft",
    "time_stretch",
    "write_wav",
]

__version__ = "0.1.0"
