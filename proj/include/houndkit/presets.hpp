/*
 * SPDX-FileCopyrightText: Copyright 2026 The houndkit authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "houndkit/cnn/model.hpp"
#include "houndkit/cnn/train.hpp"
#include "houndkit/synth.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace houndkit {

/// Every tunable of one experiment, flattened. Keys of set_key() mirror the
/// field names given in the comments.
struct ExperimentConfig {
    std::string preset = "desk-default";
    std::uint64_t seed = 1; // seed

    // synthesis
    synth::SynthConfig synth;     // cps, interleave, gap_min, gap_max, reconfigs, awgn, sample_rate
    double f_min_hz = 5e6;        // f_min
    double f_max_hz = 100e6;      // f_max
    double f_step_hz = 125e3;     // f_step
    bool dfs_enabled = true;      // dfs
    std::size_t noise_length = 400000; // noise_length (pure-noise traces)

    // model and training
    cnn::ModelConfig model; // n, kernel, stem_channels, res1_channels, res2_channels, fc_hidden
    cnn::TrainConfig train; // epochs, batch, lr, dropout

    // inference
    std::size_t stride = 8;                // stride
    std::size_t k0 = 15;                   // k0 (interleaved traces)
    std::size_t k0_consecutive = 15;       // k0_consecutive
    double avg_cp = 0.0;                   // avg_cp; 0 takes the training mean
    double avg_cp_consecutive = 0.0;       // avg_cp_consecutive

    // baseline
    double mf_quantile = 0.999; // mf_quantile
    double mf_floor = 0.3;      // mf_floor

    /// Rebuilds synth.dfs from the frequency fields; throws ConfigError.
    void finalize();
    void validate() const;
};

std::vector<std::string> preset_names();

/// Throws ConfigError for an unknown name.
ExperimentConfig make_preset(const std::string &name);

/// Applies one `key = value` setting; throws ConfigError for unknown keys or
/// unparsable values. Call finalize() afterwards.
void set_key(ExperimentConfig &cfg, const std::string &key, const std::string &value);
std::vector<std::string> config_keys();

/// Parses a flat `key = value` file (# comments, blank lines allowed).
std::map<std::string, std::string> parse_config_text(const std::string &text);

/// Flat key -> value view, as written to run manifests.
std::map<std::string, std::string> config_values(const ExperimentConfig &cfg);

/// Largest odd kernel not above k (k >= 1).
std::size_t odd_kernel(std::size_t k);

} // namespace houndkit
