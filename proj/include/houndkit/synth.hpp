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

#include "houndkit/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace houndkit {

/// Every stochastic operation takes one of these by reference. The engine is
/// fully specified by the standard, so a seed reproduces a stream exactly.
using Rng = std::mt19937_64;

namespace synth {

/// Clock frequencies a DFS actuator may pick from.
struct FrequencyPool {
    std::vector<double> frequencies_hz; // ascending, distinct
    double nominal_hz = 0.0;            // member of frequencies_hz
};

/// Pool of (f_max - f_min) / step frequencies f_min + i * step, i = 1..count,
/// so f_min itself is left out and (5 MHz, 100 MHz, 125 kHz) gives 760. The nominal
/// frequency is the pool maximum. Throws ConfigError unless the range is a
/// whole number of steps (1e-6 relative tolerance).
FrequencyPool make_freq_pool(double f_min_hz, double f_max_hz, double step_hz);

/// One-entry pool: DFS disabled, every segment runs at nominal speed.
FrequencyPool fixed_freq_pool(double nominal_hz);

/// Geometry of the synthetic CP motif.
struct TemplateShape {
    std::size_t prologue = 256;
    std::size_t round_count = 10;
    std::size_t round_length = 368;
    std::size_t epilogue = 160;
    std::size_t cycle_length = 5;   // samples per clock cycle at nominal speed
    std::size_t marker_length = 24; // start-of-CP double pulse
    double jitter_sigma = 0.1;      // per-cycle data-dependent amplitude jitter

    std::size_t total_length() const {
        return prologue + round_count * round_length + epilogue;
    }
};

/// Synthetic CP waveform at the nominal clock: a baseline plus per-cycle
/// current pulses modulated by an activity envelope (start marker, prologue,
/// repeated rounds, ramp-down epilogue).
struct CpTemplate {
    std::vector<float> waveform;
    TemplateShape shape;
    float baseline = 0.3f;

    std::size_t size() const { return waveform.size(); }
};

/// The jitter-free reference motif. Deterministic.
CpTemplate make_cp_template(const TemplateShape &shape = {});

/// One execution: the template with multiplicative per-cycle amplitude jitter
/// standing in for data-dependent leakage.
std::vector<float> jitter_instance(const CpTemplate &tmpl, Rng &rng);

/// A contiguous template range played back at one clock frequency.
struct DfsSegment {
    std::size_t template_begin = 0;
    std::size_t template_end = 0;
    std::size_t output_begin = 0;
    std::size_t output_length = 0;
    double frequency_hz = 0.0;
};

struct DeformedWaveform {
    std::vector<float> waveform;
    std::vector<DfsSegment> schedule;
};

/// Time-rescales each template segment [cuts[i], cuts[i+1]) by nominal/f_i
/// with linear interpolation. `cuts` holds the segment boundaries including 0
/// and the template length; frequencies has one entry per segment.
DeformedWaveform resample_segments(std::span<const float> waveform,
                                   std::span<const std::size_t> cuts,
                                   std::span<const double> frequencies_hz,
                                   double nominal_hz);

/// Draws k = 1 + Poisson(mean_reconfigs - 1) segments with uniformly random
/// cut points and uniformly drawn pool frequencies, then resamples.
DeformedWaveform apply_dfs(std::span<const float> waveform,
                           const FrequencyPool &pool, double mean_reconfigs,
                           Rng &rng);

/// General-purpose "application" activity: idle dwells mixed with
/// mean-reverting band-limited random walks.
std::vector<float> synth_noise_segment(std::size_t length, Rng &rng);

struct SynthConfig {
    std::size_t n_cps = 5;
    bool interleave_noise = true;
    std::pair<std::size_t, std::size_t> noise_gap_range{2000, 8000};
    FrequencyPool dfs = make_freq_pool(5e6, 100e6, 125e3);
    double mean_reconfigs_per_cp = 8.0;
    double awgn_sigma = 0.05;
    std::uint64_t seed = 1;
    double sample_rate_hz = 125e6;

    /// Throws ConfigError.
    void validate() const;
};

struct ComposedTrace {
    Trace trace;
    GroundTruth truth;
    std::vector<std::vector<DfsSegment>> schedules; // one per CP
};

/// noise, CP, noise, CP, ..., noise. Without interleaving the CPs run back to
/// back between one leading and one trailing noise segment. With n_cps == 0
/// the trace is a single noise segment. White Gaussian noise is added last.
ComposedTrace compose_trace(const SynthConfig &config, const CpTemplate &tmpl,
                            const std::string &id = "synth");

} // namespace synth
} // namespace houndkit
