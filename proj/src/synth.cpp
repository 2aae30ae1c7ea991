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

#include "houndkit/synth.hpp"

#include "houndkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace houndkit::synth {

FrequencyPool make_freq_pool(double f_min_hz, double f_max_hz, double step_hz) {
    if (!(f_min_hz > 0.0) || !(f_min_hz < f_max_hz) || !(step_hz > 0.0))
        throw ConfigError("frequency pool needs 0 < f_min < f_max and step > 0");
    const double steps = (f_max_hz - f_min_hz) / step_hz;
    const double whole = std::round(steps);
    if (std::abs(steps - whole) > 1e-6 * std::max(1.0, steps))
        throw ConfigError("frequency range is not a whole number of steps");
    // (f_min, f_max]
    const auto count = static_cast<std::size_t>(whole);
    FrequencyPool pool;
    pool.frequencies_hz.reserve(count);
    for (std::size_t i = 1; i <= count; ++i)
        pool.frequencies_hz.push_back(f_min_hz + double(i) * step_hz);
    pool.frequencies_hz.back() = f_max_hz;
    pool.nominal_hz = f_max_hz;
    return pool;
}

FrequencyPool fixed_freq_pool(double nominal_hz) {
    if (!(nominal_hz > 0.0))
        throw ConfigError("nominal frequency must be positive");
    return FrequencyPool{{nominal_hz}, nominal_hz};
}

CpTemplate make_cp_template(const TemplateShape &shape) {
    if (shape.round_count == 0 || shape.round_length == 0 ||
        shape.cycle_length == 0)
        throw ConfigError("template needs rounds and a cycle length");
    if (shape.marker_length < 4 || shape.marker_length > shape.prologue)
        throw ConfigError("start marker must fit in the prologue");

    const std::size_t total = shape.total_length();
    std::vector<double> activity(total, 0.0);

    // Double pulse marking the first cycles of every execution.
    const std::size_t q = shape.marker_length / 4;
    for (std::size_t i = 0; i < shape.marker_length; ++i)
        activity[i] = ((i / q) % 2 == 0 && i < 4 * q) ? 2.2 : 0.1;
    for (std::size_t i = shape.marker_length; i < shape.prologue; ++i)
        activity[i] = 0.7 + 0.2 * std::sin(2.0 * std::numbers::pi *
                                           double(i - shape.marker_length) / 52.0);

    for (std::size_t r = 0; r < shape.round_count; ++r) {
        const std::size_t base = shape.prologue + r * shape.round_length;
        for (std::size_t j = 0; j < shape.round_length; ++j) {
            const double ph = double(j) / double(shape.round_length);
            activity[base + j] = 0.8 + 0.25 * std::sin(2.0 * std::numbers::pi * ph) +
                                 0.1 * std::sin(6.0 * std::numbers::pi * ph) +
                                 0.15 * ph;
        }
    }

    const std::size_t tail = shape.prologue + shape.round_count * shape.round_length;
    for (std::size_t j = 0; j < shape.epilogue; ++j) {
        const double frac =
            shape.epilogue > 1 ? double(j) / double(shape.epilogue - 1) : 1.0;
        activity[tail + j] = 0.8 * (1.0 - frac);
    }

    // Current drawn within one clock cycle decays after the edge.
    static constexpr double kPulse[] = {1.0, 0.55, 0.25, 0.1, 0.05};
    CpTemplate tmpl;
    tmpl.shape = shape;
    tmpl.waveform.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t phase = (i % shape.cycle_length) * 5 / shape.cycle_length;
        tmpl.waveform[i] = float(tmpl.baseline + activity[i] * kPulse[phase]);
    }
    return tmpl;
}

std::vector<float> jitter_instance(const CpTemplate &tmpl, Rng &rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t cycle = tmpl.shape.cycle_length;
    std::vector<float> out(tmpl.size());
    double gain = 1.0;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (i % cycle == 0)
            gain = 1.0 + tmpl.shape.jitter_sigma * gauss(rng);
        out[i] = float(tmpl.baseline + (tmpl.waveform[i] - tmpl.baseline) * gain);
    }
    return out;
}

DeformedWaveform resample_segments(std::span<const float> waveform,
                                   std::span<const std::size_t> cuts,
                                   std::span<const double> frequencies_hz,
                                   double nominal_hz) {
    const std::size_t len = waveform.size();
    if (len == 0)
        throw ArgumentError("cannot deform an empty waveform");
    if (cuts.size() < 2 || cuts.front() != 0 || cuts.back() != len ||
        frequencies_hz.size() + 1 != cuts.size())
        throw ArgumentError("DFS schedule does not tile the waveform");

    DeformedWaveform out;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const std::size_t b = cuts[s];
        const std::size_t e = cuts[s + 1];
        if (e <= b)
            throw ArgumentError("DFS segments must be non-empty and ordered");
        if (!(frequencies_hz[s] > 0.0))
            throw ArgumentError("DFS frequency must be positive");
        const double stretch = nominal_hz / frequencies_hz[s];
        const std::size_t m = e - b;
        const auto n = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(double(m) * stretch)));

        out.schedule.push_back({b, e, out.waveform.size(), n, frequencies_hz[s]});
        for (std::size_t j = 0; j < n; ++j) {
            // Integer arithmetic keeps the identity schedule exact.
            const std::size_t num = j * m;
            const std::size_t i0 = b + num / n;
            const double frac = double(num % n) / double(n);
            const std::size_t i1 = std::min(i0 + 1, len - 1);
            out.waveform.push_back(
                float(waveform[i0] * (1.0 - frac) + waveform[i1] * frac));
        }
    }
    return out;
}

DeformedWaveform apply_dfs(std::span<const float> waveform,
                           const FrequencyPool &pool, double mean_reconfigs,
                           Rng &rng) {
    const std::size_t len = waveform.size();
    if (len == 0)
        throw ArgumentError("cannot deform an empty waveform");
    if (pool.frequencies_hz.empty() || !(pool.nominal_hz > 0.0))
        throw ArgumentError("DFS needs a non-empty frequency pool");
    if (!(mean_reconfigs >= 1.0))
        throw ArgumentError("mean reconfigurations per CP must be >= 1");

    std::size_t k = 1;
    if (mean_reconfigs > 1.0) {
        std::poisson_distribution<std::size_t> extra(mean_reconfigs - 1.0);
        k += extra(rng);
    }
    k = std::min(k, len);

    // k - 1 distinct interior cut points, uniformly at random.
    std::vector<std::size_t> cuts{0};
    if (k > 1) {
        std::vector<std::size_t> interior;
        std::uniform_int_distribution<std::size_t> pick(1, len - 1);
        while (interior.size() < k - 1) {
            const std::size_t c = pick(rng);
            if (std::find(interior.begin(), interior.end(), c) == interior.end())
                interior.push_back(c);
        }
        std::sort(interior.begin(), interior.end());
        cuts.insert(cuts.end(), interior.begin(), interior.end());
    }
    cuts.push_back(len);

    std::uniform_int_distribution<std::size_t> pick_f(
        0, pool.frequencies_hz.size() - 1);
    std::vector<double> freqs(k);
    for (double &f : freqs)
        f = pool.frequencies_hz[pick_f(rng)];
    return resample_segments(waveform, cuts, freqs, pool.nominal_hz);
}

std::vector<float> synth_noise_segment(std::size_t length, Rng &rng) {
    std::vector<float> out;
    out.reserve(length);
    std::uniform_int_distribution<std::size_t> duration(200, 3000);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr double kIdleLevel = 0.3;

    while (out.size() < length) {
        const std::size_t d = std::min(duration(rng), length - out.size());
        if (unit(rng) < 0.3) {
            out.insert(out.end(), d, float(kIdleLevel));
            continue;
        }
        // Ornstein-Uhlenbeck walk: stationary deviation `sd`, correlation
        // time 1/theta samples.
        const double mu = 0.35 + 0.4 * unit(rng);
        const double theta = 0.005 + 0.045 * unit(rng);
        const double sd = 0.05 + 0.1 * unit(rng);
        const double drive = std::sqrt(2.0 * theta) * sd;
        double y = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            y += -theta * y + drive * gauss(rng);
            out.push_back(float(mu + y));
        }
    }
    return out;
}

void SynthConfig::validate() const {
    if (noise_gap_range.first > noise_gap_range.second)
        throw ConfigError("noise gap range min exceeds max");
    if (!(mean_reconfigs_per_cp >= 1.0))
        throw ConfigError("mean reconfigurations per CP must be >= 1");
    if (!(awgn_sigma >= 0.0))
        throw ConfigError("AWGN sigma must be non-negative");
    if (dfs.frequencies_hz.empty() || !(dfs.nominal_hz > 0.0))
        throw ConfigError("DFS pool is empty");
    if (std::find(dfs.frequencies_hz.begin(), dfs.frequencies_hz.end(),
                  dfs.nominal_hz) == dfs.frequencies_hz.end())
        throw ConfigError("nominal frequency must belong to the pool");
    if (!(sample_rate_hz > 0.0))
        throw ConfigError("sample rate must be positive");
    if (n_cps == 0 && noise_gap_range.second == 0)
        throw ConfigError("a trace without CPs needs a positive noise length");
}

ComposedTrace compose_trace(const SynthConfig &config, const CpTemplate &tmpl,
                            const std::string &id) {
    config.validate();
    Rng rng(config.seed);
    std::uniform_int_distribution<std::size_t> gap(config.noise_gap_range.first,
                                                   config.noise_gap_range.second);
    std::vector<float> samples;
    GroundTruth truth;
    std::vector<std::vector<DfsSegment>> schedules;

    auto add_noise = [&] {
        const std::vector<float> seg = synth_noise_segment(gap(rng), rng);
        samples.insert(samples.end(), seg.begin(), seg.end());
    };

    for (std::size_t c = 0; c < config.n_cps; ++c) {
        if (config.interleave_noise || c == 0)
            add_noise();
        const std::vector<float> instance = jitter_instance(tmpl, rng);
        DeformedWaveform cp = apply_dfs(instance, config.dfs,
                                        config.mean_reconfigs_per_cp, rng);
        truth.cp_starts.push_back(samples.size());
        truth.cp_lengths.push_back(cp.waveform.size());
        samples.insert(samples.end(), cp.waveform.begin(), cp.waveform.end());
        schedules.push_back(std::move(cp.schedule));
    }
    add_noise();
    if (samples.empty())
        throw ConfigError("composed trace is empty; widen the noise gap range");

    if (config.awgn_sigma > 0.0) {
        std::normal_distribution<double> awgn(0.0, config.awgn_sigma);
        for (float &v : samples)
            v = float(v + awgn(rng));
    }
    Trace trace(std::move(samples), config.sample_rate_hz, id);
    return ComposedTrace{std::move(trace), std::move(truth), std::move(schedules)};
}

} // namespace houndkit::synth
