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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace houndkit {

/// A single-channel power waveform. Immutable once built.
class Trace {
  public:
    /// Throws ArgumentError when samples are empty or non-finite, or the
    /// sample rate is not positive.
    Trace(std::vector<float> samples, double sample_rate_hz, std::string id);

    std::span<const float> samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    double sample_rate_hz() const { return sample_rate_hz_; }
    const std::string &id() const { return id_; }

  private:
    std::vector<float> samples_;
    double sample_rate_hz_;
    std::string id_;
};

/// Start index and length of every CP execution inside a trace.
struct GroundTruth {
    std::vector<std::size_t> cp_starts;
    std::vector<std::size_t> cp_lengths;

    std::size_t size() const { return cp_starts.size(); }
    bool empty() const { return cp_starts.empty(); }

    /// Checks ordering, non-overlap and, when trace_length is non-zero,
    /// that every CP lies inside the trace. Throws ArgumentError.
    void validate(std::size_t trace_length = 0) const;
};

/// Window classes. The integer codes are part of the on-disk formats and
/// the screening stage keys on Start == 0.
enum class WindowLabel : std::uint8_t { Start = 0, Spare = 1, Noise = 2 };

inline constexpr std::size_t kNumClasses = 3;

const char *label_name(WindowLabel label);

struct WindowOrigin {
    std::string trace_id;
    std::size_t offset = 0;
};

struct LabeledWindow {
    std::vector<float> samples;
    WindowLabel label = WindowLabel::Noise;
    WindowOrigin origin;
};

/// View of samples [offset, offset + n). Throws BoundsError naming the trace
/// and offset when the range does not fit.
std::span<const float> extract_window(const Trace &trace, std::size_t offset,
                                      std::size_t n);

/// Z-score with the population standard deviation, computed in double.
/// Windows whose standard deviation is below 1e-12 map to all zeros.
/// Requires at least 2 samples.
std::vector<double> standardize_window(std::span<const double> window);
std::vector<double> standardize_window(std::span<const float> window);

/// Single-precision variant feeding the classifier; same semantics.
void standardize_into(std::span<const float> window, std::span<float> out);

} // namespace houndkit
