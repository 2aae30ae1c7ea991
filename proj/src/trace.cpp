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

#include "houndkit/trace.hpp"

#include "houndkit/error.hpp"

#include <algorithm>
#include <cmath>

namespace houndkit {

Trace::Trace(std::vector<float> samples, double sample_rate_hz, std::string id)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz),
      id_(std::move(id)) {
    if (samples_.empty())
        throw ArgumentError("trace '" + id_ + "' has no samples");
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
        throw ArgumentError("trace '" + id_ + "' needs a positive sample rate");
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (!std::isfinite(samples_[i]))
            throw ArgumentError("trace '" + id_ + "' has a non-finite sample at " +
                                std::to_string(i));
}

void GroundTruth::validate(std::size_t trace_length) const {
    if (cp_starts.size() != cp_lengths.size())
        throw ArgumentError("ground truth: starts and lengths differ in size");
    for (std::size_t i = 0; i < cp_starts.size(); ++i) {
        if (cp_lengths[i] == 0)
            throw ArgumentError("ground truth: zero-length CP at entry " +
                                std::to_string(i));
        if (i + 1 < cp_starts.size() &&
            cp_starts[i] + cp_lengths[i] > cp_starts[i + 1])
            throw ArgumentError("ground truth: CP " + std::to_string(i) +
                                " overlaps its successor");
        if (trace_length != 0 && cp_starts[i] + cp_lengths[i] > trace_length)
            throw ArgumentError("ground truth: CP " + std::to_string(i) +
                                " runs past the end of the trace");
    }
}

const char *label_name(WindowLabel label) {
    switch (label) {
    case WindowLabel::Start:
        return "start";
    case WindowLabel::Spare:
        return "spare";
    case WindowLabel::Noise:
        return "noise";
    }
    return "?";
}

std::span<const float> extract_window(const Trace &trace, std::size_t offset,
                                      std::size_t n) {
    if (n == 0 || offset > trace.size() || n > trace.size() - offset)
        throw BoundsError("window [" + std::to_string(offset) + ", +" +
                          std::to_string(n) + ") out of range for trace '" +
                          trace.id() + "' of length " +
                          std::to_string(trace.size()));
    return trace.samples().subspan(offset, n);
}

namespace {

template <typename In, typename Out>
void standardize_impl(std::span<const In> window, std::span<Out> out) {
    const std::size_t n = window.size();
    if (n < 2)
        throw ArgumentError("standardize_window needs at least 2 samples");
    if (out.size() != n)
        throw ArgumentError("standardize_window: output size mismatch");

    double mean = 0.0;
    for (const double v : window)
        mean += v;
    mean /= double(n);
    double var = 0.0;
    for (const double v : window) {
        const double d = v - mean;
        var += d * d;
    }
    const double sd = std::sqrt(var / double(n));
    if (sd < 1e-12) {
        std::fill(out.begin(), out.end(), Out(0));
        return;
    }
    const double inv = 1.0 / sd;
    for (std::size_t i = 0; i < n; ++i)
        out[i] = Out((double(window[i]) - mean) * inv);
}

} // namespace

void standardize_into(std::span<const float> window, std::span<float> out) {
    standardize_impl(window, out);
}

std::vector<double> standardize_window(std::span<const double> window) {
    std::vector<double> out(window.size());
    standardize_impl<double, double>(window, out);
    return out;
}

std::vector<double> standardize_window(std::span<const float> window) {
    std::vector<double> out(window.size());
    standardize_impl<float, double>(window, out);
    return out;
}

} // namespace houndkit
