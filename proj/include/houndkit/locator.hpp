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
#include "houndkit/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace houndkit::locator {

/// Offsets 0, s, 2s, ... with offset + n <= trace_len. Throws ArgumentError
/// when n == 0, s == 0 or n > trace_len.
std::vector<std::size_t> sliding_windows(std::size_t trace_len, std::size_t n,
                                         std::size_t s);

/// Per-window argmax class at stride `stride`.
struct SegmentationTrack {
    std::vector<std::uint8_t> classes;
    std::size_t stride = 1;
    std::size_t n = 0;
    std::string trace_id;

    /// Throws ArgumentError.
    void validate() const;
};

/// Classifies every sliding window (standardized as in training). Windows go
/// through the model in fixed chunks, spread over `threads` workers; the
/// result does not depend on the thread count.
SegmentationTrack classify_track(const cnn::Model &model, const Trace &trace,
                                 std::size_t n, std::size_t s,
                                 std::size_t threads = 1);

/// Centered mode filter of odd width k. Near the ends the window is clipped
/// to the track; ties go to the smallest class. Throws ArgumentError for an
/// even or zero k.
std::vector<std::uint8_t> majority_filter(std::span<const std::uint8_t> seg,
                                          std::size_t k);

/// s * i for every i >= 1 with seg[i] == 0 and seg[i-1] != 0.
std::vector<std::size_t> extract_starts(std::span<const std::uint8_t> seg,
                                        std::size_t s);

/// floor(k / 2), minus one if that is even and above 1.
std::size_t next_kernel(std::size_t k);

struct RefineResult {
    std::size_t k = 0;
    double min_cp = 0.0;
    /// Window-index ranges [begin, end) left to re-screen.
    std::vector<std::pair<std::size_t, std::size_t>> subsegments;
};

/// minCP = min(avg_cp, smallest gap between consecutive starts); every
/// consecutive pair further apart than 2 minCP yields [a / s, b / s).
RefineResult refine(std::size_t k, double avg_cp, std::span<const std::size_t> starts,
                    std::size_t s);

struct ScreenConfig {
    std::size_t k0 = 15;
    double avg_cp = 1.0;
    std::size_t s = 1;

    /// Throws ConfigError.
    void validate() const;
};

struct CpLocations {
    std::vector<std::size_t> starts; // ascending, unique, sample indices
};

struct ScreenStats {
    std::size_t iterations = 0;
    std::size_t raw_starts = 0; // before the proximity merge
    double merge_min_cp = 0.0;
};

/// Iterated polish / extract / refine over a queue of sub-segments, then a
/// proximity merge of starts closer than minCP / 2 (first iteration's minCP)
/// into the earlier one.
CpLocations screen(const SegmentationTrack &seg, const ScreenConfig &cfg,
                   ScreenStats *stats = nullptr);

/// [start, start + chunk_len) for every start, zero-padded past the trace
/// end. Throws ArgumentError for chunk_len == 0 or a start beyond the trace.
std::vector<std::vector<float>> align(const Trace &trace, std::span<const std::size_t> starts,
                                      std::size_t chunk_len);

inline constexpr const char *kLocationsFormat = "loc-v1";

struct LocationsFile {
    std::string trace_id;
    std::size_t n = 0;
    std::size_t s = 0;
    double avg_cp = 0.0; // 0 when unknown
    std::vector<std::size_t> starts;
};

void write_locations(const std::filesystem::path &path, const LocationsFile &loc);
LocationsFile read_locations(const std::filesystem::path &path);

/// window_index,offset,class rows.
std::string segmentation_csv(const SegmentationTrack &seg);

/// Trace envelope over class-coloured bands, with located starts (and the
/// true starts when given) as markers.
std::string render_svg(const Trace &trace, const SegmentationTrack &seg,
                       std::span<const std::size_t> starts,
                       std::span<const std::size_t> true_starts = {});

} // namespace houndkit::locator
