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

#include "houndkit/synth.hpp"
#include "houndkit/trace.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace houndkit::dataset {

/// A capture together with the start/length of each CP it contains.
struct AnnotatedTrace {
    Trace trace;
    GroundTruth truth;
};

struct Splits {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;
};

enum class Split { Train, Valid, Test };

struct WindowDataset {
    std::size_t n = 0;
    std::vector<LabeledWindow> windows;
    Splits splits;
    double mean_cp_length = 0.0; // over every CP the windows were cut from

    const std::vector<std::size_t> &split(Split which) const;
    std::array<std::size_t, kNumClasses> class_counts() const;
    std::array<std::size_t, kNumClasses>
    class_counts(const std::vector<std::size_t> &indices) const;
};

/// Start window at cp_start, then consecutive Spare windows over the rest of
/// the CP. A trailing remainder shorter than n is dropped.
std::vector<LabeledWindow> label_cipher_trace(const Trace &trace,
                                              std::size_t cp_start,
                                              std::size_t cp_len, std::size_t n);

/// `how_many` Noise windows at uniform offsets in [0, L - n]; offsets may
/// overlap.
std::vector<LabeledWindow> sample_noise_windows(const Trace &noise_trace,
                                                std::size_t n,
                                                std::size_t how_many, Rng &rng);

/// Balanced three-class dataset, shuffled, with stratified 80/10/10 splits.
/// The class sizes are cut down to the smaller of the Start and Spare counts;
/// that many Noise windows are sampled.
WindowDataset build_dataset(std::span<const AnnotatedTrace> cipher_traces,
                            const Trace &noise_trace, std::size_t n, Rng &rng);

inline constexpr const char *kDatasetFormat = "wds-v1";

/// wds-v1: `<stem>.json` manifest, `<stem>.f32` windows in manifest order,
/// `<stem>.labels` one byte per window.
void write_dataset(const std::filesystem::path &stem, const WindowDataset &ds);
WindowDataset read_dataset(const std::filesystem::path &stem);

} // namespace houndkit::dataset
