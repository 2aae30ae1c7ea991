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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace houndkit {

inline constexpr const char *kTraceFormat = "trc-v1";

/// A trace as stored in trc-v1: samples in `<stem>.f32` (little-endian
/// float32) and metadata in the `<stem>.json` sidecar.
struct TraceFile {
    Trace trace;
    std::optional<GroundTruth> truth;
};

void write_trace(const std::filesystem::path &stem, const Trace &trace,
                 const GroundTruth *truth = nullptr);
TraceFile read_trace(const std::filesystem::path &stem);

/// `<stem><ext>`; the stem may itself contain dots.
std::filesystem::path with_ext(const std::filesystem::path &stem,
                               const std::string &ext);

// Raw little-endian float32 blobs, shared by every binary format here.
void write_f32(const std::filesystem::path &path, std::span<const float> data);
std::vector<float> read_f32(const std::filesystem::path &path);

void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

} // namespace houndkit
