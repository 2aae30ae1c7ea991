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

#include "houndkit/trace_io.hpp"

#include "houndkit/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace houndkit {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path with_ext(const fs::path &stem, const std::string &ext) {
    fs::path p = stem;
    p += ext;
    return p;
}

void write_text(const fs::path &path, const std::string &text) {
    // Write to a sibling and rename so readers never observe partial files.
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open '" + path.string() + "' for writing");
        out.write(text.data(), std::streamsize(text.size()));
        if (!out)
            throw IoError("short write to '" + path.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot move '" + tmp.string() + "' into place: " +
                      ec.message());
}

std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_f32(const fs::path &path, std::span<const float> data) {
    std::string bytes(data.size() * 4, '\0');
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t u = std::bit_cast<std::uint32_t>(data[i]);
        if constexpr (std::endian::native == std::endian::big)
            u = __builtin_bswap32(u);
        std::memcpy(&bytes[i * 4], &u, 4);
    }
    write_text(path, bytes);
}

std::vector<float> read_f32(const fs::path &path) {
    const std::string bytes = read_text(path);
    if (bytes.size() % 4 != 0)
        throw FormatError("'" + path.string() +
                          "' is not a whole number of float32 values");
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t u;
        std::memcpy(&u, &bytes[i * 4], 4);
        if constexpr (std::endian::native == std::endian::big)
            u = __builtin_bswap32(u);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

void write_trace(const fs::path &stem, const Trace &trace,
                 const GroundTruth *truth) {
    json meta;
    meta["format"] = kTraceFormat;
    meta["sample_rate_hz"] = trace.sample_rate_hz();
    meta["id"] = trace.id();
    meta["length"] = trace.size();
    if (truth) {
        truth->validate(trace.size());
        meta["ground_truth"] = {{"cp_starts", truth->cp_starts},
                                {"cp_lengths", truth->cp_lengths}};
    }
    write_f32(with_ext(stem, ".f32"), trace.samples());
    write_text(with_ext(stem, ".json"), meta.dump(2) + "\n");
}

TraceFile read_trace(const fs::path &stem) {
    const fs::path meta_path = with_ext(stem, ".json");
    json meta;
    try {
        meta = json::parse(read_text(meta_path));
    } catch (const json::exception &e) {
        throw FormatError("'" + meta_path.string() + "': " + e.what());
    }
    if (!meta.contains("format") || meta["format"] != kTraceFormat)
        throw FormatError("'" + meta_path.string() + "' is not a " +
                          std::string(kTraceFormat) + " sidecar");
    try {
        std::vector<float> samples = read_f32(with_ext(stem, ".f32"));
        Trace trace(std::move(samples), meta.at("sample_rate_hz").get<double>(),
                    meta.at("id").get<std::string>());
        std::optional<GroundTruth> truth;
        if (meta.contains("ground_truth")) {
            GroundTruth gt;
            gt.cp_starts =
                meta["ground_truth"].at("cp_starts").get<std::vector<std::size_t>>();
            gt.cp_lengths =
                meta["ground_truth"].at("cp_lengths").get<std::vector<std::size_t>>();
            gt.validate(trace.size());
            truth = std::move(gt);
        }
        return TraceFile{std::move(trace), std::move(truth)};
    } catch (const json::exception &e) {
        throw FormatError("'" + meta_path.string() + "': " + e.what());
    } catch (const ArgumentError &e) {
        throw FormatError("'" + meta_path.string() + "': " + e.what());
    }
}

} // namespace houndkit
