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

#include "houndkit/dataset.hpp"

#include "houndkit/error.hpp"
#include "houndkit/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace houndkit::dataset {

using nlohmann::json;

const std::vector<std::size_t> &WindowDataset::split(Split which) const {
    switch (which) {
    case Split::Train:
        return splits.train;
    case Split::Valid:
        return splits.valid;
    case Split::Test:
        break;
    }
    return splits.test;
}

std::array<std::size_t, kNumClasses> WindowDataset::class_counts() const {
    std::array<std::size_t, kNumClasses> c{};
    for (const auto &w : windows)
        ++c[std::size_t(w.label)];
    return c;
}

std::array<std::size_t, kNumClasses>
WindowDataset::class_counts(const std::vector<std::size_t> &indices) const {
    std::array<std::size_t, kNumClasses> c{};
    for (std::size_t i : indices)
        ++c[std::size_t(windows.at(i).label)];
    return c;
}

std::vector<LabeledWindow> label_cipher_trace(const Trace &trace,
                                              std::size_t cp_start,
                                              std::size_t cp_len, std::size_t n) {
    if (n == 0 || n > cp_len)
        throw ArgumentError("window size must be in [1, CP length]");
    if (cp_start > trace.size() || cp_len > trace.size() - cp_start)
        throw BoundsError("CP at " + std::to_string(cp_start) +
                          " runs past the end of trace '" + trace.id() + "'");

    std::vector<LabeledWindow> out;
    auto take = [&](std::size_t offset, WindowLabel label) {
        auto w = extract_window(trace, offset, n);
        out.push_back({{w.begin(), w.end()}, label, {trace.id(), offset}});
    };
    take(cp_start, WindowLabel::Start);
    for (std::size_t off = cp_start + n; off + n <= cp_start + cp_len; off += n)
        take(off, WindowLabel::Spare);
    return out;
}

std::vector<LabeledWindow> sample_noise_windows(const Trace &noise_trace,
                                                std::size_t n,
                                                std::size_t how_many, Rng &rng) {
    if (n == 0 || noise_trace.size() < n)
        throw ArgumentError("noise trace '" + noise_trace.id() +
                            "' is shorter than the window size");
    std::uniform_int_distribution<std::size_t> pick(0, noise_trace.size() - n);
    std::vector<LabeledWindow> out;
    out.reserve(how_many);
    for (std::size_t i = 0; i < how_many; ++i) {
        const std::size_t off = pick(rng);
        auto w = extract_window(noise_trace, off, n);
        out.push_back({{w.begin(), w.end()}, WindowLabel::Noise,
                       {noise_trace.id(), off}});
    }
    return out;
}

namespace {

// Uniform subset of `keep` elements, original order preserved.
std::vector<LabeledWindow> downsample(std::vector<LabeledWindow> v,
                                      std::size_t keep, Rng &rng) {
    if (v.size() <= keep)
        return v;
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    std::vector<LabeledWindow> out;
    out.reserve(keep);
    for (std::size_t i : idx)
        out.push_back(std::move(v[i]));
    return out;
}

} // namespace

WindowDataset build_dataset(std::span<const AnnotatedTrace> cipher_traces,
                            const Trace &noise_trace, std::size_t n, Rng &rng) {
    if (cipher_traces.empty())
        throw ArgumentError("build_dataset needs at least one cipher trace");

    std::vector<LabeledWindow> starts, spares;
    double len_sum = 0.0;
    std::size_t n_cps = 0;
    for (const auto &ct : cipher_traces) {
        ct.truth.validate(ct.trace.size());
        for (std::size_t i = 0; i < ct.truth.size(); ++i) {
            auto ws = label_cipher_trace(ct.trace, ct.truth.cp_starts[i],
                                         ct.truth.cp_lengths[i], n);
            len_sum += double(ct.truth.cp_lengths[i]);
            ++n_cps;
            for (auto &w : ws)
                (w.label == WindowLabel::Start ? starts : spares)
                    .push_back(std::move(w));
        }
    }
    if (n_cps == 0)
        throw ArgumentError("cipher traces contain no CP instance");

    const std::size_t per_class = std::min(starts.size(), spares.size());
    if (per_class == 0)
        throw ArgumentError("CPs are too short to yield a Spare window");
    starts = downsample(std::move(starts), per_class, rng);
    spares = downsample(std::move(spares), per_class, rng);
    std::vector<LabeledWindow> noise =
        sample_noise_windows(noise_trace, n, per_class, rng);

    WindowDataset ds;
    ds.n = n;
    ds.mean_cp_length = len_sum / double(n_cps);
    ds.windows.reserve(3 * per_class);
    for (auto *cls : {&starts, &spares, &noise})
        for (auto &w : *cls)
            ds.windows.push_back(std::move(w));
    std::shuffle(ds.windows.begin(), ds.windows.end(), rng);

    // Stratify: each class contributes the same counts to every split.
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * double(per_class)));
    const auto n_valid = std::min(
        per_class - n_train,
        static_cast<std::size_t>(std::llround(0.1 * double(per_class))));
    std::array<std::size_t, kNumClasses> seen{};
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        const std::size_t r = seen[std::size_t(ds.windows[i].label)]++;
        if (r < n_train)
            ds.splits.train.push_back(i);
        else if (r < n_train + n_valid)
            ds.splits.valid.push_back(i);
        else
            ds.splits.test.push_back(i);
    }
    return ds;
}

void write_dataset(const std::filesystem::path &stem, const WindowDataset &ds) {
    std::vector<float> flat;
    flat.reserve(ds.windows.size() * ds.n);
    std::string labels;
    labels.reserve(ds.windows.size());
    json origins = json::array();
    for (const auto &w : ds.windows) {
        if (w.samples.size() != ds.n)
            throw ArgumentError("window length differs from dataset n");
        flat.insert(flat.end(), w.samples.begin(), w.samples.end());
        labels.push_back(char(w.label));
        origins.push_back({w.origin.trace_id, w.origin.offset});
    }
    const auto counts = ds.class_counts();
    json meta;
    meta["format"] = kDatasetFormat;
    meta["n"] = ds.n;
    meta["count"] = ds.windows.size();
    meta["counts"] = {{"start", counts[0]}, {"spare", counts[1]}, {"noise", counts[2]}};
    meta["mean_cp_length"] = ds.mean_cp_length;
    meta["splits"] = {{"train", ds.splits.train},
                      {"valid", ds.splits.valid},
                      {"test", ds.splits.test}};
    meta["origins"] = std::move(origins);
    write_f32(with_ext(stem, ".f32"), flat);
    write_text(with_ext(stem, ".labels"), labels);
    write_text(with_ext(stem, ".json"), meta.dump() + "\n");
}

WindowDataset read_dataset(const std::filesystem::path &stem) {
    const auto meta_path = with_ext(stem, ".json");
    json meta;
    try {
        meta = json::parse(read_text(meta_path));
    } catch (const json::exception &e) {
        throw FormatError("'" + meta_path.string() + "': " + e.what());
    }
    if (!meta.contains("format") || meta["format"] != kDatasetFormat)
        throw FormatError("'" + meta_path.string() + "' is not a " +
                          std::string(kDatasetFormat) + " manifest");
    try {
        WindowDataset ds;
        ds.n = meta.at("n").get<std::size_t>();
        const auto count = meta.at("count").get<std::size_t>();
        ds.mean_cp_length = meta.value("mean_cp_length", 0.0);
        const std::vector<float> flat = read_f32(with_ext(stem, ".f32"));
        const std::string labels = read_text(with_ext(stem, ".labels"));
        if (flat.size() != count * ds.n || labels.size() != count)
            throw FormatError("'" + stem.string() +
                              "': window or label file size disagrees with manifest");
        const json &origins = meta.at("origins");
        ds.windows.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            auto &w = ds.windows[i];
            w.samples.assign(flat.begin() + std::ptrdiff_t(i * ds.n),
                             flat.begin() + std::ptrdiff_t((i + 1) * ds.n));
            const auto code = static_cast<unsigned char>(labels[i]);
            if (code >= kNumClasses)
                throw FormatError("'" + stem.string() + "': bad label byte");
            w.label = WindowLabel(code);
            w.origin = {origins.at(i).at(0).get<std::string>(),
                        origins.at(i).at(1).get<std::size_t>()};
        }
        ds.splits.train = meta.at("splits").at("train").get<std::vector<std::size_t>>();
        ds.splits.valid = meta.at("splits").at("valid").get<std::vector<std::size_t>>();
        ds.splits.test = meta.at("splits").at("test").get<std::vector<std::size_t>>();
        for (const auto *s : {&ds.splits.train, &ds.splits.valid, &ds.splits.test})
            for (std::size_t i : *s)
                if (i >= count)
                    throw FormatError("'" + stem.string() + "': split index out of range");
        return ds;
    } catch (const json::exception &e) {
        throw FormatError("'" + meta_path.string() + "': " + e.what());
    }
}

} // namespace houndkit::dataset
