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

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <set>

using namespace houndkit;
using namespace houndkit::dataset;

namespace {

Trace ramp_trace(std::size_t len, const std::string &id) {
    std::vector<float> v(len);
    for (std::size_t i = 0; i < len; ++i)
        v[i] = float(i);
    return Trace(std::move(v), 1e6, id);
}

// 100 CPs of 10 windows each (n = 8), separated by 20-sample gaps.
AnnotatedTrace hundred_cps() {
    const std::size_t n = 8, cp = 10 * n, gap = 20;
    GroundTruth gt;
    for (std::size_t i = 0; i < 100; ++i) {
        gt.cp_starts.push_back(gap + i * (cp + gap));
        gt.cp_lengths.push_back(cp);
    }
    return {ramp_trace(gap + 100 * (cp + gap), "cipher"), gt};
}

} // namespace

TEST_CASE("label_cipher_trace tiling") {
    const Trace t = ramp_trace(200, "c");
    auto w = label_cipher_trace(t, 10, 25, 10);
    REQUIRE(w.size() == 2);
    CHECK(w[0].label == WindowLabel::Start);
    CHECK(w[0].origin.offset == 10);
    CHECK(w[1].label == WindowLabel::Spare);
    CHECK(w[1].origin.offset == 20);

    auto exact = label_cipher_trace(t, 5, 10, 10);
    REQUIRE(exact.size() == 1);
    CHECK(exact[0].label == WindowLabel::Start);

    auto three = label_cipher_trace(t, 7, 30, 10);
    REQUIRE(three.size() == 3);
    CHECK(three[1].origin.offset == 17);
    CHECK(three[2].origin.offset == 27);
    CHECK(three[2].samples.front() == 27.0f);
    CHECK(three[2].origin.trace_id == "c");

    CHECK_THROWS_AS(label_cipher_trace(t, 0, 9, 10), ArgumentError);
    CHECK_THROWS_AS(label_cipher_trace(t, 195, 10, 5), BoundsError);
}

TEST_CASE("sample_noise_windows") {
    const Trace t = ramp_trace(100, "noise");
    Rng rng(1);
    CHECK(sample_noise_windows(t, 10, 0, rng).empty());
    const Trace exact = ramp_trace(10, "n10");
    for (const auto &w : sample_noise_windows(exact, 10, 5, rng))
        CHECK(w.origin.offset == 0);
    Rng a(9), b(9);
    const auto x = sample_noise_windows(t, 10, 50, a);
    const auto y = sample_noise_windows(t, 10, 50, b);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(x[i].origin.offset == y[i].origin.offset);
        CHECK(x[i].origin.offset <= 90);
        CHECK(x[i].label == WindowLabel::Noise);
        CHECK(x[i].samples.front() == float(x[i].origin.offset));
    }
    CHECK_THROWS_AS(sample_noise_windows(exact, 11, 1, rng), ArgumentError);
}

TEST_CASE("build_dataset balances and splits") {
    const auto ct = hundred_cps();
    const Trace noise = ramp_trace(5000, "noise");
    Rng rng(3);
    const std::vector<AnnotatedTrace> cts{ct};
    const auto ds = build_dataset(cts, noise, 8, rng);
    CHECK(ds.windows.size() == 300);
    CHECK(ds.class_counts() == std::array<std::size_t, 3>{100, 100, 100});
    CHECK(ds.mean_cp_length == 80.0);
    CHECK(ds.splits.train.size() == 240);
    CHECK(ds.splits.valid.size() == 30);
    CHECK(ds.splits.test.size() == 30);
    CHECK(ds.class_counts(ds.splits.train) == std::array<std::size_t, 3>{80, 80, 80});
    CHECK(ds.class_counts(ds.splits.valid) == std::array<std::size_t, 3>{10, 10, 10});
    CHECK(ds.class_counts(ds.splits.test) == std::array<std::size_t, 3>{10, 10, 10});

    std::set<std::size_t> all;
    for (auto *s : {&ds.splits.train, &ds.splits.valid, &ds.splits.test})
        for (auto i : *s)
            CHECK(all.insert(i).second);
    CHECK(all.size() == ds.windows.size());

    // Start / Spare windows stay inside their CP
    for (const auto &w : ds.windows) {
        CHECK(w.samples.size() == 8);
        if (w.label == WindowLabel::Noise)
            continue;
        const auto &gt = ct.truth;
        auto it = std::upper_bound(gt.cp_starts.begin(), gt.cp_starts.end(), w.origin.offset);
        REQUIRE(it != gt.cp_starts.begin());
        const std::size_t k = std::size_t(it - gt.cp_starts.begin()) - 1;
        CHECK(w.origin.offset + 8 <= gt.cp_starts[k] + gt.cp_lengths[k]);
        if (w.label == WindowLabel::Start)
            CHECK(w.origin.offset == gt.cp_starts[k]);
    }
}

TEST_CASE("build_dataset stratification property over sizes") {
    const Trace noise = ramp_trace(3000, "noise");
    for (std::size_t cps : {1u, 2u, 3u, 7u, 11u, 29u, 64u}) {
        GroundTruth gt;
        for (std::size_t i = 0; i < cps; ++i) {
            gt.cp_starts.push_back(10 + i * 50);
            gt.cp_lengths.push_back(40);
        }
        const std::vector<AnnotatedTrace> cts{{ramp_trace(10 + cps * 50, "c"), gt}};
        Rng rng(cps);
        const auto ds = build_dataset(cts, noise, 10, rng);
        const double total = double(ds.windows.size());
        for (auto *s : {&ds.splits.train, &ds.splits.valid, &ds.splits.test}) {
            const auto c = ds.class_counts(*s);
            const auto [mn, mx] = std::minmax_element(c.begin(), c.end());
            CHECK(*mx - *mn <= 1);
        }
        CHECK(std::abs(double(ds.splits.train.size()) - 0.8 * total) <= 3.0);
        CHECK(std::abs(double(ds.splits.valid.size()) - 0.1 * total) <= 3.0);
    }
}

TEST_CASE("build_dataset is deterministic") {
    const auto ct = hundred_cps();
    const Trace noise = ramp_trace(5000, "noise");
    const std::vector<AnnotatedTrace> cts{ct};
    Rng a(77), b(77);
    const auto x = build_dataset(cts, noise, 8, a);
    const auto y = build_dataset(cts, noise, 8, b);
    REQUIRE(x.windows.size() == y.windows.size());
    for (std::size_t i = 0; i < x.windows.size(); ++i) {
        CHECK(x.windows[i].origin.offset == y.windows[i].origin.offset);
        CHECK(x.windows[i].label == y.windows[i].label);
    }
    CHECK(x.splits.train == y.splits.train);
    CHECK(x.splits.test == y.splits.test);
}

TEST_CASE("build_dataset errors") {
    const Trace noise = ramp_trace(100, "noise");
    Rng rng(1);
    CHECK_THROWS_AS(build_dataset({}, noise, 8, rng), ArgumentError);
    const std::vector<AnnotatedTrace> empty_gt{{ramp_trace(100, "c"), {}}};
    CHECK_THROWS_AS(build_dataset(empty_gt, noise, 8, rng), ArgumentError);
    const auto ct = hundred_cps();
    const Trace short_noise = ramp_trace(4, "s");
    const std::vector<AnnotatedTrace> cts{ct};
    CHECK_THROWS_AS(build_dataset(cts, short_noise, 8, rng), ArgumentError);
}

TEST_CASE("wds-v1 round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "houndkit_test_wds";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto ct = hundred_cps();
    const Trace noise = ramp_trace(5000, "noise");
    const std::vector<AnnotatedTrace> cts{ct};
    Rng rng(5);
    const auto ds = build_dataset(cts, noise, 8, rng);
    write_dataset(dir / "d", ds);
    const auto back = read_dataset(dir / "d");
    CHECK(back.n == 8);
    CHECK(back.mean_cp_length == ds.mean_cp_length);
    REQUIRE(back.windows.size() == ds.windows.size());
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        CHECK(back.windows[i].samples == ds.windows[i].samples);
        CHECK(back.windows[i].label == ds.windows[i].label);
        CHECK(back.windows[i].origin.offset == ds.windows[i].origin.offset);
        CHECK(back.windows[i].origin.trace_id == ds.windows[i].origin.trace_id);
    }
    CHECK(back.splits.train == ds.splits.train);
    CHECK(back.splits.valid == ds.splits.valid);
    CHECK(back.splits.test == ds.splits.test);

    write_text(dir / "d.json", R"({"format":"wds-v0"})");
    CHECK_THROWS_AS(read_dataset(dir / "d"), FormatError);
}
