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

#include "houndkit/error.hpp"
#include "houndkit/locator.hpp"
#include "houndkit/trace_io.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

using namespace houndkit;
using namespace houndkit::locator;

namespace {

using Classes = std::vector<std::uint8_t>;

Classes runs(std::initializer_list<std::pair<std::uint8_t, std::size_t>> spec) {
    Classes out;
    for (auto [c, n] : spec)
        out.insert(out.end(), n, c);
    return out;
}

SegmentationTrack track(Classes c, std::size_t s) {
    SegmentationTrack t;
    t.classes = std::move(c);
    t.stride = s;
    t.n = 8;
    t.trace_id = "t";
    return t;
}

// Noise, then CP-like runs (a short 0 run and a longer 1 run) with the odd
// misclassified blip, then noise again.
Classes random_track(std::mt19937_64 &rng, std::size_t pad) {
    Classes c(pad, 2);
    const std::size_t cps = rng() % 6;
    for (std::size_t i = 0; i < cps; ++i) {
        c.insert(c.end(), 1 + rng() % 6, 0);
        c.insert(c.end(), 10 + rng() % 50, 1);
        c.insert(c.end(), rng() % 40, 2);
    }
    for (auto &x : c)
        if (rng() % 50 == 0)
            x = std::uint8_t(rng() % 3);
    c.insert(c.end(), pad, 2);
    for (std::size_t i = 0; i < pad; ++i)
        c[i] = 2;
    return c;
}

} // namespace

TEST_CASE("sliding_windows") {
    CHECK(sliding_windows(100, 10, 10).size() == 10);
    CHECK(sliding_windows(100, 10, 10).back() == 90);
    CHECK(sliding_windows(10, 10, 3) == std::vector<std::size_t>{0});
    CHECK(sliding_windows(100, 10, 62).size() == 2);
    for (std::size_t len : {10u, 11u, 57u, 300u})
        for (std::size_t s : {1u, 2u, 7u})
            CHECK(sliding_windows(len, 10, s).size() == (len - 10) / s + 1);
    CHECK_THROWS_AS(sliding_windows(9, 10, 1), ArgumentError);
    CHECK_THROWS_AS(sliding_windows(100, 10, 0), ArgumentError);
}

TEST_CASE("majority_filter examples") {
    CHECK(majority_filter(Classes{0, 0, 1, 0, 0}, 3) == Classes{0, 0, 0, 0, 0});
    const Classes any{2, 0, 1, 1, 0, 2, 2};
    CHECK(majority_filter(any, 1) == any);
    CHECK(majority_filter(Classes{2, 2, 2, 0, 0, 0}, 3) == Classes{2, 2, 2, 0, 0, 0});
    // shrunken edge window [1, 0] ties: smallest class wins
    CHECK(majority_filter(Classes{1, 0, 2}, 3) == Classes{0, 0, 0});
    CHECK_THROWS_AS(majority_filter(any, 2), ArgumentError);
    CHECK_THROWS_AS(majority_filter(any, 0), ArgumentError);
}

TEST_CASE("extract_starts examples") {
    CHECK(extract_starts(Classes{2, 0, 0, 1, 0}, 10) == std::vector<std::size_t>{10, 40});
    CHECK(extract_starts(Classes{0, 0, 0}, 5).empty());
    CHECK(extract_starts(Classes{1, 0}, 62) == std::vector<std::size_t>{62});
}

TEST_CASE("next_kernel and refine") {
    CHECK(next_kernel(150) == 75);
    CHECK(next_kernel(3) == 1);
    CHECK(next_kernel(1) == 0);
    CHECK(next_kernel(15) == 7);
    CHECK(next_kernel(9) == 3);

    const std::vector<std::size_t> wide{0, 500};
    auto r = refine(15, 100.0, wide, 10);
    CHECK(r.k == 7);
    CHECK(r.min_cp == 100.0);
    REQUIRE(r.subsegments.size() == 1);
    CHECK(r.subsegments[0] == std::pair<std::size_t, std::size_t>{0, 50});

    const std::vector<std::size_t> tight{0, 100, 200, 300};
    r = refine(5, 1000.0, tight, 1);
    CHECK(r.min_cp == 100.0);
    CHECK(r.subsegments.empty());

    // gap of exactly 2 minCP is not enough
    const std::vector<std::size_t> edge{0, 100, 300};
    CHECK(refine(3, 1e9, edge, 1).subsegments.empty());
}

TEST_CASE("screen: clean track") {
    const auto t = track(runs({{2, 20}, {0, 5}, {1, 45}, {2, 20}, {0, 5}, {1, 45}, {2, 10}}), 50);
    ScreenStats st;
    const auto loc = screen(t, {5, 2500.0, 50}, &st);
    CHECK(loc.starts == std::vector<std::size_t>{1000, 4500});
    CHECK(st.merge_min_cp == 2500.0);
}

TEST_CASE("screen: degenerate tracks") {
    CHECK(screen(track(Classes(100, 2), 3), {7, 50.0, 3}).starts.empty());
    auto blip = Classes(60, 2);
    blip[30] = 0;
    CHECK(screen(track(blip, 1), {3, 10.0, 1}).starts.empty());
    CHECK(screen(track(blip, 1), {1, 10.0, 1}).starts == std::vector<std::size_t>{30});
    CHECK_THROWS_AS(screen(track(blip, 1), {4, 10.0, 1}), ConfigError);
    CHECK_THROWS_AS(screen(track(blip, 1), {3, 0.5, 1}), ConfigError);
    CHECK_THROWS_AS(screen(track({}, 1), {3, 10.0, 1}), ArgumentError);
}

TEST_CASE("screen: refinement recovers a CP hidden by a wide kernel") {
    // the width-2 start marker at 108 is erased by k = 9 but not by k = 3
    const auto c = runs({{2, 30}, {0, 8}, {1, 20}, {2, 50}, {0, 2}, {1, 20}, {2, 20},
                         {0, 8}, {1, 20}, {2, 30}});
    ScreenStats st;
    const auto loc = screen(track(c, 1), {9, 30.0, 1}, &st);
    CHECK(loc.starts == std::vector<std::size_t>{30, 108, 150});
    CHECK(st.iterations == 2);
    CHECK(st.merge_min_cp == 30.0);
    CHECK(majority_filter(c, 9)[108] == 2);
}

TEST_CASE("screen oracle: all short tracks") {
    const auto r = testing::screen_oracle_sweep(9, {1, 3, 5});
    CHECK(r.cases > 0);
    CHECK(r.mismatches == 0);
}

TEST_CASE("screen properties on random tracks") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t k0 = 2 * (rng() % 8) + 1;
        const std::size_t s = 1 + rng() % 64;
        const double avg = double(s) * double(5 + rng() % 60);
        const auto c = random_track(rng, k0 + rng() % 5);
        ScreenStats st;
        const auto loc = screen(track(c, s), {k0, avg, s}, &st);
        CAPTURE(trial, k0, s, avg);

        for (std::size_t i = 0; i < loc.starts.size(); ++i) {
            CHECK(loc.starts[i] % s == 0);
            CHECK(loc.starts[i] / s < c.size());
            if (i)
                CHECK(loc.starts[i] > loc.starts[i - 1]);
        }
        CHECK(st.iterations <= std::size_t(std::ceil(std::log2(double(k0)))) + 1);

        // padding with pure noise shifts the answer and changes nothing else
        const std::size_t pad = 1 + rng() % 40;
        Classes padded(pad, 2);
        padded.insert(padded.end(), c.begin(), c.end());
        padded.insert(padded.end(), pad + rng() % 7, 2);
        const auto moved = screen(track(padded, s), {k0, avg, s});
        REQUIRE(moved.starts.size() == loc.starts.size());
        for (std::size_t i = 0; i < loc.starts.size(); ++i)
            CHECK(moved.starts[i] == loc.starts[i] + pad * s);

        CHECK(screen(track(c, s), {k0, avg, s}).starts == loc.starts);
    }
}

TEST_CASE("align") {
    const Trace t({1, 2, 3, 4, 5}, 1.0, "a");
    const std::vector<std::size_t> whole{0};
    CHECK(align(t, whole, 5)[0] == std::vector<float>{1, 2, 3, 4, 5});
    const std::vector<std::size_t> tail{3};
    CHECK(align(t, tail, 4)[0] == std::vector<float>{4, 5, 0, 0});
    const std::vector<std::size_t> five{4, 0, 1, 3, 2};
    const auto chunks = align(t, five, 1);
    REQUIRE(chunks.size() == 5);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(chunks[i][0] == float(five[i] + 1));
    const std::vector<std::size_t> beyond{5};
    CHECK_THROWS_AS(align(t, beyond, 1), ArgumentError);
    CHECK_THROWS_AS(align(t, whole, 0), ArgumentError);
}

TEST_CASE("loc-v1 round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "houndkit_test_loc";
    std::filesystem::create_directories(dir);
    const LocationsFile loc{"tr", 256, 8, 1234.5, {8, 4096, 123456}};
    write_locations(dir / "l.json", loc);
    const auto back = read_locations(dir / "l.json");
    CHECK(back.trace_id == "tr");
    CHECK(back.n == 256);
    CHECK(back.s == 8);
    CHECK(back.avg_cp == 1234.5);
    CHECK(back.starts == loc.starts);
    write_text(dir / "bad.json", R"({"format":"loc-v0"})");
    CHECK_THROWS_AS(read_locations(dir / "bad.json"), FormatError);
    write_text(dir / "bad.json", "not json");
    CHECK_THROWS_AS(read_locations(dir / "bad.json"), FormatError);
}

TEST_CASE("classify_track") {
    cnn::ModelConfig cfg;
    cfg.input_len = 32;
    const cnn::Model m(cfg, 4);
    std::mt19937_64 rng(6);
    std::normal_distribution<float> d;
    std::vector<float> x(3000);
    for (auto &v : x)
        v = d(rng);
    const Trace t(x, 1.0, "rand");
    const auto one = classify_track(m, t, 32, 3, 1);
    const auto three = classify_track(m, t, 32, 3, 3);
    CHECK(one.classes.size() == sliding_windows(3000, 32, 3).size());
    CHECK(one.classes == three.classes);
    CHECK(one.stride == 3);
    CHECK(one.trace_id == "rand");
    for (std::size_t i : {0u, 100u, 988u}) {
        const std::vector<std::vector<float>> w{
            std::vector<float>(x.begin() + std::ptrdiff_t(3 * i), x.begin() + std::ptrdiff_t(3 * i + 32))};
        CHECK(cnn::predict_batch(m, w).classes[0] == one.classes[i]);
    }
    CHECK_THROWS_AS(classify_track(m, t, 31, 3, 1), ShapeError);

    const auto csv = segmentation_csv(one);
    CHECK(csv.starts_with("window_index,offset,class\n"));
    CHECK(csv.find("\n1,3,") != std::string::npos);
    const std::vector<std::size_t> starts{30};
    CHECK(render_svg(t, one, starts, starts).starts_with("<svg"));
}
