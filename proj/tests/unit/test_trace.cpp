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
#include "houndkit/hashing.hpp"
#include "houndkit/trace.hpp"
#include "houndkit/trace_io.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

using namespace houndkit;
using Catch::Approx;

namespace {

Trace make_trace(std::vector<float> v, std::string id = "t") {
    return Trace(std::move(v), 1e6, std::move(id));
}

std::filesystem::path temp_dir(const std::string &name) {
    auto p = std::filesystem::temp_directory_path() / ("houndkit_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("trace rejects empty, non-finite and bad rates") {
    CHECK_THROWS_AS(Trace({}, 1.0, "x"), ArgumentError);
    CHECK_THROWS_AS(Trace({1.0f, std::numeric_limits<float>::quiet_NaN()}, 1.0, "x"),
                    ArgumentError);
    CHECK_THROWS_AS(Trace({1.0f, std::numeric_limits<float>::infinity()}, 1.0, "x"),
                    ArgumentError);
    CHECK_THROWS_AS(Trace({1.0f}, 0.0, "x"), ArgumentError);
    CHECK_THROWS_AS(Trace({1.0f}, -5.0, "x"), ArgumentError);
    const Trace t({1.0f, 2.0f}, 125e6, "abc");
    CHECK(t.size() == 2);
    CHECK(t.id() == "abc");
    CHECK(t.sample_rate_hz() == 125e6);
}

TEST_CASE("ground truth validation") {
    GroundTruth ok{{0, 10, 30}, {10, 5, 5}};
    CHECK_NOTHROW(ok.validate());
    CHECK_NOTHROW(ok.validate(35));
    CHECK_THROWS_AS(ok.validate(34), ArgumentError);
    GroundTruth overlap{{0, 5}, {6, 2}};
    CHECK_THROWS_AS(overlap.validate(), ArgumentError);
    GroundTruth unsorted{{10, 5}, {1, 1}};
    CHECK_THROWS_AS(unsorted.validate(), ArgumentError);
    GroundTruth zero_len{{1}, {0}};
    CHECK_THROWS_AS(zero_len.validate(), ArgumentError);
    GroundTruth ragged{{1, 2}, {1}};
    CHECK_THROWS_AS(ragged.validate(), ArgumentError);
}

TEST_CASE("window labels keep their integer codes") {
    CHECK(int(WindowLabel::Start) == 0);
    CHECK(int(WindowLabel::Spare) == 1);
    CHECK(int(WindowLabel::Noise) == 2);
    CHECK(kNumClasses == 3);
}

TEST_CASE("extract_window slices") {
    const Trace t = make_trace({1, 2, 3, 4, 5});
    auto w = extract_window(t, 1, 3);
    CHECK(std::vector<float>(w.begin(), w.end()) == std::vector<float>{2, 3, 4});
    auto all = extract_window(t, 0, 5);
    CHECK(all.size() == 5);
    CHECK(all.data() == t.samples().data());
}

TEST_CASE("extract_window bounds error names trace and offset") {
    const Trace t = make_trace(std::vector<float>(100, 0.0f), "probe-7");
    try {
        extract_window(t, 95, 10);
        FAIL("expected BoundsError");
    } catch (const BoundsError &e) {
        const std::string msg = e.what();
        CHECK(msg.find("probe-7") != std::string::npos);
        CHECK(msg.find("95") != std::string::npos);
    }
    CHECK_THROWS_AS(extract_window(t, 101, 0), BoundsError);
}

TEST_CASE("non-overlapping windows reconstruct the trace prefix") {
    std::mt19937_64 rng(3);
    std::normal_distribution<float> nd;
    for (std::size_t len : {7u, 64u, 100u, 257u}) {
        std::vector<float> v(len);
        for (auto &x : v)
            x = nd(rng);
        const Trace t = make_trace(v);
        for (std::size_t n : {1u, 3u, 7u}) {
            std::vector<float> joined;
            for (std::size_t off = 0; off + n <= len; off += n) {
                auto w = extract_window(t, off, n);
                joined.insert(joined.end(), w.begin(), w.end());
            }
            REQUIRE(joined.size() == (len / n) * n);
            CHECK(std::equal(joined.begin(), joined.end(), v.begin()));
        }
    }
}

TEST_CASE("standardize_window examples") {
    CHECK(standardize_window(std::vector<double>{1, 1, 1, 1}) == std::vector<double>{0, 0, 0, 0});
    auto s = standardize_window(std::vector<double>{0, 2});
    CHECK(s[0] == Approx(-1.0).margin(1e-15));
    CHECK(s[1] == Approx(1.0).margin(1e-15));
    CHECK_THROWS_AS(standardize_window(std::vector<double>{1.0}), ArgumentError);
    CHECK_THROWS_AS(standardize_window(std::vector<double>{}), ArgumentError);
}

TEST_CASE("standardize_window moments and idempotence (property)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> scale(1e-6, 1e3), shift(-1e3, 1e3);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng() % 300;
        const double a = scale(rng), b = shift(rng);
        std::vector<double> w(n);
        for (auto &x : w)
            x = b + a * nd(rng);
        const auto s = standardize_window(w);
        double mean = 0, var = 0;
        for (double x : s)
            mean += x;
        mean /= double(n);
        for (double x : s)
            var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / double(n));
        // rounding of x ~ b is amplified by 1/a after centring
        const double tol = 1e-12 + 1e-14 * std::abs(b) / a;
        CHECK(std::abs(mean) < tol);
        CHECK(std::abs(sd - 1.0) < tol);
        const auto s2 = standardize_window(s);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(s2[i] - s[i]) < tol * (1.0 + std::abs(s[i])));
    }
}

TEST_CASE("single-precision standardization agrees with the double version") {
    std::mt19937_64 rng(5);
    std::normal_distribution<float> nd(0.4f, 0.2f);
    std::vector<float> w(256);
    for (auto &x : w)
        x = nd(rng);
    const auto ref = standardize_window(std::span<const float>(w));
    std::vector<float> out(w.size());
    standardize_into(w, out);
    for (std::size_t i = 0; i < w.size(); ++i)
        CHECK(out[i] == Approx(ref[i]).margin(1e-5));
    std::vector<float> flat(16, 0.3f), zeros(16, 1.0f);
    standardize_into(flat, zeros);
    for (float z : zeros)
        CHECK(z == 0.0f);
}

TEST_CASE("trc-v1 round trip with and without ground truth") {
    const auto dir = temp_dir("trc");
    const Trace t({0.5f, -1.25f, 3.0f, 1e-7f, -0.0f}, 125e6, "rt");
    const GroundTruth gt{{1, 3}, {2, 1}};
    write_trace(dir / "a", t, &gt);
    auto back = read_trace(dir / "a");
    CHECK(back.trace.id() == "rt");
    CHECK(back.trace.sample_rate_hz() == 125e6);
    CHECK(std::equal(t.samples().begin(), t.samples().end(), back.trace.samples().begin()));
    REQUIRE(back.truth);
    CHECK(back.truth->cp_starts == gt.cp_starts);
    CHECK(back.truth->cp_lengths == gt.cp_lengths);

    write_trace(dir / "b.v1", t);
    auto nogt = read_trace(dir / "b.v1");
    CHECK_FALSE(nogt.truth);
    CHECK(std::filesystem::exists(dir / "b.v1.f32"));

    // little-endian on disk
    std::ifstream f(dir / "a.f32", std::ios::binary);
    unsigned char bytes[4];
    f.read(reinterpret_cast<char *>(bytes), 4);
    CHECK(bytes[0] == 0x00);
    CHECK(bytes[1] == 0x00);
    CHECK(bytes[2] == 0x00);
    CHECK(bytes[3] == 0x3f); // 0.5f
}

TEST_CASE("trc-v1 reader rejects wrong formats") {
    const auto dir = temp_dir("trc_bad");
    const Trace t({1.0f, 2.0f}, 1.0, "x");
    write_trace(dir / "a", t);
    write_text(dir / "a.json", R"({"format":"trc-v2","sample_rate_hz":1,"id":"x","length":2})");
    CHECK_THROWS_AS(read_trace(dir / "a"), FormatError);
    write_text(dir / "a.json", "{not json");
    CHECK_THROWS_AS(read_trace(dir / "a"), FormatError);
    write_text(dir / "a.json",
               R"({"format":"trc-v1","sample_rate_hz":1,"id":"x","length":2,)"
               R"("ground_truth":{"cp_starts":[1],"cp_lengths":[5]}})");
    CHECK_THROWS_AS(read_trace(dir / "a"), FormatError);
    CHECK_THROWS_AS(read_trace(dir / "missing"), IoError);
}

TEST_CASE("sha256 known answers") {
    const std::string empty;
    CHECK(sha256_hex(empty) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    CHECK(sha256_hex(abc) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = temp_dir("sha");
    write_text(dir / "f.txt", "abc");
    CHECK(sha256_file(dir / "f.txt") == sha256_hex(abc));
}
