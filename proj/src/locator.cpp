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

#include "houndkit/locator.hpp"

#include "houndkit/error.hpp"
#include "houndkit/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

namespace houndkit::locator {

using nlohmann::json;

std::vector<std::size_t> sliding_windows(std::size_t trace_len, std::size_t n,
                                         std::size_t s) {
    if (n == 0 || s == 0)
        throw ArgumentError("sliding_windows: n and s must be positive");
    if (n > trace_len)
        throw ArgumentError("sliding_windows: window of " + std::to_string(n) +
                            " samples exceeds trace length " + std::to_string(trace_len));
    std::vector<std::size_t> out((trace_len - n) / s + 1);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = i * s;
    return out;
}

void SegmentationTrack::validate() const {
    if (classes.empty())
        throw ArgumentError("segmentation: empty track");
    if (stride == 0)
        throw ArgumentError("segmentation: stride must be positive");
    for (auto c : classes)
        if (c >= kNumClasses)
            throw ArgumentError("segmentation: class code " + std::to_string(int(c)) +
                                " outside {0,1,2}");
}

SegmentationTrack classify_track(const cnn::Model &model, const Trace &trace,
                                 std::size_t n, std::size_t s, std::size_t threads) {
    if (model.config().input_len != n)
        throw ShapeError("stem.conv: model input_len " +
                         std::to_string(model.config().input_len) + " differs from n " +
                         std::to_string(n));
    const auto offsets = sliding_windows(trace.size(), n, s);
    constexpr std::size_t kChunk = 16;
    const std::size_t chunks = (offsets.size() + kChunk - 1) / kChunk;

    SegmentationTrack seg;
    seg.classes.assign(offsets.size(), 0);
    seg.stride = s;
    seg.n = n;
    seg.trace_id = trace.id();

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        std::vector<float> buf;
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks)
                return;
            const std::size_t first = c * kChunk;
            const std::size_t count = std::min(kChunk, offsets.size() - first);
            buf.assign(count * n, 0.0f);
            try {
                for (std::size_t i = 0; i < count; ++i)
                    standardize_into(extract_window(trace, offsets[first + i], n),
                                     std::span<float>(buf).subspan(i * n, n));
                auto p = cnn::predict_proba<float>(model, buf, count);
                for (std::size_t i = 0; i < count; ++i)
                    seg.classes[first + i] = std::uint8_t(cnn::argmax_row(p.row(i)));
            } catch (...) {
                std::lock_guard lk(failure_mu);
                if (!failure)
                    failure = std::current_exception();
                return;
            }
        }
    };
    const std::size_t nthreads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(chunks, 1));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);
    return seg;
}

std::vector<std::uint8_t> majority_filter(std::span<const std::uint8_t> seg,
                                          std::size_t k) {
    if (k == 0 || k % 2 == 0)
        throw ArgumentError("majority_filter: kernel " + std::to_string(k) +
                            " must be odd and positive");
    const std::size_t len = seg.size();
    // prefix[i][c]: occurrences of c in seg[0, i)
    std::vector<std::array<std::uint32_t, kNumClasses>> prefix(len + 1, {0, 0, 0});
    for (std::size_t i = 0; i < len; ++i) {
        if (seg[i] >= kNumClasses)
            throw ArgumentError("majority_filter: class code outside {0,1,2}");
        prefix[i + 1] = prefix[i];
        ++prefix[i + 1][seg[i]];
    }
    const std::size_t half = k / 2;
    std::vector<std::uint8_t> out(len);
    for (std::size_t i = 0; i < len; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(len, i + half + 1);
        std::uint8_t best = 0;
        std::uint32_t best_count = 0;
        for (std::uint8_t c = 0; c < kNumClasses; ++c) {
            const std::uint32_t cnt = prefix[hi][c] - prefix[lo][c];
            if (cnt > best_count) {
                best = c;
                best_count = cnt;
            }
        }
        out[i] = best;
    }
    return out;
}

std::vector<std::size_t> extract_starts(std::span<const std::uint8_t> seg, std::size_t s) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < seg.size(); ++i)
        if (seg[i] == 0 && seg[i - 1] != 0)
            out.push_back(i * s);
    return out;
}

std::size_t next_kernel(std::size_t k) {
    std::size_t kk = k / 2;
    if (kk % 2 == 0 && kk > 1)
        --kk;
    return kk;
}

RefineResult refine(std::size_t k, double avg_cp, std::span<const std::size_t> starts,
                    std::size_t s) {
    if (s == 0)
        throw ArgumentError("refine: stride must be positive");
    RefineResult r;
    r.k = next_kernel(k);
    r.min_cp = avg_cp;
    for (std::size_t i = 1; i < starts.size(); ++i)
        r.min_cp = std::min(r.min_cp, double(starts[i] - starts[i - 1]));
    for (std::size_t i = 1; i < starts.size(); ++i)
        if (double(starts[i] - starts[i - 1]) > 2.0 * r.min_cp)
            r.subsegments.emplace_back(starts[i - 1] / s, starts[i] / s);
    return r;
}

void ScreenConfig::validate() const {
    if (k0 < 1 || k0 % 2 == 0)
        throw ConfigError("screen: k0 must be odd and positive");
    if (!(avg_cp >= 1.0) || !std::isfinite(avg_cp))
        throw ConfigError("screen: avg_cp must be at least 1");
    if (s < 1)
        throw ConfigError("screen: stride must be positive");
}

CpLocations screen(const SegmentationTrack &seg, const ScreenConfig &cfg,
                   ScreenStats *stats) {
    cfg.validate();
    seg.validate();
    const std::span<const std::uint8_t> all(seg.classes);
    std::vector<std::size_t> found;
    std::vector<std::pair<std::size_t, std::size_t>> queue{{0, all.size()}};
    std::size_t k = cfg.k0;
    std::size_t iterations = 0;
    double merge_min_cp = cfg.avg_cp;
    while (!queue.empty() && k >= 1) {
        ++iterations;
        std::vector<std::pair<std::size_t, std::size_t>> next_queue;
        std::size_t next_k = next_kernel(k);
        for (const auto &[begin, end] : queue) {
            const auto polished = majority_filter(all.subspan(begin, end - begin), k);
            auto starts = extract_starts(polished, cfg.s);
            for (auto &st : starts)
                st += begin * cfg.s;
            const RefineResult r = refine(k, cfg.avg_cp, starts, cfg.s);
            if (iterations == 1)
                merge_min_cp = r.min_cp;
            next_queue.insert(next_queue.end(), r.subsegments.begin(), r.subsegments.end());
            found.insert(found.end(), starts.begin(), starts.end());
        }
        queue = std::move(next_queue);
        k = next_k;
    }
    std::sort(found.begin(), found.end());
    CpLocations loc;
    for (auto st : found)
        if (loc.starts.empty() || double(st - loc.starts.back()) >= merge_min_cp / 2.0)
            loc.starts.push_back(st);
    if (stats)
        *stats = {iterations, found.size(), merge_min_cp};
    return loc;
}

std::vector<std::vector<float>> align(const Trace &trace, std::span<const std::size_t> starts,
                                      std::size_t chunk_len) {
    if (chunk_len == 0)
        throw ArgumentError("align: chunk_len must be positive");
    const auto samples = trace.samples();
    std::vector<std::vector<float>> chunks;
    chunks.reserve(starts.size());
    for (auto st : starts) {
        if (st >= samples.size())
            throw ArgumentError("align: start " + std::to_string(st) + " beyond trace '" +
                                trace.id() + "'");
        std::vector<float> c(chunk_len, 0.0f);
        const std::size_t avail = std::min(chunk_len, samples.size() - st);
        std::copy_n(samples.begin() + std::ptrdiff_t(st), avail, c.begin());
        chunks.push_back(std::move(c));
    }
    return chunks;
}

void write_locations(const std::filesystem::path &path, const LocationsFile &loc) {
    json j;
    j["format"] = kLocationsFormat;
    j["trace_id"] = loc.trace_id;
    j["n"] = loc.n;
    j["s"] = loc.s;
    j["avg_cp"] = loc.avg_cp;
    j["starts"] = loc.starts;
    write_text(path, j.dump() + "\n");
}

LocationsFile read_locations(const std::filesystem::path &path) {
    try {
        const json j = json::parse(read_text(path));
        if (j.at("format").get<std::string>() != kLocationsFormat)
            throw FormatError(path.string() + ": expected format " + kLocationsFormat);
        LocationsFile loc;
        loc.trace_id = j.at("trace_id");
        loc.n = j.at("n");
        loc.s = j.at("s");
        loc.avg_cp = j.value("avg_cp", 0.0);
        loc.starts = j.at("starts").get<std::vector<std::size_t>>();
        for (std::size_t i = 1; i < loc.starts.size(); ++i)
            if (loc.starts[i] <= loc.starts[i - 1])
                throw FormatError(path.string() + ": starts not strictly increasing");
        return loc;
    } catch (const json::exception &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string segmentation_csv(const SegmentationTrack &seg) {
    std::ostringstream os;
    os << "window_index,offset,class\n";
    for (std::size_t i = 0; i < seg.classes.size(); ++i)
        os << i << ',' << i * seg.stride << ',' << int(seg.classes[i]) << '\n';
    return os.str();
}

std::string render_svg(const Trace &trace, const SegmentationTrack &seg,
                       std::span<const std::size_t> starts,
                       std::span<const std::size_t> true_starts) {
    constexpr int kWidth = 1600, kTraceH = 240, kBandH = 24, kPad = 10;
    const auto x = trace.samples();
    const std::size_t len = x.size();
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it, hi = *hi_it > *lo_it ? *hi_it : *lo_it + 1.0;
    auto xpos = [&](double sample) { return kPad + sample / double(len) * (kWidth - 2 * kPad); };
    auto ypos = [&](double v) { return kPad + (hi - v) / (hi - lo) * kTraceH; };

    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    const int height = kTraceH + kBandH + 3 * kPad;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << height << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const char *colours[kNumClasses] = {"#d62728", "#1f77b4", "#bbbbbb"};
    const double band_y = kTraceH + 2 * kPad;
    for (std::size_t i = 0; i < seg.classes.size();) {
        std::size_t j = i;
        while (j < seg.classes.size() && seg.classes[j] == seg.classes[i])
            ++j;
        const double a = xpos(double(i * seg.stride));
        const double b = xpos(double(std::min(len, j * seg.stride)));
        os << "<rect x=\"" << a << "\" y=\"" << band_y << "\" width=\"" << std::max(b - a, 0.5)
           << "\" height=\"" << kBandH << "\" fill=\"" << colours[seg.classes[i]] << "\"/>\n";
        i = j;
    }

    // min/max envelope per pixel column
    const std::size_t cols = kWidth - 2 * kPad;
    os << "<path fill=\"none\" stroke=\"black\" stroke-width=\"0.6\" d=\"";
    for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t a = c * len / cols, b = std::max(a + 1, (c + 1) * len / cols);
        if (a >= len)
            break;
        const auto [mn, mx] = std::minmax_element(x.begin() + std::ptrdiff_t(a),
                                                  x.begin() + std::ptrdiff_t(std::min(b, len)));
        os << (c ? " L" : "M") << xpos(double(a)) << ' ' << ypos(*mx) << " L"
           << xpos(double(a)) << ' ' << ypos(*mn);
    }
    os << "\"/>\n";
    for (auto t : true_starts)
        os << "<line x1=\"" << xpos(double(t)) << "\" x2=\"" << xpos(double(t)) << "\" y1=\""
           << kPad << "\" y2=\"" << kPad + kTraceH
           << "\" stroke=\"#2ca02c\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n";
    for (auto st : starts)
        os << "<line x1=\"" << xpos(double(st)) << "\" x2=\"" << xpos(double(st)) << "\" y1=\""
           << kPad << "\" y2=\"" << band_y + kBandH << "\" stroke=\"#d62728\" stroke-width=\"1\"/>\n";
    os << "</svg>\n";
    return os.str();
}

} // namespace houndkit::locator
