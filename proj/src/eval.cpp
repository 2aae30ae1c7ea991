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

#include "houndkit/eval.hpp"

#include "houndkit/cnn/train.hpp"
#include "houndkit/error.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

namespace houndkit::eval {

using nlohmann::json;

double iou(std::size_t pred_start, std::size_t gt_start, std::size_t gt_len) {
    if (gt_len < 1)
        throw ArgumentError("iou: gt_len must be at least 1");
    const std::size_t d = pred_start > gt_start ? pred_start - gt_start : gt_start - pred_start;
    if (d >= gt_len)
        return 0.0;
    return double(gt_len - d) / double(gt_len + d);
}

IoUReport summarize_iou(std::vector<double> values) {
    IoUReport r;
    r.per_cp_iou = std::move(values);
    if (r.per_cp_iou.empty())
        return r;
    const double n = double(r.per_cp_iou.size());
    r.mean = std::accumulate(r.per_cp_iou.begin(), r.per_cp_iou.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : r.per_cp_iou)
        ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / n);
    return r;
}

LocationScore score_locations(std::span<const std::size_t> pred, const GroundTruth &gt,
                              double tolerance) {
    if (gt.empty())
        throw ArgumentError("score_locations: ground truth is empty");
    if (!(tolerance >= 0.0))
        throw ArgumentError("score_locations: tolerance must be non-negative");
    gt.validate();
    const std::size_t ng = gt.size();
    auto dist = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };

    LocationScore sc;
    sc.hits.tolerance = tolerance;
    sc.hits.predictions = pred.size();
    sc.hits.ground_truth = ng;
    sc.hits.detection_ratio = double(pred.size()) / double(ng);

    // candidate pairs within tolerance; ground truth is sorted, so only a
    // window of CPs around each prediction needs checking
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> pairs; // d, pred, gt
    std::vector<bool> near(ng, false);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double lo = double(pred[i]) - tolerance;
        auto it = std::lower_bound(gt.cp_starts.begin(), gt.cp_starts.end(), lo,
                                   [](std::size_t v, double x) { return double(v) < x; });
        for (auto j = std::size_t(it - gt.cp_starts.begin()); j < ng; ++j) {
            const std::size_t d = dist(pred[i], gt.cp_starts[j]);
            if (double(gt.cp_starts[j]) > double(pred[i]) + tolerance)
                break;
            if (double(d) <= tolerance) {
                pairs.emplace_back(d, i, j);
                near[j] = true;
            }
        }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> used_pred(pred.size(), false), used_gt(ng, false);
    sc.per_cp.resize(ng);
    for (std::size_t j = 0; j < ng; ++j) {
        sc.per_cp[j].gt_start = gt.cp_starts[j];
        sc.per_cp[j].gt_length = gt.cp_lengths[j];
    }
    for (const auto &[d, i, j] : pairs) {
        if (used_pred[i] || used_gt[j])
            continue;
        used_pred[i] = used_gt[j] = true;
        sc.per_cp[j].pred_start = pred[i];
        sc.per_cp[j].iou = iou(pred[i], gt.cp_starts[j], gt.cp_lengths[j]);
    }
    sc.hits.matched = std::size_t(std::count(near.begin(), near.end(), true));
    sc.hits.matched_rate = double(sc.hits.matched) / double(ng);
    std::vector<double> ious(ng);
    for (std::size_t j = 0; j < ng; ++j)
        ious[j] = sc.per_cp[j].iou;
    sc.iou = summarize_iou(std::move(ious));
    return sc;
}

std::size_t ConfusionMatrix::true_total(std::size_t cls) const {
    std::size_t t = 0;
    for (std::size_t p = 0; p < kNumClasses; ++p)
        t += counts[p][cls];
    return t;
}

ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> predicted,
                                 std::span<const std::uint8_t> actual) {
    if (predicted.empty() || predicted.size() != actual.size())
        throw ArgumentError("confusion_matrix: need equally long, non-empty label lists");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] >= kNumClasses || actual[i] >= kNumClasses)
            throw ArgumentError("confusion_matrix: class code outside {0,1,2}");
        ++cm.counts[predicted[i]][actual[i]];
    }
    for (std::size_t t = 0; t < kNumClasses; ++t) {
        const std::size_t total = cm.true_total(t);
        for (std::size_t p = 0; p < kNumClasses; ++p)
            cm.percent[p][t] = total ? 100.0 * double(cm.counts[p][t]) / double(total) : 0.0;
    }
    return cm;
}

ConfusionMatrix confusion_matrix(const cnn::Model &model, const dataset::WindowDataset &ds,
                                 dataset::Split split) {
    const auto &idx = ds.split(split);
    if (idx.empty())
        throw ArgumentError("confusion_matrix: split is empty");
    const auto s = cnn::score_split(model, ds, idx);
    return confusion_matrix(s.predicted, s.actual);
}

std::vector<double> normalized_xcorr(std::span<const float> trace, std::span<const float> tmpl,
                                     std::size_t threads) {
    const std::size_t m = tmpl.size(), len = trace.size();
    if (m < 2)
        throw ArgumentError("matched filter: template needs at least 2 samples");
    if (m > len)
        throw ArgumentError("matched filter: template of " + std::to_string(m) +
                            " samples is longer than the trace (" + std::to_string(len) + ")");
    double tmean = 0.0;
    for (float v : tmpl)
        tmean += v;
    tmean /= double(m);
    std::vector<float> t(m);
    double tnorm = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        t[i] = float(double(tmpl[i]) - tmean);
        tnorm += double(t[i]) * double(t[i]);
    }
    tnorm = std::sqrt(tnorm);
    const std::size_t lags = len - m + 1;
    std::vector<double> out(lags, 0.0);
    if (tnorm < 1e-12)
        return out;
    for (auto &v : t)
        v = float(double(v) / tnorm);

    std::vector<double> cs(len + 1, 0.0), cs2(len + 1, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        cs[i + 1] = cs[i] + double(trace[i]);
        cs2[i + 1] = cs2[i] + double(trace[i]) * double(trace[i]);
    }
    const Eigen::Map<const Eigen::VectorXf> tv(t.data(), Eigen::Index(m));
    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (lags + kBlock - 1) / kBlock;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= blocks)
                return;
            const std::size_t end = std::min(lags, (b + 1) * kBlock);
            for (std::size_t k = b * kBlock; k < end; ++k) {
                const double s = cs[k + m] - cs[k];
                const double s2 = cs2[k + m] - cs2[k];
                const double var = s2 - s * s / double(m);
                if (var < 1e-12)
                    continue;
                const Eigen::Map<const Eigen::VectorXf> xv(trace.data() + k, Eigen::Index(m));
                out[k] = double(xv.dot(tv)) / std::sqrt(var);
            }
        }
    };
    const std::size_t nthreads = std::clamp<std::size_t>(threads, 1, blocks);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < nthreads; ++i)
            pool.emplace_back(worker);
    }
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw ArgumentError("quantile: no values");
    if (!(q >= 0.0 && q <= 1.0))
        throw ArgumentError("quantile: q must lie in [0, 1]");
    const double pos = q * double(values.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const double frac = pos - double(lo);
    std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(lo), values.end());
    const double a = values[lo];
    if (frac == 0.0 || lo + 1 >= values.size())
        return a;
    const double b = *std::min_element(values.begin() + std::ptrdiff_t(lo) + 1, values.end());
    return a + (b - a) * frac;
}

locator::CpLocations matched_filter_locate(const Trace &trace, std::span<const float> tmpl,
                                           const MatchedFilterConfig &cfg, std::size_t threads) {
    const auto c = normalized_xcorr(trace.samples(), tmpl, threads);
    const double th = std::max(quantile(c, cfg.quantile), cfg.floor);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i] > th)
            order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
    const std::size_t m = tmpl.size();
    std::vector<bool> suppressed(c.size(), false);
    locator::CpLocations loc;
    for (auto i : order) {
        if (suppressed[i])
            continue;
        loc.starts.push_back(i);
        const std::size_t lo = i >= m - 1 ? i - (m - 1) : 0;
        const std::size_t hi = std::min(c.size(), i + m);
        std::fill(suppressed.begin() + std::ptrdiff_t(lo), suppressed.begin() + std::ptrdiff_t(hi),
                  true);
    }
    std::sort(loc.starts.begin(), loc.starts.end());
    return loc;
}

std::string score_json(const LocationScore &score, const std::string &trace_id,
                       const std::string &method) {
    json j;
    j["trace_id"] = trace_id;
    j["method"] = method;
    j["hits"] = {{"detection_ratio", score.hits.detection_ratio},
                 {"matched_rate", score.hits.matched_rate},
                 {"tolerance", score.hits.tolerance},
                 {"predictions", score.hits.predictions},
                 {"ground_truth", score.hits.ground_truth},
                 {"matched", score.hits.matched}};
    j["iou"] = {{"mean", score.iou.mean},
                {"std", score.iou.std},
                {"per_cp", score.iou.per_cp_iou}};
    return j.dump(2) + "\n";
}

std::string score_csv(const LocationScore &score) {
    std::ostringstream os;
    os << "cp_index,gt_start,gt_length,pred_start,distance,iou\n";
    char buf[64];
    for (std::size_t j = 0; j < score.per_cp.size(); ++j) {
        const auto &m = score.per_cp[j];
        os << j << ',' << m.gt_start << ',' << m.gt_length << ',';
        if (m.pred_start) {
            const std::size_t p = *m.pred_start;
            os << p << ',' << (p > m.gt_start ? p - m.gt_start : m.gt_start - p);
        } else {
            os << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", m.iou);
        os << ',' << buf << '\n';
    }
    return os.str();
}

std::string confusion_json(const ConfusionMatrix &cm) {
    json j;
    j["layout"] = "rows = predicted class, columns = true class";
    j["classes"] = {label_name(WindowLabel::Start), label_name(WindowLabel::Spare),
                    label_name(WindowLabel::Noise)};
    j["counts"] = cm.counts;
    j["percent_of_true_class"] = cm.percent;
    return j.dump(2) + "\n";
}

} // namespace houndkit::eval
