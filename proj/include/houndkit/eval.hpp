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
#include "houndkit/dataset.hpp"
#include "houndkit/locator.hpp"
#include "houndkit/trace.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace houndkit::eval {

/// |P ∩ GT| / |P ∪ GT| with P = [pred, pred + len), GT = [gt, gt + len).
/// Throws ArgumentError when len == 0.
double iou(std::size_t pred_start, std::size_t gt_start, std::size_t gt_len);

struct HitsReport {
    double detection_ratio = 0.0; // predictions / ground-truth CPs
    double matched_rate = 0.0;    // CPs with a prediction within tolerance
    double tolerance = 0.0;       // samples
    std::size_t predictions = 0;
    std::size_t ground_truth = 0;
    std::size_t matched = 0;
};

struct IoUReport {
    std::vector<double> per_cp_iou;
    double mean = 0.0;
    double std = 0.0; // population
};

struct CpMatch {
    std::size_t gt_start = 0;
    std::size_t gt_length = 0;
    std::optional<std::size_t> pred_start; // one-to-one assignment
    double iou = 0.0;
};

struct LocationScore {
    HitsReport hits;
    IoUReport iou;
    std::vector<CpMatch> per_cp;
};

/// Predictions are paired one-to-one with ground-truth starts, closest pairs
/// first (ties: lower prediction, then lower CP index), pairs further apart
/// than `tolerance` never match. Unmatched CPs score IoU 0. Throws
/// ArgumentError for empty ground truth or a negative tolerance.
LocationScore score_locations(std::span<const std::size_t> pred, const GroundTruth &gt,
                              double tolerance);

inline double default_tolerance(double avg_cp) { return avg_cp / 2.0; }

IoUReport summarize_iou(std::vector<double> values);

struct ConfusionMatrix {
    /// counts[pred][true]
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};
    /// counts as a percentage of each true class's total (columns sum to 100)
    std::array<std::array<double, kNumClasses>, kNumClasses> percent{};

    std::size_t true_total(std::size_t cls) const;
};

/// Throws ArgumentError on empty or mismatched inputs.
ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> predicted,
                                 std::span<const std::uint8_t> actual);
ConfusionMatrix confusion_matrix(const cnn::Model &model, const dataset::WindowDataset &ds,
                                 dataset::Split split);

/// Normalized cross-correlation at every lag in [0, L - m]: the template is
/// zero-meaned and scaled to unit norm, each trace segment likewise.
/// Segments with no variance score 0. Throws ArgumentError when the template
/// is longer than the trace or shorter than 2 samples.
std::vector<double> normalized_xcorr(std::span<const float> trace,
                                     std::span<const float> tmpl,
                                     std::size_t threads = 1);

/// Linear interpolation between order statistics, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct MatchedFilterConfig {
    double quantile = 0.9999;
    double floor = 0.3; // absolute correlation a peak must exceed as well
};

/// Peaks of the correlation strictly above max(quantile, floor), taken
/// greedily from the highest, each suppressing lags within one template
/// length on either side.
locator::CpLocations matched_filter_locate(const Trace &trace, std::span<const float> tmpl,
                                           const MatchedFilterConfig &cfg = {},
                                           std::size_t threads = 1);

/// Report as JSON (pretty) and as one CSV row per ground-truth CP.
std::string score_json(const LocationScore &score, const std::string &trace_id,
                       const std::string &method);
std::string score_csv(const LocationScore &score);
std::string confusion_json(const ConfusionMatrix &cm);

} // namespace houndkit::eval
