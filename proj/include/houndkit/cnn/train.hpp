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
#include "houndkit/cnn/optim.hpp"
#include "houndkit/dataset.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace houndkit::cnn {

struct TrainConfig {
    std::size_t epochs = 25;
    std::size_t batch_size = 64;
    double lr_max = 0.01;
    double dropout_p = 0.2; // replaces ModelConfig::dropout_p
    std::uint64_t seed = 1;
    AdamConfig adam;
    OneCycleConfig one_cycle;

    /// Throws ConfigError.
    void validate() const;
};

struct EpochMetrics {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0; // mean over the epoch's mini-batches
    double valid_loss = 0.0;
    double valid_accuracy = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochMetrics> history;
    std::size_t best_epoch = 0; // 1-based
};

/// Eval-mode loss / accuracy / predictions over a subset of a dataset.
struct SplitScore {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::uint8_t> predicted;
    std::vector<std::uint8_t> actual;
};

SplitScore score_split(const Model &model, const dataset::WindowDataset &ds,
                       const std::vector<std::size_t> &indices);

using EpochCallback = std::function<void(const EpochMetrics &)>;

/// Adam with a one-cycle schedule over shuffled mini-batches (the last
/// partial batch is kept). Returns the epoch with the lowest validation
/// loss, the earliest on ties; without validation windows the training loss
/// decides. Throws ArgumentError on an empty training split and ShapeError
/// when the window length differs from mcfg.input_len.
TrainResult train(const dataset::WindowDataset &ds, const ModelConfig &mcfg,
                  const TrainConfig &tcfg, const EpochCallback &on_epoch = {});

} // namespace houndkit::cnn
