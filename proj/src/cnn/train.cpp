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

#include "houndkit/cnn/train.hpp"

#include "houndkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace houndkit::cnn {

void TrainConfig::validate() const {
    if (epochs < 1)
        throw ConfigError("train: epochs must be at least 1");
    if (batch_size < 1)
        throw ConfigError("train: batch_size must be at least 1");
    if (!(lr_max > 0.0) || !std::isfinite(lr_max))
        throw ConfigError("train: lr_max must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw ConfigError("train: dropout_p must lie in [0, 1)");
    if (!(one_cycle.div_start > 0.0 && one_cycle.div_final > 0.0 &&
          one_cycle.warmup_fraction >= 0.0 && one_cycle.warmup_fraction <= 1.0))
        throw ConfigError("train: invalid one-cycle settings");
}

namespace {

constexpr std::size_t kEvalChunk = 16;

void gather(const dataset::WindowDataset &ds, std::span<const std::size_t> idx,
            std::vector<float> &x, std::vector<std::uint8_t> &y) {
    const std::size_t n = ds.n;
    x.resize(idx.size() * n);
    y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto &w = ds.windows[idx[i]];
        standardize_into(w.samples, std::span<float>(x).subspan(i * n, n));
        y[i] = std::uint8_t(w.label);
    }
}

void check_windows(const dataset::WindowDataset &ds, std::size_t n) {
    if (ds.n != n)
        throw ShapeError("stem.conv: dataset window length " + std::to_string(ds.n) +
                         " differs from model input_len " + std::to_string(n));
    for (const auto &w : ds.windows)
        if (w.samples.size() != n)
            throw ShapeError("stem.conv: window of " + std::to_string(w.samples.size()) +
                             " samples, expected " + std::to_string(n));
}

} // namespace

SplitScore score_split(const Model &model, const dataset::WindowDataset &ds,
                       const std::vector<std::size_t> &indices) {
    check_windows(ds, model.config().input_len);
    SplitScore s;
    if (indices.empty())
        return s;
    std::vector<float> x;
    std::vector<std::uint8_t> y;
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t first = 0; first < indices.size(); first += kEvalChunk) {
        const std::size_t count = std::min(kEvalChunk, indices.size() - first);
        gather(ds, std::span(indices).subspan(first, count), x, y);
        auto p = predict_proba<float>(model, x, count);
        for (std::size_t i = 0; i < count; ++i) {
            const double pl = std::max(double(p.at(i, y[i])), 1e-300);
            loss -= std::log(pl);
            const auto cls = std::uint8_t(argmax_row(p.row(i)));
            correct += cls == y[i];
            s.predicted.push_back(cls);
            s.actual.push_back(y[i]);
        }
    }
    s.loss = loss / double(indices.size());
    s.accuracy = double(correct) / double(indices.size());
    return s;
}

TrainResult train(const dataset::WindowDataset &ds, const ModelConfig &mcfg,
                  const TrainConfig &tcfg, const EpochCallback &on_epoch) {
    tcfg.validate();
    ModelConfig cfg = mcfg;
    cfg.dropout_p = tcfg.dropout_p;
    cfg.validate();
    check_windows(ds, cfg.input_len);
    const auto &train_idx = ds.splits.train;
    if (train_idx.empty())
        throw ArgumentError("train: empty training split");
    for (auto i : ds.splits.train)
        if (i >= ds.windows.size())
            throw ArgumentError("train: split index out of range");

    Rng rng(tcfg.seed);
    Model model(cfg, rng());
    AdamState<float> adam = make_adam_state(model.parameters());

    const std::size_t bs = tcfg.batch_size;
    const std::size_t batches = (train_idx.size() + bs - 1) / bs;
    const std::size_t total_steps = batches * tcfg.epochs;
    std::size_t step = 0;

    TrainResult result{model, {}, 0};
    double best = 0.0;
    std::vector<std::size_t> order(train_idx);
    std::vector<float> x;
    std::vector<std::uint8_t> y;
    for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t first = b * bs;
            const std::size_t count = std::min(bs, order.size() - first);
            gather(ds, std::span(order).subspan(first, count), x, y);
            auto lg = loss_and_grad<float>(model, x, y, rng);
            loss_sum += double(lg.loss);
            adam_step(model.parameters(), lg.grads, adam,
                      one_cycle_lr(step++, total_steps, tcfg.lr_max, tcfg.one_cycle),
                      tcfg.adam);
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / double(batches);
        if (!ds.splits.valid.empty()) {
            auto s = score_split(model, ds, ds.splits.valid);
            m.valid_loss = s.loss;
            m.valid_accuracy = s.accuracy;
        } else {
            m.valid_loss = std::nan("");
            m.valid_accuracy = std::nan("");
        }
        const double key = ds.splits.valid.empty() ? m.train_loss : m.valid_loss;
        if (epoch == 1 || key < best) {
            best = key;
            result.model = model;
            result.best_epoch = epoch;
        }
        result.history.push_back(m);
        if (on_epoch)
            on_epoch(m);
    }
    return result;
}

} // namespace houndkit::cnn
