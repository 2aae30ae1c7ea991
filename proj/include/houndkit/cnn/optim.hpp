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

#include "houndkit/cnn/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace houndkit::cnn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T> struct AdamState {
    std::vector<BasicTensor<T>> m, v;
    std::uint64_t step = 0;
};

/// Zero moments shaped like `params`, step 0.
template <typename T>
AdamState<T> make_adam_state(const std::vector<NamedTensor<T>> &params);

/// One bias-corrected Adam update in place. Throws ShapeError when params,
/// grads and state disagree.
template <typename T>
void adam_step(std::vector<NamedTensor<T>> &params,
               const std::vector<BasicTensor<T>> &grads, AdamState<T> &state,
               double lr, const AdamConfig &cfg = {});

struct OneCycleConfig {
    double div_start = 25.0;
    double div_final = 1e4;
    double warmup_fraction = 0.3;
};

/// Index of the step at which the schedule peaks.
std::size_t one_cycle_peak(std::size_t total_steps, const OneCycleConfig &cfg);

/// Cosine ramp from lr_max/div_start up to lr_max at the peak step, then
/// cosine decay to lr_max/div_final at the last step. Throws ArgumentError
/// when step >= total_steps.
double one_cycle_lr(std::size_t step, std::size_t total_steps, double lr_max,
                    const OneCycleConfig &cfg = {});

} // namespace houndkit::cnn
