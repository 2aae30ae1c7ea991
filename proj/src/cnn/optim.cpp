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

#include "houndkit/cnn/optim.hpp"

#include "houndkit/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace houndkit::cnn {

template <typename T>
AdamState<T> make_adam_state(const std::vector<NamedTensor<T>> &params) {
    AdamState<T> s;
    for (const auto &p : params) {
        s.m.emplace_back(p.value.shape);
        s.v.emplace_back(p.value.shape);
    }
    return s;
}

template <typename T>
void adam_step(std::vector<NamedTensor<T>> &params,
               const std::vector<BasicTensor<T>> &grads, AdamState<T> &state,
               double lr, const AdamConfig &cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw ShapeError("adam: parameter, gradient and state counts differ");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (grads[i].shape != params[i].value.shape ||
            state.m[i].shape != params[i].value.shape ||
            state.v[i].shape != params[i].value.shape)
            throw ShapeError("adam: shape mismatch for " + params[i].name + " " +
                             shape_string(params[i].value.shape) + " vs gradient " +
                             shape_string(grads[i].shape));
    ++state.step;
    const double t = double(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto &w = params[i].value.data;
        auto &m = state.m[i].data;
        auto &v = state.v[i].data;
        const auto &g = grads[i].data;
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            const double mhat = double(m[j]) / c1;
            const double vhat = double(v[j]) / c2;
            w[j] = T(double(w[j]) - lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

std::size_t one_cycle_peak(std::size_t total_steps, const OneCycleConfig &cfg) {
    if (total_steps == 0)
        return 0;
    return std::size_t(std::llround(cfg.warmup_fraction * double(total_steps - 1)));
}

double one_cycle_lr(std::size_t step, std::size_t total_steps, double lr_max,
                    const OneCycleConfig &cfg) {
    if (step >= total_steps)
        throw ArgumentError("one_cycle_lr: step " + std::to_string(step) +
                            " outside [0, " + std::to_string(total_steps) + ")");
    const std::size_t peak = one_cycle_peak(total_steps, cfg);
    if (step == peak)
        return lr_max;
    const double pi = std::numbers::pi;
    if (step < peak) {
        const double lo = lr_max / cfg.div_start;
        const double frac = double(step) / double(peak);
        return lo + (lr_max - lo) * 0.5 * (1.0 - std::cos(pi * frac));
    }
    const double fin = lr_max / cfg.div_final;
    const double frac = double(step - peak) / double(total_steps - 1 - peak);
    return fin + (lr_max - fin) * 0.5 * (1.0 + std::cos(pi * frac));
}

template AdamState<float> make_adam_state(const std::vector<NamedTensor<float>> &);
template AdamState<double> make_adam_state(const std::vector<NamedTensor<double>> &);
template void adam_step(std::vector<NamedTensor<float>> &,
                        const std::vector<BasicTensor<float>> &, AdamState<float> &,
                        double, const AdamConfig &);
template void adam_step(std::vector<NamedTensor<double>> &,
                        const std::vector<BasicTensor<double>> &, AdamState<double> &,
                        double, const AdamConfig &);

} // namespace houndkit::cnn
