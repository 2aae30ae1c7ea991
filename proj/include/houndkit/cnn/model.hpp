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
#include "houndkit/synth.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace houndkit::cnn {

/// Topology: conv block, residual block (identity shortcut), residual block
/// (kernel-1 projection shortcut), global average pooling, two
/// fully-connected layers with dropout between them, softmax.
struct ModelConfig {
    std::size_t input_len = 256;
    std::size_t conv_kernel = 16;
    std::size_t conv_stride = 1;
    std::size_t stem_channels = 16;
    std::size_t res1_channels = 16;
    std::size_t res2_channels = 32;
    std::size_t fc_hidden = 64;
    std::size_t n_classes = 3;
    double dropout_p = 0.2;

    /// Throws ConfigError.
    void validate() const;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

enum class Mode { Train, Eval };

/// Parameters and batch-norm running statistics. Parameter order is fixed
/// by the topology and shared by gradients and optimizer state.
template <typename T> class BasicModel {
  public:
    /// Fan-in scaled uniform weights, zero biases, unit scales / zero shifts.
    BasicModel(const ModelConfig &config, std::uint64_t init_seed);

    const ModelConfig &config() const { return config_; }

    std::vector<NamedTensor<T>> &parameters() { return params_; }
    const std::vector<NamedTensor<T>> &parameters() const { return params_; }
    std::vector<NamedTensor<T>> &buffers() { return buffers_; }
    const std::vector<NamedTensor<T>> &buffers() const { return buffers_; }

    /// Index of a parameter or buffer by name; throws ArgumentError.
    std::size_t param_index(const std::string &name) const;
    std::size_t buffer_index(const std::string &name) const;

    /// Copy with another scalar type (used by gradient checks).
    template <typename U> BasicModel<U> cast() const;

  private:
    template <typename U> friend class BasicModel;
    BasicModel() = default;

    ModelConfig config_;
    std::vector<NamedTensor<T>> params_;
    std::vector<NamedTensor<T>> buffers_;
};

using Model = BasicModel<float>;

/// Row-major [batch, n_classes] class probabilities.
template <typename T> struct Probabilities {
    std::size_t batch = 0;
    std::vector<T> values;

    T at(std::size_t row, std::size_t cls) const {
        return values[row * kNumClasses + cls];
    }
    std::span<const T> row(std::size_t r) const {
        return std::span<const T>(values).subspan(r * kNumClasses, kNumClasses);
    }
};

/// Forward pass over `batch` windows of config().input_len samples laid out
/// back to back. Eval mode uses running statistics and disables dropout;
/// train mode uses batch statistics, draws a dropout mask from `rng` and
/// refreshes the running statistics. Throws ShapeError.
template <typename T>
Probabilities<T> forward(BasicModel<T> &model, std::span<const T> inputs,
                         std::size_t batch, Mode mode, Rng *rng = nullptr);

/// Eval-mode forward on an immutable model.
template <typename T>
Probabilities<T> predict_proba(const BasicModel<T> &model,
                               std::span<const T> inputs, std::size_t batch);

template <typename T> struct LossAndGrad {
    T loss = T(0);
    std::vector<BasicTensor<T>> grads; // one per parameter, same shapes
    Probabilities<T> probs;
};

/// Mean cross-entropy in train mode plus the gradient of every parameter.
/// Labels must be 0, 1 or 2 (ArgumentError otherwise). Running statistics
/// are updated only when update_running_stats is set.
template <typename T>
LossAndGrad<T> loss_and_grad(BasicModel<T> &model, std::span<const T> inputs,
                             std::span<const std::uint8_t> labels, Rng &rng,
                             bool update_running_stats = true);

/// Eval-mode activations after each stage: stem, res1, res2 (each
/// [channels, batch * N]), pooled [batch, channels], hidden [batch, fc_hidden],
/// logits [batch, 3].
template <typename T> struct Activations {
    std::vector<T> stem, res1, res2, pooled, hidden, logits;
};

template <typename T>
Activations<T> eval_activations(const BasicModel<T> &model,
                                std::span<const T> inputs, std::size_t batch);

/// Argmax per row; ties go to the lowest class index.
std::vector<std::uint8_t> argmax_classes(const Probabilities<float> &probs);
template <typename T> std::size_t argmax_row(std::span<const T> row);

struct Prediction {
    std::vector<std::uint8_t> classes;
    Probabilities<float> probs;
};

/// Standardizes every window, then runs the model in eval mode in fixed-size
/// chunks (results do not depend on how callers group windows).
Prediction predict_batch(const Model &model,
                         std::span<const std::vector<float>> windows);

// Building blocks, exposed for per-layer gradient checks. Activations are
// [channels, batch * length] row-major.
namespace layers {

template <typename T>
void conv1d_forward(std::span<const T> weight, std::size_t c_in, std::size_t c_out,
                    std::size_t kernel, std::span<const T> in, std::size_t batch,
                    std::size_t length, std::vector<T> &out);

template <typename T>
void conv1d_backward(std::span<const T> weight, std::size_t c_in,
                     std::size_t c_out, std::size_t kernel, std::span<const T> in,
                     std::size_t batch, std::size_t length,
                     std::span<const T> d_out, std::vector<T> &d_weight,
                     std::vector<T> &d_in);

template <typename T>
void batchnorm_forward_train(std::span<const T> gamma, std::span<const T> beta,
                             std::span<const T> in, std::size_t channels,
                             std::size_t count, std::vector<T> &out);

template <typename T>
void batchnorm_backward(std::span<const T> gamma, std::span<const T> in,
                        std::size_t channels, std::size_t count,
                        std::span<const T> d_out, std::vector<T> &d_gamma,
                        std::vector<T> &d_beta, std::vector<T> &d_in);

} // namespace layers

} // namespace houndkit::cnn
