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

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace houndkit::cnn {

/// Row-major dense tensor.
template <typename T> struct BasicTensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    BasicTensor() = default;
    explicit BasicTensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(element_count(shape), T(0)) {}

    std::size_t size() const { return data.size(); }

    static std::size_t element_count(const std::vector<std::size_t> &s) {
        return std::accumulate(s.begin(), s.end(), std::size_t(1),
                               std::multiplies<>());
    }
};

using Tensor = BasicTensor<float>;

template <typename T> struct NamedTensor {
    std::string name;
    BasicTensor<T> value;
};

std::string shape_string(const std::vector<std::size_t> &shape);

} // namespace houndkit::cnn
