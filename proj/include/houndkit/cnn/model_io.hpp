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

#include <cstdint>
#include <filesystem>
#include <string>

namespace houndkit::cnn {

inline constexpr const char *kModelFormat = "mdl-v1";

struct ModelProvenance {
    std::uint64_t seed = 0;
    std::string dataset_sha256;
    std::string preset;
    double mean_cp_length = 0.0; // of the training CPs; drives screening
    std::size_t best_epoch = 0;
};

struct ModelFile {
    Model model;
    ModelProvenance provenance;
};

/// mdl-v1: `<stem>.json` (config, tensor table, provenance) and `<stem>.bin`
/// holding every parameter then every batch-norm buffer as little-endian
/// float32, at the offsets (in floats) listed in the table.
void write_model(const std::filesystem::path &stem, const Model &model,
                 const ModelProvenance &provenance);
ModelFile read_model(const std::filesystem::path &stem);

} // namespace houndkit::cnn
