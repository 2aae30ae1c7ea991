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

#include "houndkit/cnn/model_io.hpp"

#include "houndkit/error.hpp"
#include "houndkit/trace_io.hpp"

#include <json.hpp>

#include <cmath>

namespace houndkit::cnn {

using nlohmann::json;

void write_model(const std::filesystem::path &stem, const Model &model,
                 const ModelProvenance &provenance) {
    const ModelConfig &c = model.config();
    json meta;
    meta["format"] = kModelFormat;
    meta["config"] = {{"input_len", c.input_len},         {"conv_kernel", c.conv_kernel},
                      {"conv_stride", c.conv_stride},     {"stem_channels", c.stem_channels},
                      {"res1_channels", c.res1_channels}, {"res2_channels", c.res2_channels},
                      {"fc_hidden", c.fc_hidden},         {"n_classes", c.n_classes},
                      {"dropout_p", c.dropout_p}};
    std::vector<float> blob;
    json table = json::array();
    auto add = [&](const NamedTensor<float> &t, const char *kind) {
        table.push_back({{"name", t.name},
                         {"kind", kind},
                         {"shape", t.value.shape},
                         {"offset", blob.size()}});
        blob.insert(blob.end(), t.value.data.begin(), t.value.data.end());
    };
    for (const auto &p : model.parameters())
        add(p, "parameter");
    for (const auto &b : model.buffers())
        add(b, "buffer");
    meta["tensors"] = table;
    meta["total_floats"] = blob.size();
    meta["provenance"] = {{"seed", provenance.seed},
                          {"dataset_sha256", provenance.dataset_sha256},
                          {"preset", provenance.preset},
                          {"mean_cp_length", provenance.mean_cp_length},
                          {"best_epoch", provenance.best_epoch}};
    write_f32(with_ext(stem, ".bin"), blob);
    write_text(with_ext(stem, ".json"), meta.dump(2) + "\n");
}

ModelFile read_model(const std::filesystem::path &stem) {
    const auto meta_path = with_ext(stem, ".json");
    json meta;
    try {
        meta = json::parse(read_text(meta_path));
    } catch (const json::exception &e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    }
    try {
        if (meta.at("format").get<std::string>() != kModelFormat)
            throw FormatError(meta_path.string() + ": expected format " + kModelFormat);
        const json &jc = meta.at("config");
        ModelConfig c;
        c.input_len = jc.at("input_len");
        c.conv_kernel = jc.at("conv_kernel");
        c.conv_stride = jc.at("conv_stride");
        c.stem_channels = jc.at("stem_channels");
        c.res1_channels = jc.at("res1_channels");
        c.res2_channels = jc.at("res2_channels");
        c.fc_hidden = jc.at("fc_hidden");
        c.n_classes = jc.at("n_classes");
        c.dropout_p = jc.at("dropout_p");
        try {
            c.validate();
        } catch (const ConfigError &e) {
            throw FormatError(meta_path.string() + ": " + e.what());
        }
        ModelFile mf{Model(c, 0), {}};
        const std::vector<float> blob = read_f32(with_ext(stem, ".bin"));
        if (blob.size() != meta.at("total_floats").get<std::size_t>())
            throw FormatError(stem.string() + ".bin: length does not match manifest");

        std::size_t seen = 0;
        for (const json &t : meta.at("tensors")) {
            const std::string name = t.at("name");
            const std::string kind = t.at("kind");
            auto &list = kind == "buffer" ? mf.model.buffers() : mf.model.parameters();
            const std::size_t idx = kind == "buffer" ? mf.model.buffer_index(name)
                                                     : mf.model.param_index(name);
            auto &dst = list[idx].value;
            const auto shape = t.at("shape").get<std::vector<std::size_t>>();
            if (shape != dst.shape)
                throw FormatError(meta_path.string() + ": tensor " + name + " has shape " +
                                  shape_string(shape) + ", architecture needs " +
                                  shape_string(dst.shape));
            const std::size_t off = t.at("offset");
            if (off + dst.size() > blob.size())
                throw FormatError(meta_path.string() + ": tensor " + name + " overruns blob");
            std::copy_n(blob.begin() + std::ptrdiff_t(off), dst.size(), dst.data.begin());
            for (float v : dst.data)
                if (!std::isfinite(v))
                    throw FormatError(meta_path.string() + ": non-finite value in " + name);
            if (name.ends_with("running_var"))
                for (float v : dst.data)
                    if (!(v > 0.0f))
                        throw FormatError(meta_path.string() + ": non-positive " + name);
            ++seen;
        }
        if (seen != mf.model.parameters().size() + mf.model.buffers().size())
            throw FormatError(meta_path.string() + ": tensor table incomplete");

        const json &p = meta.at("provenance");
        mf.provenance.seed = p.at("seed");
        mf.provenance.dataset_sha256 = p.at("dataset_sha256");
        mf.provenance.preset = p.at("preset");
        mf.provenance.mean_cp_length = p.at("mean_cp_length");
        mf.provenance.best_epoch = p.at("best_epoch");
        return mf;
    } catch (const json::exception &e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    } catch (const ArgumentError &e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    }
}

} // namespace houndkit::cnn
