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

#include "houndkit/presets.hpp"

#include "houndkit/error.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

namespace houndkit {

namespace {

struct Field {
    std::function<void(ExperimentConfig &, const std::string &)> set;
    std::function<std::string(const ExperimentConfig &)> get;
};

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T> T parse_number(const std::string &key, const std::string &v) {
    T out{};
    const auto *first = v.data(), *last = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ConfigError("config: cannot parse '" + v + "' for " + key);
    return out;
}

bool parse_bool(const std::string &key, const std::string &v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError("config: cannot parse '" + v + "' as a boolean for " + key);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
Field size_field(T ExperimentConfig::*outer, std::size_t T::*member) {
    return {[=](ExperimentConfig &c, const std::string &v) {
                (c.*outer).*member = parse_number<std::size_t>("", v);
            },
            [=](const ExperimentConfig &c) { return std::to_string((c.*outer).*member); }};
}

template <typename T> Field real_field(T ExperimentConfig::*outer, double T::*member) {
    return {[=](ExperimentConfig &c, const std::string &v) {
                (c.*outer).*member = parse_number<double>("", v);
            },
            [=](const ExperimentConfig &c) { return fmt((c.*outer).*member); }};
}

Field top_size(std::size_t ExperimentConfig::*m) {
    return {[=](ExperimentConfig &c, const std::string &v) {
                c.*m = parse_number<std::size_t>("", v);
            },
            [=](const ExperimentConfig &c) { return std::to_string(c.*m); }};
}

Field top_real(double ExperimentConfig::*m) {
    return {[=](ExperimentConfig &c, const std::string &v) { c.*m = parse_number<double>("", v); },
            [=](const ExperimentConfig &c) { return fmt(c.*m); }};
}

const std::map<std::string, Field> &fields() {
    using E = ExperimentConfig;
    using S = synth::SynthConfig;
    using M = cnn::ModelConfig;
    using T = cnn::TrainConfig;
    static const std::map<std::string, Field> table = {
        {"seed",
         {[](E &c, const std::string &v) { c.seed = parse_number<std::uint64_t>("seed", v); },
          [](const E &c) { return std::to_string(c.seed); }}},
        {"cps", size_field(&E::synth, &S::n_cps)},
        {"interleave",
         {[](E &c, const std::string &v) {
              c.synth.interleave_noise = parse_bool("interleave", v);
          },
          [](const E &c) { return std::string(c.synth.interleave_noise ? "true" : "false"); }}},
        {"gap_min",
         {[](E &c, const std::string &v) {
              c.synth.noise_gap_range.first = parse_number<std::size_t>("gap_min", v);
          },
          [](const E &c) { return std::to_string(c.synth.noise_gap_range.first); }}},
        {"gap_max",
         {[](E &c, const std::string &v) {
              c.synth.noise_gap_range.second = parse_number<std::size_t>("gap_max", v);
          },
          [](const E &c) { return std::to_string(c.synth.noise_gap_range.second); }}},
        {"reconfigs", real_field(&E::synth, &S::mean_reconfigs_per_cp)},
        {"awgn", real_field(&E::synth, &S::awgn_sigma)},
        {"sample_rate", real_field(&E::synth, &S::sample_rate_hz)},
        {"f_min", top_real(&E::f_min_hz)},
        {"f_max", top_real(&E::f_max_hz)},
        {"f_step", top_real(&E::f_step_hz)},
        {"dfs",
         {[](E &c, const std::string &v) { c.dfs_enabled = parse_bool("dfs", v); },
          [](const E &c) { return std::string(c.dfs_enabled ? "true" : "false"); }}},
        {"noise_length", top_size(&E::noise_length)},
        {"n", size_field(&E::model, &M::input_len)},
        {"kernel", size_field(&E::model, &M::conv_kernel)},
        {"stem_channels", size_field(&E::model, &M::stem_channels)},
        {"res1_channels", size_field(&E::model, &M::res1_channels)},
        {"res2_channels", size_field(&E::model, &M::res2_channels)},
        {"fc_hidden", size_field(&E::model, &M::fc_hidden)},
        {"epochs", size_field(&E::train, &T::epochs)},
        {"batch", size_field(&E::train, &T::batch_size)},
        {"lr", real_field(&E::train, &T::lr_max)},
        {"dropout", real_field(&E::train, &T::dropout_p)},
        {"stride", top_size(&E::stride)},
        {"k0", top_size(&E::k0)},
        {"k0_consecutive", top_size(&E::k0_consecutive)},
        {"avg_cp", top_real(&E::avg_cp)},
        {"avg_cp_consecutive", top_real(&E::avg_cp_consecutive)},
        {"mf_quantile", top_real(&E::mf_quantile)},
        {"mf_floor", top_real(&E::mf_floor)},
    };
    return table;
}

struct FullScaleRow {
    const char *name;
    double avg_cp, avg_cp_consecutive;
    std::size_t k0, k0_consecutive, n, s, batch;
    double lr, dropout;
};

// avgCP, k, N and s per cipher (with / without interleaved applications),
// then the CNN hyperparameters.
constexpr FullScaleRow kFullScaleRows[] = {
    {"aes-paper", 145000, 120000, 150, 150, 10000, 62, 256, 0.01, 0.2},
    {"aes-masked-paper", 50000, 50000, 10, 150, 5000, 50, 256, 0.007, 0.35},
    {"clefia-paper", 80000, 80000, 150, 150, 3000, 80, 256, 0.007, 0.3},
    {"camellia-paper", 4400, 4100, 80, 63, 1100, 50, 128, 0.007, 0.4},
};

} // namespace

std::size_t odd_kernel(std::size_t k) {
    if (k == 0)
        throw ConfigError("kernel size must be at least 1");
    return k % 2 ? k : k - 1;
}

void ExperimentConfig::finalize() {
    synth.seed = seed;
    model.dropout_p = train.dropout_p;
    train.seed = seed;
    if (dfs_enabled)
        synth.dfs = synth::make_freq_pool(f_min_hz, f_max_hz, f_step_hz);
    else
        synth.dfs = synth::fixed_freq_pool(f_max_hz);
}

void ExperimentConfig::validate() const {
    synth.validate();
    model.validate();
    train.validate();
    if (stride < 1)
        throw ConfigError("config: stride must be positive");
    if (k0 < 1 || k0_consecutive < 1)
        throw ConfigError("config: k0 must be positive");
    if (avg_cp < 0.0 || avg_cp_consecutive < 0.0)
        throw ConfigError("config: avg_cp must be non-negative");
    if (!(mf_quantile >= 0.0 && mf_quantile <= 1.0))
        throw ConfigError("config: mf_quantile must lie in [0, 1]");
    if (noise_length < model.input_len)
        throw ConfigError("config: noise_length shorter than the window length");
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out{"desk-default"};
    for (const auto &r : kFullScaleRows)
        out.emplace_back(r.name);
    return out;
}

ExperimentConfig make_preset(const std::string &name) {
    ExperimentConfig c;
    c.preset = name;
    c.synth.n_cps = 50;
    c.synth.mean_reconfigs_per_cp = 8.0;
    c.model.input_len = 256;
    c.model.conv_kernel = 16;
    c.train.epochs = 25;
    c.train.batch_size = 64;
    c.train.lr_max = 0.01;
    c.train.dropout_p = 0.2;
    if (name == "desk-default") {
        c.finalize();
        return c;
    }
    for (const auto &r : kFullScaleRows) {
        if (name != r.name)
            continue;
        c.synth.mean_reconfigs_per_cp = 41.0;
        c.model.input_len = r.n;
        c.model.conv_kernel = 64;
        c.train.batch_size = r.batch;
        c.train.lr_max = r.lr;
        c.train.dropout_p = r.dropout;
        c.stride = r.s;
        c.k0 = r.k0;
        c.k0_consecutive = r.k0_consecutive;
        c.avg_cp = r.avg_cp;
        c.avg_cp_consecutive = r.avg_cp_consecutive;
        c.noise_length = std::max<std::size_t>(c.noise_length, 40 * r.n);
        c.finalize();
        return c;
    }
    std::string known;
    for (const auto &n : preset_names())
        known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

void set_key(ExperimentConfig &cfg, const std::string &key, const std::string &value) {
    const auto &f = fields();
    auto it = f.find(key);
    if (it == f.end())
        throw ConfigError("config: unknown key '" + key + "'");
    try {
        it->second.set(cfg, trim(value));
    } catch (const ConfigError &e) {
        throw ConfigError("config: bad value '" + value + "' for " + key);
    }
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto &[k, v] : fields())
        out.push_back(k);
    return out;
}

std::map<std::string, std::string> parse_config_text(const std::string &text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

std::map<std::string, std::string> config_values(const ExperimentConfig &cfg) {
    std::map<std::string, std::string> out;
    out["preset"] = cfg.preset;
    for (const auto &[k, f] : fields())
        out[k] = f.get(cfg);
    return out;
}

} // namespace houndkit
