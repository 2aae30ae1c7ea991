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

// houndkit command-line front end: synth, dataset, train, locate, eval,
// baseline. Every stage writes `<out>.run.json` next to its outputs.

#include "houndkit/cnn/model_io.hpp"
#include "houndkit/cnn/train.hpp"
#include "houndkit/dataset.hpp"
#include "houndkit/error.hpp"
#include "houndkit/eval.hpp"
#include "houndkit/hashing.hpp"
#include "houndkit/locator.hpp"
#include "houndkit/presets.hpp"
#include "houndkit/synth.hpp"
#include "houndkit/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace houndkit;

namespace {

enum ExitCode : int {
    kOk = 0,
    kGeneric = 1,
    kUsage = 2,
    kMissingFile = 3,
    kFormatMismatch = 4,
    kHashMismatch = 5,
    kIoFailure = 6,
    kBadConfig = 7,
};

class MissingFileError : public Error {
  public:
    using Error::Error;
};

constexpr const char *kVersion = "0.1.0";

struct Common {
    std::string preset = "desk-default";
    std::string config_file;
    std::string threads;
    bool strict = false;
    bool quiet = false;
    std::map<std::string, std::string> values; // config key -> raw CLI value
    std::vector<std::pair<std::string, CLI::Option *>> options;
};

std::string hyphenate(std::string s) {
    for (auto &c : s)
        if (c == '_')
            c = '-';
    return s;
}

std::string underscore(std::string s) {
    for (auto &c : s)
        if (c == '-')
            c = '_';
    return s;
}

void add_common(CLI::App *sub, Common &c) {
    sub->add_option("--preset", c.preset, "Parameter preset")->capture_default_str();
    sub->add_option("--config", c.config_file, "Flat key = value config file");
    sub->add_option("--threads", c.threads, "Worker threads (default: HOUNDKIT_THREADS, then all cores)");
    sub->add_flag("--strict", c.strict, "Verify input hashes against their run manifests");
    sub->add_flag("--quiet", c.quiet, "Suppress progress output");
    for (const auto &key : config_keys()) {
        auto *opt = sub->add_option("--" + hyphenate(key), c.values[key], "Override '" + key + "'");
        c.options.emplace_back(key, opt);
    }
}

ExperimentConfig resolve_config(const Common &c) {
    ExperimentConfig cfg = make_preset(c.preset);
    if (!c.config_file.empty()) {
        if (!fs::exists(c.config_file))
            throw MissingFileError("config file not found: " + c.config_file);
        for (const auto &[k, v] : parse_config_text(read_text(c.config_file))) {
            if (k == "preset")
                throw ConfigError("config: 'preset' must be given with --preset");
            set_key(cfg, underscore(k), v);
        }
    }
    for (const auto &[key, opt] : c.options)
        if (opt->count() > 0)
            set_key(cfg, key, c.values.at(key));
    cfg.finalize();
    cfg.validate();
    return cfg;
}

std::size_t resolve_threads(const Common &c) {
    std::string raw = c.threads;
    if (raw.empty())
        if (const char *env = std::getenv("HOUNDKIT_THREADS"))
            raw = env;
    if (raw.empty())
        return std::max(1u, std::thread::hardware_concurrency());
    try {
        std::size_t pos = 0;
        const long v = std::stol(raw, &pos);
        if (pos != raw.size() || v < 1)
            throw std::invalid_argument(raw);
        return std::size_t(v);
    } catch (const std::exception &) {
        throw ConfigError("threads must be a positive integer, got '" + raw + "'");
    }
}

void require_files(const std::vector<fs::path> &files) {
    for (const auto &f : files)
        if (!fs::exists(f))
            throw MissingFileError("input not found: " + f.string());
}

fs::path manifest_path(const fs::path &stem) { return with_ext(stem, ".run.json"); }

// Checks the given files against the hashes their producer recorded.
void verify_against_producer(const fs::path &stem, const std::vector<fs::path> &files) {
    const fs::path mp = manifest_path(stem);
    if (!fs::exists(mp))
        throw MissingFileError("--strict: run manifest not found: " + mp.string());
    json m;
    try {
        m = json::parse(read_text(mp));
    } catch (const json::exception &e) {
        throw FormatError(mp.string() + ": " + e.what());
    }
    const json outputs = m.value("outputs", json::object());
    for (const auto &f : files) {
        const std::string name = f.filename().string();
        if (!outputs.contains(name))
            throw HashMismatchError("--strict: " + mp.string() + " does not list " + name);
        if (outputs.at(name).get<std::string>() != sha256_file(f))
            throw HashMismatchError("--strict: " + f.string() + " differs from the hash in " +
                                    mp.string());
    }
}

class RunManifest {
  public:
    RunManifest(std::string command, const ExperimentConfig &cfg, std::size_t threads)
        : start_(std::chrono::steady_clock::now()), threads_(threads) {
        j_["format"] = "run-v1";
        j_["command"] = std::move(command);
        j_["houndkit_version"] = kVersion;
        j_["preset"] = cfg.preset;
        j_["seed"] = cfg.seed;
        j_["config"] = config_values(cfg);
        j_["inputs"] = json::object();
        j_["outputs"] = json::object();
        j_["results"] = json::object();
    }

    void input(const fs::path &f) { j_["inputs"][f.filename().string()] = sha256_file(f); }
    void output(const fs::path &f) { j_["outputs"][f.filename().string()] = sha256_file(f); }
    json &results() { return j_["results"]; }

    void write(const fs::path &stem) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        j_["runtime"] = {{"threads", threads_}, {"wall_seconds", secs}};
        write_text(manifest_path(stem), j_.dump(2) + "\n");
    }

  private:
    json j_;
    std::chrono::steady_clock::time_point start_;
    std::size_t threads_;
};

std::vector<fs::path> trace_files(const fs::path &stem) {
    return {with_ext(stem, ".json"), with_ext(stem, ".f32")};
}
std::vector<fs::path> dataset_files(const fs::path &stem) {
    return {with_ext(stem, ".json"), with_ext(stem, ".f32"), with_ext(stem, ".labels")};
}
std::vector<fs::path> model_files(const fs::path &stem) {
    return {with_ext(stem, ".json"), with_ext(stem, ".bin")};
}

void check_inputs(const Common &c, RunManifest &rm, const fs::path &stem,
                  const std::vector<fs::path> &files) {
    require_files(files);
    if (c.strict)
        verify_against_producer(stem, files);
    for (const auto &f : files)
        rm.input(f);
}

void ensure_parent(const fs::path &stem) {
    const auto parent = fs::absolute(stem).parent_path();
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (!fs::is_directory(parent))
        throw IoError("cannot create output directory " + parent.string());
}

void say(const Common &c, const std::string &msg) {
    if (!c.quiet)
        std::cerr << msg << '\n';
}

// ---- stages ----

struct SynthArgs {
    std::string out, id;
};

int cmd_synth(const Common &c, const SynthArgs &a) {
    const ExperimentConfig cfg = resolve_config(c);
    ensure_parent(a.out);
    RunManifest rm("synth", cfg, 1);
    synth::SynthConfig sc = cfg.synth;
    if (sc.n_cps == 0)
        sc.noise_gap_range = {cfg.noise_length, cfg.noise_length};
    const auto tmpl = synth::make_cp_template();
    const auto composed =
        synth::compose_trace(sc, tmpl, a.id.empty() ? fs::path(a.out).filename().string() : a.id);
    write_trace(a.out, composed.trace, &composed.truth);
    for (const auto &f : trace_files(a.out))
        rm.output(f);
    rm.results()["length"] = composed.trace.size();
    rm.results()["cps"] = composed.truth.size();
    rm.write(a.out);
    say(c, "synth: " + std::to_string(composed.trace.size()) + " samples, " +
               std::to_string(composed.truth.size()) + " CPs -> " + a.out);
    return kOk;
}

struct DatasetArgs {
    std::vector<std::string> traces;
    std::string noise, out;
};

int cmd_dataset(const Common &c, const DatasetArgs &a) {
    const ExperimentConfig cfg = resolve_config(c);
    RunManifest rm("dataset", cfg, 1);
    std::vector<dataset::AnnotatedTrace> annotated;
    for (const auto &t : a.traces) {
        check_inputs(c, rm, t, trace_files(t));
        auto tf = read_trace(t);
        if (!tf.truth)
            throw FormatError(t + ".json: cipher traces need ground truth");
        annotated.push_back({std::move(tf.trace), std::move(*tf.truth)});
    }
    check_inputs(c, rm, a.noise, trace_files(a.noise));
    const auto noise = read_trace(a.noise);
    ensure_parent(a.out);
    Rng rng(cfg.seed);
    const auto ds = dataset::build_dataset(annotated, noise.trace, cfg.model.input_len, rng);
    dataset::write_dataset(a.out, ds);
    for (const auto &f : dataset_files(a.out))
        rm.output(f);
    const auto counts = ds.class_counts();
    rm.results()["windows"] = ds.windows.size();
    rm.results()["counts"] = counts;
    rm.results()["mean_cp_length"] = ds.mean_cp_length;
    rm.write(a.out);
    say(c, "dataset: " + std::to_string(ds.windows.size()) + " windows (" +
               std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + "/" +
               std::to_string(counts[2]) + ") -> " + a.out);
    return kOk;
}

struct TrainArgs {
    std::string dataset, out;
};

int cmd_train(const Common &c, const TrainArgs &a) {
    const ExperimentConfig cfg = resolve_config(c);
    RunManifest rm("train", cfg, 1);
    const auto files = dataset_files(a.dataset);
    check_inputs(c, rm, a.dataset, files);
    const auto ds = dataset::read_dataset(a.dataset);
    ensure_parent(a.out);
    if (ds.n != cfg.model.input_len)
        throw ConfigError("dataset window length " + std::to_string(ds.n) +
                          " differs from configured n " + std::to_string(cfg.model.input_len));

    std::string combined;
    for (const auto &f : files)
        combined += sha256_file(f);
    const std::string ds_hash = sha256_hex(combined);

    auto result = cnn::train(ds, cfg.model, cfg.train, [&](const cnn::EpochMetrics &m) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "epoch %2zu  train_loss %.4f  valid_loss %.4f  valid_acc %.4f", m.epoch,
                      m.train_loss, m.valid_loss, m.valid_accuracy);
        say(c, buf);
    });

    cnn::ModelProvenance prov{cfg.seed, ds_hash, cfg.preset, ds.mean_cp_length,
                              result.best_epoch};
    cnn::write_model(a.out, result.model, prov);

    std::string csv = "epoch,train_loss,valid_loss,valid_accuracy\n";
    json hist = json::array();
    for (const auto &m : result.history) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", m.epoch, m.train_loss,
                      m.valid_loss, m.valid_accuracy);
        csv += buf;
        hist.push_back({{"epoch", m.epoch},
                        {"train_loss", m.train_loss},
                        {"valid_loss", m.valid_loss},
                        {"valid_accuracy", m.valid_accuracy}});
    }
    const fs::path metrics = with_ext(a.out, ".metrics.csv");
    write_text(metrics, csv);

    json res;
    res["best_epoch"] = result.best_epoch;
    res["history"] = hist;
    const fs::path cm_path = with_ext(a.out, ".confusion.json");
    if (!ds.splits.test.empty()) {
        const auto score = cnn::score_split(result.model, ds, ds.splits.test);
        const auto cm = eval::confusion_matrix(score.predicted, score.actual);
        write_text(cm_path, eval::confusion_json(cm));
        res["test_accuracy"] = score.accuracy;
        res["test_loss"] = score.loss;
        res["confusion_counts"] = cm.counts;
        res["confusion_percent"] = cm.percent;
        char buf[120];
        std::snprintf(buf, sizeof buf, "test accuracy %.4f (best epoch %zu)", score.accuracy,
                      result.best_epoch);
        say(c, buf);
    }
    for (const auto &f : model_files(a.out))
        rm.output(f);
    rm.output(metrics);
    if (fs::exists(cm_path))
        rm.output(cm_path);
    rm.results() = res;
    rm.write(a.out);
    return kOk;
}

struct LocateArgs {
    std::string model, trace, out;
    bool consecutive = false;
    bool svg = false;
};

int cmd_locate(const Common &c, const LocateArgs &a) {
    const ExperimentConfig cfg = resolve_config(c);
    const std::size_t threads = resolve_threads(c);
    RunManifest rm("locate", cfg, threads);
    check_inputs(c, rm, a.model, model_files(a.model));
    check_inputs(c, rm, a.trace, trace_files(a.trace));
    const auto mf = cnn::read_model(a.model);
    const auto tf = read_trace(a.trace);
    ensure_parent(a.out);

    const std::size_t n = mf.model.config().input_len;
    double avg_cp = a.consecutive ? cfg.avg_cp_consecutive : cfg.avg_cp;
    if (avg_cp <= 0.0)
        avg_cp = mf.provenance.mean_cp_length;
    if (avg_cp < 1.0)
        throw ConfigError("locate: avg_cp unknown (model has no mean CP length; set --avg-cp)");
    locator::ScreenConfig sc{odd_kernel(a.consecutive ? cfg.k0_consecutive : cfg.k0), avg_cp,
                             cfg.stride};

    const auto seg = locator::classify_track(mf.model, tf.trace, n, cfg.stride, threads);
    locator::ScreenStats stats;
    const auto loc = locator::screen(seg, sc, &stats);

    locator::write_locations(with_ext(a.out, ".json"),
                             {tf.trace.id(), n, cfg.stride, avg_cp, loc.starts});
    write_text(with_ext(a.out, ".seg.csv"), locator::segmentation_csv(seg));
    rm.output(with_ext(a.out, ".json"));
    rm.output(with_ext(a.out, ".seg.csv"));
    if (a.svg) {
        std::vector<std::size_t> truth;
        if (tf.truth)
            truth = tf.truth->cp_starts;
        write_text(with_ext(a.out, ".svg"), locator::render_svg(tf.trace, seg, loc.starts, truth));
        rm.output(with_ext(a.out, ".svg"));
    }
    std::array<std::size_t, kNumClasses> counts{};
    for (auto cl : seg.classes)
        ++counts[cl];
    rm.results()["starts"] = loc.starts.size();
    rm.results()["windows"] = seg.classes.size();
    rm.results()["track_counts"] = counts;
    rm.results()["k0"] = sc.k0;
    rm.results()["avg_cp"] = avg_cp;
    rm.results()["screen_iterations"] = stats.iterations;
    rm.write(a.out);
    say(c, "locate: " + std::to_string(loc.starts.size()) + " starts from " +
               std::to_string(seg.classes.size()) + " windows -> " + a.out + ".json");
    return kOk;
}

struct EvalArgs {
    std::string locations, trace, out;
    double tolerance = -1.0;
};

int cmd_eval(const Common &c, const EvalArgs &a) {
    const ExperimentConfig cfg = resolve_config(c);
    RunManifest rm("eval", cfg, 1);
    const fs::path loc_path = with_ext(a.locations, ".json");
    check_inputs(c, rm, a.locations, {loc_path});
    check_inputs(c, rm, a.trace, trace_files(a.trace));
    const auto loc = locator::read_locations(loc_path);
    const auto tf = read_trace(a.trace);
    if (!tf.truth || tf.truth->empty())
        throw FormatError(a.trace + ".json: evaluation needs ground truth with at least one CP");
    ensure_parent(a.out);

    double tol = a.tolerance;
    if (tol < 0.0) {
        double avg = loc.avg_cp > 0.0 ? loc.avg_cp : cfg.avg_cp;
        if (avg <= 0.0)
            throw ConfigError("eval: no avg_cp in the locations file; pass --tolerance or --avg-cp");
        tol = eval::default_tolerance(avg);
    }
    const auto score = eval::score_locations(loc.starts, *tf.truth, tol);
    write_text(with_ext(a.out, ".json"), eval::score_json(score, tf.trace.id(), "locations"));
    write_text(with_ext(a.out, ".csv"), eval::score_csv(score));
    rm.output(with_ext(a.out, ".json"));
    rm.output(with_ext(a.out, ".csv"));
    rm.results() = {{"matched_rate", score.hits.matched_rate},
                    {"detection_ratio", score.hits.detection_ratio},
                    {"mean_iou", score.iou.mean},
                    {"std_iou", score.iou.std},
                    {"tolerance", tol}};
    rm.write(a.out);
    std::printf("hits: matched_rate %.4f  detection_ratio %.4f  (%zu predictions, %zu CPs, "
                "tolerance %.1f)\n",
                score.hits.matched_rate, score.hits.detection_ratio, score.hits.predictions,
                score.hits.ground_truth, tol);
    std::printf("iou:  mean %.4f  std %.4f\n", score.iou.mean, score.iou.std);
    return kOk;
}

struct BaselineArgs {
    std::string trace, out, tmpl;
};

int cmd_baseline(const Common &c, const BaselineArgs &a) {
    const ExperimentConfig cfg = resolve_config(c);
    const std::size_t threads = resolve_threads(c);
    RunManifest rm("baseline", cfg, threads);
    check_inputs(c, rm, a.trace, trace_files(a.trace));
    std::vector<float> tmpl;
    if (a.tmpl.empty()) {
        tmpl = synth::make_cp_template().waveform;
    } else {
        check_inputs(c, rm, a.tmpl, trace_files(a.tmpl));
        const auto t = read_trace(a.tmpl).trace.samples();
        tmpl.assign(t.begin(), t.end());
    }
    const auto tf = read_trace(a.trace);
    ensure_parent(a.out);
    const auto loc = eval::matched_filter_locate(
        tf.trace, tmpl, eval::MatchedFilterConfig{cfg.mf_quantile, cfg.mf_floor}, threads);
    locator::write_locations(with_ext(a.out, ".json"),
                             {tf.trace.id(), tmpl.size(), 1, cfg.avg_cp, loc.starts});
    rm.output(with_ext(a.out, ".json"));
    rm.results()["starts"] = loc.starts.size();
    rm.results()["template_length"] = tmpl.size();
    rm.write(a.out);
    say(c, "baseline: " + std::to_string(loc.starts.size()) + " starts -> " + a.out + ".json");
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"houndkit: locate cryptographic primitives in DFS-deformed power traces"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common common;
    SynthArgs sa;
    DatasetArgs da;
    TrainArgs ta;
    LocateArgs la;
    EvalArgs ea;
    BaselineArgs ba;

    auto *synth_cmd = app.add_subcommand("synth", "Synthesize a trace with ground truth (trc-v1)");
    add_common(synth_cmd, common);
    synth_cmd->add_option("--out", sa.out, "Output stem")->required();
    synth_cmd->add_option("--id", sa.id, "Trace id (default: output file name)");

    auto *ds_cmd = app.add_subcommand("dataset", "Build the three-class window dataset (wds-v1)");
    add_common(ds_cmd, common);
    ds_cmd->add_option("--trace", da.traces, "Cipher trace stem(s) with ground truth")->required();
    ds_cmd->add_option("--noise", da.noise, "Pure-noise trace stem")->required();
    ds_cmd->add_option("--out", da.out, "Output stem")->required();

    auto *train_cmd = app.add_subcommand("train", "Train the classifier (mdl-v1)");
    add_common(train_cmd, common);
    train_cmd->add_option("--dataset", ta.dataset, "Dataset stem")->required();
    train_cmd->add_option("--out", ta.out, "Output stem")->required();

    auto *loc_cmd = app.add_subcommand("locate", "Locate CP starts in a trace (loc-v1)");
    add_common(loc_cmd, common);
    loc_cmd->add_option("--model", la.model, "Model stem")->required();
    loc_cmd->add_option("--trace", la.trace, "Trace stem")->required();
    loc_cmd->add_option("--out", la.out, "Output stem")->required();
    loc_cmd->add_flag("--consecutive", la.consecutive,
                      "Use the k0 / avg_cp settings for traces without noise applications");
    loc_cmd->add_flag("--svg", la.svg, "Also render <out>.svg");

    auto *eval_cmd = app.add_subcommand("eval", "Score located starts against ground truth");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--locations", ea.locations, "Locations stem")->required();
    eval_cmd->add_option("--trace", ea.trace, "Trace stem with ground truth")->required();
    eval_cmd->add_option("--out", ea.out, "Report stem")->required();
    eval_cmd->add_option("--tolerance", ea.tolerance, "Match tolerance in samples (default avg_cp / 2)");

    auto *bl_cmd = app.add_subcommand("baseline", "Matched-filter locator (loc-v1)");
    add_common(bl_cmd, common);
    bl_cmd->add_option("--trace", ba.trace, "Trace stem")->required();
    bl_cmd->add_option("--out", ba.out, "Output stem")->required();
    bl_cmd->add_option("--template", ba.tmpl, "Template trace stem (default: undeformed CP template)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*synth_cmd)
            return cmd_synth(common, sa);
        if (*ds_cmd)
            return cmd_dataset(common, da);
        if (*train_cmd)
            return cmd_train(common, ta);
        if (*loc_cmd)
            return cmd_locate(common, la);
        if (*eval_cmd)
            return cmd_eval(common, ea);
        if (*bl_cmd)
            return cmd_baseline(common, ba);
    } catch (const MissingFileError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMissingFile;
    } catch (const HashMismatchError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kHashMismatch;
    } catch (const FormatError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFormatMismatch;
    } catch (const ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadConfig;
    } catch (const IoError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIoFailure;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kGeneric;
    }
    return kGeneric;
}
