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

// End-to-end acceptance run: one [PASS]/[FAIL] line per criterion.

#include "gradcheck.hpp"
#include "oracles.hpp"

#include "houndkit/cnn/model.hpp"
#include "houndkit/hashing.hpp"
#include "houndkit/locator.hpp"
#include "houndkit/trace_io.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace houndkit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Report {
    int failures = 0;
    void line(int id, const std::string &name, bool ok, const std::string &details) {
        std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), details.c_str());
        std::fflush(stdout);
        if (!ok)
            ++failures;
    }
};

void info(const std::string &msg) {
    std::printf("[INFO] %s\n", msg.c_str());
    std::fflush(stdout);
}

struct Pipeline {
    fs::path dir;
    bool ok = true;
    std::string failed_step;
    double wall = 0.0;

    std::string p(const std::string &name) const { return (dir / name).string(); }

    void run(const std::string &args) {
        if (!ok)
            return;
        const std::string cmd = std::string(HOUNDKIT_CLI) + " " + args +
                                " --threads 1 --quiet > " + p("log.txt") + " 2>&1";
        const int rc = std::system(cmd.c_str());
        if (!WIFEXITED(rc) || WEXITSTATUS(rc) != 0) {
            ok = false;
            failed_step = args;
        }
    }

    json manifest(const std::string &stem) const {
        return json::parse(read_text(p(stem + ".run.json")));
    }
};

// synth -> dataset -> train -> locate -> eval, plus the matched-filter runs.
Pipeline run_pipeline(const fs::path &dir) {
    Pipeline pl;
    pl.dir = dir;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto t0 = Clock::now();
    pl.run("synth --seed 101 --cps 1000 --out " + pl.p("train_trace"));
    pl.run("synth --seed 102 --cps 0 --out " + pl.p("noise_trace"));
    pl.run("dataset --seed 103 --trace " + pl.p("train_trace") + " --noise " +
           pl.p("noise_trace") + " --out " + pl.p("ds"));
    pl.run("train --seed 104 --dataset " + pl.p("ds") + " --out " + pl.p("model"));
    pl.run("synth --seed 105 --cps 50 --out " + pl.p("inter"));
    pl.run("synth --seed 106 --cps 50 --interleave false --out " + pl.p("cons"));
    pl.run("synth --seed 105 --cps 50 --dfs false --out " + pl.p("nodfs"));
    pl.run("locate --model " + pl.p("model") + " --trace " + pl.p("inter") + " --out " +
           pl.p("loc_inter"));
    pl.run("locate --consecutive --model " + pl.p("model") + " --trace " + pl.p("cons") +
           " --out " + pl.p("loc_cons"));
    pl.run("eval --locations " + pl.p("loc_inter") + " --trace " + pl.p("inter") + " --out " +
           pl.p("eval_inter"));
    pl.run("eval --locations " + pl.p("loc_cons") + " --trace " + pl.p("cons") + " --out " +
           pl.p("eval_cons"));
    pl.run("baseline --trace " + pl.p("inter") + " --out " + pl.p("mf_inter"));
    pl.run("baseline --trace " + pl.p("nodfs") + " --out " + pl.p("mf_nodfs"));
    if (pl.ok) {
        const double avg = locator::read_locations(pl.p("loc_inter.json")).avg_cp;
        const std::string tol = fmt("%.17g", avg / 2.0);
        pl.run("eval --tolerance " + tol + " --locations " + pl.p("mf_inter") + " --trace " +
               pl.p("inter") + " --out " + pl.p("eval_mf_inter"));
        pl.run("eval --tolerance " + tol + " --locations " + pl.p("mf_nodfs") + " --trace " +
               pl.p("nodfs") + " --out " + pl.p("eval_mf_nodfs"));
    }
    pl.wall = seconds_since(t0);
    return pl;
}

void criterion_classifier(Report &r, const Pipeline &pl) {
    if (!pl.ok) {
        r.line(1, "classifier quality", false, "pipeline step failed: " + pl.failed_step);
        return;
    }
    const json ds = pl.manifest("ds")["results"];
    const json tr = pl.manifest("model");
    const double acc = tr["results"]["test_accuracy"];
    const double secs = tr["runtime"]["wall_seconds"];
    const auto pct = tr["results"]["confusion_percent"];
    double min_diag = 100.0;
    for (int c = 0; c < 3; ++c)
        min_diag = std::min(min_diag, pct[c][c].get<double>());
    std::size_t min_class = SIZE_MAX;
    for (const auto &c : ds["counts"])
        min_class = std::min(min_class, c.get<std::size_t>());
    const bool ok = acc >= 0.97 && min_diag >= 95.0 && secs <= 600.0 && min_class >= 600;
    r.line(1, "classifier quality", ok,
           "test accuracy " + fmt("%.4f", acc) + " (>= 0.97), min diagonal " +
               fmt("%.2f", min_diag) + "% (>= 95), " + std::to_string(min_class) +
               " windows/class (>= 600), train " + fmt("%.1f", secs) + " s (<= 600)");
}

void criterion_localization(Report &r, const Pipeline &pl) {
    if (!pl.ok) {
        r.line(2, "localization", false, "pipeline step failed: " + pl.failed_step);
        return;
    }
    bool ok = true;
    std::string details;
    for (const char *which : {"inter", "cons"}) {
        const json e = pl.manifest(std::string("eval_") + which)["results"];
        const double m = e["matched_rate"], iou = e["mean_iou"];
        ok = ok && m == 1.0 && iou >= 0.90;
        details += std::string(which) + ": matched " + fmt("%.4f", m) + ", detection " +
                   fmt("%.3f", e["detection_ratio"].get<double>()) + ", mean IoU " +
                   fmt("%.4f", iou) + " (std " + fmt("%.4f", e["std_iou"].get<double>()) +
                   "); ";
    }
    r.line(2, "localization", ok, details + "bounds: matched = 1, mean IoU >= 0.90");
}

void criterion_baseline(Report &r, const Pipeline &pl) {
    if (!pl.ok) {
        r.line(3, "baseline contrast", false, "pipeline step failed: " + pl.failed_step);
        return;
    }
    const json dfs = pl.manifest("eval_mf_inter")["results"];
    const json flat = pl.manifest("eval_mf_nodfs")["results"];
    const double a = dfs["matched_rate"], b = flat["matched_rate"];
    r.line(3, "baseline contrast", a < 0.5 && b >= 0.9,
           "matched filter on DFS trace " + fmt("%.4f", a) + " (< 0.5), without DFS " +
               fmt("%.4f", b) + " (>= 0.9)");
}

void criterion_oracle(Report &r) {
    const auto t0 = Clock::now();
    const auto sweep = testing::screen_oracle_sweep(12, {1, 3});
    const double secs = seconds_since(t0);
    r.line(4, "screening oracle", sweep.mismatches == 0 && secs < 60.0,
           std::to_string(sweep.cases) + " (track, k) cases, " +
               std::to_string(sweep.mismatches) + " mismatches, " + fmt("%.1f", secs) + " s");
}

void criterion_clean_track(Report &r) {
    locator::SegmentationTrack t;
    for (auto [c, n] : std::vector<std::pair<std::uint8_t, std::size_t>>{
             {2, 20}, {0, 5}, {1, 45}, {2, 20}, {0, 5}, {1, 45}, {2, 10}})
        t.classes.insert(t.classes.end(), n, c);
    t.stride = 50;
    t.n = 256;
    const auto loc = locator::screen(t, {5, 2500.0, 50});
    std::string got;
    for (auto s : loc.starts)
        got += (got.empty() ? "" : ", ") + std::to_string(s);
    r.line(5, "clean-track screen", loc.starts == std::vector<std::size_t>{1000, 4500},
           "starts [" + got + "], expected [1000, 4500]");
}

void criterion_gradients(Report &r) {
    double worst_layer = 0.0;
    for (std::size_t k : {1u, 4u, 5u, 16u}) {
        const auto [w, in] = testing::check_conv(3, 4, k, 2, 20, 100 + k);
        worst_layer = std::max({worst_layer, w, in});
    }
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto bn = testing::check_batchnorm(4, 40, seed);
        worst_layer = std::max({worst_layer, bn.gamma, bn.beta, bn.input});
    }
    cnn::ModelConfig cfg;
    cfg.input_len = 32;
    double worst_head = 0.0;
    for (const auto &t : testing::check_model_gradients(cfg, 2, 17, 1e-3, "fc2."))
        worst_head = std::max(worst_head, t.rel_error);
    double worst_model = 0.0;
    for (const auto &t : testing::check_model_gradients(cfg, 2, 17, 1e-5))
        worst_model = std::max(worst_model, t.rel_error);

    const cnn::Model m(cfg, 9);
    const auto inputs = testing::gaussian(32 * 10000, 10);
    const std::vector<float> in(inputs.begin(), inputs.end());
    const auto probs = cnn::predict_proba(m, std::span<const float>(in), 10000);
    double worst_sum = 0.0;
    for (std::size_t i = 0; i < 10000; ++i) {
        double s = 0;
        for (float p : probs.row(i))
            s += p;
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
    const bool ok = worst_layer < 1e-3 && worst_head < 1e-3 && worst_model < 1e-3 &&
                    worst_sum < 1e-6;
    r.line(6, "gradient checks", ok,
           "conv/batchnorm layers (h=1e-3) max rel err " + fmt("%.2e", worst_layer) +
               ", classifier head (h=1e-3) " + fmt("%.2e", worst_head) +
               ", whole network (h=1e-5) " + fmt("%.2e", worst_model) +
               ", max |softmax row sum - 1| over 1e4 inputs " + fmt("%.2e", worst_sum));
}

void criterion_iou(Report &r) {
    const auto s = testing::iou_oracle_sweep(10000, 2024);
    r.line(7, "IoU oracle", s.random_mismatches == 0 && s.closed_mismatches == 0,
           std::to_string(s.random_cases) + " random triples (" +
               std::to_string(s.random_mismatches) + " mismatches), " +
               std::to_string(s.closed_cases) + " closed-form offsets (" +
               std::to_string(s.closed_mismatches) + " mismatches)");
}

void criterion_determinism(Report &r, const Pipeline &a, const Pipeline &b) {
    if (!a.ok || !b.ok) {
        r.line(8, "determinism", false,
               "pipeline step failed: " + (a.ok ? b.failed_step : a.failed_step));
        return;
    }
    std::size_t compared = 0;
    std::vector<std::string> differ;
    for (const auto &e : fs::directory_iterator(a.dir)) {
        const std::string name = e.path().filename().string();
        if (name == "log.txt")
            continue;
        const fs::path other = b.dir / name;
        ++compared;
        if (!fs::exists(other)) {
            differ.push_back(name + " (missing)");
            continue;
        }
        bool same;
        if (name.ends_with(".run.json")) {
            json ja = json::parse(read_text(e.path())), jb = json::parse(read_text(other));
            ja.erase("runtime");
            jb.erase("runtime");
            same = ja == jb;
        } else {
            same = read_text(e.path()) == read_text(other);
        }
        if (!same)
            differ.push_back(name);
    }
    std::string list;
    for (const auto &d : differ)
        list += " " + d;
    const bool ok = differ.empty() && compared > 0 && a.wall <= 900.0;
    r.line(8, "determinism", ok,
           std::to_string(compared) + " artifacts compared, " + std::to_string(differ.size()) +
               " differ" + (list.empty() ? "" : " [" + list + " ]") +
               "; end-to-end " + fmt("%.1f", a.wall) + " s (<= 900)");
}

} // namespace

int main() {
    const fs::path root = fs::temp_directory_path() /
                          ("houndkit_acceptance_" + std::to_string(::getpid()));
    Report report;

    info("pipeline run A in " + (root / "a").string());
    const Pipeline a = run_pipeline(root / "a");
    info("run A " + fmt("%.1f", a.wall) + " s");
    info("pipeline run B in " + (root / "b").string());
    const Pipeline b = run_pipeline(root / "b");
    info("run B " + fmt("%.1f", b.wall) + " s");

    criterion_classifier(report, a);
    criterion_localization(report, a);
    criterion_baseline(report, a);
    criterion_oracle(report);
    criterion_clean_track(report);
    criterion_gradients(report);
    criterion_iou(report);
    criterion_determinism(report, a, b);

    if (report.failures == 0)
        fs::remove_all(root);
    else
        info("artifacts kept in " + root.string());
    std::printf("%s: %d of 8 criteria failed\n", report.failures ? "FAILED" : "OK",
                report.failures);
    return report.failures == 0 ? 0 : 1;
}
