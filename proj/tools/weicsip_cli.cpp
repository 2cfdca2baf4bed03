// SPDX-License-Identifier: Apache-2.0
//
// weicsip: environment-aided CSI prediction with learned pilot patterns
// Copyright (C) 2026 The weicsip authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Command-line front end. Talks to the library only through weicsip.h.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "weicsip/weicsip.h"

namespace fs = std::filesystem;

namespace {

// Raised on a failing library call; carries the status for the exit message.
struct LibraryError {
    wc_status status;
    std::string field, message;
};

void check(wc_status status) {
    if (status != WC_OK) throw LibraryError{status, wc_last_error_field(), wc_last_error()};
}

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using Scene = std::unique_ptr<wc_scene, Deleter<wc_scene, wc_scene_free>>;
using Dataset = std::unique_ptr<wc_dataset, Deleter<wc_dataset, wc_dataset_free>>;
using Model = std::unique_ptr<wc_model, Deleter<wc_model, wc_model_free>>;

// Takes ownership of a library-allocated string.
std::string take(char* s) {
    std::string out = s ? s : "";
    wc_string_free(s);
    return out;
}

std::optional<std::string> read_config(const std::string& path) {
    if (path.empty()) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* c_str(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw UsageError("cannot write " + path.string());
}

Dataset load_dataset(const std::string& dir) {
    wc_dataset* d = nullptr;
    check(wc_dataset_load(dir.c_str(), &d));
    return Dataset(d);
}

void print_log(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

std::size_t data_lines(const std::string& csv) {
    std::size_t n = 0;
    for (char c : csv) n += c == '\n';
    return n > 0 ? n - 1 : 0;
}

struct Options {
    std::string config, out, scene, dataset, perturbed, method, checkpoint, split = "test", stats_from, per_sample;
    std::string runs;
    bool perturbed_flag = false, verbose = false;
    std::uint64_t seed = 0;
    double fraction = 0.0;
};

int cmd_scene(const Options& o) {
    const auto cfg = read_config(o.config);
    wc_scene* raw = nullptr;
    check(wc_scene_generate(c_str(cfg), o.perturbed_flag ? 1 : 0, &raw));
    Scene s(raw);
    const fs::path out = fs::path(o.out) / "scene.json";
    check(wc_scene_save(s.get(), out.string().c_str()));
    char* fp = nullptr;
    check(wc_scene_fingerprint(s.get(), &fp));
    std::printf("scene %s written to %s\n", take(fp).c_str(), out.string().c_str());
    return 0;
}

int cmd_dataset(const Options& o) {
    const auto cfg = read_config(o.config);
    wc_scene* raw = nullptr;
    if (!o.scene.empty())
        check(wc_scene_load(o.scene.c_str(), &raw));
    else
        check(wc_scene_generate(c_str(cfg), o.perturbed_flag ? 1 : 0, &raw));
    Scene s(raw);
    wc_dataset* d = nullptr;
    check(wc_dataset_build(s.get(), c_str(cfg), &d));
    Dataset ds(d);
    check(wc_dataset_save(ds.get(), o.out.c_str(), s.get()));
    char* fp = nullptr;
    check(wc_scene_fingerprint(s.get(), &fp));
    char* info = nullptr;
    check(wc_dataset_info(ds.get(), &info));
    const auto j = nlohmann::json::parse(take(info));
    std::printf("dataset of %zu samples (%zu train) from scene %s written to %s\n", j["samples"].get<std::size_t>(),
                j["train"].get<std::size_t>(), take(fp).c_str(), o.out.c_str());
    return 0;
}

int cmd_train(const Options& o) {
    const auto cfg = read_config(o.config);
    auto ds = load_dataset(o.dataset);
    wc_model* raw = nullptr;
    char* summary = nullptr;
    check(wc_train(ds.get(), o.method.c_str(), c_str(cfg), o.seed, o.fraction, o.verbose ? print_log : nullptr,
                   nullptr, &raw, &summary));
    Model m(raw);
    take(summary);
    const std::string out = o.out.empty() ? "checkpoint_" + o.method : o.out;
    check(wc_model_save(m.get(), out.c_str()));
    double nmse = 0, cosine = 0;
    check(wc_evaluate(m.get(), ds.get(), "validation", nullptr, nullptr, &nmse, &cosine));
    std::printf("trained %s: validation nmse %.6g cosine %.6g; checkpoint and curves.csv in %s\n", o.method.c_str(),
                nmse, cosine, out.c_str());
    return 0;
}

int cmd_eval(const Options& o) {
    wc_model* raw = nullptr;
    check(wc_model_load(o.checkpoint.c_str(), &raw));
    Model m(raw);
    auto ds = load_dataset(o.dataset);
    Dataset stats;
    if (!o.stats_from.empty()) stats = load_dataset(o.stats_from);
    double nmse = 0, cosine = 0;
    check(wc_evaluate(m.get(), ds.get(), o.split.c_str(), stats.get(),
                      o.per_sample.empty() ? nullptr : o.per_sample.c_str(), &nmse, &cosine));
    std::printf("%s split: nmse %.17g cosine %.17g\n", o.split.c_str(), nmse, cosine);
    return 0;
}

int cmd_compare(const Options& o) {
    const auto cfg = read_config(o.config);
    auto origin = load_dataset(o.dataset);
    Dataset perturbed;
    if (!o.perturbed.empty()) perturbed = load_dataset(o.perturbed);
    const fs::path out(o.out);
    char* csv = nullptr;
    check(wc_compare(origin.get(), perturbed.get(), c_str(cfg), (out / "checkpoints").string().c_str(), print_log,
                     nullptr, &csv));
    const std::string table = take(csv);
    write_text(out / "report.csv", table);
    std::printf("compare: %zu rows written to %s\n", data_lines(table), (out / "report.csv").string().c_str());
    return 0;
}

int cmd_sweep(const Options& o) {
    const auto cfg = read_config(o.config);
    auto origin = load_dataset(o.dataset);
    const fs::path out(o.out);
    char* csv = nullptr;
    check(wc_sweep(origin.get(), c_str(cfg), (out / "checkpoints").string().c_str(), print_log, nullptr, &csv));
    const std::string table = take(csv);
    write_text(out / "sweep.csv", table);
    std::printf("sweep: %zu rows written to %s\n", data_lines(table), (out / "sweep.csv").string().c_str());
    return 0;
}

int cmd_report(const Options& o) {
    auto origin = load_dataset(o.dataset);
    Dataset perturbed;
    if (!o.perturbed.empty()) perturbed = load_dataset(o.perturbed);
    char* csv = nullptr;
    check(wc_report(o.runs.c_str(), origin.get(), perturbed.get(), &csv));
    const std::string table = take(csv);
    const fs::path out = o.out.empty() ? fs::path(o.runs) / "report.csv" : fs::path(o.out);
    write_text(out, table);
    std::printf("report: %zu rows written to %s\n", data_lines(table), out.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weicsip: environment-aided CSI prediction with learned pilot patterns"};
    app.set_version_flag("--version", std::string(wc_version()));
    app.require_subcommand(1);
    Options o;

    auto* scene = app.add_subcommand("scene", "Generate a street scene");
    scene->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
    scene->add_option("--out", o.out, "Output directory")->required();
    scene->add_flag("--perturbed", o.perturbed_flag, "Generate the layout-perturbed variant");

    auto* dataset = app.add_subcommand("dataset", "Trace a scene and build a normalized dataset");
    dataset->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
    dataset->add_option("--out", o.out, "Output directory")->required();
    dataset->add_option("--scene", o.scene, "Existing scene.json instead of generating one")
        ->check(CLI::ExistingFile);
    dataset->add_flag("--perturbed", o.perturbed_flag, "Use the layout-perturbed scene");

    auto* train = app.add_subcommand("train", "Train one method and save a checkpoint");
    train->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
    train->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--method", o.method, "RSWOEI, RSWEI, DWOEI or WEI-CSIP")->required();
    train->add_option("--seed", o.seed, "Seed (overrides the config)");
    train->add_option("--fraction", o.fraction, "Pilot fraction (overrides the config)");
    train->add_option("--out", o.out, "Checkpoint directory (default checkpoint_<method>)");
    train->add_flag("--verbose", o.verbose, "Print per-epoch curves to stderr");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    eval->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--split", o.split, "train, validation, test or all")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}));
    eval->add_option("--stats-from", o.stats_from, "Dataset whose normalization to use")
        ->check(CLI::ExistingDirectory);
    eval->add_option("--per-sample", o.per_sample, "Write per-sample metrics CSV here");

    auto* compare = app.add_subcommand("compare", "Train and evaluate all methods over seeds");
    compare->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
    compare->add_option("--dataset", o.dataset, "Origin dataset")->required()->check(CLI::ExistingDirectory);
    compare->add_option("--perturbed", o.perturbed, "Perturbed-scene dataset")->check(CLI::ExistingDirectory);
    compare->add_option("--out", o.out, "Output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Pilot-overhead sweep of WEI-CSIP and RSWOEI");
    sweep->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
    sweep->add_option("--dataset", o.dataset, "Origin dataset")->required()->check(CLI::ExistingDirectory);
    sweep->add_option("--out", o.out, "Output directory")->required();

    auto* report = app.add_subcommand("report", "Rebuild a report from saved checkpoints");
    report->add_option("--runs", o.runs, "Checkpoint directory holding runs.json")
        ->required()
        ->check(CLI::ExistingDirectory);
    report->add_option("--dataset", o.dataset, "Origin dataset")->required()->check(CLI::ExistingDirectory);
    report->add_option("--perturbed", o.perturbed, "Perturbed-scene dataset")->check(CLI::ExistingDirectory);
    report->add_option("--out", o.out, "Report CSV path (default <runs>/report.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (scene->parsed()) return cmd_scene(o);
        if (dataset->parsed()) return cmd_dataset(o);
        if (train->parsed()) return cmd_train(o);
        if (eval->parsed()) return cmd_eval(o);
        if (compare->parsed()) return cmd_compare(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (report->parsed()) return cmd_report(o);
    } catch (const LibraryError& e) {
        std::fprintf(stderr, "error: [%s] %s\n", wc_status_name(e.status), e.message.c_str());
        return 1;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
