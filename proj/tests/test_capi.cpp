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

#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "weicsip/weicsip.h"

namespace fs = std::filesystem;

namespace {

const char* tiny_config = R"({
  "grid": {"n_c": 6, "n_t": 3, "m_t": 2},
  "camera": {"view_width": 8, "view_height": 8},
  "dataset": {"spacing": 8.0},
  "model": {"feature_channels": [4, 4, 4], "head_hidden": 4},
  "train": {"epochs": 2, "batch_size": 16},
  "compare": {"seeds": [1], "fractions": [0.25]},
  "sweep": {"fractions": [0.5, 0.25]}
})";

// Takes ownership of a library string.
std::string take(char* s) {
    std::string out = s ? s : "";
    wc_string_free(s);
    return out;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("weicsip_capi_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct World {
    wc_scene* scene = nullptr;
    wc_dataset* data = nullptr;
    World() {
        REQUIRE(wc_scene_generate(tiny_config, 0, &scene) == WC_OK);
        REQUIRE(wc_dataset_build(scene, tiny_config, &data) == WC_OK);
    }
    ~World() {
        wc_dataset_free(data);
        wc_scene_free(scene);
    }
};

void count_lines(const char*, void* user) { ++*static_cast<int*>(user); }

} // namespace

TEST_CASE("status names and version are available") {
    CHECK(std::strlen(wc_version()) > 0);
    CHECK(std::string(wc_status_name(WC_OK)) == "ok");
    CHECK(std::string(wc_status_name(WC_SCHEMA)) == "schema");
    wc_scene_free(nullptr);
    wc_dataset_free(nullptr);
    wc_model_free(nullptr);
    wc_string_free(nullptr);
}

TEST_CASE("config checking fills defaults and names bad keys") {
    char* normalized = nullptr;
    REQUIRE(wc_config_check(nullptr, &normalized) == WC_OK);
    CHECK(take(normalized).find("\"grid\"") != std::string::npos);

    CHECK(wc_config_check("{not json", nullptr) == WC_SCHEMA);
    CHECK(wc_config_check(R"({"train": {"epochz": 3}})", nullptr) == WC_SCHEMA);
    CHECK(std::string(wc_last_error_field()) == "train.epochz");
    CHECK(wc_config_check(R"({"grid": {"n_c": -4}})", nullptr) == WC_SCHEMA);
    CHECK(std::string(wc_last_error_field()) == "grid.n_c");
    CHECK(std::strlen(wc_last_error()) > 0);
}

TEST_CASE("null outputs are rejected") {
    CHECK(wc_scene_generate(nullptr, 0, nullptr) == WC_INVALID_ARGUMENT);
    CHECK(wc_dataset_load("nowhere", nullptr) == WC_INVALID_ARGUMENT);
    CHECK(wc_scene_fingerprint(nullptr, nullptr) == WC_INVALID_ARGUMENT);
}

TEST_CASE("scenes are deterministic and roundtrip through files") {
    wc_scene *a = nullptr, *b = nullptr, *p = nullptr, *loaded = nullptr;
    REQUIRE(wc_scene_generate(tiny_config, 0, &a) == WC_OK);
    REQUIRE(wc_scene_generate(tiny_config, 0, &b) == WC_OK);
    REQUIRE(wc_scene_generate(tiny_config, 1, &p) == WC_OK);
    char *fa = nullptr, *fb = nullptr, *fp = nullptr, *fl = nullptr;
    wc_scene_fingerprint(a, &fa);
    wc_scene_fingerprint(b, &fb);
    wc_scene_fingerprint(p, &fp);
    const std::string sa = take(fa);
    CHECK(sa == take(fb));
    CHECK(sa != take(fp));

    const auto path = scratch("scene.json");
    REQUIRE(wc_scene_save(a, path.c_str()) == WC_OK);
    REQUIRE(wc_scene_load(path.c_str(), &loaded) == WC_OK);
    wc_scene_fingerprint(loaded, &fl);
    CHECK(take(fl) == sa);
    CHECK(wc_scene_load("/nonexistent/scene.json", &loaded) == WC_IO);
    fs::remove(path);
    for (auto* s : {a, b, p, loaded}) wc_scene_free(s);
}

TEST_CASE("datasets roundtrip bit-exactly through the C API") {
    World w;
    char* info = nullptr;
    REQUIRE(wc_dataset_info(w.data, &info) == WC_OK);
    const std::string before = take(info);
    CHECK(before.find("\"samples\"") != std::string::npos);

    const auto dir = scratch("dataset");
    REQUIRE(wc_dataset_save(w.data, dir.c_str(), w.scene) == WC_OK);
    CHECK(fs::exists(dir / "scene.json"));
    wc_dataset* loaded = nullptr;
    REQUIRE(wc_dataset_load(dir.c_str(), &loaded) == WC_OK);
    wc_dataset_info(loaded, &info);
    CHECK(take(info) == before);

    // Saving the loaded copy reproduces every file byte for byte.
    const auto again = scratch("dataset_again");
    REQUIRE(wc_dataset_save(loaded, again.c_str(), w.scene) == WC_OK);
    for (const auto& e : fs::directory_iterator(dir)) {
        CAPTURE(e.path().filename().string());
        CHECK(slurp(e.path()) == slurp(again / e.path().filename()));
    }
    wc_dataset_free(loaded);
    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST_CASE("training, checkpoints and evaluation through the C API") {
    World w;
    wc_model* model = nullptr;
    CHECK(wc_train(w.data, "WEI-CSIPP", tiny_config, 0, 0.0, nullptr, nullptr, &model, nullptr) == WC_INVALID_ARGUMENT);
    CHECK(std::string(wc_last_error_field()) == "method");
    CHECK(model == nullptr);

    int lines = 0;
    char* summary = nullptr;
    REQUIRE(wc_train(w.data, "WEI-CSIP", tiny_config, 3, 0.25, count_lines, &lines, &model, &summary) == WC_OK);
    CHECK(lines == 2);
    const std::string s = take(summary);
    CHECK(s.find("best_val_nmse") != std::string::npos);

    double n1 = 0, c1 = 0, n2 = 0, c2 = 0;
    const auto csv = scratch("per_sample.csv");
    REQUIRE(wc_evaluate(model, w.data, "test", nullptr, csv.c_str(), &n1, &c1) == WC_OK);
    CHECK(fs::exists(csv));
    CHECK(n1 > 0.0);

    const auto dir = scratch("model");
    REQUIRE(wc_model_save(model, dir.c_str()) == WC_OK);
    CHECK(fs::exists(dir / "curves.csv"));
    CHECK(slurp(dir / "curves.csv").rfind("epoch,train_loss,val_nmse\n", 0) == 0);
    wc_model* loaded = nullptr;
    REQUIRE(wc_model_load(dir.c_str(), &loaded) == WC_OK);
    REQUIRE(wc_evaluate(loaded, w.data, "test", nullptr, nullptr, &n2, &c2) == WC_OK);
    CHECK(n1 == n2);
    CHECK(c1 == c2);
    CHECK(wc_evaluate(loaded, w.data, "holdout", nullptr, nullptr, &n2, &c2) != WC_OK);

    char* info = nullptr;
    REQUIRE(wc_model_info(loaded, &info) == WC_OK);
    CHECK(take(info).find("WEI-CSIP") != std::string::npos);

    // A model for the default desk grid does not fit this dataset.
    wc_scene* desk_scene = nullptr;
    wc_dataset* desk = nullptr;
    REQUIRE(wc_scene_generate(nullptr, 0, &desk_scene) == WC_OK);
    const char* coarse = R"({"dataset": {"spacing": 25.0}, "camera": {"view_width": 8, "view_height": 8}})";
    REQUIRE(wc_dataset_build(desk_scene, coarse, &desk) == WC_OK);
    CHECK(wc_evaluate(loaded, desk, "test", nullptr, nullptr, &n2, &c2) == WC_SHAPE_MISMATCH);

    wc_dataset_free(desk);
    wc_scene_free(desk_scene);
    wc_model_free(loaded);
    wc_model_free(model);
    fs::remove_all(dir);
    fs::remove(csv);
}

TEST_CASE("compare and report agree cell for cell") {
    World w;
    wc_scene* ps = nullptr;
    wc_dataset* pd = nullptr;
    REQUIRE(wc_scene_generate(tiny_config, 1, &ps) == WC_OK);
    REQUIRE(wc_dataset_build(ps, tiny_config, &pd) == WC_OK);
    const auto dir = scratch("compare");
    char *csv = nullptr, *again = nullptr;
    REQUIRE(wc_compare(w.data, pd, tiny_config, dir.c_str(), nullptr, nullptr, &csv) == WC_OK);
    const std::string table = take(csv);
    CHECK(table.rfind("method,pilot_fraction,seed,split,scene,nmse,cosine\n", 0) == 0);
    REQUIRE(wc_report(dir.c_str(), w.data, pd, &again) == WC_OK);
    CHECK(take(again) == table);

    char* sweep = nullptr;
    REQUIRE(wc_sweep(w.data, tiny_config, nullptr, nullptr, nullptr, &sweep) == WC_OK);
    CHECK(take(sweep).find("RSWOEI,0.5,") != std::string::npos);
    CHECK(wc_report("/nonexistent", w.data, nullptr, &again) == WC_IO);

    wc_dataset_free(pd);
    wc_scene_free(ps);
    fs::remove_all(dir);
}
