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

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "weicsip/error.hpp"
#include "weicsip/evalharness.hpp"

using namespace weicsip;
using namespace weicsip::eval;
namespace fs = std::filesystem;
using cvec = std::vector<std::complex<double>>;

namespace {

Error error_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    return Error(ErrorCode::ok, "", "no error");
}

cvec random_block(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    cvec out(n);
    for (auto& v : out) v = {g(rng), g(rng)};
    return out;
}

// Independent forms of the two metrics.
double nmse_oracle(const cvec& h, const cvec& e) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        num += std::pow(h[i].real() - e[i].real(), 2) + std::pow(h[i].imag() - e[i].imag(), 2);
        den += h[i].real() * h[i].real() + h[i].imag() * h[i].imag();
    }
    return num / den;
}

double cosine_oracle(const cvec& h, const cvec& e, std::size_t pairs) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < pairs; ++j) {
        std::complex<double> ip = 0.0;
        double nh = 0.0, ne = 0.0;
        for (std::size_t k = j; k < h.size(); k += pairs) {
            ip += std::conj(h[k]) * e[k];
            nh += std::norm(h[k]);
            ne += std::norm(e[k]);
        }
        num += std::abs(ip);
        den += std::sqrt(nh) * std::sqrt(ne);
    }
    return num / den;
}

struct Fixture {
    scene::Scene scene, perturbed;
    channel::Dataset origin, fresh;
};

// Small grid, small views and a coarse spacing keep training to seconds.
const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        channel::DatasetOptions o;
        o.grid.n_c = 6;
        o.grid.n_t = 3;
        o.grid.m_t = 2;
        o.camera.view_width = 8;
        o.camera.view_height = 8;
        o.spacing = 8.0;
        x.scene = scene::generate_scene(scene::SceneConfig{}, 7);
        x.perturbed = scene::perturb_scene(x.scene, 8);
        x.origin = channel::build_dataset(x.scene, o, 11);
        channel::normalize(x.origin);
        x.fresh = channel::build_dataset(x.perturbed, o, 11);
        return x;
    }();
    return f;
}

TrainConfig small_train(std::size_t epochs = 3) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 16;
    c.model.feature_channels = {4, 4, 4};
    c.model.head_hidden = 4;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("weicsip_eval_" + name);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("nmse and cosine agree with direct formulas on random pairs") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> pairs_d(1, 6), cells_d(1, 12);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t pairs = pairs_d(rng), n = pairs * cells_d(rng);
        const auto h = random_block(n, rng), e = random_block(n, rng);
        CHECK(nmse(h, e) == doctest::Approx(nmse_oracle(h, e)).epsilon(1e-12));
        CHECK(cosine_similarity(h, e, pairs) == doctest::Approx(cosine_oracle(h, e, pairs)).epsilon(1e-12));
    }
}

TEST_CASE("metric identities hold on 1000 random blocks") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi), mag(0.1, 10.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t pairs = 4, n = pairs * 9;
        const auto h = random_block(n, rng), e = random_block(n, rng);
        const std::complex<double> c = std::polar(mag(rng), phase(rng));
        const std::complex<double> rot = std::polar(1.0, phase(rng));
        cvec zero(n), twice(n), scaled(n), rotated(n), ch(n), ce(n);
        for (std::size_t i = 0; i < n; ++i) {
            twice[i] = 2.0 * h[i];
            scaled[i] = c * h[i];
            rotated[i] = rot * h[i];
            ch[i] = c * h[i];
            ce[i] = c * e[i];
        }
        worst = std::max({worst, std::abs(nmse(h, h)), std::abs(nmse(h, zero) - 1.0), std::abs(nmse(h, twice) - 1.0),
                          std::abs(cosine_similarity(h, h, pairs) - 1.0),
                          std::abs(cosine_similarity(h, scaled, pairs) - 1.0),
                          std::abs(cosine_similarity(h, rotated, pairs) - 1.0),
                          std::abs(nmse(ch, ce) - nmse(h, e))});
        const double cs = cosine_similarity(h, e, pairs);
        CHECK(cs >= 0.0);
        CHECK(cs <= 1.0 + 1e-12);
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("nmse equals the training loss rescaled by the block energy") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_t = 3, n_c = 5, m_t = 4, n_r = 2, pairs = m_t * n_r;
        const auto h = random_block(n_t * n_c * pairs, rng), e = random_block(h.size(), rng);
        double energy = 0.0;
        for (auto v : h) energy += std::norm(v);
        const double loss = predictor::loss_mse(h, e, pairs);
        CHECK(std::abs(nmse(h, e) - loss * static_cast<double>(pairs) / energy) < 1e-10);

        // The graph loss on slice tensors is the same quantity.
        const auto hs = predictor::to_slices(h, n_t, n_c, m_t, n_r), es = predictor::to_slices(e, n_t, n_c, m_t, n_r);
        const numerics::Shape shape{pairs, 2, n_t, n_c};
        const double graph =
            predictor::loss_mse(numerics::Tensor::from(shape, es), numerics::Tensor::from(shape, hs), 1, pairs).item();
        CHECK(std::abs(graph - loss) < 1e-10 * std::max(1.0, loss));
    }
}

TEST_CASE("evaluate_with scores perfect and zero predictors exactly") {
    const auto& d = fixture().origin;
    const auto& stats = *d.stats;
    const auto& test = d.splits.test;

    const auto perfect = evaluate_with(d, test, stats, [&](std::size_t i) {
        return channel::normalized_values(d.samples[i].csi, stats);
    });
    CHECK(perfect.nmse < 1e-24);
    CHECK(perfect.cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(perfect.indices == test);

    const auto zero = evaluate_with(d, test, stats, [&](std::size_t) { return cvec(d.grid.numel()); });
    CHECK(zero.nmse == 1.0);
    CHECK(zero.cosine == 0.0);
    for (double v : zero.per_sample_nmse) CHECK(v == 1.0);

    // A predictor off by a global factor has nmse (1 - c)^2 and cosine 1.
    const auto half = evaluate_with(d, test, stats, [&](std::size_t i) {
        auto v = channel::normalized_values(d.samples[i].csi, stats);
        for (auto& x : v) x *= 0.5;
        return v;
    });
    CHECK(half.nmse == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(half.cosine == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(error_of([&] { evaluate_with(d, {}, stats, [&](std::size_t) { return cvec{}; }); }).code() ==
          ErrorCode::invalid_argument);
}

TEST_CASE("aggregate metrics are the mean of the exported per-sample values") {
    const auto& d = fixture().origin;
    std::mt19937_64 rng(4);
    const auto m = evaluate_with(d, d.splits.test, *d.stats, [&](std::size_t i) {
        auto v = channel::normalized_values(d.samples[i].csi, *d.stats);
        for (auto& x : v) x += std::complex<double>(0.1 * std::normal_distribution<double>()(rng), 0.0);
        return v;
    });
    const auto path = scratch("per_sample.csv");
    write_per_sample_csv(path, m);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "index,nmse,cosine");
    double sum_n = 0.0, sum_c = 0.0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::stringstream s(line);
        std::string idx, n, c;
        std::getline(s, idx, ',');
        std::getline(s, n, ',');
        std::getline(s, c, ',');
        CHECK(std::stoul(idx) == m.indices[rows]);
        sum_n += std::stod(n);
        sum_c += std::stod(c);
        ++rows;
    }
    CHECK(rows == d.splits.test.size());
    CHECK(sum_n / static_cast<double>(rows) == m.nmse);
    CHECK(sum_c / static_cast<double>(rows) == m.cosine);
    fs::remove(path);
}

TEST_CASE("training is deterministic and reduces the loss") {
    const auto& d = fixture().origin;
    for (auto kind : {MethodKind::rswoei, MethodKind::wei_csip}) {
        CAPTURE(predictor::to_string(kind));
        auto a = train(kind, d, small_train());
        auto b = train(kind, d, small_train());
        const auto da = scratch("det_a"), db = scratch("det_b");
        a.model.save(da);
        b.model.save(db);
        for (const auto& entry : fs::directory_iterator(da)) {
            CAPTURE(entry.path().filename().string());
            CHECK(slurp(entry.path()) == slurp(db / entry.path().filename()));
        }
        CHECK(a.final_train_loss < a.initial_train_loss);
        REQUIRE(a.curves.size() == 3);
        CHECK(a.best_val_nmse == std::min_element(a.curves.begin(), a.curves.end(), [](auto& x, auto& y) {
                                     return x.val_nmse < y.val_nmse;
                                 })->val_nmse);
        CHECK(a.curves[a.best_epoch - 1].val_nmse == a.best_val_nmse);
        // The kept parameters are the best-validation ones.
        CHECK(evaluate(a.model, d, "validation").nmse == a.best_val_nmse);
        const auto reloaded = predictor::Model::load(da);
        CHECK(evaluate(reloaded, d, "test").nmse == evaluate(a.model, d, "test").nmse);
        fs::remove_all(da);
        fs::remove_all(db);
    }
}

TEST_CASE("a different seed gives a different model") {
    const auto& d = fixture().origin;
    auto c = small_train(1);
    const auto a = train(MethodKind::rswoei, d, c);
    c.seed = 2;
    const auto b = train(MethodKind::rswoei, d, c);
    CHECK(a.model.random_pattern().cells != b.model.random_pattern().cells);
}

TEST_CASE("curves are written with the documented header") {
    const std::vector<EpochRecord> curves{{1, 0.5, 0.25}, {2, 0.125, 0.0625}};
    const auto path = scratch("curves.csv");
    write_curves_csv(path, curves);
    CHECK(slurp(path) == "epoch,train_loss,val_nmse\n1,0.5,0.25\n2,0.125,0.0625\n");
    fs::remove(path);
}

TEST_CASE("training and evaluation reject incompatible inputs") {
    const auto& f = fixture();
    CHECK(error_of([&] { train(MethodKind::rswoei, f.fresh, small_train()); }).field() == "dataset");
    auto bad = small_train();
    bad.batch_size = 0;
    CHECK(error_of([&] { train(MethodKind::rswoei, f.origin, bad); }).code() == ErrorCode::invalid_argument);

    // A model built for the desk grid cannot score the small dataset.
    const predictor::Model desk(predictor::PredictorConfig{}, MethodKind::rswoei, 1);
    CHECK(error_of([&] { evaluate(desk, f.origin, "test"); }).code() == ErrorCode::shape_mismatch);
    CHECK(error_of([&] { evaluate(desk, f.origin, "nonsense"); }).code() != ErrorCode::ok);
}

TEST_CASE("comparison reruns from checkpoints reproduce every cell") {
    const auto& f = fixture();
    ExperimentOptions o;
    o.methods = {predictor::all_methods, predictor::all_methods + 4};
    o.seeds = {1, 2};
    o.fractions = {0.25};
    o.train = small_train(2);
    const auto dir = scratch("compare");
    o.checkpoint_dir = dir;
    const auto table = run_comparison(f.origin, &f.fresh, o);
    CHECK(table.rows.size() == 4 * 2 * 2);
    CHECK(fs::exists(dir / "runs.json"));
    CHECK(fs::exists(dir / checkpoint_name(MethodKind::wei_csip, 0.25, 2) / "curves.csv"));

    const auto again = report_from_checkpoints(dir, f.origin, &f.fresh);
    CHECK(again.csv() == table.csv());

    // Header, one row per run and scene, then one median per method and scene.
    std::istringstream lines(table.csv());
    std::string line;
    std::getline(lines, line);
    CHECK(line == report_header);
    std::size_t rows = 0, medians = 0;
    while (std::getline(lines, line)) {
        ++rows;
        if (line.find(",median,") != std::string::npos) ++medians;
    }
    CHECK(rows == 16 + 8);
    CHECK(medians == 8);
    for (const auto& r : table.rows) CHECK((r.scene == "origin" ? r.split == "test" : r.split == "all"));
    fs::remove_all(dir);
}

TEST_CASE("report medians take the middle seed value") {
    ReportTable t;
    for (auto [seed, v] : {std::pair{"1", 0.3}, {"2", 0.1}, {"3", 0.2}})
        t.rows.push_back({"RSWOEI", 0.125, seed, "test", "origin", v, 1.0 - v});
    t.rows.push_back({"RSWOEI", 0.2, "1", "test", "origin", 0.05, 0.95});
    const auto m = t.median("RSWOEI", 0.125, "origin");
    REQUIRE(m.has_value());
    CHECK(m->nmse == 0.2);
    CHECK(m->cosine == 0.8);
    CHECK(m->seed == "median");
    CHECK_FALSE(t.median("WEI-CSIP", 0.125, "origin").has_value());
    CHECK(t.medians("origin").size() == 2);

    t.rows.push_back({"RSWOEI", 0.125, "4", "test", "origin", 0.4, 0.6});
    CHECK(t.median("RSWOEI", 0.125, "origin")->nmse == doctest::Approx(0.25));
}

TEST_CASE("overhead sweep trains both compared methods at every fraction") {
    const auto& d = fixture().origin;
    const auto t = overhead_sweep(d, {0.5, 0.25}, {1}, small_train(1));
    CHECK(t.rows.size() == 4);
    for (const auto& r : t.rows) CHECK((r.method == "WEI-CSIP" || r.method == "RSWOEI"));
}

TEST_CASE("run configuration roundtrips and names bad keys") {
    const auto desk = desk_preset();
    CHECK(desk.dataset.grid.m_t == 16);
    CHECK(desk.dataset.grid.n_c == 24);
    CHECK(desk.dataset.grid.n_t == 3);
    CHECK(sampler::pilots_for_fraction(desk.train.pilot_fraction, desk.dataset.grid.cells()) == 9);
    CHECK(desk.seeds.size() == 3);
    CHECK(desk.train.epochs == 100);
    CHECK(desk.train.lr_dps == 0.008);

    const auto j = to_json(desk);
    CHECK(to_json(run_config_from_json(j)) == j);

    auto bad = j;
    bad["train"]["learning_rate"] = 1.0;
    CHECK(error_of([&] { run_config_from_json(bad); }).code() == ErrorCode::schema);
    bad = j;
    bad["grid"]["n_c"] = "many";
    const auto e = error_of([&] { run_config_from_json(bad); });
    CHECK(e.code() == ErrorCode::schema);
    CHECK(e.field() == "grid.n_c");
    bad = j;
    bad["model"]["feature_channels"] = {8, -1, 16};
    CHECK(error_of([&] { run_config_from_json(bad); }).field() == "model.feature_channels[1]");
    bad = j;
    bad["dataset"]["spacing"] = 1;
    CHECK(run_config_from_json(bad).dataset.spacing == 1.0);
}

TEST_CASE("checkpoint names encode method, fraction and seed") {
    CHECK(checkpoint_name(MethodKind::wei_csip, 0.125, 3) == "WEI-CSIP_f0.125000_s3");
    CHECK(checkpoint_name(MethodKind::rswoei, 0.2, 1) == "RSWOEI_f0.200000_s1");
}
