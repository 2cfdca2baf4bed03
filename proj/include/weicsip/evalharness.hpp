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

#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "weicsip/dataset.hpp"
#include "weicsip/predictor.hpp"
#include "weicsip/scene.hpp"

namespace weicsip::eval {

using predictor::MethodKind;
using predictor::Model;

// ---- metrics ---------------------------------------------------------------

/// Σ‖H − Ĥ‖² / Σ‖H‖² over every antenna pair.
double nmse(std::span<const std::complex<double>> h, std::span<const std::complex<double>> h_hat);

/// Σ_ij |⟨H_ij, Ĥ_ij⟩| / Σ_ij ‖H_ij‖‖Ĥ_ij‖. Blocks are laid out cell-major
/// with `antenna_pairs` consecutive entries per time-frequency cell. A zero
/// Ĥ scores 0; a zero H is an error.
double cosine_similarity(std::span<const std::complex<double>> h, std::span<const std::complex<double>> h_hat,
                         std::size_t antenna_pairs);

// ---- configuration ---------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    double lr_feature = 0.0008;
    double lr_dps = 0.008;
    double lr_predictor = 0.0008;
    double pilot_fraction = 0.125;
    /// Architecture template; grid and pilot count are filled from the dataset.
    predictor::PredictorConfig model;
    bool verbose = false;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& train, const nlohmann::json& model);

/// Model configuration for a dataset grid and pilot fraction.
predictor::PredictorConfig model_config_for(const channel::Dataset& d, const TrainConfig& c);

/// Whole run configuration as read from the CLI config file.
struct RunConfig {
    scene::SceneConfig scene;
    std::uint64_t scene_seed = 7;
    std::uint64_t perturb_seed = 8;
    channel::DatasetOptions dataset;
    std::uint64_t dataset_seed = 11;
    TrainConfig train;
    std::vector<MethodKind> methods{predictor::all_methods, predictor::all_methods + 4};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<double> compare_fractions{0.125};
    std::vector<double> sweep_fractions{0.2, 0.125};
};

/// Parses the documented schema; unknown keys and bad types raise
/// ErrorCode::schema naming the field.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

/// Desk-scale preset: M_t=16, N_r=1, N_c=24, N_T=3, N_p=9, 4×(32×32) views,
/// ~1200 samples, 100 epochs, 3 seeds.
RunConfig desk_preset();
/// Full-scale values (documentation; far beyond a desk budget).
RunConfig full_preset();

// ---- training and evaluation ------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_nmse = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochRecord> curves;
    std::size_t best_epoch = 0;
    double best_val_nmse = 0.0;
    double initial_train_loss = 0.0; // before the first update
    double final_train_loss = 0.0;   // after the last update
    double seconds = 0.0;
};

/// Mini-batch Adam on L_H; keeps the best-validation-NMSE parameters.
/// Deterministic per (dataset, config).
TrainResult train(MethodKind kind, const channel::Dataset& dataset, const TrainConfig& config);

struct Metrics {
    double nmse = 0.0;
    double cosine = 0.0;
    std::vector<std::size_t> indices;
    std::vector<double> per_sample_nmse, per_sample_cosine;
};

/// Predictions from the model, denormalized with `stats`; metrics are on the
/// raw (denormalized) CSI.
Metrics evaluate(const Model& model, const channel::Dataset& dataset, std::span<const std::size_t> indices,
                 const channel::NormalizationStats& stats);
Metrics evaluate(const Model& model, const channel::Dataset& dataset, const std::string& split);

/// Metrics of an arbitrary predictor that returns normalized blocks for one
/// sample index.
Metrics evaluate_with(const channel::Dataset& dataset, std::span<const std::size_t> indices,
                      const channel::NormalizationStats& stats,
                      const std::function<std::vector<std::complex<double>>(std::size_t)>& predict);

/// Mean training loss L_H over a split in eval mode.
double mean_loss(const Model& model, const channel::Dataset& dataset, std::span<const std::size_t> indices);

void write_curves_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& curves);
void write_per_sample_csv(const std::filesystem::path& path, const Metrics& m);

// ---- experiments ------------------------------------------------------------

struct ReportRow {
    std::string method;
    double pilot_fraction = 0.0;
    std::string seed; // number or "median"
    std::string split;
    std::string scene; // "origin" or "new"
    double nmse = 0.0;
    double cosine = 0.0;
};

struct ReportTable {
    std::vector<ReportRow> rows; // one per (method, fraction, seed, scene)
    double seconds = 0.0;

    /// Median over seeds, one row per (method, fraction) for `scene`.
    std::vector<ReportRow> medians(const std::string& scene) const;
    std::optional<ReportRow> median(const std::string& method, double fraction, const std::string& scene) const;
    std::string csv(bool include_medians = true) const;
};

inline constexpr const char* report_header = "method,pilot_fraction,seed,split,scene,nmse,cosine";

struct ExperimentOptions {
    std::vector<MethodKind> methods;
    std::vector<std::uint64_t> seeds;
    std::vector<double> fractions;
    TrainConfig train;
    /// When set, each trained model is saved to
    /// <dir>/<METHOD>_f<fraction>_s<seed>/ with its curves.
    std::optional<std::filesystem::path> checkpoint_dir;
    std::function<void(const std::string&)> log;
};

/// Trains every (method, fraction, seed), evaluates on the origin test split
/// and, when given, on all samples of the perturbed-scene dataset (normalized
/// with the origin statistics).
ReportTable run_comparison(const channel::Dataset& origin, const channel::Dataset* perturbed,
                           const ExperimentOptions& options);

/// WEI-CSIP and RSWOEI at every fraction.
ReportTable overhead_sweep(const channel::Dataset& origin, const std::vector<double>& fractions,
                           const std::vector<std::uint64_t>& seeds, const TrainConfig& train,
                           std::optional<std::filesystem::path> checkpoint_dir = std::nullopt,
                           std::function<void(const std::string&)> log = {});

/// Re-evaluates every checkpoint under `dir` (as written by run_comparison)
/// and rebuilds the table.
ReportTable report_from_checkpoints(const std::filesystem::path& dir, const channel::Dataset& origin,
                                    const channel::Dataset* perturbed);

std::string checkpoint_name(MethodKind kind, double fraction, std::uint64_t seed);
std::string format_double(double v);

} // namespace weicsip::eval
