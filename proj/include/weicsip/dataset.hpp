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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weicsip/channel.hpp"
#include "weicsip/scene.hpp"

namespace weicsip::channel {

struct Sample {
    scene::PanoramicImage image;
    CsiBlock csi;
    double heading = 0.0;
    std::size_t road = 0;
};

struct Splits {
    std::vector<std::size_t> train, test, validation;
};

/// Global CSI scale computed from the training split.
struct NormalizationStats {
    double scale = 1.0;            // divide raw CSI by this
    double mean_train_power = 1.0; // before scaling
};

struct Dataset {
    GridConfig grid;
    scene::CameraConfig camera;
    TraceConfig trace;
    std::string scene_fingerprint;
    std::uint64_t seed = 0;
    double spacing = 0.0;
    std::vector<Sample> samples;
    Splits splits;
    std::optional<NormalizationStats> stats;

    const std::vector<std::size_t>& split(const std::string& name) const;
};

/// Sizes for a 7:1:2 train/test/validation split of `n` items.
struct SplitCounts {
    std::size_t train, test, validation;
};
SplitCounts split_counts(std::size_t n);

/// Interleaves items road by road, shuffles with `seed`, then cuts 7:1:2.
Splits make_splits(std::span<const std::size_t> road_of_item, std::uint64_t seed);

struct DatasetOptions {
    GridConfig grid;
    scene::CameraConfig camera;
    TraceConfig trace;
    double spacing = 0.65;
    double ms_height = 2.0;
};

Dataset build_dataset(const scene::Scene& scene, const DatasetOptions& options, std::uint64_t seed);

/// Computes train-split stats and stores them on the dataset.
void normalize(Dataset& dataset);
std::vector<std::complex<double>> normalized_values(const CsiBlock& block, const NormalizationStats& stats);
std::vector<std::complex<double>> denormalized_values(std::span<const std::complex<double>> values,
                                                      const NormalizationStats& stats);

/// Raw little-endian IEEE-754 double blobs.
void write_blob(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_blob(const std::filesystem::path& path, std::size_t expected);

/// manifest.json + images.bin + csi.bin + positions.bin (+ scene.json when given).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir, const scene::Scene* scene = nullptr);
Dataset load_dataset(const std::filesystem::path& dir);

} // namespace weicsip::channel
