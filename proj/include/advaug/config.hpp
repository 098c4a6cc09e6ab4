// Copyright 2026 The advaug Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "advaug/data.hpp"
#include "advaug/trainer.hpp"

namespace advaug {

/// Network widths and output caps; shapes that follow from the dataset
/// (resolution, channels, classes, task) are filled in by model_config().
struct ModelSizes {
  std::size_t noise_dim = 128;
  std::size_t noise_channels = 128;
  std::vector<std::size_t> image_widths{16, 32, 32, 32};
  std::size_t trunk_width = 32;
  double deform_scale = 0.1;
  double appear_scale = 0.5;
  std::vector<std::size_t> discriminator_widths{32, 64, 128, 256};
  std::vector<std::size_t> classifier_widths{32, 64, 128, 128};
  std::vector<std::size_t> segmenter_widths{16, 32, 64};

  friend bool operator==(const ModelSizes&, const ModelSizes&) = default;
};

struct RunConfig {
  DatasetSpec dataset;
  ModelSizes model;
  TrainerConfig trainer;
  std::string out = "runs/default";

  ModelConfig model_config() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Strict parse: unknown keys and wrong types throw ConfigError with the
/// dotted key path. Missing keys keep their defaults.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& config, int indent = 2);

struct Manifest {
  RunConfig config;
  std::uint64_t dataset_fingerprint = 0;
  std::string version;
  std::string created;  ///< UTC ISO-8601
  std::string results_json = "{}";
};

/// Writes config, seeds, code version, dataset fingerprint, timestamp and
/// an optional results object.
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

inline constexpr const char* kManifestFile = "manifest.json";

}  // namespace advaug
