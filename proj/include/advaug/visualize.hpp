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
#include <vector>

#include "advaug/generators.hpp"
#include "advaug/png_io.hpp"
#include "advaug/tensor.hpp"

namespace advaug {

struct GridSpec {
  std::vector<std::size_t> epochs;
  std::uint64_t noise_seed = 0;
  std::size_t gutter = 2;  ///< white pixels between cells
};

/// Epochs with a generator snapshot in `run_dir`, ascending.
std::vector<std::size_t> available_epochs(const std::filesystem::path& run_dir);

/// Rows: affine, deform, appearance. Column 0 is the probe image; column
/// j + 1 applies the epoch_<epochs[j]> generators to it. Each row draws one
/// noise vector from (noise_seed, kind) and reuses it in every column, so
/// changes across a row come from training alone. Rows for generators absent
/// from the snapshots stay blank. Throws InvalidArgument naming the available
/// epochs if a snapshot is missing.
PngImage render_augmentation_grid(const std::filesystem::path& run_dir, const GeneratorConfig& config,
                                  const Tensor& probe, const GridSpec& spec);

}  // namespace advaug
