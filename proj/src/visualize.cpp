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

#include "advaug/visualize.hpp"

#include <algorithm>
#include <regex>
#include <string>

#include "advaug/checkpoint.hpp"
#include "advaug/data.hpp"
#include "advaug/errors.hpp"
#include "advaug/rng.hpp"
#include "advaug/trainer.hpp"

namespace advaug {

namespace {

void blit(PngImage& canvas, const Tensor& image, std::size_t top, std::size_t left) {
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        canvas.pixels[((top + y) * canvas.width + left + x) * C + c] = denormalize_intensity(image[(c * H + y) * W + x]);
      }
    }
  }
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t e : v) s += (s.empty() ? "" : ",") + std::to_string(e);
  return s.empty() ? "none" : s;
}

}  // namespace

std::vector<std::size_t> available_epochs(const std::filesystem::path& run_dir) {
  std::vector<std::size_t> epochs;
  if (!std::filesystem::is_directory(run_dir)) return epochs;
  const std::regex pattern("epoch_([0-9]+)\\.bin");
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) epochs.push_back(std::stoull(m[1].str()));
  }
  std::sort(epochs.begin(), epochs.end());
  return epochs;
}

PngImage render_augmentation_grid(const std::filesystem::path& run_dir, const GeneratorConfig& config,
                                  const Tensor& probe, const GridSpec& spec) {
  const std::size_t C = config.channels, R = config.resolution;
  if (probe.shape() != Shape{C, R, R}) {
    throw InvalidArgument("render_augmentation_grid: probe " + to_string(probe.shape()) + " does not match the " +
                          "generator input " + to_string(Shape{C, R, R}));
  }
  if (spec.epochs.empty()) throw InvalidArgument("render_augmentation_grid: no epochs requested");
  std::vector<Archive> snapshots;
  for (std::size_t e : spec.epochs) {
    const auto path = epoch_snapshot_path(run_dir, e);
    if (!std::filesystem::exists(path)) {
      throw InvalidArgument("no generator snapshot for epoch " + std::to_string(e) + " in " + run_dir.string() +
                            "; available epochs: " + join(available_epochs(run_dir)));
    }
    snapshots.push_back(Archive::load(path));
  }

  const std::size_t g = spec.gutter, cols = spec.epochs.size() + 1, rows = 3;
  PngImage canvas;
  canvas.width = cols * R + (cols + 1) * g;
  canvas.height = rows * R + (rows + 1) * g;
  canvas.channels = C;
  canvas.pixels.assign(canvas.width * canvas.height * C, 255);

  Tensor batch = probe.reshaped({1, C, R, R});
  const ad::Var x(batch);
  for (std::size_t row = 0; row < rows; ++row) {
    const GeneratorKind kind = kAllGeneratorKinds[row];
    const std::size_t top = g + row * (R + g);
    blit(canvas, probe, top, g);
    Generator gen(kind, config, 0);
    Rng rng(derive_seed(spec.noise_seed, static_cast<std::uint64_t>(kind)));
    const ad::Var z(gen.sample_noise(1, rng));
    const nn::Parameters params = gen.parameters();
    for (std::size_t j = 0; j < snapshots.size(); ++j) {
      if (!snapshots[j].contains(params.params.front().name)) continue;
      snapshots[j].load_parameters(params);
      const AugmentedBatch aug = apply_augmentation(gen.forward(z, x, false), x);
      blit(canvas, aug.image.value().reshaped({C, R, R}), top, g + (j + 1) * (R + g));
    }
  }
  return canvas;
}

}  // namespace advaug
