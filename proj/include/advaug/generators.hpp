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
#include <span>
#include <string_view>
#include <vector>

#include "advaug/autodiff.hpp"
#include "advaug/nn.hpp"
#include "advaug/rng.hpp"

namespace advaug {

enum class GeneratorKind { affine, deform, appearance };

inline constexpr GeneratorKind kAllGeneratorKinds[] = {GeneratorKind::affine, GeneratorKind::deform,
                                                       GeneratorKind::appearance};

/// "affine" / "deform" / "appearance".
std::string_view kind_name(GeneratorKind kind);
/// Checkpoint network name: "G_A" / "G_D" / "G_I".
std::string_view network_name(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view name);

struct GeneratorConfig {
  std::size_t resolution = 32;  ///< square inputs, 4 * 2^s for 1 <= s <= 6
  std::size_t channels = 3;
  std::size_t noise_dim = 128;
  std::size_t noise_channels = 128;  ///< noise projected to noise_channels x 4 x 4
  std::vector<std::size_t> image_widths{16, 32, 32, 32};
  std::size_t trunk_width = 32;
  double deform_scale = 0.1;  ///< cap on |residual flow|, normalized units
  double appear_scale = 0.5;  ///< cap on |mask|, intensity units

  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Batched generator result; exactly the payload matching `kind` is set.
struct GeneratorOutput {
  GeneratorKind kind = GeneratorKind::affine;
  ad::Var affine;         ///< B x 2 x 3
  ad::Var residual_flow;  ///< B x H x W x 2
  ad::Var mask;           ///< B x C x H x W

  /// Throws InternalError if the populated payload does not match `kind`.
  void check_payload() const;
};

/// Conditional augmentation generator G(z, x).
///
/// Two branches meet in a shared trunk. The noise branch projects z to a
/// 4 x 4 map and runs six 3x3 convolutions, upsampling (nearest, x2) before
/// some of them until the image resolution is reached; each upsample halves
/// the channel count. The image branch is four 3x3 convolutions. The
/// concatenated maps pass through four trunk convolutions and a kind-specific
/// head: global average pool + fully-connected layer to six affine entries
/// (G_A), or a 3x3 convolution with a scaled tanh (G_D residual flow, G_I
/// appearance mask). Hidden convolutions use BN + ReLU.
///
/// Heads start at zero (plus an identity bias for G_A), so a fresh generator
/// produces the identity transform.
class Generator {
 public:
  Generator(GeneratorKind kind, const GeneratorConfig& config, std::uint64_t seed);

  GeneratorOutput forward(const ad::Var& z, const ad::Var& x, bool training);

  /// B x noise_dim standard normal draws.
  Tensor sample_noise(std::size_t batch, Rng& rng) const;

  GeneratorKind kind() const { return kind_; }
  const GeneratorConfig& config() const { return config_; }
  nn::Parameters parameters();

  /// Replaces the zero-initialized head with small random weights.
  void randomize_head(Rng& rng, double scale);

  std::uint64_t forward_calls() const { return forward_calls_; }

 private:
  struct ConvBn {
    nn::Conv2d conv;
    nn::BatchNorm bn;
    bool upsample_before = false;
  };

  GeneratorKind kind_;
  GeneratorConfig config_;
  nn::Linear noise_fc_;
  nn::BatchNorm noise_bn_;
  std::vector<ConvBn> noise_convs_;
  std::vector<ConvBn> image_convs_;
  std::vector<ConvBn> trunk_convs_;
  nn::Linear affine_head_;
  nn::Conv2d map_head_;
  std::uint64_t forward_calls_ = 0;
};

/// Augmented batch; `flow` is the absolute sampling field for geometric
/// kinds and undefined for appearance.
struct AugmentedBatch {
  ad::Var image;
  ad::Var flow;
  std::vector<int> labels;
};

/// x_hat = warp(x, affine_to_flow(A)), warp(x, residual + identity) or
/// x + mask. Per-pixel labels (B x H x W) are warped with nearest sampling
/// for geometric kinds and passed through for appearance; pass an empty span
/// for classification batches.
AugmentedBatch apply_augmentation(const GeneratorOutput& out, const ad::Var& x,
                                  std::span<const int> pixel_labels = {});

struct DiscriminatorConfig {
  std::size_t resolution = 32;
  std::size_t channels = 3;
  std::vector<std::size_t> widths{32, 64, 128, 256};

  void validate() const;
  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

/// Stride-2 3x3 convolutions with BN and LeakyReLU(0.2), then a zero-initialized
/// 1x1 convolution averaged over space into one logit per example.
class Discriminator {
 public:
  static constexpr double kLeakySlope = 0.2;

  Discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

  /// B logits.
  ad::Var logits(const ad::Var& x, bool training);
  /// B probabilities in (0, 1).
  Tensor scores(const ad::Var& x, bool training);

  const DiscriminatorConfig& config() const { return config_; }
  nn::Parameters parameters();
  void randomize_head(Rng& rng, double scale);

 private:
  DiscriminatorConfig config_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::BatchNorm> bns_;
  nn::Conv2d head_;
};

}  // namespace advaug
