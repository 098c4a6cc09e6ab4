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

#include "advaug/generators.hpp"

#include <cmath>

#include "advaug/errors.hpp"
#include "advaug/ops.hpp"
#include "advaug/warp.hpp"

namespace advaug {

namespace {

constexpr std::size_t kNoiseConvs = 6;
constexpr std::size_t kTrunkConvs = 4;
constexpr std::size_t kSeedSize = 4;  // noise is projected to a 4 x 4 map

std::size_t upsample_stages(std::size_t resolution) {
  std::size_t stages = 0;
  std::size_t r = kSeedSize;
  while (r < resolution) {
    r *= 2;
    ++stages;
  }
  return r == resolution ? stages : 0;
}

void check_image_batch(const ad::Var& x, std::size_t channels, std::size_t resolution,
                       const char* who) {
  const Tensor& v = x.value();
  if (v.rank() != 4 || v.dim(1) != channels || v.dim(2) != resolution || v.dim(3) != resolution) {
    throw InvalidArgument(std::string(who) + ": expected B x " + std::to_string(channels) + " x " +
                          std::to_string(resolution) + " x " + std::to_string(resolution) +
                          " images, got " + to_string(v.shape()));
  }
}

void randomize(ad::Var& v, Rng& rng, double scale) {
  for (double& w : v.mutable_value().values()) w = rng.uniform(-scale, scale);
}

}  // namespace

std::string_view kind_name(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::affine: return "affine";
    case GeneratorKind::deform: return "deform";
    case GeneratorKind::appearance: return "appearance";
  }
  throw InternalError("unknown generator kind");
}

std::string_view network_name(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::affine: return "G_A";
    case GeneratorKind::deform: return "G_D";
    case GeneratorKind::appearance: return "G_I";
  }
  throw InternalError("unknown generator kind");
}

GeneratorKind parse_generator_kind(std::string_view name) {
  for (GeneratorKind k : kAllGeneratorKinds) {
    if (kind_name(k) == name) return k;
  }
  throw InvalidArgument("unknown generator kind '" + std::string(name) +
                        "' (expected affine, deform or appearance)");
}

void GeneratorConfig::validate() const {
  const std::size_t stages = upsample_stages(resolution);
  if (stages < 1 || stages > kNoiseConvs) {
    throw InvalidArgument("generator: resolution " + std::to_string(resolution) +
                          " must be 4 * 2^s with 1 <= s <= 6");
  }
  if (channels == 0 || noise_dim == 0 || noise_channels == 0 || trunk_width == 0 ||
      image_widths.size() != 4) {
    throw InvalidArgument("generator: widths must be positive and image branch has 4 layers");
  }
  for (std::size_t w : image_widths) {
    if (w == 0) throw InvalidArgument("generator: zero image-branch width");
  }
  if (!(deform_scale > 0.0) || !(appear_scale > 0.0)) {
    throw InvalidArgument("generator: output scales must be positive");
  }
}

void GeneratorOutput::check_payload() const {
  const bool a = affine.defined(), d = residual_flow.defined(), m = mask.defined();
  const bool ok = (kind == GeneratorKind::affine && a && !d && !m) ||
                  (kind == GeneratorKind::deform && !a && d && !m) ||
                  (kind == GeneratorKind::appearance && !a && !d && m);
  if (!ok) {
    throw InternalError("generator output payload does not match kind " +
                        std::string(kind_name(kind)));
  }
}

Generator::Generator(GeneratorKind kind, const GeneratorConfig& config, std::uint64_t seed)
    : kind_(kind), config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t nc = config_.noise_channels;
  noise_fc_ = nn::Linear(config_.noise_dim, nc * kSeedSize * kSeedSize, rng);
  noise_bn_ = nn::BatchNorm(nc);

  const std::size_t stages = upsample_stages(config_.resolution);
  std::vector<bool> up(kNoiseConvs, false);
  for (std::size_t k = 0; k < stages; ++k) up[k * kNoiseConvs / stages] = true;
  std::size_t c = nc;
  for (std::size_t i = 0; i < kNoiseConvs; ++i) {
    const std::size_t out = up[i] ? std::max<std::size_t>(c / 2, 8) : c;
    noise_convs_.push_back({nn::Conv2d(c, out, 3, 1, 1, rng), nn::BatchNorm(out), up[i]});
    c = out;
  }
  const std::size_t noise_out = c;

  c = config_.channels;
  for (std::size_t w : config_.image_widths) {
    image_convs_.push_back({nn::Conv2d(c, w, 3, 1, 1, rng), nn::BatchNorm(w), false});
    c = w;
  }

  c = noise_out + config_.image_widths.back();
  for (std::size_t i = 0; i < kTrunkConvs; ++i) {
    trunk_convs_.push_back(
        {nn::Conv2d(c, config_.trunk_width, 3, 1, 1, rng), nn::BatchNorm(config_.trunk_width), false});
    c = config_.trunk_width;
  }

  if (kind_ == GeneratorKind::affine) {
    affine_head_ = nn::Linear(c, 6, rng);
    affine_head_.zero_init();
    Tensor& b = affine_head_.bias.mutable_value();
    b[0] = 1.0;
    b[4] = 1.0;
  } else {
    const std::size_t out = kind_ == GeneratorKind::deform ? 2 : config_.channels;
    map_head_ = nn::Conv2d(c, out, 3, 1, 1, rng);
    map_head_.zero_init();
  }
}

Tensor Generator::sample_noise(std::size_t batch, Rng& rng) const {
  Tensor z({batch, config_.noise_dim});
  for (double& v : z.values()) v = rng.normal();
  return z;
}

GeneratorOutput Generator::forward(const ad::Var& z, const ad::Var& x, bool training) {
  check_image_batch(x, config_.channels, config_.resolution, "generator");
  const std::size_t B = x.dim(0);
  if (z.value().rank() != 2 || z.dim(0) != B || z.dim(1) != config_.noise_dim) {
    throw InvalidArgument("generator: noise batch " + to_string(z.shape()) + " does not match " +
                          std::to_string(B) + " x " + std::to_string(config_.noise_dim));
  }
  ++forward_calls_;

  ad::Var n = ad::reshape(noise_fc_(z), {B, config_.noise_channels, kSeedSize, kSeedSize});
  n = ad::relu(noise_bn_(n, training));
  for (ConvBn& layer : noise_convs_) {
    if (layer.upsample_before) n = ad::upsample_nearest2(n);
    n = ad::relu(layer.bn(layer.conv(n), training));
  }

  ad::Var im = x;
  for (ConvBn& layer : image_convs_) im = ad::relu(layer.bn(layer.conv(im), training));

  ad::Var h = ad::concat({n, im}, 1);
  for (ConvBn& layer : trunk_convs_) h = ad::relu(layer.bn(layer.conv(h), training));

  GeneratorOutput out;
  out.kind = kind_;
  switch (kind_) {
    case GeneratorKind::affine:
      out.affine = ad::reshape(affine_head_(ad::global_avg_pool(h)), {B, 2, 3});
      break;
    case GeneratorKind::deform:
      out.residual_flow = ad::channels_last(ad::scale(ad::tanh(map_head_(h)), config_.deform_scale));
      break;
    case GeneratorKind::appearance:
      out.mask = ad::scale(ad::tanh(map_head_(h)), config_.appear_scale);
      break;
  }
  return out;
}

nn::Parameters Generator::parameters() {
  nn::Parameters p;
  const std::string net(network_name(kind_));
  noise_fc_.collect(p, net + "/noise.fc");
  noise_bn_.collect(p, net + "/noise.bn0");
  auto add_stack = [&](std::vector<ConvBn>& stack, const std::string& name) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const std::string idx = std::to_string(i + 1);
      stack[i].conv.collect(p, net + "/" + name + ".conv" + idx);
      stack[i].bn.collect(p, net + "/" + name + ".bn" + idx);
    }
  };
  add_stack(noise_convs_, "noise");
  add_stack(image_convs_, "image");
  add_stack(trunk_convs_, "trunk");
  if (kind_ == GeneratorKind::affine) {
    affine_head_.collect(p, net + "/head");
  } else {
    map_head_.collect(p, net + "/head");
  }
  return p;
}

void Generator::randomize_head(Rng& rng, double scale) {
  if (kind_ == GeneratorKind::affine) {
    randomize(affine_head_.weight, rng, scale);
  } else {
    randomize(map_head_.weight, rng, scale);
    randomize(map_head_.bias, rng, scale);
  }
}

AugmentedBatch apply_augmentation(const GeneratorOutput& out, const ad::Var& x,
                                  std::span<const int> pixel_labels) {
  out.check_payload();
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw InvalidArgument("apply_augmentation: expected B x C x H x W images");
  const std::size_t B = xv.dim(0), H = xv.dim(2), W = xv.dim(3);
  if (!pixel_labels.empty() && pixel_labels.size() != B * H * W) {
    throw InvalidArgument("apply_augmentation: label map count does not match image batch");
  }
  std::vector<int> labels(pixel_labels.begin(), pixel_labels.end());

  AugmentedBatch result;
  switch (out.kind) {
    case GeneratorKind::affine: {
      if (out.affine.dim(0) != B) throw InvalidArgument("apply_augmentation: batch mismatch");
      result.flow = ad::affine_to_flow(out.affine, H, W);
      break;
    }
    case GeneratorKind::deform: {
      const Shape expect{B, H, W, 2};
      if (out.residual_flow.shape() != expect) {
        throw InvalidArgument("apply_augmentation: residual flow " +
                              to_string(out.residual_flow.shape()) + " vs images " +
                              to_string(xv.shape()));
      }
      result.flow = ad::add_constant(out.residual_flow, ad::identity_flow_batch(B, H, W));
      break;
    }
    case GeneratorKind::appearance: {
      if (out.mask.shape() != xv.shape()) {
        throw InvalidArgument("apply_augmentation: mask " + to_string(out.mask.shape()) +
                              " vs images " + to_string(xv.shape()));
      }
      result.image = ad::add(x, out.mask);
      result.labels = std::move(labels);
      return result;
    }
  }
  result.image = ad::warp(x, result.flow, Padding::zeros);
  if (!labels.empty()) labels = ad::warp_labels(labels, result.flow.value());
  result.labels = std::move(labels);
  return result;
}

void DiscriminatorConfig::validate() const {
  if (resolution < 1 || channels == 0 || widths.empty()) {
    throw InvalidArgument("discriminator: empty configuration");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidArgument("discriminator: zero width");
  }
}

Discriminator::Discriminator(const DiscriminatorConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng(seed);
  std::size_t c = config_.channels;
  for (std::size_t w : config_.widths) {
    convs_.emplace_back(c, w, 3, 2, 1, rng);
    bns_.emplace_back(w);
    c = w;
  }
  head_ = nn::Conv2d(c, 1, 1, 1, 0, rng);
  head_.zero_init();
}

ad::Var Discriminator::logits(const ad::Var& x, bool training) {
  check_image_batch(x, config_.channels, config_.resolution, "discriminator");
  ad::Var h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = ad::leaky_relu(bns_[i](convs_[i](h), training), kLeakySlope);
  }
  return ad::reshape(ad::global_avg_pool(head_(h)), {x.dim(0)});
}

Tensor Discriminator::scores(const ad::Var& x, bool training) {
  Tensor l = logits(x, training).value();
  for (double& v : l.values()) v = 1.0 / (1.0 + std::exp(-v));
  return l;
}

nn::Parameters Discriminator::parameters() {
  nn::Parameters p;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    convs_[i].collect(p, "D/conv" + idx);
    bns_[i].collect(p, "D/bn" + idx);
  }
  head_.collect(p, "D/head");
  return p;
}

void Discriminator::randomize_head(Rng& rng, double scale) {
  randomize(head_.weight, rng, scale);
  randomize(head_.bias, rng, scale);
}

}  // namespace advaug
