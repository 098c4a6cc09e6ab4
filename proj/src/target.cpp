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

#include "advaug/target.hpp"

#include "advaug/errors.hpp"
#include "advaug/ops.hpp"

namespace advaug {

std::string_view bn_group_name(BNGroup g) {
  switch (g) {
    case BNGroup::main: return "main";
    case BNGroup::affine: return "affine";
    case BNGroup::deform: return "deform";
    case BNGroup::appearance: return "appearance";
  }
  throw InternalError("unknown BN group");
}

BNGroup bn_group_for(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::affine: return BNGroup::affine;
    case GeneratorKind::deform: return BNGroup::deform;
    case GeneratorKind::appearance: return BNGroup::appearance;
  }
  throw InternalError("unknown generator kind");
}

GroupedBatchNorm::GroupedBatchNorm(std::size_t channels)
    : groups_{nn::BatchNorm(channels), nn::BatchNorm(channels), nn::BatchNorm(channels),
              nn::BatchNorm(channels)} {}

ad::Var GroupedBatchNorm::operator()(const ad::Var& x, BNGroup g, bool training) {
  return groups_[static_cast<std::size_t>(g)](x, training);
}

void GroupedBatchNorm::collect(nn::Parameters& p, const std::string& prefix) {
  for (BNGroup g : kAllBNGroups) group(g).collect(p, prefix + "/bn." + std::string(bn_group_name(g)));
}

void TargetConfig::validate() const {
  if (channels == 0 || num_classes == 0) throw InvalidArgument("target: empty configuration");
  if (task == Task::classification) {
    if (classifier_widths.empty()) throw InvalidArgument("target: no classifier blocks");
    if (num_classes < 2) throw InvalidArgument("target: classification needs >= 2 classes");
    if ((resolution >> classifier_widths.size()) == 0) {
      throw InvalidArgument("target: resolution " + std::to_string(resolution) + " too small for " +
                            std::to_string(classifier_widths.size()) + " pooling blocks");
    }
  } else {
    if (segmenter_widths.size() != 3) throw InvalidArgument("target: U-Net needs 3 widths");
    if (resolution % 4 != 0 || resolution < 4) {
      throw InvalidArgument("target: segmentation resolution must be a multiple of 4");
    }
  }
  for (std::size_t w : classifier_widths)
    if (w == 0) throw InvalidArgument("target: zero width");
  for (std::size_t w : segmenter_widths)
    if (w == 0) throw InvalidArgument("target: zero width");
}

TargetNetwork::TargetNetwork(const TargetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  auto add = [&](std::size_t cin, std::size_t cout, const std::string& name) {
    convs_.emplace_back(cin, cout, 3, 1, 1, rng);
    bns_.emplace_back(cout);
    site_names_.push_back(name);
  };
  if (config_.task == Task::classification) {
    std::size_t c = config_.channels;
    for (std::size_t i = 0; i < config_.classifier_widths.size(); ++i) {
      add(c, config_.classifier_widths[i], "block" + std::to_string(i + 1));
      c = config_.classifier_widths[i];
    }
    fc_ = nn::Linear(c, config_.num_classes, rng);
  } else {
    const auto& w = config_.segmenter_widths;
    add(config_.channels, w[0], "enc1");
    add(w[0], w[1], "enc2");
    add(w[1], w[2], "bottleneck");
    add(w[2] + w[1], w[1], "dec2");
    add(w[1] + w[0], w[0], "dec1");
    seg_head_ = nn::Conv2d(w[0], config_.num_classes + 1, 1, 1, 0, rng);
  }
}

std::size_t TargetNetwork::output_classes() const {
  return config_.task == Task::classification ? config_.num_classes : config_.num_classes + 1;
}

ad::Var TargetNetwork::block(std::size_t i, const ad::Var& x, BNGroup group, bool training) {
  return ad::relu(bns_[i](convs_[i](x), group, training));
}

ad::Var TargetNetwork::forward(const ad::Var& x, BNGroup group, Mode mode) {
  if (mode == Mode::eval && group != BNGroup::main) {
    throw ContractViolation("target: eval mode must use the main BN group, got " +
                            std::string(bn_group_name(group)));
  }
  const Tensor& v = x.value();
  if (v.rank() != 4 || v.dim(1) != config_.channels || v.dim(2) != config_.resolution ||
      v.dim(3) != config_.resolution) {
    throw InvalidArgument("target: unexpected input shape " + to_string(v.shape()));
  }
  const bool training = mode == Mode::train;
  if (config_.task == Task::classification) {
    ad::Var h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) h = ad::max_pool2(block(i, h, group, training));
    return fc_(ad::global_avg_pool(h));
  }
  const ad::Var e1 = block(0, x, group, training);
  const ad::Var e2 = block(1, ad::max_pool2(e1), group, training);
  const ad::Var mid = block(2, ad::max_pool2(e2), group, training);
  const ad::Var d2 = block(3, ad::concat({ad::upsample_nearest2(mid), e2}, 1), group, training);
  const ad::Var d1 = block(4, ad::concat({ad::upsample_nearest2(d2), e1}, 1), group, training);
  return seg_head_(d1);
}

nn::Parameters TargetNetwork::parameters() {
  nn::Parameters p;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(p, "T/" + site_names_[i] + ".conv");
    bns_[i].collect(p, "T/" + site_names_[i]);
  }
  if (config_.task == Task::classification) {
    fc_.collect(p, "T/head");
  } else {
    seg_head_.collect(p, "T/head");
  }
  return p;
}

std::vector<std::string> TargetNetwork::bn_sites() const { return site_names_; }

}  // namespace advaug
