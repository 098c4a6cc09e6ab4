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

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "advaug/generators.hpp"
#include "advaug/losses.hpp"
#include "advaug/nn.hpp"

namespace advaug {

/// Batch-normalization routing group: clean data uses `main`, each augmented
/// quarter its own auxiliary group.
enum class BNGroup { main = 0, affine = 1, deform = 2, appearance = 3 };

inline constexpr BNGroup kAllBNGroups[] = {BNGroup::main, BNGroup::affine, BNGroup::deform,
                                           BNGroup::appearance};

std::string_view bn_group_name(BNGroup g);
BNGroup bn_group_for(GeneratorKind kind);

enum class Mode { train, eval };

/// Four BN parameter/statistic sets at one site sharing nothing but the site.
class GroupedBatchNorm {
 public:
  GroupedBatchNorm() = default;
  explicit GroupedBatchNorm(std::size_t channels);

  ad::Var operator()(const ad::Var& x, BNGroup group, bool training);
  nn::BatchNorm& group(BNGroup g) { return groups_[static_cast<std::size_t>(g)]; }
  /// Registers `<prefix>/bn.<group>/<param>` for every group.
  void collect(nn::Parameters& p, const std::string& prefix);

 private:
  std::array<nn::BatchNorm, 4> groups_;
};

struct TargetConfig {
  Task task = Task::classification;
  std::size_t channels = 3;
  std::size_t resolution = 32;
  /// Classes for classification; foreground classes for segmentation
  /// (the segmenter predicts num_classes + 1 labels including background).
  std::size_t num_classes = 4;
  std::vector<std::size_t> classifier_widths{32, 64, 128, 128};
  std::vector<std::size_t> segmenter_widths{16, 32, 64};

  void validate() const;
  friend bool operator==(const TargetConfig&, const TargetConfig&) = default;
};

/// Desk-scale target learner. Classification: conv-BN-ReLU-maxpool blocks,
/// global average pool, linear head. Segmentation: three-level U-Net with one
/// conv-BN-ReLU per level and a 1x1 head. Every BN site is a GroupedBatchNorm;
/// convolution and head weights are shared by all groups.
class TargetNetwork {
 public:
  TargetNetwork(const TargetConfig& config, std::uint64_t seed);

  /// Logits: B x K (classification) or B x (K+1) x H x W (segmentation).
  /// Eval mode only accepts the main group.
  ad::Var forward(const ad::Var& x, BNGroup group, Mode mode);

  std::size_t output_classes() const;
  const TargetConfig& config() const { return config_; }
  nn::Parameters parameters();
  /// BN site names in registration order ("block1", ...).
  std::vector<std::string> bn_sites() const;
  GroupedBatchNorm& bn_site(std::size_t i) { return bns_.at(i); }

 private:
  ad::Var block(std::size_t i, const ad::Var& x, BNGroup group, bool training);

  TargetConfig config_;
  std::vector<nn::Conv2d> convs_;
  std::vector<GroupedBatchNorm> bns_;
  std::vector<std::string> site_names_;
  nn::Linear fc_;
  nn::Conv2d seg_head_;
};

}  // namespace advaug
