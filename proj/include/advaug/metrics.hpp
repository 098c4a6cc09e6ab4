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

#include <cstddef>
#include <span>
#include <vector>

namespace advaug {

/// counts[truth][predicted].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  void add(int truth, int predicted);
  void add(std::span<const int> truth, std::span<const int> predicted);

  std::size_t classes() const { return n_; }
  std::size_t count(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  std::size_t total() const;

  double accuracy() const;
  /// Mean recall over classes that occur in the ground truth.
  double balanced_accuracy() const;
  /// Mean Dice 2|A∩B| / (|A|+|B|) over classes [first_class, classes); classes
  /// absent from both truth and prediction are skipped.
  double mean_dice(std::size_t first_class = 1) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

}  // namespace advaug
