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

#include "advaug/metrics.hpp"

#include <numeric>

#include "advaug/errors.hpp"

namespace advaug {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw InvalidArgument("confusion matrix: zero classes");
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= n_ ||
      static_cast<std::size_t>(predicted) >= n_) {
    throw InvalidArgument("confusion matrix: label outside [0, " + std::to_string(n_) + ")");
  }
  ++counts_[static_cast<std::size_t>(truth) * n_ + static_cast<std::size_t>(predicted)];
}

void ConfusionMatrix::add(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw InvalidArgument("confusion matrix: length mismatch");
  for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

double ConfusionMatrix::accuracy() const {
  const std::size_t t = total();
  if (t == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t k = 0; k < n_; ++k) hit += count(k, k);
  return static_cast<double>(hit) / static_cast<double>(t);
}

double ConfusionMatrix::balanced_accuracy() const {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < n_; ++k) {
    std::size_t support = 0;
    for (std::size_t p = 0; p < n_; ++p) support += count(k, p);
    if (support == 0) continue;
    sum += static_cast<double>(count(k, k)) / static_cast<double>(support);
    ++present;
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

double ConfusionMatrix::mean_dice(std::size_t first_class) const {
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = first_class; k < n_; ++k) {
    std::size_t truth = 0, pred = 0;
    for (std::size_t j = 0; j < n_; ++j) {
      truth += count(k, j);
      pred += count(j, k);
    }
    if (truth + pred == 0) continue;
    sum += 2.0 * static_cast<double>(count(k, k)) / static_cast<double>(truth + pred);
    ++used;
  }
  return used ? sum / static_cast<double>(used) : 1.0;
}

}  // namespace advaug
