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

#include "advaug/data.hpp"
#include "advaug/trainer.hpp"

namespace fixture {

// Reduced widths so trainer-level tests run in well under a second per step.
inline advaug::ModelConfig small_model(std::size_t res = 16,
                                       advaug::Task task = advaug::Task::classification,
                                       std::size_t classes = 4) {
  advaug::ModelConfig m;
  m.generator.resolution = res;
  m.generator.noise_dim = 8;
  m.generator.noise_channels = 8;
  m.generator.image_widths = {4, 8, 8, 8};
  m.generator.trunk_width = 8;
  m.discriminator.resolution = res;
  m.discriminator.widths = {8, 8, 16};
  m.target.task = task;
  m.target.resolution = res;
  m.target.num_classes = classes;
  m.target.classifier_widths = {8, 16, 16};
  m.target.segmenter_widths = {4, 8, 8};
  return m;
}

inline advaug::TrainerConfig small_trainer(std::size_t batch = 8, std::uint64_t seed = 0) {
  advaug::TrainerConfig t;
  t.batch_size = batch;
  t.epochs = 1;
  t.seed = seed;
  return t;
}

inline advaug::DatasetSpec small_data(std::size_t res = 16,
                                      advaug::DatasetKind kind = advaug::DatasetKind::synthetic_cls) {
  advaug::DatasetSpec d;
  d.kind = kind;
  d.resolution = res;
  d.size = 64;
  d.split = {0.5, 0.5};
  return d;
}

inline advaug::Batch first_batch(const advaug::Dataset& d, std::size_t n, std::size_t offset = 0) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = offset + i;
  return advaug::make_batch(d.training_set().samples(), idx);
}

}  // namespace fixture
