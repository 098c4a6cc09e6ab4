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
#include <memory>
#include <string>
#include <vector>

#include "advaug/losses.hpp"
#include "advaug/tensor.hpp"

namespace advaug {

enum class DatasetKind { synthetic_cls, synthetic_seg, folder };

std::string_view dataset_kind_name(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic_cls;
  std::size_t resolution = 32;
  std::size_t channels = 3;
  /// Classes (classification) or foreground structures (segmentation).
  std::size_t num_classes = 4;
  /// Total samples for synthetic kinds; ignored for folders.
  std::size_t size = 700;
  /// Train and test fractions; must sum to 1.
  std::vector<double> split{2.0 / 7.0, 5.0 / 7.0};
  std::uint64_t seed = 7;
  /// Folder kind only.
  std::string path;
  Task folder_task = Task::classification;

  Task task() const;
  void validate() const;
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// One C x H x W image in [-1, 1] with a class label or an H x W label map.
struct Sample {
  Tensor image;
  int label = -1;
  std::vector<int> mask;
};

struct SampleSet {
  Task task = Task::classification;
  std::size_t channels = 0;
  std::size_t resolution = 0;
  std::size_t num_classes = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

class Dataset;

/// Read-only handle on the training split. Only a Dataset can create one,
/// so code that accepts a TrainingSet cannot reach held-out samples.
class TrainingSet {
 public:
  const SampleSet& samples() const { return *set_; }
  std::size_t size() const { return set_->size(); }

 private:
  friend class Dataset;
  explicit TrainingSet(std::shared_ptr<const SampleSet> set) : set_(std::move(set)) {}
  std::shared_ptr<const SampleSet> set_;
};

/// Immutable dataset with a deterministic train/test split.
class Dataset {
 public:
  Dataset(DatasetSpec spec, SampleSet all);

  const DatasetSpec& spec() const { return spec_; }
  /// Every sample in generation (or lexicographic file) order.
  const SampleSet& all() const { return *all_; }
  const SampleSet& test() const { return *test_; }
  TrainingSet training_set() const { return TrainingSet(train_); }
  const std::vector<std::size_t>& train_indices() const { return train_idx_; }
  const std::vector<std::size_t>& test_indices() const { return test_idx_; }

  /// FNV-1a over every sample's bytes in order.
  std::uint64_t fingerprint() const;

 private:
  DatasetSpec spec_;
  std::shared_ptr<const SampleSet> all_;
  std::shared_ptr<const SampleSet> train_;
  std::shared_ptr<const SampleSet> test_;
  std::vector<std::size_t> train_idx_;
  std::vector<std::size_t> test_idx_;
};

Dataset make_synthetic_cls(const DatasetSpec& spec);
Dataset make_synthetic_seg(const DatasetSpec& spec);
Dataset ingest_folder(const std::filesystem::path& path, const DatasetSpec& spec);
/// Dispatches on spec.kind.
Dataset make_dataset(const DatasetSpec& spec);

double normalize_intensity(std::uint8_t v);
std::uint8_t denormalize_intensity(double v);

/// Stacks the selected samples into a B x C x H x W tensor plus labels
/// (B class labels, or B x H x W label maps flattened).
struct Batch {
  Tensor images;
  std::vector<int> labels;
};
Batch make_batch(const SampleSet& set, const std::vector<std::size_t>& indices);

}  // namespace advaug
