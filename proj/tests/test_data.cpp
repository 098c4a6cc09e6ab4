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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "advaug/data.hpp"
#include "advaug/errors.hpp"
#include "advaug/png_io.hpp"

using namespace advaug;
namespace fs = std::filesystem;

namespace {

DatasetSpec cls_spec(std::size_t size = 200, std::uint64_t seed = 7) {
  DatasetSpec s;
  s.size = size;
  s.seed = seed;
  return s;
}

DatasetSpec seg_spec(std::size_t classes, std::uint64_t seed) {
  DatasetSpec s;
  s.kind = DatasetKind::synthetic_seg;
  s.num_classes = classes;
  s.size = 40;
  s.seed = seed;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("advaug_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_solid(const fs::path& p, std::size_t size, std::uint8_t v, std::size_t channels = 3) {
  PngImage img{size, size, channels, std::vector<std::uint8_t>(size * size * channels, v)};
  write_png(p, img);
}

}  // namespace

TEST(SyntheticCls, DeterministicGivenSeed) {
  const Dataset a = make_synthetic_cls(cls_spec());
  const Dataset b = make_synthetic_cls(cls_spec());
  ASSERT_EQ(a.all().size(), 200u);
  for (std::size_t i = 0; i < a.all().size(); ++i) {
    EXPECT_EQ(a.all().samples[i].image, b.all().samples[i].image);
    EXPECT_EQ(a.all().samples[i].label, b.all().samples[i].label);
  }
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(make_synthetic_cls(cls_spec(200, 8)).fingerprint(), a.fingerprint());
}

TEST(SyntheticCls, ClassBalanced) {
  const Dataset d = make_synthetic_cls(cls_spec());
  std::vector<std::size_t> hist(4, 0);
  for (const Sample& s : d.all().samples) ++hist.at(static_cast<std::size_t>(s.label));
  EXPECT_EQ(hist, (std::vector<std::size_t>{50, 50, 50, 50}));
}

TEST(SyntheticCls, IntensitiesNormalized) {
  const Dataset d = make_synthetic_cls(cls_spec());
  for (const Sample& s : d.all().samples) {
    EXPECT_EQ(s.image.shape(), (Shape{3, 32, 32}));
    for (double v : s.image.values()) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(SyntheticCls, ClassesLookDifferent) {
  // Same-class pairs are not identical: nuisance variation is present.
  const Dataset d = make_synthetic_cls(cls_spec(8));
  EXPECT_NE(d.all().samples[0].image, d.all().samples[4].image);
}

TEST(SyntheticCls, RejectsSmallResolution) {
  DatasetSpec s = cls_spec();
  s.resolution = 8;
  EXPECT_THROW(make_synthetic_cls(s), InvalidArgument);
  s = cls_spec();
  s.num_classes = 5;
  EXPECT_THROW(make_synthetic_cls(s), InvalidArgument);
}

TEST(SyntheticSeg, BackgroundFractionBounds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (std::size_t K : {1u, 2u, 3u}) {
      const Dataset d = make_synthetic_seg(seg_spec(K, seed));
      for (const Sample& s : d.all().samples) {
        const double bg = static_cast<double>(std::count(s.mask.begin(), s.mask.end(), 0)) / s.mask.size();
        ASSERT_GT(bg, 0.3) << "seed " << seed;
        ASSERT_LT(bg, 0.95) << "seed " << seed;
      }
    }
  }
}

TEST(SyntheticSeg, LabelsAndShapes) {
  const Dataset d = make_synthetic_seg(seg_spec(3, 1));
  std::set<int> seen;
  for (const Sample& s : d.all().samples) {
    EXPECT_EQ(s.mask.size(), 32u * 32u);
    EXPECT_EQ(s.image.dim(1) * s.image.dim(2), s.mask.size());
    seen.insert(s.mask.begin(), s.mask.end());
  }
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_LE(*seen.rbegin(), 3);
  EXPECT_EQ(seen.size(), 4u);
}

TEST(SyntheticSeg, DeterministicGivenSeed) {
  EXPECT_EQ(make_synthetic_seg(seg_spec(2, 3)).fingerprint(), make_synthetic_seg(seg_spec(2, 3)).fingerprint());
}

TEST(Split, DisjointAndExhaustive) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset d = make_synthetic_cls(cls_spec(70, seed));
    std::vector<std::size_t> all = d.train_indices();
    all.insert(all.end(), d.test_indices().begin(), d.test_indices().end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
    EXPECT_EQ(d.train_indices().size(), 20u);
    EXPECT_EQ(d.training_set().size(), 20u);
    EXPECT_EQ(d.test().size(), 50u);
    for (std::size_t k = 0; k < d.train_indices().size(); ++k) {
      EXPECT_EQ(d.training_set().samples().samples[k].image, d.all().samples[d.train_indices()[k]].image);
    }
  }
}

TEST(Split, DefaultIs200Train500Test) {
  const Dataset d = make_dataset(DatasetSpec{});
  EXPECT_EQ(d.training_set().size(), 200u);
  EXPECT_EQ(d.test().size(), 500u);
}

TEST(SpecValidation, SplitMustSumToOne) {
  DatasetSpec s = cls_spec();
  s.split = {0.5, 0.4};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.split = {0.5};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = cls_spec();
  s.channels = 2;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Normalization, EndpointsAndRoundTrip) {
  EXPECT_EQ(normalize_intensity(255), 1.0);
  EXPECT_EQ(normalize_intensity(0), -1.0);
  for (int v = 0; v < 256; ++v) {
    EXPECT_EQ(denormalize_intensity(normalize_intensity(static_cast<std::uint8_t>(v))), v);
  }
  EXPECT_EQ(denormalize_intensity(3.0), 255);
  EXPECT_EQ(denormalize_intensity(-3.0), 0);
}

TEST(MakeBatch, StacksImagesAndLabels) {
  const Dataset d = make_synthetic_cls(cls_spec(8));
  const Batch b = make_batch(d.all(), {3, 1});
  EXPECT_EQ(b.images.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(b.labels, (std::vector<int>{d.all().samples[3].label, d.all().samples[1].label}));
  EXPECT_EQ(b.images[0], d.all().samples[3].image[0]);
  EXPECT_THROW(make_batch(d.all(), {9}), InvalidArgument);
}

TEST(IngestFolder, ClassificationInPathOrder) {
  const fs::path root = scratch("cls");
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");
  for (int i = 0; i < 3; ++i) write_solid(root / "a" / ("img" + std::to_string(i) + ".png"), 20, 255);
  for (int i = 0; i < 2; ++i) write_solid(root / "b" / ("img" + std::to_string(i) + ".png"), 24, 0);
  DatasetSpec s;
  s.kind = DatasetKind::folder;
  s.path = root.string();
  s.num_classes = 2;
  s.resolution = 16;
  s.split = {0.6, 0.4};
  const Dataset d = ingest_folder(root, s);
  ASSERT_EQ(d.all().size(), 5u);
  std::vector<int> labels;
  for (const Sample& x : d.all().samples) labels.push_back(x.label);
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 0, 1, 1}));
  EXPECT_EQ(d.all().samples[0].image.shape(), (Shape{3, 16, 16}));
  for (double v : d.all().samples[0].image.values()) EXPECT_EQ(v, 1.0);
  for (double v : d.all().samples[4].image.values()) EXPECT_EQ(v, -1.0);
  EXPECT_EQ(d.training_set().size() + d.test().size(), 5u);
  fs::remove_all(root);
}

TEST(IngestFolder, SkipsUnreadableAndRejectsEmptyClass) {
  const fs::path root = scratch("bad");
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");
  write_solid(root / "a" / "ok.png", 16, 10);
  { std::ofstream(root / "a" / "broken.png") << "not a png"; }
  { std::ofstream(root / "b" / "broken.png") << "not a png"; }
  DatasetSpec s;
  s.kind = DatasetKind::folder;
  s.path = root.string();
  s.num_classes = 2;
  s.resolution = 16;
  EXPECT_THROW(ingest_folder(root, s), InvalidArgument);
  write_solid(root / "b" / "ok.png", 16, 10);
  EXPECT_EQ(ingest_folder(root, s).all().size(), 2u);
  fs::remove_all(root);
}

TEST(IngestFolder, SegmentationNeedsMasks) {
  const fs::path root = scratch("seg");
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  write_solid(root / "images" / "x0.png", 16, 128);
  write_solid(root / "masks" / "x0.png", 16, 1, 1);
  write_solid(root / "images" / "x1.png", 16, 128);
  DatasetSpec s;
  s.kind = DatasetKind::folder;
  s.folder_task = Task::segmentation;
  s.path = root.string();
  s.num_classes = 1;
  s.resolution = 16;
  try {
    ingest_folder(root, s);
    FAIL() << "expected missing-mask error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("x1.png"), std::string::npos);
  }
  write_solid(root / "masks" / "x1.png", 16, 0, 1);
  const Dataset d = ingest_folder(root, s);
  EXPECT_EQ(d.all().samples[0].mask, std::vector<int>(256, 1));
  EXPECT_EQ(d.all().samples[1].mask, std::vector<int>(256, 0));
  fs::remove_all(root);
}

TEST(IngestFolder, MissingDirectory) {
  DatasetSpec s;
  s.kind = DatasetKind::folder;
  s.path = "/nonexistent/advaug";
  EXPECT_THROW(make_dataset(s), InvalidArgument);
}
