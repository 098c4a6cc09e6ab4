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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "advaug/checkpoint.hpp"
#include "advaug/config.hpp"
#include "advaug/errors.hpp"
#include "advaug/png_io.hpp"
#include "fixtures.hpp"
#include "json.hpp"

using namespace advaug;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("advaug_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_key(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(ArchiveFormat, RoundTripPreservesOrderAndValues) {
  const fs::path dir = scratch("archive");
  Archive a;
  a.put("x/w", Tensor({2, 3}, {1.0 / 3, -2, 1e-300, 4, 5, 6}));
  a.put_text("meta/step", "42");
  a.put("x/h", Tensor({3}, {0.1, 0.2, 0.3}), Precision::f32);
  a.save(dir / "a.bin");
  EXPECT_FALSE(fs::exists(dir / "a.bin.tmp"));

  const Archive b = Archive::load(dir / "a.bin");
  EXPECT_EQ(b.names(), (std::vector<std::string>{"x/w", "meta/step", "x/h"}));
  EXPECT_EQ(b.tensor("x/w"), a.tensor("x/w"));
  EXPECT_EQ(b.text("meta/step"), "42");
  EXPECT_TRUE(b.is_text("meta/step"));
  EXPECT_FALSE(b.is_text("x/w"));
  EXPECT_EQ(b.tensor("x/h")[0], static_cast<double>(0.1f));
  EXPECT_THROW(b.tensor("meta/step"), InvalidArgument);
  EXPECT_THROW(b.text("missing"), InvalidArgument);

  b.save(dir / "b.bin");
  std::ifstream fa(dir / "a.bin", std::ios::binary), fb(dir / "b.bin", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(fa), {}), std::string(std::istreambuf_iterator<char>(fb), {}));
  fs::remove_all(dir);
}

TEST(ArchiveFormat, RejectsForeignAndTruncatedFiles) {
  const fs::path dir = scratch("bad");
  { std::ofstream(dir / "junk.bin") << "definitely not an archive"; }
  EXPECT_THROW(Archive::load(dir / "junk.bin"), InvalidArgument);
  EXPECT_THROW(Archive::load(dir / "absent.bin"), InvalidArgument);

  Archive a;
  a.put("w", Tensor({100}, 1.0));
  a.save(dir / "full.bin");
  const auto size = fs::file_size(dir / "full.bin");
  fs::copy_file(dir / "full.bin", dir / "cut.bin");
  fs::resize_file(dir / "cut.bin", size - 10);
  EXPECT_THROW(Archive::load(dir / "cut.bin"), InvalidArgument);
  fs::remove_all(dir);
}

TEST(ArchiveParameters, LoadChecksShapes) {
  Rng rng(1);
  nn::Linear a(3, 2, rng), b(3, 2, rng), c(4, 2, rng);
  nn::Parameters pa, pb, pc;
  a.collect(pa, "L");
  b.collect(pb, "L");
  c.collect(pc, "L");
  Archive ar;
  ar.put_parameters(pa);
  ar.load_parameters(pb);
  EXPECT_EQ(b.weight.value(), a.weight.value());
  EXPECT_THROW(ar.load_parameters(pc), InvalidArgument);
  nn::Parameters other;
  c.collect(other, "M");
  EXPECT_THROW(ar.load_parameters(other), InvalidArgument);
}

TEST(ArchiveState, TripletRoundTripIsExact) {
  const ModelConfig m = fixture::small_model();
  const Dataset d = make_dataset(fixture::small_data());
  TripletState a(m, fixture::small_trainer());
  fit(a, d.training_set());
  const fs::path dir = scratch("triplet");
  a.to_archive().save(dir / "ck.bin");
  TripletState b(m, fixture::small_trainer());
  b.load_archive(Archive::load(dir / "ck.bin"));
  EXPECT_EQ(b.step(), a.step());
  b.to_archive().save(dir / "ck2.bin");
  std::ifstream f1(dir / "ck.bin", std::ios::binary), f2(dir / "ck2.bin", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
  fs::remove_all(dir);
}

TEST(ArchiveState, NamesFollowNetworkLayerParam) {
  TrainerConfig t = fixture::small_trainer();
  t.enabled = {GeneratorKind::affine};
  t.batch_size = 4;
  TripletState s(fixture::small_model(), t);
  const Archive a = s.to_archive();
  bool has_ga = false, has_d = false;
  for (const std::string& name : a.names()) {
    EXPECT_EQ(name.rfind("G_D/", 0), std::string::npos) << name;
    EXPECT_EQ(name.rfind("G_I/", 0), std::string::npos) << name;
    has_ga |= name.rfind("G_A/", 0) == 0;
    has_d |= name.rfind("D/", 0) == 0;
  }
  EXPECT_TRUE(has_ga);
  EXPECT_TRUE(has_d);
  EXPECT_TRUE(a.contains("meta/step"));
}

TEST(RunConfigJson, DefaultsMatchTheFramework) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_EQ(c.trainer.weights.lambda_gan, 1.0);
  EXPECT_EQ(c.trainer.weights.gamma_reg, 0.1);
  EXPECT_EQ(c.model.noise_dim, 128u);
  EXPECT_EQ(c.trainer.batch_size, 32u);
  EXPECT_EQ(c.trainer.enabled.size(), 3u);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfigJson, RoundTrip) {
  RunConfig c;
  c.dataset.kind = DatasetKind::synthetic_seg;
  c.dataset.num_classes = 3;
  c.dataset.split = {0.25, 0.75};
  c.model.classifier_widths = {8, 8};
  c.trainer.weights.gamma_reg = 1e6;
  c.trainer.gan_variant = GanVariant::nonsaturating;
  c.trainer.enabled = {GeneratorKind::appearance, GeneratorKind::affine};
  c.trainer.target_optim.lr = 3e-4;
  c.trainer.seed = 99;
  c.out = "runs/x";
  EXPECT_EQ(parse_run_config(to_json(c)), c);
  EXPECT_EQ(parse_run_config(to_json(c, -1)), c);
}

TEST(RunConfigJson, UnknownKeysAreNamed) {
  EXPECT_EQ(error_key(R"({"loss": {"gamma_regg": 1}})"), "loss.gamma_regg");
  EXPECT_EQ(error_key(R"({"gamma_regg": 1})"), "gamma_regg");
  EXPECT_EQ(error_key(R"({"optim": {"target": {"momentum": 0.9}}})"), "optim.target.momentum");
  try {
    parse_run_config(R"({"loss": {"gamma_regg": 1}})");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma_regg"), std::string::npos);
  }
}

TEST(RunConfigJson, TypeAndValueErrorsAreNamed) {
  EXPECT_EQ(error_key(R"({"batch_size": -4})"), "batch_size");
  EXPECT_EQ(error_key(R"({"batch_size": "32"})"), "batch_size");
  EXPECT_EQ(error_key(R"({"loss": {"gan_variant": "wasserstein"}})"), "loss.gan_variant");
  EXPECT_EQ(error_key(R"({"enabled_generators": ["affine", "zoom"]})"), "enabled_generators[1]");
  EXPECT_EQ(error_key(R"({"dataset": 3})"), "dataset");
  EXPECT_EQ(error_key("{not json"), "<json>");
}

TEST(RunConfigJson, ValidateCatchesCrossFieldErrors) {
  auto validate_key = [](std::string_view text) {
    try {
      parse_run_config(text).validate();
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string();
  };
  EXPECT_EQ(validate_key(R"({"batch_size": 6})"), "batch_size");
  EXPECT_EQ(validate_key(R"({"loss": {"reverse_scale": 0}})"), "reverse_scale");
  EXPECT_EQ(validate_key(R"({"dataset": {"resolution": 12}})"), "dataset");
  EXPECT_EQ(validate_key(R"({"dataset": {"split": [0.5, 0.6]}})"), "dataset");
  EXPECT_EQ(validate_key(R"({"out": ""})"), "out");
  EXPECT_EQ(validate_key(R"({"enabled_generators": []})"), "");
}

TEST(RunConfigJson, ModelConfigMirrorsSizes) {
  RunConfig c;
  c.dataset.resolution = 16;
  c.model.noise_dim = 8;
  const ModelConfig m = c.model_config();
  EXPECT_EQ(m.generator.resolution, 16u);
  EXPECT_EQ(m.discriminator.resolution, 16u);
  EXPECT_EQ(m.target.resolution, 16u);
  EXPECT_EQ(m.generator.noise_dim, 8u);
}

TEST(ManifestFile, RoundTrip) {
  const fs::path dir = scratch("manifest");
  Manifest m;
  m.config.trainer.seed = 5;
  m.dataset_fingerprint = 0xfedcba9876543210ULL;
  m.version = "1.0.0";
  m.created = "2026-01-01T00:00:00Z";
  m.results_json = R"({"balanced_accuracy":0.5})";
  write_manifest(dir / kManifestFile, m);
  const Manifest r = read_manifest(dir / kManifestFile);
  EXPECT_EQ(r.config, m.config);
  EXPECT_EQ(r.dataset_fingerprint, m.dataset_fingerprint);
  EXPECT_EQ(r.version, m.version);
  EXPECT_EQ(r.created, m.created);
  EXPECT_EQ(nlohmann::json::parse(r.results_json), nlohmann::json::parse(m.results_json));
  fs::remove_all(dir);
}

TEST(PngFiles, RoundTripRgbAndGray) {
  const fs::path dir = scratch("png");
  for (std::size_t channels : {1u, 3u}) {
    PngImage img{5, 3, channels, {}};
    for (std::size_t i = 0; i < 5 * 3 * channels; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 7));
    write_png(dir / "x.png", img);
    const PngImage back = read_png(dir / "x.png");
    EXPECT_EQ(back.width, 5u);
    EXPECT_EQ(back.height, 3u);
    EXPECT_EQ(back.channels, channels);
    EXPECT_EQ(back.pixels, img.pixels);
  }
  EXPECT_THROW(write_png(dir / "y.png", PngImage{2, 2, 3, {1, 2}}), InvalidArgument);
  { std::ofstream(dir / "bad.png") << "nope"; }
  EXPECT_THROW(read_png(dir / "bad.png"), InvalidArgument);
  fs::remove_all(dir);
}
