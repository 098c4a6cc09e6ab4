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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "advaug/checkpoint.hpp"
#include "advaug/config.hpp"
#include "advaug/png_io.hpp"
#include "json.hpp"

using namespace advaug;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome cli(const std::string& args) {
  const std::string cmd = std::string(ADVAUG_CLI) + " " + args + " 2>&1";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("advaug_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_config(const fs::path& out) {
  return {{"dataset", {{"kind", "synthetic-cls"}, {"resolution", 16}, {"size", 64}, {"split", {0.5, 0.5}}}},
          {"model",
           {{"noise_dim", 8},
            {"noise_channels", 8},
            {"image_widths", {4, 8, 8, 8}},
            {"trunk_width", 8},
            {"discriminator_widths", {8, 8, 16}},
            {"classifier_widths", {8, 16, 16}}}},
          {"batch_size", 8},
          {"epochs", 1},
          {"out", out.string()}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string l;
  while (std::getline(ss, l)) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

}  // namespace

TEST(Cli, ZeroEpochsWritesHeaderOnly) {
  const fs::path dir = scratch("zero");
  json j = small_config(dir / "run");
  j["epochs"] = 0;
  const Outcome r = cli("train --config " + write_config(dir, j).string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = lines(slurp(dir / "run" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].rfind("step,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "run" / kManifestFile));
}

TEST(Cli, UnknownKeyExitsTwoNamingIt) {
  const fs::path dir = scratch("typo");
  json j = small_config(dir / "run");
  j["loss"] = {{"gamma_regg", 1.0}};
  const Outcome r = cli("train --config " + write_config(dir, j).string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("gamma_regg"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir / "run" / "metrics.csv"));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("train").code, 2);
  EXPECT_EQ(cli("train --config /nonexistent/config.json").code, 2);
}

TEST(Cli, AffineOnlyRunHasNoOtherGenerators) {
  const fs::path dir = scratch("affine");
  json j = small_config(dir / "run");
  j["enabled_generators"] = {"affine"};
  const Outcome r = cli("train --config " + write_config(dir, j).string());
  ASSERT_EQ(r.code, 0) << r.output;
  const Archive a = Archive::load(dir / "run" / kLastCheckpoint);
  bool affine = false;
  for (const std::string& name : a.names()) {
    EXPECT_NE(name.rfind("G_D/", 0), 0u) << name;
    EXPECT_NE(name.rfind("G_I/", 0), 0u) << name;
    affine = affine || name.rfind("G_A/", 0) == 0;
  }
  EXPECT_TRUE(affine);
  const auto rows = lines(slurp(dir / "run" / "metrics.csv"));
  ASSERT_GE(rows.size(), 2u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::stringstream ss(rows[i]);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    cells.resize(8);
    EXPECT_FALSE(cells[4].empty());
    EXPECT_TRUE(cells[5].empty());
    EXPECT_TRUE(cells[6].empty());
  }
}

TEST(Cli, TrainIsDeterministicAndEvalMatches) {
  const fs::path dir = scratch("det");
  const fs::path ca = write_config(dir, small_config(dir / "a"));
  const Outcome a = cli("train --config " + ca.string());
  ASSERT_EQ(a.code, 0) << a.output;
  const Outcome b = cli("train --config " + ca.string() + " --out " + (dir / "b").string());
  ASSERT_EQ(b.code, 0) << b.output;
  const std::string csv = slurp(dir / "a" / "metrics.csv");
  EXPECT_GE(lines(csv).size(), 5u);
  EXPECT_EQ(csv, slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(read_manifest(dir / "a" / kManifestFile).dataset_fingerprint,
            read_manifest(dir / "b" / kManifestFile).dataset_fingerprint);
  EXPECT_EQ(slurp(dir / "a" / kLastCheckpoint), slurp(dir / "b" / kLastCheckpoint));

  const Outcome e = cli("eval --checkpoint " + (dir / "a" / kLastCheckpoint).string());
  ASSERT_EQ(e.code, 0) << e.output;
  const auto metric = [](const std::string& out) {
    const auto at = out.find("balanced_accuracy");
    return at == std::string::npos ? std::string() : out.substr(at, out.find('\n', at) - at);
  };
  EXPECT_FALSE(metric(e.output).empty());
  EXPECT_EQ(metric(e.output), metric(a.output));
}

TEST(Cli, SeedOverrideChangesRun) {
  const fs::path dir = scratch("seed");
  const fs::path c = write_config(dir, small_config(dir / "a"));
  ASSERT_EQ(cli("train --config " + c.string()).code, 0);
  ASSERT_EQ(cli("train --config " + c.string() + " --seed 7 --out " + (dir / "b").string()).code, 0);
  EXPECT_NE(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(read_manifest(dir / "b" / kManifestFile).config.trainer.seed, 7u);
}

TEST(Cli, DivergenceExitsThree) {
  const fs::path dir = scratch("nan");
  json j = small_config(dir / "run");
  j["optim"] = {{"target", {{"lr", 1e300}}}};
  const Outcome r = cli("train --config " + write_config(dir, j).string());
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("checkpoint"), std::string::npos) << r.output;
}

TEST(Cli, GradcheckReportsEveryOp) {
  const fs::path dir = scratch("gradcheck");
  const Outcome ok = cli("gradcheck --out " + dir.string());
  ASSERT_EQ(ok.code, 0) << ok.output;
  const auto rows = lines(slurp(dir / "gradcheck_report.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "op,max_rel_error,checked,threshold,status");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NE(rows[i].find(",pass"), std::string::npos) << rows[i];
  for (const char* op : {"warp", "affine_to_flow", "reg_affine", "reg_deform", "reg_appear", "grad_reverse",
                         "generator.G_A", "generator.G_D", "generator.G_I"}) {
    EXPECT_NE(ok.output.find(op), std::string::npos) << op;
  }

  const Outcome strict = cli("gradcheck --threshold 1e-14 --out " + dir.string());
  EXPECT_EQ(strict.code, 1) << strict.output;
  EXPECT_EQ(lines(slurp(dir / "gradcheck_report.csv")).size(), rows.size());
}

TEST(Cli, VisualizeGrid) {
  EXPECT_EQ(cli("visualize --out /nonexistent/run").code, 2);

  const fs::path dir = scratch("vis");
  json j = small_config(dir / "run");
  j["epochs"] = 2;
  ASSERT_EQ(cli("train --config " + write_config(dir, j).string()).code, 0);
  const fs::path run = dir / "run";
  ASSERT_EQ(cli("visualize --out " + run.string() + " --epochs 0,1,2").code, 0);
  const fs::path png = run / "augmentation_grid.png";
  const std::string first = slurp(png);
  ASSERT_EQ(cli("visualize --out " + run.string() + " --epochs 0,1,2").code, 0);
  EXPECT_EQ(first, slurp(png));

  const PngImage img = read_png(png);
  const std::size_t R = 16, g = 2;
  EXPECT_EQ(img.width, 4 * R + 5 * g);
  EXPECT_EQ(img.height, 3 * R + 4 * g);
  // Identity-initialized generators reproduce the probe in the epoch-0 column.
  const auto px = [&](std::size_t y, std::size_t x, std::size_t c) {
    return img.pixels[(y * img.width + x) * img.channels + c];
  };
  for (std::size_t row = 0; row < 3; ++row) {
    const std::size_t top = g + row * (R + g);
    for (std::size_t y = 0; y < R; ++y) {
      for (std::size_t x = 0; x < R; ++x) {
        for (std::size_t c = 0; c < img.channels; ++c) {
          ASSERT_EQ(px(top + y, g + x, c), px(top + y, 2 * g + R + x, c));
        }
      }
    }
  }

  const Outcome missing = cli("visualize --out " + run.string() + " --epochs 0,9");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("available epochs: 0,1,2"), std::string::npos) << missing.output;
}
