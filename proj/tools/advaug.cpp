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

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advaug/checkpoint.hpp"
#include "advaug/config.hpp"
#include "advaug/data.hpp"
#include "advaug/errors.hpp"
#include "advaug/gradcheck.hpp"
#include "advaug/trainer.hpp"
#include "advaug/visualize.hpp"

namespace fs = std::filesystem;
using namespace advaug;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumericalAbort = 3 };

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string results_json(const EvalResult& r) {
  nlohmann::json j = {{"samples", r.samples}, {"accuracy", r.accuracy}, {"balanced_accuracy", r.balanced_accuracy}};
  if (r.task == Task::segmentation) j["mean_dice"] = r.mean_dice;
  return j.dump();
}

void print_eval(const EvalResult& r) {
  std::printf("samples            %zu\n", r.samples);
  if (r.task == Task::classification) {
    std::printf("accuracy           %.6f\n", r.accuracy);
    std::printf("balanced_accuracy  %.6f\n", r.balanced_accuracy);
  } else {
    std::printf("pixel_accuracy     %.6f\n", r.accuracy);
    std::printf("mean_dice          %.6f\n", r.mean_dice);
  }
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> epochs;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.trainer.seed = *a.seed;
  if (a.out) cfg.out = *a.out;
  if (a.epochs) cfg.trainer.epochs = *a.epochs;
  cfg.validate();

  const Dataset data = make_dataset(cfg.dataset);
  TripletState state(cfg.model_config(), cfg.trainer);
  FitOptions options;
  options.out_dir = cfg.out;
  if (a.checkpoint) {
    state.load_archive(Archive::load(*a.checkpoint));
    options.resume = true;
    std::fprintf(stderr, "resuming from %s at step %llu\n", a.checkpoint->c_str(),
                 static_cast<unsigned long long>(state.step()));
  }
  fs::create_directories(options.out_dir);

  Manifest manifest{cfg, data.fingerprint(), ADVAUG_VERSION, utc_now(), "{}"};
  write_manifest(options.out_dir / kManifestFile, manifest);

  const std::size_t spe = steps_per_epoch(data.training_set().size(), cfg.trainer.batch_size);
  options.on_epoch = [&](std::size_t epoch, const LossReport& r) {
    std::fprintf(stderr, "epoch %zu/%zu  step %llu  l_adv %.4f  l_gan_d %.4f  l_reg %.3e\n", epoch,
                 cfg.trainer.epochs, static_cast<unsigned long long>(r.step + 1), r.l_adv, r.l_gan_d, r.l_reg);
  };
  std::fprintf(stderr, "training %zu epochs x %zu steps, generators: %zu, out: %s\n", cfg.trainer.epochs, spe,
               cfg.trainer.enabled.size(), cfg.out.c_str());
  fit(state, data.training_set(), options);

  const EvalResult result = evaluate(state.target(), data.test());
  print_eval(result);
  manifest.results_json = results_json(result);
  write_manifest(options.out_dir / kManifestFile, manifest);
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::optional<std::string> config;
};

int cmd_eval(const EvalArgs& a) {
  const fs::path ckpt(a.checkpoint);
  RunConfig cfg;
  if (a.config) {
    cfg = load_run_config(*a.config);
  } else {
    const fs::path manifest = ckpt.parent_path() / kManifestFile;
    if (!fs::exists(manifest)) {
      throw ConfigError("no --config given and no " + manifest.string() + " next to the checkpoint", "config");
    }
    cfg = read_manifest(manifest).config;
  }
  cfg.validate();
  const Dataset data = make_dataset(cfg.dataset);
  TargetNetwork net(cfg.model_config().target, 0);
  Archive::load(ckpt).load_parameters(net.parameters());
  print_eval(evaluate(net, data.test()));
  return kOk;
}

struct GradcheckArgs {
  std::optional<std::string> config;
  std::uint64_t seed = 0;
  double threshold = 1e-3;
  std::optional<std::string> out;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  GradcheckOptions o;
  o.seed = a.seed;
  o.threshold = a.threshold;
  if (a.config) o.seed = load_run_config(*a.config).trainer.seed;
  if (a.seed != 0) o.seed = a.seed;
  const GradcheckReport report = run_gradcheck(o);
  const std::string csv = report.to_csv();
  std::fputs(csv.c_str(), stdout);
  fs::path path = "gradcheck_report.csv";
  if (a.out) {
    fs::create_directories(*a.out);
    path = fs::path(*a.out) / path;
  }
  std::ofstream(path) << csv;
  if (!report.passed()) {
    std::string names;
    for (const auto& f : report.failures()) names += " " + f;
    std::fprintf(stderr, "gradcheck failed:%s\n", names.c_str());
    return kCheckFailed;
  }
  std::fprintf(stderr, "gradcheck passed: %zu ops, report %s\n", report.rows.size(), path.c_str());
  return kOk;
}

struct VisualizeArgs {
  std::string run_dir;
  std::string epochs;
  std::optional<std::string> png;
  std::uint64_t seed = 0;
};

std::vector<std::size_t> parse_epoch_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InvalidArgument("--epochs: '" + item + "' is not an epoch number");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw InvalidArgument("--epochs: empty list");
  return out;
}

int cmd_visualize(const VisualizeArgs& a) {
  const fs::path dir(a.run_dir);
  if (!fs::is_directory(dir)) throw InvalidArgument("run directory " + dir.string() + " does not exist");
  const RunConfig cfg = read_manifest(dir / kManifestFile).config;
  std::vector<std::size_t> epochs = a.epochs.empty() ? available_epochs(dir) : parse_epoch_list(a.epochs);
  const Dataset data = make_dataset(cfg.dataset);
  const Tensor& probe = data.training_set().samples().samples.at(0).image;
  GridSpec spec;
  spec.epochs = epochs;
  spec.noise_seed = a.seed;
  const PngImage grid = render_augmentation_grid(dir, cfg.model_config().generator, probe, spec);
  const fs::path out = a.png ? fs::path(*a.png) : dir / "augmentation_grid.png";
  write_png(out, grid);
  std::printf("%s\n", out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized adversarial data augmentation: train, eval, gradcheck, visualize"};
  app.set_version_flag("--version", ADVAUG_VERSION);
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the target, generators and discriminator");
  t->add_option("--config", train.config, "JSON run configuration")->required();
  t->add_option("--seed", train.seed, "Override the run seed");
  t->add_option("--out", train.out, "Override the output directory");
  t->add_option("--checkpoint", train.checkpoint, "Resume from this checkpoint archive");
  t->add_option("--epochs", train.epochs, "Override the epoch budget");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint's target network on the test split (main BNs)");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint archive")->required();
  e->add_option("--config", eval.config, "Run configuration (default: manifest next to the checkpoint)");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference audit of all differentiable ops");
  g->add_option("--config", gc.config, "Run configuration (only its seed is used)");
  g->add_option("--seed", gc.seed, "Seed for the random instances");
  g->add_option("--threshold", gc.threshold, "Maximum allowed relative error");
  g->add_option("--out", gc.out, "Directory for gradcheck_report.csv (default: working directory)");

  VisualizeArgs vis;
  auto* v = app.add_subcommand("visualize", "Render the augmentation grid of a training run");
  v->add_option("--out", vis.run_dir, "Run directory holding manifest.json and epoch snapshots")->required();
  v->add_option("--epochs", vis.epochs, "Comma-separated epochs (default: all snapshots)");
  v->add_option("--png", vis.png, "Output PNG (default: <run>/augmentation_grid.png)");
  v->add_option("--seed", vis.seed, "Noise seed for the grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kUsage;
  }

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*g) return cmd_gradcheck(gc);
    if (*v) return cmd_visualize(vis);
  } catch (const ConfigError& ex) {
    std::fprintf(stderr, "config error [%s]: %s\n", ex.key().c_str(), ex.what());
    return kUsage;
  } catch (const InvalidArgument& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kUsage;
  } catch (const NumericalAbort& ex) {
    std::fprintf(stderr, "numerical abort: %s\n", ex.what());
    return kNumericalAbort;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "internal error: %s\n", ex.what());
    return kCheckFailed;
  }
  return kUsage;
}
