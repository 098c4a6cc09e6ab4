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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advaug/checkpoint.hpp"
#include "advaug/data.hpp"
#include "advaug/generators.hpp"
#include "advaug/losses.hpp"
#include "advaug/nn.hpp"
#include "advaug/target.hpp"

namespace advaug {

/// Network shapes shared by every run on a dataset.
struct ModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  TargetConfig target;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainerConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  LossWeights weights;
  GanVariant gan_variant = GanVariant::minimax;
  double reverse_scale = 1.0;
  /// Empty runs the no-augmentation baseline: T alone on clean batches.
  std::vector<GeneratorKind> enabled{GeneratorKind::affine, GeneratorKind::deform,
                                     GeneratorKind::appearance};
  nn::AdamConfig generator_optim{2e-4, 0.5, 0.999, 1e-8};
  nn::AdamConfig discriminator_optim{2e-4, 0.5, 0.999, 1e-8};
  nn::AdamConfig target_optim{1e-3, 0.9, 0.999, 1e-8};
  std::size_t checkpoint_every = 500;
  std::uint64_t seed = 0;

  bool is_enabled(GeneratorKind kind) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

struct BatchPart {
  BNGroup group = BNGroup::main;
  std::optional<GeneratorKind> kind;   ///< empty for the clean part
  std::vector<std::size_t> positions;  ///< rows of the source batch
  Batch data;
};

/// Clean part first, then one part per enabled generator in
/// affine/deform/appearance order.
struct BatchQuadruple {
  std::vector<BatchPart> parts;

  std::size_t total() const;
};

/// Round-robin split: row k goes to part k mod (1 + enabled.size()).
BatchQuadruple split_batch(const Batch& batch, std::span<const GeneratorKind> enabled);

struct StepCounters {
  std::uint64_t generator_forwards = 0;
  std::uint64_t fused_backwards = 0;
  std::uint64_t discriminator_backwards = 0;
  std::uint64_t tape_backwards = 0;  ///< ad::backward_calls() delta
};

class TripletState {
 public:
  TripletState(const ModelConfig& model, const TrainerConfig& trainer);

  const ModelConfig& model() const { return model_; }
  const TrainerConfig& trainer() const { return trainer_; }

  /// Null when the generator is disabled.
  Generator* generator(GeneratorKind kind);
  /// Null for the baseline.
  Discriminator* discriminator() { return discriminator_ ? &*discriminator_ : nullptr; }
  TargetNetwork& target() { return target_; }

  std::uint64_t step() const { return step_; }
  const StepCounters& last_counters() const { return counters_; }

  /// Every parameter, buffer and optimizer slot plus the step counter.
  Archive to_archive();
  void load_archive(const Archive& a);
  /// Enabled generators only, single precision.
  Archive generator_snapshot();

  /// Path reported by NumericalAbort.
  std::string last_good_checkpoint;

 private:
  friend LossReport train_step(TripletState&, const Batch&, const Batch&);
  std::vector<nn::Adam*> optimizers();

  ModelConfig model_;
  TrainerConfig trainer_;
  std::array<std::optional<Generator>, 3> generators_;
  std::optional<Discriminator> discriminator_;
  TargetNetwork target_;
  std::array<nn::Adam, 3> generator_optim_;
  nn::Adam discriminator_optim_;
  nn::Adam target_optim_;
  std::uint64_t step_ = 0;
  StepCounters counters_;
};

/// Graph of the (G, T) objective on one batch.
struct FusedGraph {
  BatchQuadruple split;
  ad::Var l_adv;
  ad::Var l_gan_g;
  ad::Var l_reg;
  ad::Var total;
  std::array<ad::Var, 3> reg;  ///< per generator kind, undefined when disabled
  ad::Var fakes;  ///< augmented parts stacked in part order
};

/// Builds the fused graph for the state's current step. D scores the real
/// x2 batch and the fakes in one forward so its batch statistics span both.
/// With `reverse` the task loss reaches G through grad_reverse; without it
/// the graph is plain so callers can form the two-pass reference.
FusedGraph build_fused_graph(TripletState& state, const Batch& x1, const Batch& x2, bool reverse = true);

/// Logits of D on [real; fake] in one train-mode batch, split back apart.
std::pair<ad::Var, ad::Var> score_real_and_fake(Discriminator& d, const ad::Var& real, const ad::Var& fake);

/// Per-example noise for one step and generator.
Tensor step_noise(const TripletState& state, GeneratorKind kind, std::size_t batch);

/// One step of the triplet game on x1 (task and augmentation) and x2 (real
/// images for D). Throws NumericalAbort before any update if a loss is
/// non-finite.
LossReport train_step(TripletState& state, const Batch& x1, const Batch& x2);

struct FitOptions {
  std::filesystem::path out_dir;  ///< empty disables all file output
  bool resume = false;            ///< state was loaded from out_dir's checkpoint
  std::uint64_t max_steps = 0;    ///< stop early after this many steps; 0 runs the full budget
  /// Called after each completed epoch with its last report.
  std::function<void(std::size_t epoch, const LossReport&)> on_epoch;
};

struct FitResult {
  std::vector<LossReport> history;  ///< steps run by this call
};

std::size_t steps_per_epoch(std::size_t train_size, std::size_t batch_size);

/// Runs the configured epochs from state.step(). Writes metrics.csv,
/// checkpoint_last.bin and epoch_<e>.bin snapshots into out_dir.
FitResult fit(TripletState& state, const TrainingSet& data, const FitOptions& options = {});

inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kLastCheckpoint = "checkpoint_last.bin";
std::filesystem::path epoch_snapshot_path(const std::filesystem::path& dir, std::size_t epoch);

struct EvalResult {
  Task task = Task::classification;
  double accuracy = 0.0;  ///< overall (pixel accuracy for segmentation)
  double balanced_accuracy = 0.0;
  double mean_dice = 0.0;
  std::size_t samples = 0;
};

/// Main BNs, eval mode.
EvalResult evaluate(TargetNetwork& net, const SampleSet& set, std::size_t batch = 64);

}  // namespace advaug
