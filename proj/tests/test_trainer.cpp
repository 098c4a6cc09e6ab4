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
#include <map>
#include <sstream>

#include "advaug/errors.hpp"
#include "advaug/ops.hpp"
#include "advaug/trainer.hpp"
#include "fixtures.hpp"

using namespace advaug;
namespace fs = std::filesystem;

namespace {

Batch numbered_batch(std::size_t B) {
  Batch b;
  b.images = Tensor({B, 1, 2, 2});
  for (std::size_t k = 0; k < B; ++k) {
    for (std::size_t i = 0; i < 4; ++i) b.images[k * 4 + i] = static_cast<double>(k);
    b.labels.push_back(static_cast<int>(k));
  }
  return b;
}

std::vector<std::size_t> part_sizes(const BatchQuadruple& q) {
  std::vector<std::size_t> s;
  for (const BatchPart& p : q.parts) s.push_back(p.positions.size());
  return s;
}

// Oracle for the round-robin policy: example k goes to part k mod parts.
std::vector<std::vector<std::size_t>> round_robin(std::size_t B, std::size_t parts) {
  std::vector<std::vector<std::size_t>> out(parts);
  for (std::size_t k = 0; k < B; ++k) out[k % parts].push_back(k);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("advaug_test_trainer_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, Tensor> grads_by_name(const nn::Parameters& p) {
  std::map<std::string, Tensor> out;
  for (const auto& r : p.params) out[r.name] = r.var.grad().empty() ? Tensor(r.var.shape()) : r.var.grad();
  return out;
}

// Largest elementwise difference relative to the largest gradient entry of the
// network; biases feeding batch norm have structurally zero gradients, so a
// per-element ratio would only measure roundoff.
double network_rel_diff(const std::map<std::string, Tensor>& a, const std::map<std::string, Tensor>& b) {
  double diff = 0, scale = 0;
  for (const auto& [name, g] : a) {
    const Tensor& h = b.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      diff = std::max(diff, std::abs(g[i] - h[i]));
      scale = std::max({scale, std::abs(g[i]), std::abs(h[i])});
    }
  }
  return scale > 0 ? diff / scale : diff;
}

struct World {
  ModelConfig model = fixture::small_model();
  Dataset data = make_dataset(fixture::small_data());
};

}  // namespace

TEST(SplitBatch, EightIntoEqualQuarters) {
  const BatchQuadruple q = split_batch(numbered_batch(8), kAllGeneratorKinds);
  EXPECT_EQ(part_sizes(q), (std::vector<std::size_t>{2, 2, 2, 2}));
}

TEST(SplitBatch, SevenGivesCleanTheExtra) {
  const BatchQuadruple q = split_batch(numbered_batch(7), kAllGeneratorKinds);
  EXPECT_EQ(part_sizes(q), (std::vector<std::size_t>{2, 2, 2, 1}));
  EXPECT_EQ(q.parts[0].group, BNGroup::main);
  EXPECT_FALSE(q.parts[0].kind.has_value());
}

TEST(SplitBatch, FourGivesSingletons) {
  EXPECT_EQ(part_sizes(split_batch(numbered_batch(4), kAllGeneratorKinds)),
            (std::vector<std::size_t>{1, 1, 1, 1}));
}

TEST(SplitBatch, MatchesRoundRobinOracle) {
  for (std::size_t B = 4; B <= 40; ++B) {
    for (std::size_t n_enabled = 0; n_enabled <= 3; ++n_enabled) {
      const std::span<const GeneratorKind> enabled(kAllGeneratorKinds, n_enabled);
      const BatchQuadruple q = split_batch(numbered_batch(B), enabled);
      const auto expect = round_robin(B, 1 + n_enabled);
      ASSERT_EQ(q.parts.size(), expect.size());
      EXPECT_EQ(q.total(), B);
      std::size_t lo = B, hi = 0;
      for (std::size_t p = 0; p < q.parts.size(); ++p) {
        EXPECT_EQ(q.parts[p].positions, expect[p]);
        for (std::size_t i = 0; i < expect[p].size(); ++i) {
          EXPECT_EQ(q.parts[p].data.labels[i], static_cast<int>(expect[p][i]));
          EXPECT_EQ(q.parts[p].data.images[i * 4], static_cast<double>(expect[p][i]));
        }
        lo = std::min(lo, expect[p].size());
        hi = std::max(hi, expect[p].size());
        if (p > 0) {
          EXPECT_EQ(q.parts[p].kind, kAllGeneratorKinds[p - 1]);
          EXPECT_EQ(q.parts[p].group, bn_group_for(kAllGeneratorKinds[p - 1]));
        }
      }
      EXPECT_LE(hi - lo, 1u);
    }
  }
}

TEST(SplitBatch, CarriesSegmentationMaps) {
  Batch b = numbered_batch(4);
  b.labels.clear();
  for (int k = 0; k < 4; ++k)
    for (int p = 0; p < 4; ++p) b.labels.push_back(k * 10 + p);
  const BatchQuadruple q = split_batch(b, kAllGeneratorKinds);
  EXPECT_EQ(q.parts[2].data.labels, (std::vector<int>{20, 21, 22, 23}));
}

TEST(SplitBatch, RejectsTinyBatches) {
  EXPECT_THROW(split_batch(numbered_batch(3), kAllGeneratorKinds), ConfigError);
}

TEST(TrainerConfigValidation, NamesOffendingKey) {
  auto key_of = [](TrainerConfig c) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string();
  };
  TrainerConfig c;
  EXPECT_EQ(key_of(c), "");
  c.batch_size = 3;
  EXPECT_EQ(key_of(c), "batch_size");
  c.batch_size = 6;  // four parts of at most 2 leave one singleton
  EXPECT_EQ(key_of(c), "batch_size");
  c = TrainerConfig{};
  c.enabled = {GeneratorKind::affine, GeneratorKind::affine};
  EXPECT_EQ(key_of(c), "enabled_generators");
  c = TrainerConfig{};
  c.weights.gamma_reg = -1;
  EXPECT_EQ(key_of(c), "gamma_reg");
  c = TrainerConfig{};
  c.reverse_scale = 0;
  EXPECT_EQ(key_of(c), "reverse_scale");
  c = TrainerConfig{};
  c.target_optim.lr = 0;
  EXPECT_NE(key_of(c).find("target_optim"), std::string::npos);
  c = TrainerConfig{};
  c.enabled.clear();
  c.batch_size = 4;
  EXPECT_EQ(key_of(c), "");
}

TEST(TripletStateInit, BaselineHasNoGeneratorsOrDiscriminator) {
  World s;
  TrainerConfig t = fixture::small_trainer();
  t.enabled.clear();
  TripletState st(s.model, t);
  EXPECT_EQ(st.discriminator(), nullptr);
  for (GeneratorKind k : kAllGeneratorKinds) EXPECT_EQ(st.generator(k), nullptr);
}

TEST(TripletStateInit, RejectsMismatchedModel) {
  ModelConfig m = fixture::small_model();
  m.discriminator.resolution = 32;
  EXPECT_THROW(TripletState(m, fixture::small_trainer()), ConfigError);
}

TEST(TrainStep, StepZeroIdentities) {
  World s;
  TripletState st(s.model, fixture::small_trainer());
  const Batch x1 = fixture::first_batch(s.data, 8, 0), x2 = fixture::first_batch(s.data, 8, 8);

  const FusedGraph g = build_fused_graph(st, x1, x2);
  std::vector<Tensor> clean;
  for (std::size_t p = 1; p < g.split.parts.size(); ++p) clean.push_back(g.split.parts[p].data.images);
  std::vector<ad::Var> vs;
  for (auto& t : clean) vs.emplace_back(t);
  EXPECT_EQ(g.fakes.value(), ad::concat(vs, 0).value());

  const LossReport r = train_step(st, x1, x2);
  EXPECT_EQ(r.step, 0u);
  EXPECT_EQ(r.l_reg, 0.0);
  EXPECT_EQ(r.reg_affine, 0.0);
  EXPECT_EQ(r.reg_deform, 0.0);
  EXPECT_EQ(r.reg_appear, 0.0);
  EXPECT_NEAR(r.l_gan_d, 2 * std::log(0.5), 1e-6);
  EXPECT_NEAR(r.l_gan_g, std::log(0.5), 1e-12);
  EXPECT_TRUE(r.consistent(st.trainer().weights));
  EXPECT_EQ(st.step(), 1u);
}

TEST(TrainStep, EveryNetworkChangesAfterOneStep) {
  World s;
  TripletState st(s.model, fixture::small_trainer());
  const Archive before = st.to_archive();
  train_step(st, fixture::first_batch(s.data, 8, 0), fixture::first_batch(s.data, 8, 8));
  const Archive after = st.to_archive();
  for (const std::string net : {"G_A/", "G_D/", "G_I/", "D/", "T/"}) {
    bool changed = false;
    for (const std::string& name : before.names()) {
      if (name.rfind(net, 0) == 0 && !before.is_text(name)) changed |= before.tensor(name) != after.tensor(name);
    }
    EXPECT_TRUE(changed) << net;
  }
}

TEST(TrainStep, CountersShowSinglePassEconomy) {
  World s;
  TripletState st(s.model, fixture::small_trainer());
  for (int i = 0; i < 3; ++i) {
    train_step(st, fixture::first_batch(s.data, 8, 0), fixture::first_batch(s.data, 8, 8));
    const StepCounters& c = st.last_counters();
    EXPECT_EQ(c.generator_forwards, 3u);
    EXPECT_EQ(c.fused_backwards, 1u);
    EXPECT_EQ(c.discriminator_backwards, 1u);
    EXPECT_EQ(c.tape_backwards, 2u);
  }
  for (GeneratorKind k : kAllGeneratorKinds) EXPECT_EQ(st.generator(k)->forward_calls(), 3u);

  TrainerConfig t = fixture::small_trainer();
  t.enabled = {GeneratorKind::deform};
  TripletState one(s.model, t);
  train_step(one, fixture::first_batch(s.data, 8), fixture::first_batch(s.data, 8, 8));
  EXPECT_EQ(one.last_counters().generator_forwards, 1u);
  EXPECT_EQ(one.last_counters().tape_backwards, 2u);

  t.enabled.clear();
  TripletState base(s.model, t);
  train_step(base, fixture::first_batch(s.data, 8), fixture::first_batch(s.data, 8, 8));
  EXPECT_EQ(base.last_counters().generator_forwards, 0u);
  EXPECT_EQ(base.last_counters().discriminator_backwards, 0u);
  EXPECT_EQ(base.last_counters().tape_backwards, 1u);
}

// The fused reversed pass must give G the gradient of -l_adv + lambda*gan + gamma*reg
// and T the gradient of l_adv, exactly as two explicit passes would.
TEST(FusedReversal, MatchesTwoPassGradients) {
  World s;
  const Batch x1 = fixture::first_batch(s.data, 4, 0), x2 = fixture::first_batch(s.data, 4, 4);
  for (GeneratorKind kind : kAllGeneratorKinds) {
    TrainerConfig t = fixture::small_trainer(4);
    t.enabled = {kind};
    TripletState st(s.model, t);
    Rng head(11);
    st.generator(kind)->randomize_head(head, 0.05);
    Rng dhead(12);
    st.discriminator()->randomize_head(dhead, 0.5);
    nn::Parameters gp = st.generator(kind)->parameters();
    nn::Parameters tp = st.target().parameters();

    gp.zero_grad();
    tp.zero_grad();
    const FusedGraph fused = build_fused_graph(st, x1, x2, true);
    ad::backward(fused.total);
    const auto g_fused = grads_by_name(gp), t_fused = grads_by_name(tp);

    gp.zero_grad();
    tp.zero_grad();
    const FusedGraph max_pass = build_fused_graph(st, x1, x2, false);
    ad::backward(ad::weighted_sum({max_pass.l_adv, max_pass.l_gan_g, max_pass.l_reg},
                                  {-1.0, t.weights.lambda_gan, t.weights.gamma_reg}));
    const auto g_two = grads_by_name(gp);

    tp.zero_grad();
    const FusedGraph min_pass = build_fused_graph(st, x1, x2, false);
    ad::backward(min_pass.l_adv);
    const auto t_two = grads_by_name(tp);

    double norm = 0;
    for (const auto& [name, g] : g_fused)
      for (double v : g.values()) norm += v * v;
    EXPECT_GT(norm, 0.0) << kind_name(kind);
    EXPECT_LT(network_rel_diff(g_fused, g_two), 1e-6) << kind_name(kind);
    EXPECT_LT(network_rel_diff(t_fused, t_two), 1e-6) << kind_name(kind);
  }
}

TEST(TrainStep, AbortsOnNonFiniteLoss) {
  World s;
  TripletState st(s.model, fixture::small_trainer());
  st.last_good_checkpoint = "/tmp/somewhere/checkpoint_last.bin";
  Batch bad = fixture::first_batch(s.data, 8);
  bad.images[0] = NAN;
  try {
    train_step(st, bad, fixture::first_batch(s.data, 8, 8));
    FAIL() << "expected NumericalAbort";
  } catch (const NumericalAbort& e) {
    EXPECT_EQ(e.last_good_checkpoint(), st.last_good_checkpoint);
  }
  EXPECT_EQ(st.step(), 0u);
}

TEST(Fit, ZeroEpochsLeavesStateUnchanged) {
  World s;
  TrainerConfig t = fixture::small_trainer();
  t.epochs = 0;
  TripletState st(s.model, t);
  const Archive before = st.to_archive();
  const FitResult r = fit(st, s.data.training_set());
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(st.step(), 0u);
  const Archive after = st.to_archive();
  for (const std::string& name : before.names()) {
    if (!before.is_text(name)) {
      EXPECT_EQ(before.tensor(name), after.tensor(name)) << name;
    }
  }
}

TEST(Fit, DeterministicAcrossRuns) {
  World s;
  TrainerConfig t = fixture::small_trainer();
  t.epochs = 3;
  TripletState a(s.model, t), b(s.model, t);
  const FitResult ra = fit(a, s.data.training_set());
  const FitResult rb = fit(b, s.data.training_set());
  ASSERT_GE(ra.history.size(), 10u);
  EXPECT_EQ(ra.history, rb.history);
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    EXPECT_EQ(ra.history[i].step, i);
    EXPECT_TRUE(ra.history[i].consistent(t.weights));
  }

  t.seed = 1;
  TripletState c(s.model, t);
  EXPECT_NE(fit(c, s.data.training_set()).history, ra.history);
}

TEST(Fit, WritesMetricsSnapshotsAndCheckpoint) {
  World s;
  TrainerConfig t = fixture::small_trainer();
  t.epochs = 2;
  TripletState st(s.model, t);
  const fs::path dir = scratch("files");
  std::vector<std::size_t> epochs_seen;
  FitOptions o;
  o.out_dir = dir;
  o.on_epoch = [&](std::size_t e, const LossReport&) { epochs_seen.push_back(e); };
  const FitResult r = fit(st, s.data.training_set(), o);
  EXPECT_EQ(epochs_seen, (std::vector<std::size_t>{1, 2}));

  std::ifstream csv(dir / kMetricsFile);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, metrics_csv_header());
  std::size_t rows = 0;
  while (std::getline(csv, line)) EXPECT_EQ(line, metrics_csv_row(r.history[rows++]));
  EXPECT_EQ(rows, 2 * steps_per_epoch(s.data.training_set().size(), 8));

  for (std::size_t e = 0; e <= 2; ++e) EXPECT_TRUE(fs::exists(epoch_snapshot_path(dir, e)));
  const Archive last = Archive::load(dir / kLastCheckpoint);
  EXPECT_EQ(last.text("meta/step"), std::to_string(st.step()));
  EXPECT_EQ(st.last_good_checkpoint, (dir / kLastCheckpoint).string());
  fs::remove_all(dir);
}

TEST(Fit, ResumeReproducesUninterruptedRun) {
  World s;
  TrainerConfig t = fixture::small_trainer();
  t.epochs = 3;
  t.checkpoint_every = 3;

  const fs::path full_dir = scratch("full");
  TripletState full(s.model, t);
  FitOptions full_options;
  full_options.out_dir = full_dir;
  fit(full, s.data.training_set(), full_options);

  // Interrupt at step 7: the last checkpoint is from step 6, one CSV row past it.
  const fs::path dir = scratch("resume");
  {
    TripletState first(s.model, t);
    FitOptions o;
    o.out_dir = dir;
    o.max_steps = 7;
    fit(first, s.data.training_set(), o);
  }
  TripletState resumed(s.model, t);
  resumed.load_archive(Archive::load(dir / kLastCheckpoint));
  EXPECT_EQ(resumed.step(), 6u);
  FitOptions o;
  o.out_dir = dir;
  o.resume = true;
  fit(resumed, s.data.training_set(), o);

  EXPECT_EQ(slurp(dir / kMetricsFile), slurp(full_dir / kMetricsFile));
  EXPECT_EQ(slurp(dir / kLastCheckpoint), slurp(full_dir / kLastCheckpoint));
  fs::remove_all(dir);
  fs::remove_all(full_dir);
}

TEST(Fit, LargeGammaSuppressesAugmentation) {
  World s;
  TrainerConfig t = fixture::small_trainer();
  t.epochs = 10;
  TripletState mild(s.model, t);
  const FitResult rm = fit(mild, s.data.training_set());
  t.weights.gamma_reg = 1e6;
  TripletState strict(s.model, t);
  const FitResult rs = fit(strict, s.data.training_set());
  double mean_mild = 0, mean_strict = 0;
  for (std::size_t i = 20; i < 40; ++i) {
    mean_mild += rm.history[i].l_reg;
    mean_strict += rs.history[i].l_reg;
    EXPECT_TRUE(std::isfinite(rs.history[i].l_overall));
  }
  EXPECT_LT(mean_strict, mean_mild);
}

TEST(Fit, SegmentationRuns) {
  const ModelConfig m = fixture::small_model(16, Task::segmentation, 2);
  DatasetSpec d = fixture::small_data(16, DatasetKind::synthetic_seg);
  d.num_classes = 2;
  const Dataset data = make_dataset(d);
  TrainerConfig t = fixture::small_trainer();
  t.epochs = 1;
  TripletState st(m, t);
  const FitResult r = fit(st, data.training_set());
  EXPECT_EQ(r.history.front().l_reg, 0.0);
  for (const LossReport& rep : r.history) EXPECT_TRUE(std::isfinite(rep.l_overall));
  const EvalResult e = evaluate(st.target(), data.test());
  EXPECT_EQ(e.task, Task::segmentation);
  EXPECT_GE(e.mean_dice, 0.0);
  EXPECT_LE(e.mean_dice, 1.0);
}

TEST(Fit, RejectsBatchLargerThanTrainingSet) {
  World s;
  TrainerConfig t = fixture::small_trainer(64);
  TripletState st(s.model, t);
  EXPECT_THROW(fit(st, s.data.training_set()), ConfigError);
}

TEST(Evaluate, UsesMainGroupAndChecksClasses) {
  World s;
  TripletState st(s.model, fixture::small_trainer());
  const EvalResult e = evaluate(st.target(), s.data.test());
  EXPECT_EQ(e.samples, s.data.test().size());
  EXPECT_GE(e.balanced_accuracy, 0.0);
  ModelConfig other = fixture::small_model(16, Task::classification, 3);
  TargetNetwork wrong(other.target, 1);
  EXPECT_THROW(evaluate(wrong, s.data.test()), InvalidArgument);
}
