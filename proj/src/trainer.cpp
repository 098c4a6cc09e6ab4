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

#include "advaug/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "advaug/errors.hpp"
#include "advaug/metrics.hpp"
#include "advaug/ops.hpp"
#include "advaug/rng.hpp"

namespace advaug {

namespace {

constexpr std::uint64_t kGeneratorStream = 0x47;
constexpr std::uint64_t kDiscriminatorStream = 0x44;
constexpr std::uint64_t kTargetStream = 0x54;
constexpr std::uint64_t kNoiseStream = 0x5A;
constexpr std::uint64_t kOrderStream = 0x0D;

std::size_t kind_index(GeneratorKind kind) { return static_cast<std::size_t>(kind); }

void check_adam(const nn::AdamConfig& c, const std::string& key) {
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError(key + ".lr must be positive", key + ".lr");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) throw ConfigError(key + ".beta1 must be in [0, 1)", key + ".beta1");
  if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) throw ConfigError(key + ".beta2 must be in [0, 1)", key + ".beta2");
  if (!(c.eps > 0.0)) throw ConfigError(key + ".eps must be positive", key + ".eps");
}

void put_optimizer(Archive& a, const std::string& net, const nn::Adam& opt) {
  for (const auto& slot : opt.slots()) {
    a.put("optim/" + slot.param.name + "/m", slot.m);
    a.put("optim/" + slot.param.name + "/v", slot.v);
  }
  a.put_text("optim/" + net + "/t", std::to_string(opt.steps()));
}

void load_optimizer(const Archive& a, const std::string& net, nn::Adam& opt) {
  for (auto& slot : opt.slots()) {
    const Tensor& m = a.tensor("optim/" + slot.param.name + "/m");
    const Tensor& v = a.tensor("optim/" + slot.param.name + "/v");
    if (m.shape() != slot.m.shape() || v.shape() != slot.v.shape()) {
      throw InvalidArgument("checkpoint optimizer state for " + slot.param.name + " has the wrong shape");
    }
    slot.m = m;
    slot.v = v;
  }
  opt.set_steps(std::stoull(a.text("optim/" + net + "/t")));
}

bool all_finite(const nn::Parameters& p) {
  for (const auto& param : p.params) {
    if (!param.var.value().all_finite()) return false;
  }
  for (const auto& buf : p.buffers) {
    if (!buf.tensor->all_finite()) return false;
  }
  return true;
}

std::vector<std::size_t> slice(const std::vector<std::size_t>& v, std::size_t from, std::size_t n) {
  return {v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(from + n)};
}

}  // namespace

void ModelConfig::validate() const {
  generator.validate();
  discriminator.validate();
  target.validate();
  if (generator.resolution != target.resolution || discriminator.resolution != target.resolution) {
    throw ConfigError("generator, discriminator and target resolutions differ", "resolution");
  }
  if (generator.channels != target.channels || discriminator.channels != target.channels) {
    throw ConfigError("generator, discriminator and target channel counts differ", "channels");
  }
}

bool TrainerConfig::is_enabled(GeneratorKind kind) const {
  return std::find(enabled.begin(), enabled.end(), kind) != enabled.end();
}

void TrainerConfig::validate() const {
  std::set<GeneratorKind> seen(enabled.begin(), enabled.end());
  if (seen.size() != enabled.size()) {
    throw ConfigError("enabled_generators lists a generator twice", "enabled_generators");
  }
  const std::size_t parts = 1 + enabled.size();
  if (batch_size < 4) throw ConfigError("batch_size must be at least 4", "batch_size");
  if (batch_size < 2 * parts) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " leaves a batch part with fewer than 2 examples, "
                      "which batch normalization cannot train on", "batch_size");
  }
  if (!std::isfinite(weights.lambda_gan) || weights.lambda_gan < 0.0) {
    throw ConfigError("lambda_gan must be finite and >= 0", "lambda_gan");
  }
  if (!std::isfinite(weights.gamma_reg) || weights.gamma_reg < 0.0) {
    throw ConfigError("gamma_reg must be finite and >= 0", "gamma_reg");
  }
  if (!(reverse_scale > 0.0) || !std::isfinite(reverse_scale)) {
    throw ConfigError("reverse_scale must be positive", "reverse_scale");
  }
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive", "checkpoint_every");
  check_adam(generator_optim, "generator_optim");
  check_adam(discriminator_optim, "discriminator_optim");
  check_adam(target_optim, "target_optim");
}

std::size_t BatchQuadruple::total() const {
  std::size_t n = 0;
  for (const BatchPart& p : parts) n += p.positions.size();
  return n;
}

BatchQuadruple split_batch(const Batch& batch, std::span<const GeneratorKind> enabled) {
  const Tensor& x = batch.images;
  if (x.rank() != 4) throw InvalidArgument("split_batch: expected B x C x H x W images");
  const std::size_t B = x.dim(0);
  const std::size_t n_parts = 1 + enabled.size();
  if (B < std::max<std::size_t>(4, n_parts)) {
    throw ConfigError("split_batch: batch of " + std::to_string(B) + " is smaller than 4", "batch_size");
  }
  if (batch.labels.empty() || batch.labels.size() % B != 0) {
    throw InvalidArgument("split_batch: label count does not match the batch");
  }
  const std::size_t per_label = batch.labels.size() / B;
  const std::size_t per_image = x.size() / B;

  BatchQuadruple q;
  q.parts.resize(n_parts);
  q.parts[0].group = BNGroup::main;
  for (std::size_t p = 1; p < n_parts; ++p) {
    q.parts[p].kind = enabled[p - 1];
    q.parts[p].group = bn_group_for(enabled[p - 1]);
  }
  for (std::size_t k = 0; k < B; ++k) q.parts[k % n_parts].positions.push_back(k);
  for (BatchPart& part : q.parts) {
    const std::size_t n = part.positions.size();
    Shape shape = x.shape();
    shape[0] = n;
    part.data.images = Tensor(shape);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = part.positions[i];
      std::copy_n(x.ptr() + src * per_image, per_image, part.data.images.ptr() + i * per_image);
      part.data.labels.insert(part.data.labels.end(), batch.labels.begin() + static_cast<std::ptrdiff_t>(src * per_label),
                              batch.labels.begin() + static_cast<std::ptrdiff_t>((src + 1) * per_label));
    }
  }
  return q;
}

TripletState::TripletState(const ModelConfig& model, const TrainerConfig& trainer)
    : model_(model), trainer_(trainer), target_(model.target, derive_seed(trainer.seed, kTargetStream)) {
  model_.validate();
  trainer_.validate();
  // canonical order keeps batch parts and archives independent of how the
  // subset was listed
  std::vector<GeneratorKind> ordered;
  for (GeneratorKind kind : kAllGeneratorKinds) {
    if (trainer_.is_enabled(kind)) ordered.push_back(kind);
  }
  trainer_.enabled = ordered;

  for (GeneratorKind kind : trainer_.enabled) {
    auto& g = generators_[kind_index(kind)];
    g.emplace(kind, model_.generator, derive_seed(trainer_.seed, kGeneratorStream, kind_index(kind)));
    generator_optim_[kind_index(kind)] = nn::Adam(g->parameters().params, trainer_.generator_optim);
  }
  if (!trainer_.enabled.empty()) {
    discriminator_.emplace(model_.discriminator, derive_seed(trainer_.seed, kDiscriminatorStream));
    discriminator_optim_ = nn::Adam(discriminator_->parameters().params, trainer_.discriminator_optim);
  }
  target_optim_ = nn::Adam(target_.parameters().params, trainer_.target_optim);
}

Generator* TripletState::generator(GeneratorKind kind) {
  auto& g = generators_[kind_index(kind)];
  return g ? &*g : nullptr;
}

std::vector<nn::Adam*> TripletState::optimizers() {
  std::vector<nn::Adam*> out{&target_optim_};
  for (GeneratorKind kind : trainer_.enabled) out.push_back(&generator_optim_[kind_index(kind)]);
  if (discriminator_) out.push_back(&discriminator_optim_);
  return out;
}

Archive TripletState::to_archive() {
  Archive a;
  a.put_text("meta/step", std::to_string(step_));
  for (GeneratorKind kind : trainer_.enabled) {
    a.put_parameters(generators_[kind_index(kind)]->parameters());
    put_optimizer(a, std::string(network_name(kind)), generator_optim_[kind_index(kind)]);
  }
  if (discriminator_) {
    a.put_parameters(discriminator_->parameters());
    put_optimizer(a, "D", discriminator_optim_);
  }
  a.put_parameters(target_.parameters());
  put_optimizer(a, "T", target_optim_);
  return a;
}

void TripletState::load_archive(const Archive& a) {
  for (GeneratorKind kind : trainer_.enabled) {
    a.load_parameters(generators_[kind_index(kind)]->parameters());
    load_optimizer(a, std::string(network_name(kind)), generator_optim_[kind_index(kind)]);
  }
  if (discriminator_) {
    a.load_parameters(discriminator_->parameters());
    load_optimizer(a, "D", discriminator_optim_);
  }
  a.load_parameters(target_.parameters());
  load_optimizer(a, "T", target_optim_);
  step_ = std::stoull(a.text("meta/step"));
}

Archive TripletState::generator_snapshot() {
  Archive a;
  a.put_text("meta/step", std::to_string(step_));
  for (GeneratorKind kind : trainer_.enabled) {
    a.put_parameters(generators_[kind_index(kind)]->parameters(), Precision::f32);
  }
  return a;
}

Tensor step_noise(const TripletState& state, GeneratorKind kind, std::size_t batch) {
  Rng rng(derive_seed(state.trainer().seed, kNoiseStream, state.step(), kind_index(kind)));
  Tensor z({batch, state.model().generator.noise_dim});
  for (double& v : z.values()) v = rng.normal();
  return z;
}

std::pair<ad::Var, ad::Var> score_real_and_fake(Discriminator& d, const ad::Var& real, const ad::Var& fake) {
  const std::size_t n_real = real.dim(0), n_fake = fake.dim(0);
  const ad::Var logits = d.logits(ad::concat({real, fake}, 0), true);
  std::vector<std::size_t> real_rows(n_real), fake_rows(n_fake);
  for (std::size_t i = 0; i < n_real; ++i) real_rows[i] = i;
  for (std::size_t i = 0; i < n_fake; ++i) fake_rows[i] = n_real + i;
  return {ad::gather_rows(logits, real_rows), ad::gather_rows(logits, fake_rows)};
}

FusedGraph build_fused_graph(TripletState& state, const Batch& x1, const Batch& x2, bool reverse) {
  const TrainerConfig& tc = state.trainer();
  const Task task = state.model().target.task;
  FusedGraph g;
  g.split = split_batch(x1, tc.enabled);
  const double B = static_cast<double>(g.split.total());

  std::vector<ad::Var> adv_terms;
  std::vector<double> adv_weights;
  std::vector<ad::Var> regs;
  std::vector<ad::Var> fakes;
  for (const BatchPart& part : g.split.parts) {
    const ad::Var x(part.data.images);
    const std::size_t n = part.positions.size();
    ad::Var input = x;
    std::vector<int> labels = part.data.labels;
    if (part.kind) {
      const GeneratorKind kind = *part.kind;
      Generator& gen = *state.generator(kind);
      const GeneratorOutput out = gen.forward(ad::Var(step_noise(state, kind, n)), x, true);
      AugmentedBatch aug = apply_augmentation(
          out, x, task == Task::segmentation ? std::span<const int>(labels) : std::span<const int>());
      if (task == Task::segmentation) labels = std::move(aug.labels);

      ad::Var r;
      switch (kind) {
        case GeneratorKind::affine: r = reg_affine(aug.flow); break;
        case GeneratorKind::deform: r = reg_deform(out.residual_flow); break;
        case GeneratorKind::appearance: r = reg_appear(out.mask); break;
      }
      g.reg[kind_index(kind)] = r;
      regs.push_back(r);
      fakes.push_back(aug.image);
      input = reverse ? grad_reverse(aug.image, tc.reverse_scale) : aug.image;
    }
    const ad::Var logits = state.target().forward(input, part.group, Mode::train);
    adv_terms.push_back(task_loss(logits, labels, task));
    adv_weights.push_back(static_cast<double>(n) / B);
  }
  g.l_adv = ad::weighted_sum(adv_terms, adv_weights);

  if (fakes.empty()) {
    g.l_gan_g = ad::Var(Tensor::scalar(0.0));
    g.l_reg = ad::Var(Tensor::scalar(0.0));
    g.total = g.l_adv;
    return g;
  }
  g.fakes = ad::concat(fakes, 0);
  const ad::Var fake_logits = score_real_and_fake(*state.discriminator(), ad::Var(x2.images), g.fakes).second;
  g.l_gan_g = gan_loss_g(fake_logits, tc.gan_variant);
  g.l_reg = ad::weighted_sum(regs, std::vector<double>(regs.size(), 1.0));
  g.total = ad::weighted_sum({g.l_adv, g.l_gan_g, g.l_reg},
                             {1.0, tc.weights.lambda_gan, tc.weights.gamma_reg});
  return g;
}

LossReport train_step(TripletState& s, const Batch& x1, const Batch& x2) {
  const TrainerConfig& tc = s.trainer_;
  const std::uint64_t tape_before = ad::backward_calls();
  std::uint64_t gen_before = 0;
  for (GeneratorKind kind : tc.enabled) gen_before += s.generator(kind)->forward_calls();
  StepCounters counters;

  for (nn::Adam* opt : s.optimizers()) opt->zero_grad();

  FusedGraph g = build_fused_graph(s, x1, x2, true);
  LossReport r;
  r.step = s.step_;
  r.l_adv = g.l_adv.value().item();
  r.l_gan_g = g.l_gan_g.value().item();
  r.l_reg = g.l_reg.value().item();
  if (g.reg[0].defined()) r.reg_affine = g.reg[0].value().item();
  if (g.reg[1].defined()) r.reg_deform = g.reg[1].value().item();
  if (g.reg[2].defined()) r.reg_appear = g.reg[2].value().item();

  auto abort = [&](const std::string& what) {
    throw NumericalAbort("step " + std::to_string(s.step_) + ": " + what +
                             (s.last_good_checkpoint.empty() ? std::string()
                                                             : "; last good checkpoint " + s.last_good_checkpoint),
                         s.last_good_checkpoint);
  };
  if (!std::isfinite(g.total.value().item())) {
    abort("non-finite objective (l_adv=" + std::to_string(r.l_adv) + ", l_gan_g=" + std::to_string(r.l_gan_g) +
          ", l_reg=" + std::to_string(r.l_reg) + ")");
  }
  r.l_overall = overall_objective(r.l_adv, r.l_gan_g, r.l_reg, tc.weights);

  ad::backward(g.total);
  ++counters.fused_backwards;

  if (Discriminator* d = s.discriminator()) {
    // the fused pass also deposited gradients in D; its update uses only the
    // pass below, with fakes cut off from G
    d->parameters().zero_grad();
    const auto [real, fake] = score_real_and_fake(*d, ad::Var(x2.images), ad::detach(g.fakes));
    const ad::Var l_d = gan_loss_d(real, fake);
    r.l_gan_d = l_d.value().item();
    if (!std::isfinite(r.l_gan_d)) abort("non-finite discriminator loss");
    ad::backward(ad::scale(l_d, -1.0));
    ++counters.discriminator_backwards;
  }

  for (nn::Adam* opt : s.optimizers()) opt->step();

  bool finite = all_finite(s.target_.parameters());
  for (GeneratorKind kind : tc.enabled) finite = finite && all_finite(s.generator(kind)->parameters());
  if (Discriminator* d = s.discriminator()) finite = finite && all_finite(d->parameters());
  if (!finite) abort("non-finite parameters after update");

  std::uint64_t gen_after = 0;
  for (GeneratorKind kind : tc.enabled) gen_after += s.generator(kind)->forward_calls();
  counters.generator_forwards = gen_after - gen_before;
  counters.tape_backwards = ad::backward_calls() - tape_before;
  s.counters_ = counters;
  ++s.step_;
  return r;
}

std::size_t steps_per_epoch(std::size_t train_size, std::size_t batch_size) {
  return batch_size == 0 ? 0 : train_size / batch_size;
}

std::filesystem::path epoch_snapshot_path(const std::filesystem::path& dir, std::size_t epoch) {
  return dir / ("epoch_" + std::to_string(epoch) + ".bin");
}

namespace {

/// Keeps the header and the rows for steps before `step`.
void truncate_metrics(const std::filesystem::path& path, std::uint64_t step) {
  std::vector<std::string> kept;
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (kept.empty()) {
        kept.push_back(line);
        continue;
      }
      if (line.empty()) continue;
      if (std::stoull(line.substr(0, line.find(','))) < step) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (kept.empty()) kept.push_back(metrics_csv_header());
  for (const std::string& l : kept) out << l << '\n';
}

}  // namespace

FitResult fit(TripletState& state, const TrainingSet& data, const FitOptions& options) {
  const TrainerConfig& tc = state.trainer();
  const SampleSet& set = data.samples();
  const std::size_t spe = steps_per_epoch(set.size(), tc.batch_size);
  if (tc.epochs > 0 && spe == 0) {
    throw ConfigError("batch_size " + std::to_string(tc.batch_size) + " exceeds the " +
                          std::to_string(set.size()) + " training samples",
                      "batch_size");
  }
  const std::uint64_t total_steps = static_cast<std::uint64_t>(spe) * tc.epochs;
  const bool write = !options.out_dir.empty();
  const std::filesystem::path metrics_path = options.out_dir / kMetricsFile;
  const std::filesystem::path last_path = options.out_dir / kLastCheckpoint;

  std::ofstream csv;
  auto save_last = [&] {
    state.to_archive().save(last_path);
    state.last_good_checkpoint = last_path.string();
  };
  if (write) {
    std::filesystem::create_directories(options.out_dir);
    if (options.resume && std::filesystem::exists(metrics_path)) {
      truncate_metrics(metrics_path, state.step());
    } else {
      std::ofstream(metrics_path, std::ios::trunc) << metrics_csv_header() << '\n';
    }
    csv.open(metrics_path, std::ios::app);
    if (!options.resume) {
      state.generator_snapshot().save(epoch_snapshot_path(options.out_dir, 0));
      save_last();
    } else {
      state.last_good_checkpoint = last_path.string();
    }
  }

  FitResult result;
  std::vector<std::size_t> order1, order2;
  std::size_t loaded_epoch = static_cast<std::size_t>(-1);
  while (state.step() < total_steps) {
    if (options.max_steps != 0 && result.history.size() == options.max_steps) break;
    const std::size_t epoch = static_cast<std::size_t>(state.step() / spe);
    const std::size_t k = static_cast<std::size_t>(state.step() % spe);
    if (epoch != loaded_epoch) {
      Rng r1(derive_seed(tc.seed, kOrderStream, epoch, 1));
      Rng r2(derive_seed(tc.seed, kOrderStream, epoch, 2));
      order1 = r1.permutation(set.size());
      order2 = r2.permutation(set.size());
      loaded_epoch = epoch;
    }
    const Batch x1 = make_batch(set, slice(order1, k * tc.batch_size, tc.batch_size));
    const Batch x2 = make_batch(set, slice(order2, k * tc.batch_size, tc.batch_size));
    const LossReport report = train_step(state, x1, x2);
    result.history.push_back(report);
    const bool epoch_end = state.step() % spe == 0;
    if (write) {
      csv << metrics_csv_row(report) << '\n';
      csv.flush();
      if (epoch_end) state.generator_snapshot().save(epoch_snapshot_path(options.out_dir, epoch + 1));
      if (epoch_end || state.step() % tc.checkpoint_every == 0) save_last();
    }
    if (epoch_end && options.on_epoch) options.on_epoch(epoch + 1, report);
  }
  return result;
}

EvalResult evaluate(TargetNetwork& net, const SampleSet& set, std::size_t batch) {
  if (batch == 0) throw InvalidArgument("evaluate: batch must be positive");
  const Task task = net.config().task;
  if (set.task != task) throw InvalidArgument("evaluate: dataset task does not match the network");
  const std::size_t classes = net.output_classes();
  const std::size_t data_classes = task == Task::classification ? set.num_classes : set.num_classes + 1;
  if (data_classes != classes) {
    throw InvalidArgument("evaluate: dataset has " + std::to_string(data_classes) + " classes, network predicts " +
                          std::to_string(classes));
  }
  ConfusionMatrix cm(classes);
  for (std::size_t from = 0; from < set.size(); from += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = from; i < std::min(set.size(), from + batch); ++i) idx.push_back(i);
    const Batch b = make_batch(set, idx);
    const Tensor logits = net.forward(ad::Var(b.images), BNGroup::main, Mode::eval).value();
    const std::size_t n = idx.size();
    const std::size_t hw = task == Task::classification ? 1 : logits.dim(2) * logits.dim(3);
    std::vector<int> pred(n * hw);
    for (std::size_t e = 0; e < n; ++e) {
      for (std::size_t p = 0; p < hw; ++p) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
          if (logits[(e * classes + c) * hw + p] > logits[(e * classes + best) * hw + p]) best = c;
        }
        pred[e * hw + p] = static_cast<int>(best);
      }
    }
    cm.add(b.labels, pred);
  }
  EvalResult r;
  r.task = task;
  r.samples = set.size();
  r.accuracy = cm.accuracy();
  r.balanced_accuracy = cm.balanced_accuracy();
  if (task == Task::segmentation) r.mean_dice = cm.mean_dice(1);
  return r;
}

}  // namespace advaug
