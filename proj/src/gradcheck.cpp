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

#include "advaug/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "advaug/errors.hpp"
#include "advaug/generators.hpp"
#include "advaug/losses.hpp"
#include "advaug/ops.hpp"
#include "advaug/rng.hpp"
#include "advaug/target.hpp"
#include "advaug/warp.hpp"

namespace advaug {

namespace {

constexpr std::size_t kSize = 8;
constexpr std::size_t kBatch = 2;
constexpr std::size_t kChannels = 3;

struct Probe {
  ad::Var var;
  std::vector<std::size_t> entries;
};

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::vector<std::size_t> all_entries(const ad::Var& v) {
  std::vector<std::size_t> e(v.value().size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = i;
  return e;
}

std::vector<std::size_t> some_entries(const ad::Var& v, std::size_t n, Rng& rng) {
  const std::size_t size = v.value().size();
  if (size <= n) return all_entries(v);
  std::vector<std::size_t> perm = rng.permutation(size);
  perm.resize(n);
  return perm;
}

ad::Var project(const ad::Var& y, const Tensor& weights) { return ad::sum(ad::mul(y, ad::Var(weights))); }

double pixel_coordinate(double normalized, std::size_t n) { return (normalized + 1.0) * 0.5 * static_cast<double>(n - 1); }

bool near_integer(double p, double margin) { return std::abs(p - std::round(p)) < margin; }

/// True if any sample coordinate of a B x H x W x 2 flow sits within
/// `margin` pixels of a grid line.
bool flow_near_kink(const Tensor& flow, double margin) {
  const std::size_t H = flow.dim(1), W = flow.dim(2);
  for (std::size_t i = 0; i < flow.size(); i += 2) {
    if (near_integer(pixel_coordinate(flow[i], W), margin)) return true;
    if (near_integer(pixel_coordinate(flow[i + 1], H), margin)) return true;
  }
  return false;
}

/// Compares backward() of f against central differences at every probed
/// entry. `numeric_factor` scales the finite difference before comparison
/// (-scale for gradient reversal, 1 otherwise).
GradcheckRow check(const std::string& op, const std::function<ad::Var()>& f, std::vector<Probe> probes, double h,
                   double threshold, double numeric_factor = 1.0) {
  for (Probe& p : probes) p.var.zero_grad();
  const ad::Var base = f();
  ad::backward(base);
  // below this magnitude a central difference is roundoff, not slope
  const double floor = std::max(1e-6, 1e5 * std::numeric_limits<double>::epsilon() *
                                          std::max(1.0, std::abs(base.value().item())) / h);
  GradcheckRow row;
  row.op = op;
  for (Probe& p : probes) {
    const Tensor analytic = p.var.grad().empty() ? Tensor(p.var.shape(), 0.0) : p.var.grad();
    Tensor& value = p.var.mutable_value();
    for (std::size_t i : p.entries) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = f().value().item();
      value[i] = saved - h;
      const double down = f().value().item();
      value[i] = saved;
      const double numeric = numeric_factor * (up - down) / (2.0 * h);
      row.max_rel_error = std::max(row.max_rel_error, relative_error(analytic[i], numeric, floor));
      ++row.checked;
    }
  }
  row.passed = row.checked > 0 && row.max_rel_error < threshold;
  return row;
}

GradcheckRow check_generator(GeneratorKind kind, const GradcheckOptions& o, Rng& rng) {
  GeneratorConfig cfg;
  cfg.resolution = kSize;
  cfg.channels = kChannels;
  Generator gen(kind, cfg, derive_seed(o.seed, 0x6E, static_cast<std::uint64_t>(kind)));
  ad::Var x(random_tensor({kBatch, kChannels, kSize, kSize}, rng), true);
  ad::Var z;
  // redraw head and noise until no sample coordinate is near a kink
  for (int attempt = 0;; ++attempt) {
    gen.randomize_head(rng, 0.3);
    z = ad::Var(gen.sample_noise(kBatch, rng));
    if (kind == GeneratorKind::appearance) break;
    const AugmentedBatch a = apply_augmentation(gen.forward(z, x, true), x);
    if (!flow_near_kink(a.flow.value(), o.kink_margin)) break;
    if (attempt == 200) throw InternalError("gradcheck: could not place generator flow away from kinks");
  }
  const Tensor r = random_tensor({kBatch, kChannels, kSize, kSize}, rng);
  auto f = [&] { return project(apply_augmentation(gen.forward(z, x, true), x).image, r); };
  std::vector<Probe> probes;
  for (const auto& p : gen.parameters().params) probes.push_back({p.var, some_entries(p.var, o.entries_per_tensor, rng)});
  probes.push_back({x, some_entries(x, 16, rng)});
  return check(std::string("generator.") + std::string(network_name(kind)), f, probes, o.network_step, o.threshold);
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

bool GradcheckReport::passed() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.passed; });
}

std::vector<std::string> GradcheckReport::failures() const {
  std::vector<std::string> out;
  for (const GradcheckRow& r : rows) {
    if (!r.passed) out.push_back(r.op);
  }
  return out;
}

std::string GradcheckReport::to_csv() const {
  std::string s = "op,max_rel_error,checked,threshold,status\n";
  char buf[256];
  for (const GradcheckRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6e,%zu,%.3e,%s\n", r.op.c_str(), r.max_rel_error, r.checked, threshold,
                  r.passed ? "pass" : "FAIL");
    s += buf;
  }
  return s;
}

GradcheckReport run_gradcheck(const GradcheckOptions& o) {
  if (!(o.threshold > 0.0)) throw InvalidArgument("gradcheck: threshold must be positive");
  GradcheckReport report;
  report.threshold = o.threshold;
  Rng rng(derive_seed(o.seed, 0x9C));
  const double h = o.op_step;
  const Shape image_shape{kBatch, kChannels, kSize, kSize};
  const Shape flow_shape{kBatch, kSize, kSize, 2};
  auto add = [&](GradcheckRow row) { report.rows.push_back(std::move(row)); };

  // warp: identity plus a perturbation that reaches past the border
  {
    ad::Var x(random_tensor(image_shape, rng), true);
    Tensor fv = ad::identity_flow_batch(kBatch, kSize, kSize);
    for (double& v : fv.values()) v += rng.uniform(-0.4, 0.4);
    ad::Var flow(fv, true);
    const Tensor r = random_tensor(image_shape, rng);
    std::vector<std::size_t> flow_entries;
    for (std::size_t i = 0; i < fv.size(); ++i) {
      if (!near_integer(pixel_coordinate(fv[i], kSize), o.kink_margin)) flow_entries.push_back(i);
    }
    for (Padding pad : {Padding::zeros, Padding::border}) {
      const std::string suffix = pad == Padding::zeros ? "" : ".border";
      auto f = [&] { return project(ad::warp(x, flow, pad), r); };
      add(check("warp.image" + suffix, f, {{x, all_entries(x)}}, h, o.threshold));
      add(check("warp.flow" + suffix, f, {{flow, flow_entries}}, h, o.threshold));
    }
  }
  // affine_to_flow, alone and composed with warp
  {
    Tensor av({kBatch, 2, 3});
    for (std::size_t b = 0; b < kBatch; ++b) {
      const double id[6] = {1, 0, 0, 0, 1, 0};
      for (std::size_t k = 0; k < 6; ++k) av[b * 6 + k] = id[k] + rng.uniform(-0.3, 0.3);
    }
    ad::Var a(av, true);
    const Tensor r = random_tensor(flow_shape, rng);
    add(check("affine_to_flow", [&] { return project(ad::affine_to_flow(a, kSize, kSize), r); }, {{a, all_entries(a)}},
              h, o.threshold));
    for (int attempt = 0; flow_near_kink(ad::affine_to_flow(a, kSize, kSize).value(), o.kink_margin); ++attempt) {
      for (double& v : a.mutable_value().values()) v += rng.uniform(-0.01, 0.01);
      if (attempt == 200) throw InternalError("gradcheck: could not place affine flow away from kinks");
    }
    ad::Var x(random_tensor(image_shape, rng));
    const Tensor ri = random_tensor(image_shape, rng);
    add(check("warp.affine", [&] { return project(ad::warp(x, ad::affine_to_flow(a, kSize, kSize)), ri); },
              {{a, all_entries(a)}}, h, o.threshold));
  }
  // spatial gradient and the regularizers
  {
    ad::Var flow(random_tensor(flow_shape, rng), true);
    const Tensor r = random_tensor({kBatch, kSize, kSize, 2, 2}, rng);
    add(check("spatial_gradient", [&] { return project(ad::spatial_gradient(flow), r); }, {{flow, all_entries(flow)}}, h,
              o.threshold));
    add(check("reg_affine", [&] { return reg_affine(flow); }, {{flow, all_entries(flow)}}, h, o.threshold));
    add(check("reg_deform", [&] { return reg_deform(flow); }, {{flow, all_entries(flow)}}, h, o.threshold));
    ad::Var mask(random_tensor(image_shape, rng, -0.5, 0.5), true);
    add(check("reg_appear", [&] { return reg_appear(mask); }, {{mask, all_entries(mask)}}, h, o.threshold));
  }
  // gradient reversal: backward must equal -scale times the forward slope
  {
    const double scale = 0.7;
    ad::Var x(random_tensor(image_shape, rng), true);
    const Tensor r = random_tensor(image_shape, rng);
    add(check("grad_reverse", [&] { return project(ad::tanh(grad_reverse(ad::tanh(x), scale)), r); },
              {{x, all_entries(x)}}, h, o.threshold, -scale));
  }
  // GAN and task losses from logits
  {
    ad::Var real(random_tensor({6}, rng, -3.0, 3.0), true);
    ad::Var fake(random_tensor({6}, rng, -3.0, 3.0), true);
    add(check("gan_loss_d", [&] { return gan_loss_d(real, fake); }, {{real, all_entries(real)}, {fake, all_entries(fake)}},
              h, o.threshold));
    add(check("gan_loss_g.minimax", [&] { return gan_loss_g(fake, GanVariant::minimax); }, {{fake, all_entries(fake)}},
              h, o.threshold));
    add(check("gan_loss_g.nonsaturating", [&] { return gan_loss_g(fake, GanVariant::nonsaturating); },
              {{fake, all_entries(fake)}}, h, o.threshold));

    ad::Var logits(random_tensor({5, 4}, rng, -3.0, 3.0), true);
    std::vector<int> labels(5);
    for (int& y : labels) y = static_cast<int>(rng.below(4));
    add(check("task_loss.classification", [&] { return task_loss(logits, labels, Task::classification); },
              {{logits, all_entries(logits)}}, h, o.threshold));
    ad::Var seg(random_tensor({kBatch, 3, 4, 4}, rng, -3.0, 3.0), true);
    std::vector<int> pixels(kBatch * 16);
    for (int& y : pixels) y = static_cast<int>(rng.below(3));
    add(check("task_loss.segmentation", [&] { return task_loss(seg, pixels, Task::segmentation); },
              {{seg, all_entries(seg)}}, h, o.threshold));
  }
  for (GeneratorKind kind : kAllGeneratorKinds) add(check_generator(kind, o, rng));
  // discriminator and both target networks
  {
    DiscriminatorConfig dc;
    dc.resolution = kSize;
    dc.channels = kChannels;
    dc.widths = {8, 16};
    Discriminator d(dc, derive_seed(o.seed, 0xD1));
    d.randomize_head(rng, 0.3);
    ad::Var real(random_tensor({4, kChannels, kSize, kSize}, rng));
    ad::Var fake(random_tensor({4, kChannels, kSize, kSize}, rng), true);
    auto f = [&] { return gan_loss_d(d.logits(real, true), d.logits(fake, true)); };
    std::vector<Probe> probes;
    for (const auto& p : d.parameters().params) probes.push_back({p.var, some_entries(p.var, o.entries_per_tensor, rng)});
    probes.push_back({fake, some_entries(fake, 16, rng)});
    add(check("discriminator", f, probes, o.network_step, o.threshold));
  }
  for (Task task : {Task::classification, Task::segmentation}) {
    TargetConfig tc;
    tc.task = task;
    tc.channels = kChannels;
    tc.resolution = kSize;
    tc.num_classes = 3;
    tc.classifier_widths = {8, 16};
    tc.segmenter_widths = {4, 8, 8};
    TargetNetwork net(tc, derive_seed(o.seed, 0x7A, static_cast<std::uint64_t>(task)));
    ad::Var x(random_tensor({4, kChannels, kSize, kSize}, rng), true);
    std::vector<int> labels(task == Task::classification ? 4 : 4 * kSize * kSize);
    for (int& y : labels) y = static_cast<int>(rng.below(net.output_classes()));
    auto f = [&] { return task_loss(net.forward(x, BNGroup::deform, Mode::train), labels, task); };
    std::vector<Probe> probes;
    for (const auto& p : net.parameters().params) {
      if (!p.var.requires_grad()) continue;
      probes.push_back({p.var, some_entries(p.var, o.entries_per_tensor, rng)});
    }
    probes.push_back({x, some_entries(x, 16, rng)});
    add(check(task == Task::classification ? "target.classifier" : "target.segmenter", f, probes, o.network_step,
              o.threshold));
  }
  return report;
}

}  // namespace advaug
