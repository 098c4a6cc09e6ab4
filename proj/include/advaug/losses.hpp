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
#include <optional>
#include <span>
#include <string>

#include "advaug/autodiff.hpp"
#include "advaug/warp.hpp"

namespace advaug {

enum class Task { classification, segmentation };
enum class GanVariant { minimax, nonsaturating };

struct LossWeights {
  double lambda_gan = 1.0;
  double gamma_reg = 0.1;

  /// Throws InvalidArgument unless both weights are finite and >= 0.
  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// One training step's losses. Per-generator regularizers are empty for
/// generators that are disabled in the run.
struct LossReport {
  std::uint64_t step = 0;
  double l_adv = 0.0;
  double l_gan_g = 0.0;
  double l_gan_d = 0.0;
  double l_reg = 0.0;
  double l_overall = 0.0;
  std::optional<double> reg_affine;
  std::optional<double> reg_deform;
  std::optional<double> reg_appear;

  /// l_overall == l_adv + lambda * l_gan_g + gamma * l_reg within `tol`.
  bool consistent(const LossWeights& w, double tol = 1e-6) const;
  friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// `step,l_adv,l_gan_g,l_gan_d,l_reg_affine,l_reg_deform,l_reg_appear,l_overall`
std::string metrics_csv_header();
/// Values printed with round-trip precision; disabled regularizers are empty.
std::string metrics_csv_row(const LossReport& r);

/// Mean (per-pixel for segmentation) cross-entropy of logits against labels.
/// Classification: logits B x K, labels B. Segmentation: logits B x K x H x W,
/// labels B x H x W.
ad::Var task_loss(const ad::Var& logits, std::span<const int> labels, Task task);

/// Identity forward; the backward pass multiplies incoming gradients by -scale.
ad::Var grad_reverse(const ad::Var& x, double scale = 1.0);

/// Mean squared deviation of an absolute flow (B x H x W x 2) from identity.
ad::Var reg_affine(const ad::Var& flow);
/// Mean squared spatial gradient of a residual flow (B x H x W x 2).
ad::Var reg_deform(const ad::Var& residual_flow);
/// Mean squared appearance mask value.
ad::Var reg_appear(const ad::Var& mask);

double reg_affine(const FlowField& flow);
double reg_deform(const FlowField& residual_flow);
double reg_appear(const Tensor& mask);

/// mean log D(real) + mean log(1 - D(fake)), from discriminator logits.
ad::Var gan_loss_d(const ad::Var& real_logits, const ad::Var& fake_logits);
/// Generator objective (to be minimized): mean log(1 - D(fake)) for minimax,
/// -mean log D(fake) for the non-saturating variant.
ad::Var gan_loss_g(const ad::Var& fake_logits, GanVariant variant = GanVariant::minimax);

/// Probability-level forms; scores must lie strictly inside (0, 1).
double gan_loss_d(std::span<const double> p_real, std::span<const double> p_fake);
double gan_loss_g(std::span<const double> p_fake, GanVariant variant = GanVariant::minimax);

/// l_adv + lambda * l_gan_g + gamma * l_reg; NaN/Inf inputs raise NumericalAbort.
double overall_objective(double l_adv, double l_gan_g, double l_reg, const LossWeights& w);

}  // namespace advaug
