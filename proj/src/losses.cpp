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

#include "advaug/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "advaug/errors.hpp"
#include "advaug/ops.hpp"

namespace advaug {

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ad::Var scores_to_logits(std::span<const double> p) {
  Tensor t({p.size()});
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0 && p[i] < 1.0)) {
      throw InvalidArgument("gan loss: score " + fmt_real(p[i]) + " outside (0, 1)");
    }
    t[i] = std::log(p[i]) - std::log1p(-p[i]);
  }
  return ad::Var(std::move(t));
}

}  // namespace

void LossWeights::validate() const {
  if (!std::isfinite(lambda_gan) || !std::isfinite(gamma_reg) || lambda_gan < 0.0 ||
      gamma_reg < 0.0) {
    throw InvalidArgument("loss weights must be finite and non-negative");
  }
}

bool LossReport::consistent(const LossWeights& w, double tol) const {
  const double expect = l_adv + w.lambda_gan * l_gan_g + w.gamma_reg * l_reg;
  return std::abs(l_overall - expect) <= tol;
}

std::string metrics_csv_header() {
  return "step,l_adv,l_gan_g,l_gan_d,l_reg_affine,l_reg_deform,l_reg_appear,l_overall";
}

std::string metrics_csv_row(const LossReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_real(*v) : std::string(); };
  return std::to_string(r.step) + ',' + fmt_real(r.l_adv) + ',' + fmt_real(r.l_gan_g) + ',' +
         fmt_real(r.l_gan_d) + ',' + opt(r.reg_affine) + ',' + opt(r.reg_deform) + ',' +
         opt(r.reg_appear) + ',' + fmt_real(r.l_overall);
}

ad::Var task_loss(const ad::Var& logits, std::span<const int> labels, Task task) {
  const Tensor& z = logits.value();
  std::size_t B = 0, K = 0, HW = 1;
  if (task == Task::classification) {
    if (z.rank() != 2) throw InvalidArgument("task_loss: classification logits must be B x K");
    B = z.dim(0);
    K = z.dim(1);
  } else {
    if (z.rank() != 4) throw InvalidArgument("task_loss: segmentation logits must be B x K x H x W");
    B = z.dim(0);
    K = z.dim(1);
    HW = z.dim(2) * z.dim(3);
  }
  if (labels.size() != B * HW) {
    throw InvalidArgument("task_loss: " + std::to_string(labels.size()) + " labels for logits " +
                          to_string(z.shape()));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw InvalidArgument("task_loss: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(K) + ")");
    }
  }
  const std::size_t N = B * HW;
  // softmax probabilities, kept for the backward pass
  Tensor prob(z.shape());
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < HW; ++p) {
      auto at = [&](std::size_t k) { return (b * K + k) * HW + p; };
      double mx = z[at(0)];
      for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, z[at(k)]);
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += std::exp(z[at(k)] - mx);
      const double lse = mx + std::log(s);
      for (std::size_t k = 0; k < K; ++k) prob[at(k)] = std::exp(z[at(k)] - lse);
      total += lse - z[at(static_cast<std::size_t>(labels[b * HW + p]))];
    }
  }
  std::vector<int> y(labels.begin(), labels.end());
  return ad::make_op(Tensor::scalar(total / static_cast<double>(N)), {logits},
                     [prob = std::move(prob), y = std::move(y), B, K, HW, N](ad::Node& self) {
                       Tensor* g = ad::input_grad(self, 0);
                       const double d = self.grad[0] / static_cast<double>(N);
                       for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t p = 0; p < HW; ++p)
                           for (std::size_t k = 0; k < K; ++k) {
                             const std::size_t i = (b * K + k) * HW + p;
                             const double onehot =
                                 static_cast<std::size_t>(y[b * HW + p]) == k ? 1.0 : 0.0;
                             (*g)[i] += d * (prob[i] - onehot);
                           }
                     });
}

ad::Var grad_reverse(const ad::Var& x, double scale) {
  return ad::make_op(x.value(), {x}, [scale](ad::Node& self) {
    Tensor* g = ad::input_grad(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= scale * self.grad[i];
  });
}

ad::Var reg_affine(const ad::Var& flow) {
  const Tensor& f = flow.value();
  if (f.rank() != 4 || f.dim(3) != 2) {
    throw InvalidArgument("reg_affine: expected B x H x W x 2, got " + to_string(f.shape()));
  }
  Tensor neg_id = ad::identity_flow_batch(f.dim(0), f.dim(1), f.dim(2));
  for (double& v : neg_id.values()) v = -v;
  return ad::mean(ad::square(ad::add_constant(flow, neg_id)));
}

ad::Var reg_deform(const ad::Var& residual_flow) {
  return ad::mean(ad::square(ad::spatial_gradient(residual_flow)));
}

ad::Var reg_appear(const ad::Var& mask) { return ad::mean(ad::square(mask)); }

double reg_affine(const FlowField& flow) {
  const Tensor& t = flow.tensor();
  return reg_affine(ad::Var(t.reshaped({1, t.dim(0), t.dim(1), 2}))).value().item();
}

double reg_deform(const FlowField& residual_flow) {
  const Tensor& t = residual_flow.tensor();
  return reg_deform(ad::Var(t.reshaped({1, t.dim(0), t.dim(1), 2}))).value().item();
}

double reg_appear(const Tensor& mask) { return reg_appear(ad::Var(mask)).value().item(); }

ad::Var gan_loss_d(const ad::Var& real_logits, const ad::Var& fake_logits) {
  // log sigmoid(l) = -softplus(-l);  log(1 - sigmoid(l)) = -softplus(l)
  const ad::Var log_real = ad::mean(ad::softplus(ad::scale(real_logits, -1.0)));
  const ad::Var log_fake = ad::mean(ad::softplus(fake_logits));
  return ad::weighted_sum({log_real, log_fake}, {-1.0, -1.0});
}

ad::Var gan_loss_g(const ad::Var& fake_logits, GanVariant variant) {
  if (variant == GanVariant::minimax) return ad::scale(ad::mean(ad::softplus(fake_logits)), -1.0);
  return ad::mean(ad::softplus(ad::scale(fake_logits, -1.0)));
}

double gan_loss_d(std::span<const double> p_real, std::span<const double> p_fake) {
  return gan_loss_d(scores_to_logits(p_real), scores_to_logits(p_fake)).value().item();
}

double gan_loss_g(std::span<const double> p_fake, GanVariant variant) {
  return gan_loss_g(scores_to_logits(p_fake), variant).value().item();
}

double overall_objective(double l_adv, double l_gan_g, double l_reg, const LossWeights& w) {
  if (!std::isfinite(l_adv) || !std::isfinite(l_gan_g) || !std::isfinite(l_reg)) {
    throw NumericalAbort("overall objective: non-finite term (l_adv=" + fmt_real(l_adv) +
                         ", l_gan_g=" + fmt_real(l_gan_g) + ", l_reg=" + fmt_real(l_reg) + ")");
  }
  return l_adv + w.lambda_gan * l_gan_g + w.gamma_reg * l_reg;
}

}  // namespace advaug
