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

#include "advaug/nn.hpp"

#include <cmath>

#include "advaug/errors.hpp"

namespace advaug::nn {

namespace {

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void Parameters::zero_grad() {
  for (auto& p : params) p.var.zero_grad();
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t pad, Rng& rng)
    : weight(ad::parameter(he_uniform({out_channels, in_channels, kernel, kernel},
                                      in_channels * kernel * kernel, rng))),
      bias(ad::parameter(Tensor({out_channels}, 0.0))),
      stride_(stride),
      pad_(pad) {}

void Conv2d::zero_init() {
  weight.mutable_value().fill(0.0);
  bias.mutable_value().fill(0.0);
}

void Conv2d::collect(Parameters& p, const std::string& prefix) const {
  p.add(prefix + "/weight", weight);
  p.add(prefix + "/bias", bias);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng)
    : weight(ad::parameter(he_uniform({out_features, in_features}, in_features, rng))),
      bias(ad::parameter(Tensor({out_features}, 0.0))) {}

void Linear::zero_init() {
  weight.mutable_value().fill(0.0);
  bias.mutable_value().fill(0.0);
}

void Linear::collect(Parameters& p, const std::string& prefix) const {
  p.add(prefix + "/weight", weight);
  p.add(prefix + "/bias", bias);
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(ad::parameter(Tensor({channels}, 1.0))),
      beta(ad::parameter(Tensor({channels}, 0.0))),
      stats{Tensor({channels}, 0.0), Tensor({channels}, 1.0)} {}

ad::Var BatchNorm::operator()(const ad::Var& x, bool training) {
  return ad::batch_norm(x, gamma, beta, stats, training, kMomentum, kEps);
}

void BatchNorm::collect(Parameters& p, const std::string& prefix) {
  p.add(prefix + "/gamma", gamma);
  p.add(prefix + "/beta", beta);
  p.add_buffer(prefix + "/running_mean", stats.running_mean);
  p.add_buffer(prefix + "/running_var", stats.running_var);
}

Adam::Adam(const std::vector<ParamRef>& params, AdamConfig config) : config_(config) {
  slots_.reserve(params.size());
  for (const auto& p : params) {
    slots_.push_back({p, Tensor(p.var.shape(), 0.0), Tensor(p.var.shape(), 0.0)});
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    Tensor& w = s.param.var.mutable_value();
    const Tensor& g = s.param.var.grad();
    const bool has_grad = g.size() == w.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? g[i] : 0.0;
      s.m[i] = config_.beta1 * s.m[i] + (1.0 - config_.beta1) * gi;
      s.v[i] = config_.beta2 * s.v[i] + (1.0 - config_.beta2) * gi * gi;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param.var.zero_grad();
}

}  // namespace advaug::nn
