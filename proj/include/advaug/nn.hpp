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

#include <cstddef>
#include <string>
#include <vector>

#include "advaug/autodiff.hpp"
#include "advaug/ops.hpp"
#include "advaug/rng.hpp"

namespace advaug::nn {

struct ParamRef {
  std::string name;
  ad::Var var;
};

struct BufferRef {
  std::string name;
  Tensor* tensor;
};

/// Named views of a network's trainable parameters and persistent buffers.
/// Names follow `<network>/<layer>/<param>`. Buffer pointers stay valid only
/// while the owning network is alive and not moved.
struct Parameters {
  std::vector<ParamRef> params;
  std::vector<BufferRef> buffers;

  void add(const std::string& name, const ad::Var& v) { params.push_back({name, v}); }
  void add_buffer(const std::string& name, Tensor& t) { buffers.push_back({name, &t}); }
  void zero_grad();
  std::size_t scalar_count() const;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t pad, Rng& rng);

  ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, weight, bias, stride_, pad_); }
  void zero_init();
  void collect(Parameters& p, const std::string& prefix) const;
  std::size_t out_channels() const { return weight.dim(0); }

  ad::Var weight;
  ad::Var bias;

 private:
  std::size_t stride_ = 1;
  std::size_t pad_ = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  ad::Var operator()(const ad::Var& x) const { return ad::linear(x, weight, bias); }
  void zero_init();
  void collect(Parameters& p, const std::string& prefix) const;

  ad::Var weight;
  ad::Var bias;
};

class BatchNorm {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);

  ad::Var operator()(const ad::Var& x, bool training);
  void collect(Parameters& p, const std::string& prefix);

  ad::Var gamma;
  ad::Var beta;
  ad::BatchNormStats stats;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adaptive-moment optimizer with bias correction. Missing gradients count
/// as zero.
class Adam {
 public:
  struct Slot {
    ParamRef param;
    Tensor m;
    Tensor v;
  };

  Adam() = default;
  Adam(const std::vector<ParamRef>& params, AdamConfig config);

  void step();
  void zero_grad();

  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Slot> slots_;
  AdamConfig config_;
  std::uint64_t t_ = 0;
};

}  // namespace advaug::nn
