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
#include <span>
#include <vector>

#include "advaug/autodiff.hpp"

/// Differentiable tensor operations used by the networks. Image tensors are
/// NCHW; dense layers take B x features.
namespace advaug::ad {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
/// a + c (elementwise constant offset, no gradient to `c`).
Var add_constant(const Var& a, const Tensor& c);

Var sum(const Var& a);
Var mean(const Var& a);
Var square(const Var& a);
/// Weighted sum of scalars: sum_i w_i * s_i.
Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double negative_slope);
Var tanh(const Var& a);
/// log(1 + exp(a)), evaluated stably.
Var softplus(const Var& a);

Var reshape(const Var& a, Shape shape);
/// Concatenation along `axis`; all other extents must agree.
Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Selects entries of axis 0.
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
/// B x C x H x W -> B x H x W x C.
Var channels_last(const Var& a);

/// 2-D convolution, square kernel. w: Cout x Cin x k x k, b: Cout.
Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad);
/// x: B x In, w: Out x In, b: Out.
Var linear(const Var& x, const Var& w, const Var& b);
Var max_pool2(const Var& x);
Var upsample_nearest2(const Var& x);
/// B x C x H x W -> B x C.
Var global_avg_pool(const Var& x);

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

/// Per-channel batch normalization over (B, H, W). In training mode the batch
/// statistics normalize and `stats` is updated with `momentum`; in eval mode
/// `stats` normalizes and is left untouched.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training, double momentum, double eps);

}  // namespace advaug::ad
