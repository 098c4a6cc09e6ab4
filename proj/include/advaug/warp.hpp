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
#include <cstddef>
#include <vector>

#include "advaug/autodiff.hpp"
#include "advaug/tensor.hpp"

/// Differentiable geometric-transform primitives.
///
/// Coordinates are normalized to [-1, 1] with -1/+1 at the centers of the
/// first/last pixel of an axis (an axis of length 1 maps to 0). A flow field
/// stores absolute sampling locations: output pixel (i, j) reads the input at
/// flow[i, j] = (x, y).
namespace advaug {

enum class Interp { bilinear, nearest };
enum class Padding { zeros, border };

/// norm(k, N) = -1 + 2k / (N - 1), or 0 when N == 1.
double normalized_coordinate(std::size_t k, std::size_t n);

/// H x W x 2 field of (x, y) sampling coordinates.
class FlowField {
 public:
  /// Takes an H x W x 2 tensor; throws InvalidArgument on bad shape or
  /// non-finite values.
  explicit FlowField(Tensor data);

  std::size_t height() const { return data_.dim(0); }
  std::size_t width() const { return data_.dim(1); }
  const Tensor& tensor() const { return data_; }
  double x(std::size_t i, std::size_t j) const { return data_[(i * width() + j) * 2]; }
  double y(std::size_t i, std::size_t j) const { return data_[(i * width() + j) * 2 + 1]; }

 private:
  Tensor data_;
};

/// Row-major [[a, b, tx], [c, d, ty]] acting on (x, y, 1).
struct AffineMatrix {
  std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AffineMatrix identity() { return {}; }
  bool finite() const;
  friend bool operator==(const AffineMatrix&, const AffineMatrix&) = default;
};

FlowField identity_flow(std::ptrdiff_t height, std::ptrdiff_t width);
FlowField affine_to_flow(const AffineMatrix& a, std::ptrdiff_t height, std::ptrdiff_t width);

/// Samples a C x H x W image at the locations of `flow`.
Tensor warp(const Tensor& image, const FlowField& flow, Interp interp = Interp::bilinear,
            Padding pad = Padding::zeros);

/// Nearest-neighbour warp of an H x W integer label map (border padding).
std::vector<int> warp_labels(const std::vector<int>& labels, const FlowField& flow);

/// H x W x 2 x 2 forward differences: [i, j, c, 0] along x (columns),
/// [i, j, c, 1] along y (rows). The trailing column/row difference is zero.
Tensor spatial_gradient(const FlowField& flow);

namespace ad {

/// B x H x W x 2 identity sampling grid.
Tensor identity_flow_batch(std::size_t batch, std::size_t height, std::size_t width);

/// A: B x 2 x 3 -> B x H x W x 2.
Var affine_to_flow(const Var& affine, std::size_t height, std::size_t width);

/// Bilinear sampling of x (B x C x H x W) at flow (B x H x W x 2); gradients
/// reach both arguments.
Var warp(const Var& x, const Var& flow, Padding pad = Padding::zeros);

/// Nearest-neighbour sampling, no gradient.
Tensor warp_nearest(const Tensor& x, const Tensor& flow, Padding pad);

/// Batched labels (B x H x W, flattened) warped with nearest sampling and
/// border padding.
std::vector<int> warp_labels(const std::vector<int>& labels, const Tensor& flow);

/// B x H x W x 2 -> B x H x W x 2 x 2, see the single-field overload.
Var spatial_gradient(const Var& flow);

}  // namespace ad
}  // namespace advaug
