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

// Scalar reference implementations written straight from the definitions,
// sharing no code with the library.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace oracle {

inline double norm_coord(std::size_t k, std::size_t n) {
  return n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n - 1);
}

/// Bilinear sample of a single-channel H x W image at normalized (gx, gy).
inline double bilinear(std::span<const double> img, std::size_t H, std::size_t W, double gx, double gy,
                       bool border) {
  const double px = W == 1 ? 0.0 : (gx + 1.0) * 0.5 * static_cast<double>(W - 1);
  const double py = H == 1 ? 0.0 : (gy + 1.0) * 0.5 * static_cast<double>(H - 1);
  const double x0 = std::floor(px), y0 = std::floor(py);
  const double ax = px - x0, ay = py - y0;
  auto at = [&](double yi, double xi) -> double {
    long long r = static_cast<long long>(yi), c = static_cast<long long>(xi);
    if (border) {
      r = std::max(0LL, std::min(r, static_cast<long long>(H) - 1));
      c = std::max(0LL, std::min(c, static_cast<long long>(W) - 1));
    } else if (r < 0 || c < 0 || r >= static_cast<long long>(H) || c >= static_cast<long long>(W)) {
      return 0.0;
    }
    return img[static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c)];
  };
  return (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
         ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
}

/// Forward differences of an H x W x 2 field, H x W x 2 x 2, trailing edge 0.
inline std::vector<double> spatial_gradient(std::span<const double> f, std::size_t H, std::size_t W) {
  std::vector<double> g(H * W * 4, 0.0);
  auto F = [&](std::size_t i, std::size_t j, std::size_t c) { return f[(i * W + j) * 2 + c]; };
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t o = ((i * W + j) * 2 + c) * 2;
        g[o] = j + 1 < W ? F(i, j + 1, c) - F(i, j, c) : 0.0;
        g[o + 1] = i + 1 < H ? F(i + 1, j, c) - F(i, j, c) : 0.0;
      }
  return g;
}

inline double mean_square(std::span<const double> v) {
  long double s = 0;
  for (double x : v) s += static_cast<long double>(x) * x;
  return static_cast<double>(s / static_cast<long double>(v.size()));
}

/// Softmax cross-entropy of one logit vector, in long double.
inline double cross_entropy(const std::vector<double>& z, int label) {
  long double m = z[0];
  for (double v : z) m = std::max<long double>(m, v);
  long double s = 0;
  for (double v : z) s += std::exp(static_cast<long double>(v) - m);
  return static_cast<double>(m + std::log(s) - z[static_cast<std::size_t>(label)]);
}

inline double sigmoid(double l) { return 1.0 / (1.0 + std::exp(-l)); }

/// mean log p_real + mean log(1 - p_fake)
inline double gan_d(const std::vector<double>& p_real, const std::vector<double>& p_fake) {
  long double a = 0, b = 0;
  for (double p : p_real) a += std::log(static_cast<long double>(p));
  for (double p : p_fake) b += std::log1p(-static_cast<long double>(p));
  return static_cast<double>(a / p_real.size() + b / p_fake.size());
}

inline double gan_g_minimax(const std::vector<double>& p_fake) {
  long double b = 0;
  for (double p : p_fake) b += std::log1p(-static_cast<long double>(p));
  return static_cast<double>(b / p_fake.size());
}

inline double gan_g_nonsaturating(const std::vector<double>& p_fake) {
  long double b = 0;
  for (double p : p_fake) b -= std::log(static_cast<long double>(p));
  return static_cast<double>(b / p_fake.size());
}

}  // namespace oracle
