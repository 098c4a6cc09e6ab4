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

#include "advaug/warp.hpp"

#include <algorithm>
#include <cmath>

#include "advaug/errors.hpp"

namespace advaug {

namespace {

// Sampling location within 1e-9 px of a grid point is treated as that point,
// so identity sampling reproduces its input exactly.
constexpr double kSnap = 1e-9;

double to_pixel(double coord, std::size_t n) { return (coord + 1.0) * 0.5 * static_cast<double>(n - 1); }

double snap(double p) {
  const double r = std::nearbyint(p);
  return std::abs(p - r) < kSnap ? r : p;
}

void check_flow_batch(const Tensor& flow, std::size_t batch, std::size_t h, std::size_t w,
                      const char* op) {
  if (flow.rank() != 4 || flow.dim(0) != batch || flow.dim(1) != h || flow.dim(2) != w ||
      flow.dim(3) != 2) {
    throw InvalidArgument(std::string(op) + ": flow shape " + to_string(flow.shape()) +
                          " does not match image batch " + std::to_string(batch) + "x" +
                          std::to_string(h) + "x" + std::to_string(w));
  }
  for (double v : flow.values()) {
    if (std::isnan(v)) throw InvalidArgument(std::string(op) + ": NaN in flow field");
  }
}

Tensor as_batch(const Tensor& t) {
  Shape s{1};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return t.reshaped(std::move(s));
}

}  // namespace

double normalized_coordinate(std::size_t k, std::size_t n) {
  if (n <= 1) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n - 1);
}

FlowField::FlowField(Tensor data) : data_(std::move(data)) {
  if (data_.rank() != 3 || data_.dim(2) != 2 || data_.dim(0) == 0 || data_.dim(1) == 0) {
    throw InvalidArgument("FlowField: expected H x W x 2, got " + to_string(data_.shape()));
  }
  if (!data_.all_finite()) throw InvalidArgument("FlowField: non-finite value");
}

bool AffineMatrix::finite() const {
  return std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); });
}

FlowField identity_flow(std::ptrdiff_t height, std::ptrdiff_t width) {
  if (height < 1 || width < 1) {
    throw InvalidArgument("identity_flow: non-positive dimensions " + std::to_string(height) +
                          "x" + std::to_string(width));
  }
  Tensor t = ad::identity_flow_batch(1, static_cast<std::size_t>(height),
                                     static_cast<std::size_t>(width));
  return FlowField(t.reshaped({t.dim(1), t.dim(2), 2}));
}

FlowField affine_to_flow(const AffineMatrix& a, std::ptrdiff_t height, std::ptrdiff_t width) {
  if (height < 1 || width < 1) {
    throw InvalidArgument("affine_to_flow: non-positive dimensions");
  }
  if (!a.finite()) throw InvalidArgument("affine_to_flow: non-finite matrix entry");
  ad::Var av(Tensor({1, 2, 3}, std::vector<double>(a.m.begin(), a.m.end())));
  Tensor t = ad::affine_to_flow(av, static_cast<std::size_t>(height),
                                static_cast<std::size_t>(width))
                 .value();
  return FlowField(t.reshaped({t.dim(1), t.dim(2), 2}));
}

Tensor warp(const Tensor& image, const FlowField& flow, Interp interp, Padding pad) {
  if (image.rank() != 3 || image.dim(1) != flow.height() || image.dim(2) != flow.width()) {
    throw InvalidArgument("warp: image " + to_string(image.shape()) + " vs flow " +
                          to_string(flow.tensor().shape()));
  }
  const Tensor x = as_batch(image);
  const Tensor f = as_batch(flow.tensor());
  Tensor out = interp == Interp::bilinear ? ad::warp(ad::Var(x), ad::Var(f), pad).value()
                                          : ad::warp_nearest(x, f, pad);
  return out.reshaped(image.shape());
}

std::vector<int> warp_labels(const std::vector<int>& labels, const FlowField& flow) {
  return ad::warp_labels(labels, as_batch(flow.tensor()));
}

Tensor spatial_gradient(const FlowField& flow) {
  Tensor g = ad::spatial_gradient(ad::Var(as_batch(flow.tensor()))).value();
  return g.reshaped({flow.height(), flow.width(), 2, 2});
}

namespace ad {

Tensor identity_flow_batch(std::size_t batch, std::size_t height, std::size_t width) {
  Tensor t({batch, height, width, 2});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t o = ((b * height + i) * width + j) * 2;
        t[o] = normalized_coordinate(j, width);
        t[o + 1] = normalized_coordinate(i, height);
      }
  return t;
}

Var affine_to_flow(const Var& affine, std::size_t height, std::size_t width) {
  const Tensor& a = affine.value();
  if (a.rank() != 3 || a.dim(1) != 2 || a.dim(2) != 3) {
    throw InvalidArgument("affine_to_flow: expected B x 2 x 3, got " + to_string(a.shape()));
  }
  if (height < 1 || width < 1) throw InvalidArgument("affine_to_flow: non-positive dimensions");
  const std::size_t B = a.dim(0);
  Tensor out({B, height, width, 2});
  for (std::size_t b = 0; b < B; ++b) {
    const double* m = a.ptr() + b * 6;
    for (std::size_t i = 0; i < height; ++i) {
      const double y = normalized_coordinate(i, height);
      for (std::size_t j = 0; j < width; ++j) {
        const double x = normalized_coordinate(j, width);
        const std::size_t o = ((b * height + i) * width + j) * 2;
        out[o] = m[0] * x + m[1] * y + m[2];
        out[o + 1] = m[3] * x + m[4] * y + m[5];
      }
    }
  }
  return make_op(std::move(out), {affine}, [B, height, width](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t b = 0; b < B; ++b) {
      double* gm = g->ptr() + b * 6;
      for (std::size_t i = 0; i < height; ++i) {
        const double y = normalized_coordinate(i, height);
        for (std::size_t j = 0; j < width; ++j) {
          const double x = normalized_coordinate(j, width);
          const std::size_t o = ((b * height + i) * width + j) * 2;
          const double gx = self.grad[o], gy = self.grad[o + 1];
          gm[0] += gx * x;
          gm[1] += gx * y;
          gm[2] += gx;
          gm[3] += gy * x;
          gm[4] += gy * y;
          gm[5] += gy;
        }
      }
    }
  });
}

namespace {

// Bilinear sampling footprint for one output location.
struct Footprint {
  std::ptrdiff_t x0, y0;
  double wx1, wy1;
  double dpx, dpy;  // d(pixel coordinate)/d(normalized coordinate); 0 when clamped
};

Footprint footprint(double fx, double fy, std::size_t h, std::size_t w, Padding pad) {
  double px = snap(to_pixel(fx, w));
  double py = snap(to_pixel(fy, h));
  double dpx = 0.5 * static_cast<double>(w - 1);
  double dpy = 0.5 * static_cast<double>(h - 1);
  if (pad == Padding::border) {
    const double maxx = static_cast<double>(w - 1), maxy = static_cast<double>(h - 1);
    if (px <= 0.0 || px >= maxx) {
      px = std::clamp(px, 0.0, maxx);
      dpx = 0.0;
    }
    if (py <= 0.0 || py >= maxy) {
      py = std::clamp(py, 0.0, maxy);
      dpy = 0.0;
    }
  }
  // Far outside the frame every corner is padding; keep the index cast in range.
  if (!(px >= -1.0)) { px = -2.0; dpx = 0.0; }
  if (!(px <= static_cast<double>(w))) { px = static_cast<double>(w) + 1.0; dpx = 0.0; }
  if (!(py >= -1.0)) { py = -2.0; dpy = 0.0; }
  if (!(py <= static_cast<double>(h))) { py = static_cast<double>(h) + 1.0; dpy = 0.0; }
  const double x0 = std::floor(px), y0 = std::floor(py);
  return {static_cast<std::ptrdiff_t>(x0), static_cast<std::ptrdiff_t>(y0), px - x0, py - y0, dpx,
          dpy};
}

}  // namespace

Var warp(const Var& x, const Var& flow, Padding pad) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw InvalidArgument("warp: expected B x C x H x W, got " + to_string(xv.shape()));
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  check_flow_batch(flow.value(), B, H, W, "warp");
  const Tensor& fv = flow.value();

  auto inside = [H, W](std::ptrdiff_t yy, std::ptrdiff_t xx) {
    return yy >= 0 && xx >= 0 && yy < static_cast<std::ptrdiff_t>(H) &&
           xx < static_cast<std::ptrdiff_t>(W);
  };

  Tensor out({B, C, H, W});
  std::vector<Footprint> fps(B * H * W);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < H * W; ++p) {
      const std::size_t fo = (b * H * W + p) * 2;
      const Footprint fp = footprint(fv[fo], fv[fo + 1], H, W, pad);
      fps[b * H * W + p] = fp;
      const double wx[2] = {1.0 - fp.wx1, fp.wx1};
      const double wy[2] = {1.0 - fp.wy1, fp.wy1};
      for (std::size_t c = 0; c < C; ++c) {
        const double* img = xv.ptr() + (b * C + c) * H * W;
        double acc = 0.0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::ptrdiff_t yy = fp.y0 + dy, xx = fp.x0 + dx;
            if (inside(yy, xx)) acc += wy[dy] * wx[dx] * img[yy * static_cast<std::ptrdiff_t>(W) + xx];
          }
        out[(b * C + c) * H * W + p] = acc;
      }
    }
  }
  return make_op(std::move(out), {x, flow},
                 [fps = std::move(fps), B, C, H, W, inside](Node& self) {
                   Tensor* gx = input_grad(self, 0);
                   Tensor* gf = input_grad(self, 1);
                   const Tensor& xv = self.inputs[0]->value;
                   for (std::size_t b = 0; b < B; ++b) {
                     for (std::size_t p = 0; p < H * W; ++p) {
                       const Footprint& fp = fps[b * H * W + p];
                       const double wx[2] = {1.0 - fp.wx1, fp.wx1};
                       const double wy[2] = {1.0 - fp.wy1, fp.wy1};
                       double dpx = 0.0, dpy = 0.0;
                       for (std::size_t c = 0; c < C; ++c) {
                         const std::size_t base = (b * C + c) * H * W;
                         const double go = self.grad[base + p];
                         if (go == 0.0) continue;
                         for (int dy = 0; dy < 2; ++dy)
                           for (int dx = 0; dx < 2; ++dx) {
                             const std::ptrdiff_t yy = fp.y0 + dy, xx = fp.x0 + dx;
                             if (!inside(yy, xx)) continue;
                             const std::size_t idx =
                                 base + static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx);
                             if (gx) (*gx)[idx] += go * wy[dy] * wx[dx];
                             const double v = xv[idx];
                             dpx += go * wy[dy] * (dx ? 1.0 : -1.0) * v;
                             dpy += go * wx[dx] * (dy ? 1.0 : -1.0) * v;
                           }
                       }
                       if (gf) {
                         const std::size_t fo = (b * H * W + p) * 2;
                         (*gf)[fo] += dpx * fp.dpx;
                         (*gf)[fo + 1] += dpy * fp.dpy;
                       }
                     }
                   }
                 });
}

Tensor warp_nearest(const Tensor& x, const Tensor& flow, Padding pad) {
  if (x.rank() != 4) throw InvalidArgument("warp_nearest: expected B x C x H x W");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check_flow_batch(flow, B, H, W, "warp_nearest");
  Tensor out({B, C, H, W});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < H * W; ++p) {
      const std::size_t fo = (b * H * W + p) * 2;
      const double px = std::clamp(snap(to_pixel(flow[fo], W)), -2.0, static_cast<double>(W) + 1.0);
      const double py = std::clamp(snap(to_pixel(flow[fo + 1], H)), -2.0, static_cast<double>(H) + 1.0);
      auto xi = static_cast<std::ptrdiff_t>(std::floor(px + 0.5));
      auto yi = static_cast<std::ptrdiff_t>(std::floor(py + 0.5));
      const bool in = xi >= 0 && yi >= 0 && xi < static_cast<std::ptrdiff_t>(W) &&
                      yi < static_cast<std::ptrdiff_t>(H);
      if (!in && pad == Padding::zeros) continue;
      xi = std::clamp<std::ptrdiff_t>(xi, 0, static_cast<std::ptrdiff_t>(W) - 1);
      yi = std::clamp<std::ptrdiff_t>(yi, 0, static_cast<std::ptrdiff_t>(H) - 1);
      for (std::size_t c = 0; c < C; ++c) {
        out[(b * C + c) * H * W + p] =
            x[(b * C + c) * H * W + static_cast<std::size_t>(yi) * W + static_cast<std::size_t>(xi)];
      }
    }
  }
  return out;
}

std::vector<int> warp_labels(const std::vector<int>& labels, const Tensor& flow) {
  if (flow.rank() != 4) throw InvalidArgument("warp_labels: flow must be B x H x W x 2");
  const std::size_t B = flow.dim(0), H = flow.dim(1), W = flow.dim(2);
  if (labels.size() != B * H * W) {
    throw InvalidArgument("warp_labels: label count " + std::to_string(labels.size()) +
                          " does not match flow " + to_string(flow.shape()));
  }
  Tensor as_real({B, 1, H, W});
  for (std::size_t i = 0; i < labels.size(); ++i) as_real[i] = labels[i];
  const Tensor warped = warp_nearest(as_real, flow, Padding::border);
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(warped[i]);
  return out;
}

Var spatial_gradient(const Var& flow) {
  const Tensor& f = flow.value();
  if (f.rank() != 4 || f.dim(3) != 2) {
    throw InvalidArgument("spatial_gradient: expected B x H x W x 2, got " + to_string(f.shape()));
  }
  const std::size_t B = f.dim(0), H = f.dim(1), W = f.dim(2);
  if (H < 2 || W < 2) {
    throw InvalidArgument("spatial_gradient: needs H, W >= 2, got " + to_string(f.shape()));
  }
  Tensor out({B, H, W, 2, 2});
  auto fi = [H, W](std::size_t b, std::size_t i, std::size_t j, std::size_t c) {
    return ((b * H + i) * W + j) * 2 + c;
  };
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t c = 0; c < 2; ++c) {
          const std::size_t o = fi(b, i, j, c) * 2;
          out[o] = j + 1 < W ? f[fi(b, i, j + 1, c)] - f[fi(b, i, j, c)] : 0.0;
          out[o + 1] = i + 1 < H ? f[fi(b, i + 1, j, c)] - f[fi(b, i, j, c)] : 0.0;
        }
  return make_op(std::move(out), {flow}, [B, H, W, fi](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
          for (std::size_t c = 0; c < 2; ++c) {
            const std::size_t o = fi(b, i, j, c) * 2;
            if (j + 1 < W) {
              (*g)[fi(b, i, j + 1, c)] += self.grad[o];
              (*g)[fi(b, i, j, c)] -= self.grad[o];
            }
            if (i + 1 < H) {
              (*g)[fi(b, i + 1, j, c)] += self.grad[o + 1];
              (*g)[fi(b, i, j, c)] -= self.grad[o + 1];
            }
          }
  });
}

}  // namespace ad
}  // namespace advaug
