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

#include "advaug/ops.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Core>

#include "advaug/errors.hpp"

namespace advaug::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw InvalidArgument(std::string(op) + ": expected rank " + std::to_string(rank) +
                          ", got shape " + to_string(a.shape()));
  }
}

template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  Tensor out(a.shape());
  const Tensor& in = a.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_op(std::move(out), {a}, [dfdx](Node& self) {
    Tensor* ga = input_grad(self, 0);
    const Tensor& x = self.inputs[0]->value;
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += self.grad[i] * dfdx(x[i], self.value[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    if (Tensor* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= c;
  return make_op(std::move(out), {a}, [c](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += c * self.grad[i];
  });
}

Var add_constant(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape()) {
    throw InvalidArgument("add_constant: shape " + to_string(a.shape()) + " vs " +
                          to_string(c.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return make_op(std::move(out), {a}, [](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_op(Tensor::scalar(s), {a}, [](Node& self) {
    Tensor* g = input_grad(self, 0);
    const double d = self.grad[0];
    for (double& v : g->values()) v += d;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_op(Tensor::scalar(s / n), {a}, [n](Node& self) {
    Tensor* g = input_grad(self, 0);
    const double d = self.grad[0] / n;
    for (double& v : g->values()) v += d;
  });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  if (scalars.size() != weights.size() || scalars.empty()) {
    throw InvalidArgument("weighted_sum: need one weight per scalar");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i].value().size() != 1) throw InvalidArgument("weighted_sum: non-scalar term");
    s += weights[i] * scalars[i].value()[0];
  }
  return make_op(Tensor::scalar(s), scalars, [weights](Node& self) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (Tensor* g = input_grad(self, i)) (*g)[0] += weights[i] * self.grad[0];
    }
  });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double negative_slope) {
  return unary(a, [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
               [negative_slope](double x, double) { return x > 0.0 ? 1.0 : negative_slope; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var softplus(const Var& a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        // logistic sigmoid
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_op(std::move(out), {a}, [](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw InvalidArgument("concat: axis out of range");
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw InvalidArgument("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw InvalidArgument("concat: shape " + to_string(s) + " incompatible with " +
                              to_string(first));
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  Tensor out(out_shape);
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t base = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t len = extents[k] * inner;
    const double* src = parts[k].value().ptr();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * len, src + (o + 1) * len, out.ptr() + o * out_row + base);
    }
    base += len;
  }
  return make_op(std::move(out), parts, [extents, outer, inner, out_row](Node& self) {
    std::size_t base = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      const std::size_t len = extents[k] * inner;
      if (Tensor* g = input_grad(self, k)) {
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < len; ++i) {
            (*g)[o * len + i] += self.grad[o * out_row + base + i];
          }
        }
      }
      base += len;
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  const Shape& s = a.shape();
  if (s.empty()) throw InvalidArgument("gather_rows: scalar input");
  const std::size_t row = a.value().size() / s[0];
  Shape out_shape = s;
  out_shape[0] = rows.size();
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= s[0]) throw InvalidArgument("gather_rows: row index out of range");
    std::copy_n(a.value().ptr() + rows[r] * row, row, out.ptr() + r * row);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_op(std::move(out), {a}, [idx, row](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t i = 0; i < row; ++i) (*g)[idx[r] * row + i] += self.grad[r * row + i];
    }
  });
}

Var channels_last(const Var& a) {
  require_rank(a, 4, "channels_last");
  const std::size_t B = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
  Tensor out({B, H, W, C});
  const Tensor& x = a.value();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < H * W; ++p)
        out[(b * H * W + p) * C + c] = x[(b * C + c) * H * W + p];
  return make_op(std::move(out), {a}, [B, C, H, W](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < H * W; ++p)
          (*g)[(b * C + c) * H * W + p] += self.grad[(b * H * W + p) * C + c];
  });
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, k, stride, pad, ho, wo;
  std::size_t col_rows() const { return cin * k * k; }
  std::size_t col_cols() const { return ho * wo; }
};

// Output columns [lo, hi) whose input column ox * stride + kj - pad is in range.
std::pair<std::size_t, std::size_t> valid_range(std::size_t kj, const ConvGeometry& g, std::size_t in,
                                                std::size_t out) {
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const auto off = static_cast<std::ptrdiff_t>(kj) - static_cast<std::ptrdiff_t>(g.pad);
  std::ptrdiff_t lo = off >= 0 ? 0 : (-off + s - 1) / s;
  std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(in) - 1 - off;
  hi = hi < 0 ? 0 : hi / s + 1;
  lo = std::min<std::ptrdiff_t>(lo, static_cast<std::ptrdiff_t>(out));
  hi = std::clamp<std::ptrdiff_t>(hi, lo, static_cast<std::ptrdiff_t>(out));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void im2col(const double* img, const ConvGeometry& g, double* cols) {
  const std::size_t n = g.col_cols();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      const auto [ylo, yhi] = valid_range(ki, g, g.h, g.ho);
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const auto [xlo, xhi] = valid_range(kj, g, g.w, g.wo);
        double* row = cols + ((c * g.k + ki) * g.k + kj) * n;
        std::fill_n(row, ylo * g.wo, 0.0);
        std::fill(row + yhi * g.wo, row + n, 0.0);
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          double* dst = row + oy * g.wo;
          const double* src = img + (c * g.h + oy * g.stride + ki - g.pad) * g.w;
          std::fill_n(dst, xlo, 0.0);
          std::fill(dst + xhi, dst + g.wo, 0.0);
          if (g.stride == 1) {
            std::copy_n(src + (xlo + kj - g.pad), xhi - xlo, dst + xlo);
          } else {
            for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox] = src[ox * g.stride + kj - g.pad];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* img) {
  const std::size_t n = g.col_cols();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      const auto [ylo, yhi] = valid_range(ki, g, g.h, g.ho);
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const auto [xlo, xhi] = valid_range(kj, g, g.w, g.wo);
        const double* row = cols + ((c * g.k + ki) * g.k + kj) * n;
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          const double* src = row + oy * g.wo;
          double* dst = img + (c * g.h + oy * g.stride + ki - g.pad) * g.w;
          if (g.stride == 1) {
            for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox + kj - g.pad] += src[ox];
          } else {
            for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox * g.stride + kj - g.pad] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d weight");
  const std::size_t B = x.dim(0);
  const std::size_t cout = w.dim(0);
  const std::size_t k = w.dim(2);
  if (w.dim(1) != x.dim(1) || w.dim(3) != k || b.value().size() != cout || stride == 0) {
    throw InvalidArgument("conv2d: input " + to_string(x.shape()) + " vs weight " +
                          to_string(w.shape()));
  }
  if (x.dim(2) + 2 * pad < k || x.dim(3) + 2 * pad < k) {
    throw InvalidArgument("conv2d: kernel larger than padded input " + to_string(x.shape()));
  }
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - k) / stride + 1;
  g.wo = (g.w + 2 * pad - k) / stride + 1;

  Tensor out({B, cout, g.ho, g.wo});
  AlignedVector cols(g.col_rows() * g.col_cols());
  ConstMapMat wm(w.value().ptr(), static_cast<Eigen::Index>(cout),
                 static_cast<Eigen::Index>(g.col_rows()));
  ConstMapMat cm(cols.data(), static_cast<Eigen::Index>(g.col_rows()),
                 static_cast<Eigen::Index>(g.col_cols()));
  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = cout * g.col_cols();
  for (std::size_t n = 0; n < B; ++n) {
    im2col(x.value().ptr() + n * in_stride, g, cols.data());
    MapMat ym(out.ptr() + n * out_stride, static_cast<Eigen::Index>(cout),
              static_cast<Eigen::Index>(g.col_cols()));
    ym.noalias() = wm * cm;
    for (std::size_t c = 0; c < cout; ++c) ym.row(static_cast<Eigen::Index>(c)).array() += b.value()[c];
  }

  return make_op(std::move(out), {x, w, b}, [g, B, cout, in_stride, out_stride](Node& self) {
    Tensor* gx = input_grad(self, 0);
    Tensor* gw = input_grad(self, 1);
    Tensor* gb = input_grad(self, 2);
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    const auto rows = static_cast<Eigen::Index>(g.col_rows());
    const auto ncol = static_cast<Eigen::Index>(g.col_cols());
    const auto co = static_cast<Eigen::Index>(cout);
    AlignedVector cols(g.col_rows() * g.col_cols());
    MapMat cm(cols.data(), rows, ncol);
    ConstMapMat wm(wv.ptr(), co, rows);
    for (std::size_t n = 0; n < B; ++n) {
      ConstMapMat dy(self.grad.ptr() + n * out_stride, co, ncol);
      if (gb) {
        for (std::size_t c = 0; c < cout; ++c) (*gb)[c] += dy.row(static_cast<Eigen::Index>(c)).sum();
      }
      if (gw) {
        im2col(xv.ptr() + n * in_stride, g, cols.data());
        MapMat dw(gw->ptr(), co, rows);
        dw.noalias() += dy * cm.transpose();
      }
      if (gx) {
        cm.noalias() = wm.transpose() * dy;
        col2im_add(cols.data(), g, gx->ptr() + n * in_stride);
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear weight");
  const std::size_t B = x.dim(0), in = x.dim(1), outf = w.dim(0);
  if (w.dim(1) != in || b.value().size() != outf) {
    throw InvalidArgument("linear: input " + to_string(x.shape()) + " vs weight " +
                          to_string(w.shape()));
  }
  Tensor out({B, outf});
  const auto Bi = static_cast<Eigen::Index>(B), ii = static_cast<Eigen::Index>(in),
             oi = static_cast<Eigen::Index>(outf);
  MapMat ym(out.ptr(), Bi, oi);
  ym.noalias() = ConstMapMat(x.value().ptr(), Bi, ii) * ConstMapMat(w.value().ptr(), oi, ii).transpose();
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t c = 0; c < outf; ++c) out[r * outf + c] += b.value()[c];
  return make_op(std::move(out), {x, w, b}, [Bi, ii, oi](Node& self) {
    ConstMapMat dy(self.grad.ptr(), Bi, oi);
    if (Tensor* gx = input_grad(self, 0)) {
      MapMat(gx->ptr(), Bi, ii).noalias() += dy * ConstMapMat(self.inputs[1]->value.ptr(), oi, ii);
    }
    if (Tensor* gw = input_grad(self, 1)) {
      MapMat(gw->ptr(), oi, ii).noalias() +=
          dy.transpose() * ConstMapMat(self.inputs[0]->value.ptr(), Bi, ii);
    }
    if (Tensor* gb = input_grad(self, 2)) {
      for (Eigen::Index c = 0; c < oi; ++c) (*gb)[static_cast<std::size_t>(c)] += dy.col(c).sum();
    }
  });
}

Var max_pool2(const Var& x) {
  require_rank(x, 4, "max_pool2");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < 2 || W < 2) throw InvalidArgument("max_pool2: input too small " + to_string(x.shape()));
  const std::size_t ho = H / 2, wo = W / 2;
  Tensor out({B, C, ho, wo});
  std::vector<std::size_t> argmax(out.size());
  const Tensor& xv = x.value();
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = bc * H * W + (2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t i = bc * H * W + (2 * oy + dy) * W + 2 * ox + dx;
            if (xv[i] > xv[best]) best = i;
          }
        const std::size_t o = (bc * ho + oy) * wo + ox;
        out[o] = xv[best];
        argmax[o] = best;
      }
    }
  }
  return make_op(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t o = 0; o < argmax.size(); ++o) (*g)[argmax[o]] += self.grad[o];
  });
}

Var upsample_nearest2(const Var& x) {
  require_rank(x, 4, "upsample_nearest2");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out({B, C, 2 * H, 2 * W});
  const Tensor& xv = x.value();
  for (std::size_t bc = 0; bc < B * C; ++bc)
    for (std::size_t y = 0; y < 2 * H; ++y)
      for (std::size_t xx = 0; xx < 2 * W; ++xx)
        out[(bc * 2 * H + y) * 2 * W + xx] = xv[(bc * H + y / 2) * W + xx / 2];
  return make_op(std::move(out), {x}, [B, C, H, W](Node& self) {
    Tensor* g = input_grad(self, 0);
    for (std::size_t bc = 0; bc < B * C; ++bc)
      for (std::size_t y = 0; y < 2 * H; ++y)
        for (std::size_t xx = 0; xx < 2 * W; ++xx)
          (*g)[(bc * H + y / 2) * W + xx / 2] += self.grad[(bc * 2 * H + y) * 2 * W + xx];
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor out({B, C});
  const Tensor& xv = x.value();
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double s = 0.0;
    for (std::size_t p = 0; p < HW; ++p) s += xv[bc * HW + p];
    out[bc] = s / static_cast<double>(HW);
  }
  return make_op(std::move(out), {x}, [HW](Node& self) {
    Tensor* g = input_grad(self, 0);
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t bc = 0; bc < self.value.size(); ++bc)
      for (std::size_t p = 0; p < HW; ++p) (*g)[bc * HW + p] += self.grad[bc] * inv;
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training, double momentum, double eps) {
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 4) {
    throw InvalidArgument("batch_norm: expected rank 2 or 4, got " + to_string(s));
  }
  const std::size_t B = s[0], C = s[1];
  const std::size_t HW = s.size() == 4 ? s[2] * s[3] : 1;
  if (gamma.value().size() != C || beta.value().size() != C ||
      stats.running_mean.size() != C || stats.running_var.size() != C) {
    throw InvalidArgument("batch_norm: channel count mismatch for " + to_string(s));
  }
  const double n = static_cast<double>(B * HW);
  const Tensor& xv = x.value();
  std::vector<double> mu(C), invstd(C);
  for (std::size_t c = 0; c < C; ++c) {
    if (training) {
      double m = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < HW; ++p) m += xv[(b * C + c) * HW + p];
      m /= n;
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < HW; ++p) {
          const double d = xv[(b * C + c) * HW + p] - m;
          v += d * d;
        }
      v /= n;
      mu[c] = m;
      invstd[c] = 1.0 / std::sqrt(v + eps);
      const double unbiased = n > 1.0 ? v * n / (n - 1.0) : v;
      stats.running_mean[c] = (1.0 - momentum) * stats.running_mean[c] + momentum * m;
      stats.running_var[c] = (1.0 - momentum) * stats.running_var[c] + momentum * unbiased;
    } else {
      mu[c] = stats.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(stats.running_var[c] + eps);
    }
  }
  Tensor xhat(s);
  Tensor out(s);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < HW; ++p) {
        const std::size_t i = (b * C + c) * HW + p;
        xhat[i] = (xv[i] - mu[c]) * invstd[c];
        out[i] = gamma.value()[c] * xhat[i] + beta.value()[c];
      }
  return make_op(std::move(out), {x, gamma, beta},
                 [xhat = std::move(xhat), invstd = std::move(invstd), B, C, HW, n,
                  training](Node& self) {
                   Tensor* gx = input_grad(self, 0);
                   Tensor* gg = input_grad(self, 1);
                   Tensor* gbeta = input_grad(self, 2);
                   const Tensor& gam = self.inputs[1]->value;
                   const Tensor& dy = self.grad;
                   for (std::size_t c = 0; c < C; ++c) {
                     double sum_dy = 0.0, sum_dy_xhat = 0.0;
                     for (std::size_t b = 0; b < B; ++b)
                       for (std::size_t p = 0; p < HW; ++p) {
                         const std::size_t i = (b * C + c) * HW + p;
                         sum_dy += dy[i];
                         sum_dy_xhat += dy[i] * xhat[i];
                       }
                     if (gg) (*gg)[c] += sum_dy_xhat;
                     if (gbeta) (*gbeta)[c] += sum_dy;
                     if (!gx) continue;
                     const double k = gam[c] * invstd[c];
                     for (std::size_t b = 0; b < B; ++b)
                       for (std::size_t p = 0; p < HW; ++p) {
                         const std::size_t i = (b * C + c) * HW + p;
                         (*gx)[i] += training
                                         ? k * (dy[i] - sum_dy / n - xhat[i] * sum_dy_xhat / n)
                                         : k * dy[i];
                       }
                   }
                 });
}

}  // namespace advaug::ad
