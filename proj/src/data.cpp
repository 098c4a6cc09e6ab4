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

#include "advaug/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numbers>

#include "advaug/errors.hpp"
#include "advaug/png_io.hpp"
#include "advaug/rng.hpp"

namespace advaug {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kShapeClasses = 4;  // ellipse, rectangle, triangle, cross

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Rgb out{0, 0, 0};
  switch (static_cast<int>(hp)) {
    case 0: out = {c, x, 0}; break;
    case 1: out = {x, c, 0}; break;
    case 2: out = {0, c, x}; break;
    case 3: out = {0, x, c}; break;
    case 4: out = {x, 0, c}; break;
    default: out = {c, 0, x}; break;
  }
  const double m = v - c;
  return {out.r + m, out.g + m, out.b + m};
}

/// Low-frequency sinusoidal texture plus pixel noise, around `base`.
struct Texture {
  double fx1, fy1, ph1, fx2, fy2, ph2, amp;
  explicit Texture(Rng& rng, double amplitude)
      : fx1(rng.uniform(0.5, 3.0)), fy1(rng.uniform(0.5, 3.0)), ph1(rng.uniform(0.0, 6.28)),
        fx2(rng.uniform(0.5, 3.0)), fy2(rng.uniform(0.5, 3.0)), ph2(rng.uniform(0.0, 6.28)),
        amp(amplitude) {}
  double operator()(double u, double v) const {
    return amp * 0.5 * (std::sin(2 * std::numbers::pi * (fx1 * u + fy1 * v) + ph1) +
                        std::sin(2 * std::numbers::pi * (fx2 * u - fy2 * v) + ph2));
  }
};

bool inside_shape(std::size_t shape, double lx, double ly) {
  switch (shape) {
    case 0: return lx * lx + (ly / 0.65) * (ly / 0.65) <= 1.0;
    case 1: return std::abs(lx) <= 0.9 && std::abs(ly) <= 0.6;
    case 2: return ly >= -0.85 && ly <= 0.75 && std::abs(lx) <= (ly + 0.85) * 0.6;
    default:
      return (std::abs(lx) <= 1.0 && std::abs(ly) <= 0.28) ||
             (std::abs(lx) <= 0.28 && std::abs(ly) <= 1.0);
  }
}

void set_pixel(Tensor& img, std::size_t channels, std::size_t res, std::size_t i, std::size_t j,
               Rgb c) {
  const double rgb[3] = {c.r, c.g, c.b};
  if (channels == 1) {
    const double lum = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
    img[i * res + j] = 2.0 * std::clamp(lum, 0.0, 1.0) - 1.0;
    return;
  }
  for (std::size_t ch = 0; ch < channels; ++ch) {
    img[(ch * res + i) * res + j] = 2.0 * std::clamp(rgb[ch % 3], 0.0, 1.0) - 1.0;
  }
}

Sample synth_cls_sample(const DatasetSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, 0xC15, index));
  const std::size_t R = spec.resolution;
  const std::size_t shape = index % spec.num_classes;

  const Rgb bg = hsv_to_rgb(rng.uniform(), rng.uniform(0.2, 0.6), rng.uniform(0.15, 0.4));
  const Texture tex(rng, 0.08);
  const Rgb fg = hsv_to_rgb(rng.uniform(), rng.uniform(0.5, 1.0), rng.uniform(0.65, 1.0));
  const double cx = rng.uniform(0.32, 0.68) * static_cast<double>(R);
  const double cy = rng.uniform(0.32, 0.68) * static_cast<double>(R);
  const double size = rng.uniform(0.2, 0.32) * static_cast<double>(R);
  const double theta = rng.uniform(-0.35, 0.35);
  const double ct = std::cos(theta), st = std::sin(theta);

  Sample s;
  s.label = static_cast<int>(shape);
  s.image = Tensor({spec.channels, R, R});
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < R; ++j) {
      // 2x2 supersampled coverage
      double cover = 0.0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          const double px = static_cast<double>(j) + 0.25 + 0.5 * sx - cx;
          const double py = static_cast<double>(i) + 0.25 + 0.5 * sy - cy;
          const double lx = (ct * px + st * py) / size;
          const double ly = (-st * px + ct * py) / size;
          cover += inside_shape(shape, lx, ly) ? 0.25 : 0.0;
        }
      const double t = tex(static_cast<double>(j) / R, static_cast<double>(i) / R) +
                       0.03 * rng.normal();
      const Rgb c{bg.r + t + cover * (fg.r - bg.r), bg.g + t + cover * (fg.g - bg.g),
                  bg.b + t + cover * (fg.b - bg.b)};
      set_pixel(s.image, spec.channels, R, i, j, c);
    }
  }
  return s;
}

Sample synth_seg_sample(const DatasetSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, 0x5E6, index));
  const std::size_t R = spec.resolution;
  const double Rd = static_cast<double>(R);
  const std::size_t K = spec.num_classes;

  const double bg_level = rng.uniform(0.08, 0.2);
  const Texture tex(rng, 0.05);
  const double tint = rng.uniform(0.0, 1.0);
  Sample s;
  s.mask.assign(R * R, 0);
  std::vector<double> level(R * R, bg_level);
  for (std::size_t k = 1; k <= K; ++k) {
    const double cx = rng.uniform(0.22, 0.78) * Rd;
    const double cy = rng.uniform(0.22, 0.78) * Rd;
    const double rx = rng.uniform(0.14, 0.2) * Rd;
    const double ry = rng.uniform(0.14, 0.2) * Rd;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double intensity =
        0.3 + 0.6 * static_cast<double>(k) / static_cast<double>(K) + rng.uniform(-0.04, 0.04);
    // Blob boundary wobble makes the structures less regular than ellipses.
    const double wob_amp = rng.uniform(0.0, 0.15), wob_freq = std::floor(rng.uniform(2.0, 5.0));
    const double wob_phase = rng.uniform(0.0, 6.28);
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t j = 0; j < R; ++j) {
        const double px = static_cast<double>(j) + 0.5 - cx;
        const double py = static_cast<double>(i) + 0.5 - cy;
        const double lx = (ct * px + st * py) / rx;
        const double ly = (-st * px + ct * py) / ry;
        const double ang = std::atan2(ly, lx);
        const double radius = 1.0 + wob_amp * std::sin(wob_freq * ang + wob_phase);
        if (lx * lx + ly * ly <= radius * radius) {
          s.mask[i * R + j] = static_cast<int>(k);
          level[i * R + j] = intensity;
        }
      }
    }
  }
  s.image = Tensor({spec.channels, R, R});
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < R; ++j) {
      const double v = level[i * R + j] + tex(static_cast<double>(j) / Rd, static_cast<double>(i) / Rd) +
                       0.03 * rng.normal();
      const Rgb c = hsv_to_rgb(tint, 0.25, std::clamp(v, 0.0, 1.0));
      set_pixel(s.image, spec.channels, R, i, j, c);
    }
  }
  return s;
}

/// Bilinear resize (align-corners) of an interleaved 8-bit image to
/// channels x res x res in [-1, 1].
Tensor to_tensor(const PngImage& png, std::size_t channels, std::size_t res) {
  Tensor out({channels, res, res});
  auto src = [&](std::size_t y, std::size_t x, std::size_t c) {
    const std::size_t base = (y * png.width + x) * png.channels;
    if (png.channels == 1) return static_cast<double>(png.pixels[base]);
    if (channels == 1) {
      return 0.299 * png.pixels[base] + 0.587 * png.pixels[base + 1] + 0.114 * png.pixels[base + 2];
    }
    return static_cast<double>(png.pixels[base + c % 3]);
  };
  auto coord = [](std::size_t k, std::size_t out_n, std::size_t in_n) {
    return out_n <= 1 ? 0.0 : static_cast<double>(k) * static_cast<double>(in_n - 1) /
                                  static_cast<double>(out_n - 1);
  };
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < res; ++i) {
      const double y = coord(i, res, png.height);
      const auto y0 = static_cast<std::size_t>(std::floor(y));
      const std::size_t y1 = std::min(y0 + 1, png.height - 1);
      const double wy = y - static_cast<double>(y0);
      for (std::size_t j = 0; j < res; ++j) {
        const double x = coord(j, res, png.width);
        const auto x0 = static_cast<std::size_t>(std::floor(x));
        const std::size_t x1 = std::min(x0 + 1, png.width - 1);
        const double wx = x - static_cast<double>(x0);
        const double v = (1 - wy) * ((1 - wx) * src(y0, x0, c) + wx * src(y0, x1, c)) +
                         wy * ((1 - wx) * src(y1, x0, c) + wx * src(y1, x1, c));
        out[(c * res + i) * res + j] = v / 127.5 - 1.0;
      }
    }
  }
  return out;
}

std::vector<int> to_label_map(const PngImage& png, std::size_t res, std::size_t max_label,
                              const fs::path& path) {
  std::vector<int> out(res * res);
  for (std::size_t i = 0; i < res; ++i) {
    const std::size_t y = res <= 1 ? 0 : (i * (png.height - 1) * 2 + (res - 1)) / (2 * (res - 1));
    for (std::size_t j = 0; j < res; ++j) {
      const std::size_t x = res <= 1 ? 0 : (j * (png.width - 1) * 2 + (res - 1)) / (2 * (res - 1));
      const int v = png.pixels[(y * png.width + x) * png.channels];
      if (static_cast<std::size_t>(v) > max_label) {
        throw InvalidArgument("mask " + path.string() + " has label " + std::to_string(v) +
                              " above " + std::to_string(max_label));
      }
      out[i * res + j] = v;
    }
  }
  return out;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && e.path().extension() == ".png")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

SampleSet subset(const SampleSet& all, const std::vector<std::size_t>& idx) {
  SampleSet s{all.task, all.channels, all.resolution, all.num_classes, {}};
  s.samples.reserve(idx.size());
  for (std::size_t i : idx) s.samples.push_back(all.samples[i]);
  return s;
}

}  // namespace

std::string_view dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::synthetic_cls: return "synthetic-cls";
    case DatasetKind::synthetic_seg: return "synthetic-seg";
    case DatasetKind::folder: return "folder";
  }
  throw InternalError("unknown dataset kind");
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (DatasetKind k : {DatasetKind::synthetic_cls, DatasetKind::synthetic_seg, DatasetKind::folder}) {
    if (dataset_kind_name(k) == name) return k;
  }
  throw InvalidArgument("unknown dataset kind '" + std::string(name) + "'");
}

Task DatasetSpec::task() const {
  switch (kind) {
    case DatasetKind::synthetic_cls: return Task::classification;
    case DatasetKind::synthetic_seg: return Task::segmentation;
    case DatasetKind::folder: return folder_task;
  }
  throw InternalError("unknown dataset kind");
}

void DatasetSpec::validate() const {
  if (resolution < 16) {
    throw InvalidArgument("dataset: resolution " + std::to_string(resolution) + " below 16");
  }
  if (channels != 1 && channels != 3) throw InvalidArgument("dataset: channels must be 1 or 3");
  if (num_classes == 0) throw InvalidArgument("dataset: num_classes must be positive");
  if (kind == DatasetKind::synthetic_cls && (num_classes < 2 || num_classes > kShapeClasses)) {
    throw InvalidArgument("dataset: synthetic-cls supports 2 to 4 shape classes");
  }
  if (kind == DatasetKind::folder && path.empty()) throw InvalidArgument("dataset: folder path empty");
  if (split.size() != 2) throw InvalidArgument("dataset: split must be [train, test]");
  double total = 0.0;
  for (double f : split) {
    if (!(f >= 0.0)) throw InvalidArgument("dataset: negative split fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("dataset: split fractions must sum to 1");
}

Dataset::Dataset(DatasetSpec spec, SampleSet all) : spec_(std::move(spec)) {
  const std::size_t n = all.size();
  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec_.split[0]));
  n_train = std::min(n_train, n);
  Rng rng(derive_seed(spec_.seed, 0x5B117));
  const std::vector<std::size_t> perm = rng.permutation(n);
  train_idx_.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  test_idx_.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train_idx_.begin(), train_idx_.end());
  std::sort(test_idx_.begin(), test_idx_.end());
  train_ = std::make_shared<const SampleSet>(subset(all, train_idx_));
  test_ = std::make_shared<const SampleSet>(subset(all, test_idx_));
  all_ = std::make_shared<const SampleSet>(std::move(all));
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Sample& s : all_->samples) {
    for (double v : s.image.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      unsigned char le[8];
      for (int b = 0; b < 8; ++b) le[b] = static_cast<unsigned char>(bits >> (8 * b));
      h = fnv1a(h, le, 8);
    }
    const std::int32_t label = s.label;
    h = fnv1a(h, &label, sizeof label);
    for (int m : s.mask) {
      const std::int32_t v = m;
      h = fnv1a(h, &v, sizeof v);
    }
  }
  return h;
}

Dataset make_synthetic_cls(const DatasetSpec& spec) {
  DatasetSpec s = spec;
  s.kind = DatasetKind::synthetic_cls;
  s.validate();
  SampleSet all{Task::classification, s.channels, s.resolution, s.num_classes, {}};
  all.samples.reserve(s.size);
  for (std::size_t i = 0; i < s.size; ++i) all.samples.push_back(synth_cls_sample(s, i));
  return Dataset(s, std::move(all));
}

Dataset make_synthetic_seg(const DatasetSpec& spec) {
  DatasetSpec s = spec;
  s.kind = DatasetKind::synthetic_seg;
  s.validate();
  SampleSet all{Task::segmentation, s.channels, s.resolution, s.num_classes, {}};
  all.samples.reserve(s.size);
  for (std::size_t i = 0; i < s.size; ++i) all.samples.push_back(synth_seg_sample(s, i));
  return Dataset(s, std::move(all));
}

Dataset ingest_folder(const fs::path& path, const DatasetSpec& spec) {
  DatasetSpec s = spec;
  s.kind = DatasetKind::folder;
  s.path = path.string();
  s.validate();
  if (!fs::is_directory(path)) throw InvalidArgument("dataset folder " + path.string() + " not found");
  SampleSet all{s.folder_task, s.channels, s.resolution, s.num_classes, {}};

  if (s.folder_task == Task::classification) {
    const auto classes = sorted_entries(path, true);
    if (classes.size() != s.num_classes) {
      throw InvalidArgument("dataset folder " + path.string() + " has " +
                            std::to_string(classes.size()) + " class directories, expected " +
                            std::to_string(s.num_classes));
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::size_t loaded = 0;
      for (const fs::path& file : sorted_entries(classes[c], false)) {
        try {
          const PngImage png = read_png(file);
          all.samples.push_back({to_tensor(png, s.channels, s.resolution), static_cast<int>(c), {}});
          ++loaded;
        } catch (const InvalidArgument& e) {
          std::cerr << "warning: skipping " << e.what() << '\n';
        }
      }
      if (loaded == 0) throw InvalidArgument("class directory " + classes[c].string() + " is empty");
    }
  } else {
    const fs::path images = path / "images";
    const fs::path masks = path / "masks";
    if (!fs::is_directory(images) || !fs::is_directory(masks)) {
      throw InvalidArgument("segmentation folder needs images/ and masks/ under " + path.string());
    }
    for (const fs::path& file : sorted_entries(images, false)) {
      const fs::path mask_path = masks / file.filename();
      if (!fs::exists(mask_path)) {
        throw InvalidArgument("missing mask for image " + file.string() + " (expected " +
                              mask_path.string() + ")");
      }
      PngImage img;
      try {
        img = read_png(file);
      } catch (const InvalidArgument& e) {
        std::cerr << "warning: skipping " << e.what() << '\n';
        continue;
      }
      const PngImage mask = read_png(mask_path);
      all.samples.push_back({to_tensor(img, s.channels, s.resolution), -1,
                             to_label_map(mask, s.resolution, s.num_classes, mask_path)});
    }
    if (all.samples.empty()) throw InvalidArgument("no readable images under " + images.string());
  }
  return Dataset(s, std::move(all));
}

Dataset make_dataset(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::synthetic_cls: return make_synthetic_cls(spec);
    case DatasetKind::synthetic_seg: return make_synthetic_seg(spec);
    case DatasetKind::folder: return ingest_folder(spec.path, spec);
  }
  throw InternalError("unknown dataset kind");
}

double normalize_intensity(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

std::uint8_t denormalize_intensity(double v) {
  const double p = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(p);
}

Batch make_batch(const SampleSet& set, const std::vector<std::size_t>& indices) {
  const std::size_t C = set.channels, R = set.resolution, px = C * R * R;
  Batch b;
  b.images = Tensor({indices.size(), C, R, R});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= set.size()) {
      throw InvalidArgument("make_batch: index " + std::to_string(indices[k]) + " outside a set of " +
                            std::to_string(set.size()));
    }
    const Sample& s = set.samples[indices[k]];
    std::copy_n(s.image.ptr(), px, b.images.ptr() + k * px);
    if (set.task == Task::classification) {
      b.labels.push_back(s.label);
    } else {
      b.labels.insert(b.labels.end(), s.mask.begin(), s.mask.end());
    }
  }
  return b;
}

}  // namespace advaug
