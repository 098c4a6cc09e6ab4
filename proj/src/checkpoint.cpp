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

#include "advaug/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "advaug/errors.hpp"

namespace advaug {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'A', 'U', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "archive IO assumes little-endian");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is, const std::filesystem::path& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw InvalidArgument("checkpoint " + path.string() + " is truncated");
  }
  return v;
}

}  // namespace

Archive::Entry& Archive::slot(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return entries_[it->second];
  index_[name] = entries_.size();
  entries_.push_back({name, Precision::f64, Tensor()});
  return entries_.back();
}

const Archive::Entry& Archive::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("checkpoint has no entry '" + name + "'");
  return entries_[it->second];
}

void Archive::put(const std::string& name, const Tensor& t, Precision p) {
  Entry& e = slot(name);
  e.precision = p;
  e.payload = t;
}

void Archive::put_text(const std::string& name, std::string text) { slot(name).payload = std::move(text); }

const Tensor& Archive::tensor(const std::string& name) const {
  const Entry& e = find(name);
  if (!std::holds_alternative<Tensor>(e.payload)) {
    throw InvalidArgument("checkpoint entry '" + name + "' is not an array");
  }
  return std::get<Tensor>(e.payload);
}

const std::string& Archive::text(const std::string& name) const {
  const Entry& e = find(name);
  if (!std::holds_alternative<std::string>(e.payload)) {
    throw InvalidArgument("checkpoint entry '" + name + "' is not text");
  }
  return std::get<std::string>(e.payload);
}

bool Archive::is_text(const std::string& name) const {
  return std::holds_alternative<std::string>(find(name).payload);
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.name);
  return out;
}

void Archive::put_parameters(const nn::Parameters& p, Precision precision) {
  for (const auto& param : p.params) put(param.name, param.var.value(), precision);
  for (const auto& buf : p.buffers) put(buf.name, *buf.tensor, precision);
}

void Archive::load_parameters(const nn::Parameters& p) const {
  auto copy_into = [this](const std::string& name, Tensor& dst) {
    const Tensor& src = tensor(name);
    if (src.shape() != dst.shape()) {
      throw InvalidArgument("checkpoint entry '" + name + "' has shape " + to_string(src.shape()) +
                            ", network expects " + to_string(dst.shape()));
    }
    dst = src;
  };
  for (const auto& param : p.params) {
    ad::Var v = param.var;
    copy_into(param.name, v.mutable_value());
  }
  for (const auto& buf : p.buffers) copy_into(buf.name, *buf.tensor);
}

void Archive::save(const std::filesystem::path& path) const {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidArgument("cannot write checkpoint " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint64_t>(os, entries_.size());
    for (const Entry& e : entries_) {
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      if (const auto* t = std::get_if<Tensor>(&e.payload)) {
        write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(e.precision));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t d : t->shape()) write_pod<std::uint64_t>(os, d);
        if (e.precision == Precision::f64) {
          os.write(reinterpret_cast<const char*>(t->ptr()),
                   static_cast<std::streamsize>(t->size() * sizeof(double)));
        } else {
          for (double v : t->values()) write_pod<float>(os, static_cast<float>(v));
        }
      } else {
        const auto& s = std::get<std::string>(e.payload);
        write_pod<std::uint8_t>(os, 2);
        write_pod<std::uint64_t>(os, s.size());
        os.write(s.data(), static_cast<std::streamsize>(s.size()));
      }
    }
    if (!os) throw InvalidArgument("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw InvalidArgument(path.string() + " is not a checkpoint archive");
  }
  if (read_pod<std::uint32_t>(is, path) != kVersion) {
    throw InvalidArgument("unsupported checkpoint version in " + path.string());
  }
  Archive a;
  const auto count = read_pod<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw InvalidArgument("checkpoint " + path.string() + " is truncated");
    const auto type = read_pod<std::uint8_t>(is, path);
    if (type == 2) {
      const auto n = read_pod<std::uint64_t>(is, path);
      std::string s(n, '\0');
      if (!is.read(s.data(), static_cast<std::streamsize>(n))) {
        throw InvalidArgument("checkpoint " + path.string() + " is truncated");
      }
      a.put_text(name, std::move(s));
      continue;
    }
    if (type > 1) throw InvalidArgument("checkpoint " + path.string() + " has unknown entry type");
    const auto rank = read_pod<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = read_pod<std::uint64_t>(is, path);
    Tensor t(shape);
    if (type == 0) {
      if (!is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
        throw InvalidArgument("checkpoint " + path.string() + " is truncated");
      }
    } else {
      for (double& v : t.values()) v = read_pod<float>(is, path);
    }
    a.put(name, t, static_cast<Precision>(type));
  }
  return a;
}

}  // namespace advaug
