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

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "advaug/nn.hpp"
#include "advaug/tensor.hpp"

namespace advaug {

enum class Precision : std::uint8_t { f64 = 0, f32 = 1 };

/// Single-file archive of named arrays and text entries.
///
/// Layout (little-endian): magic "ADVAUGCK", u32 version, u64 entry count,
/// then per entry: u32 name length, name bytes, u8 type (0 = f64 array,
/// 1 = f32 array, 2 = text); arrays carry u32 rank, u64 extents and the
/// values; text carries u64 length and bytes. Entries keep insertion order,
/// so equal contents give equal files.
class Archive {
 public:
  void put(const std::string& name, const Tensor& t, Precision p = Precision::f64);
  void put_text(const std::string& name, std::string text);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& tensor(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  bool is_text(const std::string& name) const;
  std::vector<std::string> names() const;

  /// Stores every parameter and buffer under its registered name.
  void put_parameters(const nn::Parameters& p, Precision precision = Precision::f64);
  /// Copies stored values into the registered parameters and buffers; every
  /// name must exist with a matching shape.
  void load_parameters(const nn::Parameters& p) const;

  /// Writes to a temporary sibling and renames, so a crash never leaves a
  /// truncated archive at `path`.
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  struct Entry {
    std::string name;
    Precision precision = Precision::f64;
    std::variant<Tensor, std::string> payload;
  };
  Entry& slot(const std::string& name);
  const Entry& find(const std::string& name) const;

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace advaug
