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

#include <cstdint>
#include <filesystem>
#include <vector>

namespace advaug {

/// 8-bit image with interleaved channels (1 = gray, 3 = RGB).
struct PngImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes any PNG to 8-bit gray (if the file has no color) or RGB; alpha
/// is composited away. Throws InvalidArgument if the file cannot be decoded.
PngImage read_png(const std::filesystem::path& path);

/// Writes gray or RGB 8-bit PNG. No timestamp chunk, so equal pixels give
/// equal bytes.
void write_png(const std::filesystem::path& path, const PngImage& image);

}  // namespace advaug
