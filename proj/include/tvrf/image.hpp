// Copyright 2026 The tvrf Authors
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
#include <string>
#include <vector>

#include "tvrf/vec.hpp"

namespace tvrf {

/// Float image, values nominally in [0,1]; 3 (RGB) or 4 (RGBA) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  static Image create(int width, int height, int channels = 3);

  float* pixel(int row, int col) {
    return data.data() + (size_t(row) * width + col) * channels;
  }
  const float* pixel(int row, int col) const {
    return data.data() + (size_t(row) * width + col) * channels;
  }
  Vec3 rgb(int row, int col) const {
    const float* p = pixel(row, col);
    return {p[0], p[1], p[2]};
  }
  void set_rgb(int row, int col, Vec3 c) {
    float* p = pixel(row, col);
    p[0] = c.x;
    p[1] = c.y;
    p[2] = c.z;
  }
  float alpha(int row, int col) const {
    return channels == 4 ? pixel(row, col)[3] : 1.f;
  }

  /// RGB composited over `background` using straight alpha (identity for
  /// 3-channel images).
  Image over_background(Vec3 background) const;
};

/// 8-bit PNG. Writing quantizes with round-half-up; reading expands any PNG
/// layout to the file's channel count (3 or 4).
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Raw float dump for exact comparisons: u32 width, u32 height
/// (little-endian), then row-major float32 RGB.
void write_raw(const std::filesystem::path& path, const Image& image);
Image read_raw(const std::filesystem::path& path);

}  // namespace tvrf
