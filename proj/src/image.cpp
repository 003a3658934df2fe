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

#include "tvrf/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace tvrf {

namespace {

uint8_t quantize(float v) {
  if (v <= 0.f) return 0;
  if (v >= 1.f) return 255;
  return uint8_t(v * 255.f + 0.5f);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const char* what) {
  throw std::runtime_error(std::string(what) + ": " + path.string());
}

}  // namespace

Image Image::create(int width, int height, int channels) {
  Image img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data.assign(size_t(width) * height * channels, 0.f);
  return img;
}

Image Image::over_background(Vec3 background) const {
  if (channels == 3) return *this;
  Image out = Image::create(width, height, 3);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const float* p = pixel(r, c);
      const float a = p[3];
      out.set_rgb(r, c,
                  {p[0] * a + background.x * (1.f - a),
                   p[1] * a + background.y * (1.f - a),
                   p[2] * a + background.z * (1.f - a)});
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 4) {
    throw std::invalid_argument("write_png expects 3 or 4 channels");
  }
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail(path, "cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(path, "png writer init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "png write failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), 8,
               image.channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row(size_t(image.width) * image.channels);
  for (int r = 0; r < image.height; ++r) {
    const float* src = image.pixel(r, 0);
    for (size_t i = 0; i < row.size(); ++i) row[i] = quantize(src[i]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail(path, "cannot open png");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "png reader init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "png read failed");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int width = int(png_get_image_width(png, info));
  const int height = int(png_get_image_height(png, info));
  const int channels = int(png_get_channels(png, info));
  if (channels != 3 && channels != 4) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "unsupported png channel layout");
  }

  Image img = Image::create(width, height, channels);
  std::vector<uint8_t> row(size_t(width) * channels);
  for (int r = 0; r < height; ++r) {
    png_read_row(png, row.data(), nullptr);
    float* dst = img.pixel(r, 0);
    for (size_t i = 0; i < row.size(); ++i) dst[i] = float(row[i]) / 255.f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_raw(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  const uint32_t w = uint32_t(image.width);
  const uint32_t h = uint32_t(image.height);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  if (image.channels == 3) {
    out.write(reinterpret_cast<const char*>(image.data.data()),
              std::streamsize(image.data.size() * sizeof(float)));
  } else {
    for (int r = 0; r < image.height; ++r) {
      for (int c = 0; c < image.width; ++c) {
        out.write(reinterpret_cast<const char*>(image.pixel(r, c)), 3 * sizeof(float));
      }
    }
  }
  if (!out) fail(path, "raw image write failed");
}

Image read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open raw image");
  uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  Image img = Image::create(int(w), int(h), 3);
  in.read(reinterpret_cast<char*>(img.data.data()),
          std::streamsize(img.data.size() * sizeof(float)));
  if (!in) fail(path, "raw image truncated");
  return img;
}

}  // namespace tvrf
