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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tvrf/cloud.hpp"
#include "tvrf/image.hpp"
#include "tvrf/vec.hpp"

namespace tvrf {

/// Pinhole camera with an OpenGL-style camera-to-world pose (-Z forward,
/// +Y up), the convention of the blender-exported datasets.
struct Camera {
  int width = 0;
  int height = 0;
  double focal = 0.0;  // pixels
  Mat4d pose = Mat4d::identity();
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
  float t_near = 0.f;
  float t_far = 0.f;
  bool hits_aabb = false;
};

struct Sample {
  Vec3 pos;
  float t = 0.f;
  float delta = 0.f;
};

/// Boolean voxelization of coarse scene geometry over the scene box.
struct OccupancyGrid {
  int resolution = 0;
  Aabb aabb;
  std::vector<uint8_t> voxels;  // resolution^3, x fastest

  static OccupancyGrid create(int resolution, const Aabb& aabb);
  size_t index(int ix, int iy, int iz) const {
    return (size_t(iz) * resolution + iy) * resolution + ix;
  }
  bool occupied(Vec3 p) const;
  void set(int ix, int iy, int iz, bool v) { voxels[index(ix, iy, iz)] = v ? 1 : 0; }
  size_t count_occupied() const;
  /// 26-neighborhood dilation by one voxel.
  void dilate();
};

struct PixelCoord {
  int row = 0;
  int col = 0;
};

/// Ray through the pixel center, near/far clipped to the scene box.
Ray make_camera_ray(const Camera& camera, float row, float col, const Aabb& aabb);
std::vector<Ray> generate_rays(const Camera& camera, std::span<const PixelCoord> pixels,
                               const Aabb& aabb);

/// Uniform marching over [t_near, t_far] with the last interval truncated at
/// t_far; midpoint placement, or a counter-seeded uniform offset per sample
/// when jittering. Samples in unoccupied voxels are dropped. A null grid
/// keeps every sample.
int sample_ray(const Ray& ray, const OccupancyGrid* occupancy, float step, bool jitter,
               uint64_t ray_seed, std::vector<Sample>& out);

/// Emission-absorption accumulator (64-bit internally). Both the standalone
/// composite() and the render/training paths run through this so they agree
/// bit for bit.
struct Compositor {
  double transmittance = 1.0;
  Vec3d accum{};

  bool alive(float stop_transmittance) const {
    return !(stop_transmittance > 0.f) || transmittance >= double(stop_transmittance);
  }
  void add(float sigma, float delta, Vec3 color) {
    const double alpha = -std::expm1(-double(sigma) * double(delta));
    const double w = transmittance * alpha;
    accum.x += w * color.x;
    accum.y += w * color.y;
    accum.z += w * color.z;
    transmittance *= 1.0 - alpha;
  }
  Vec3 finish(Vec3 background) const {
    return {float(accum.x + transmittance * background.x),
            float(accum.y + transmittance * background.y),
            float(accum.z + transmittance * background.z)};
  }
};

struct CompositeResult {
  Vec3 color;
  float transmittance = 1.f;
};

/// stop_transmittance <= 0 disables early termination (exact mode).
CompositeResult composite(std::span<const float> sigmas, std::span<const Vec3> colors,
                          std::span<const float> deltas, Vec3 background,
                          float stop_transmittance = 1e-4f);

struct RenderOptions {
  float step = 0.f;  // <= 0: aabb diagonal / 512
  float stop_transmittance = 1e-4f;
  bool jitter = false;
  uint64_t seed = 0;
  const OccupancyGrid* occupancy = nullptr;
  bool bypass_decoder = false;  // density = raw feature, color = bypass_color
  Vec3 bypass_color{0.5f, 0.5f, 0.5f};
  int threads = 1;

  float effective_step(const Aabb& aabb) const {
    return step > 0.f ? step : aabb.diagonal() / 512.f;
  }
};

/// Scratch reused across pixels of one thread.
struct RenderContext {
  std::vector<Sample> samples;
  AggregateScratch agg;
  std::vector<float> f_color;
  std::vector<float> dir_enc;
  ColorMlp::Buffers mlp;

  static RenderContext create(const Model& model);
};

Vec3 render_pixel(const Model& model, const Ray& ray, const RenderOptions& options,
                  RenderContext& ctx);
Vec3 render_pixel(const Model& model, const Ray& ray, const RenderOptions& options);

/// Deterministic full-frame render (no jitter regardless of options).
Image render_image(const Model& model, const Camera& camera, const RenderOptions& options);

/// A batch of training rays with their samples flattened into one array.
struct RayBatch {
  struct Entry {
    Ray ray;
    Vec3 truth;
    Vec3 background;
    int sample_begin = 0;
    int sample_count = 0;
  };
  std::vector<Entry> rays;
  std::vector<Sample> samples;
};

}  // namespace tvrf
