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

#include "tvrf/image.hpp"
#include "tvrf/render.hpp"
#include "tvrf/vec.hpp"

namespace tvrf {

struct SceneView {
  Camera camera;
  Image image;  // RGBA when loaded from alpha PNGs
  std::string name;
};

struct SceneDataset {
  std::vector<SceneView> views;
  std::string split = "train";
  Aabb aabb;
  Vec3 background{1.f, 1.f, 1.f};

  int width() const { return views.empty() ? 0 : views.front().image.width; }
  int height() const { return views.empty() ? 0 : views.front().image.height; }
  /// View `v`'s pixel composited over `bg` (straight alpha).
  Vec3 truth_pixel(int v, int row, int col, Vec3 bg) const;
};

/// Reads `transforms_<split>.json` in the blender convention:
/// camera_angle_x plus per-frame file_path and 4x4 camera-to-world matrices.
/// Extra keys are ignored; missing ones raise a descriptive error.
SceneDataset load_nerf_synthetic(const std::filesystem::path& dir, const std::string& split,
                                 const Aabb& aabb = {}, Vec3 background = {1.f, 1.f, 1.f});

/// Writes the same layout (PNG frames under <split>/, transforms json).
void save_nerf_synthetic(const SceneDataset& dataset, const std::filesystem::path& dir);

struct Primitive {
  enum class Kind { kSphere, kBox };
  Kind kind = Kind::kSphere;
  Vec3 center;
  Vec3 half_size;      // boxes
  float radius = 0.f;  // spheres
  float sigma = 0.f;   // constant density inside
  Vec3 albedo{0.5f, 0.5f, 0.5f};

  bool contains(Vec3 p) const;
};

/// Analytic constant-density scene used as the independent ground-truth
/// generator. Overlapping primitives sum densities and blend albedo by
/// density weight.
struct ProceduralScene {
  std::vector<Primitive> primitives;
  Aabb aabb;
  Vec3 background{1.f, 1.f, 1.f};

  void field(Vec3 p, float& sigma, Vec3& albedo) const;
  /// Two boxes and a sphere; the stock test subject.
  static ProceduralScene sample_scene();
  static ProceduralScene from_json_file(const std::filesystem::path& path);
};

/// Brute-force ray march of the analytic field: same midpoint discretization
/// and emission-absorption sum as the renderer, evaluated in 64-bit with no
/// early termination. Returns RGB over the scene background.
Image oracle_render(const ProceduralScene& scene, const Camera& camera, double step);

/// Cameras on a deterministic spiral looking at the origin; images rendered
/// by oracle_render (RGBA, alpha from final transmittance).
SceneDataset generate_dataset(const ProceduralScene& scene, int n_views, int resolution,
                              double radius, uint64_t seed);

Camera look_at_camera(Vec3d position, Vec3d target, int width, int height, double focal);

struct CoarseConfig {
  int resolution = 100;
  int steps = 1000;
  int batch_rays = 4096;
  float lr = 0.1f;
  float density_shift = -4.f;
  float alpha_threshold = 1e-3f;
  float step_scale = 0.5f;  // ray-march step as a fraction of the voxel edge
  uint64_t seed = 1;
};

struct CoarseResult {
  OccupancyGrid grid;
  std::vector<Vec3> points;  // occupied voxel centers
};

/// Optimizes a dense low-resolution RGB+density grid against the training
/// views with the shared renderer and L2 loss, then thresholds per-voxel
/// alpha and dilates by one voxel. Throws if nothing ends up occupied.
CoarseResult coarse_occupancy(const SceneDataset& dataset, const CoarseConfig& config);

/// Text "x y z" per line, or a raw grid file ("OCCG" magic, u32 resolution,
/// 6 x f32 box, resolution^3 bytes) whose occupied voxel centers are used.
std::vector<Vec3> load_geometry_points(const std::filesystem::path& path);
void save_occupancy_grid(const OccupancyGrid& grid, const std::filesystem::path& path);
OccupancyGrid load_occupancy_grid(const std::filesystem::path& path);

/// 10*log10(1/MSE) over RGB, capped at 100 dB.
double psnr(const Image& a, const Image& b);
/// Gaussian-windowed (11x11, sigma 1.5) SSIM, per channel then averaged.
double ssim(const Image& a, const Image& b);

}  // namespace tvrf
