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

#include "tvrf/render.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "tvrf/rng.hpp"

namespace tvrf {

OccupancyGrid OccupancyGrid::create(int resolution, const Aabb& aabb) {
  OccupancyGrid g;
  g.resolution = resolution;
  g.aabb = aabb;
  g.voxels.assign(size_t(resolution) * resolution * resolution, 0);
  return g;
}

bool OccupancyGrid::occupied(Vec3 p) const {
  const Vec3 ext = aabb.extent();
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    int i = int(std::floor((p[a] - aabb.min[a]) / ext[a] * float(resolution)));
    idx[a] = std::clamp(i, 0, resolution - 1);
  }
  return voxels[index(idx[0], idx[1], idx[2])] != 0;
}

size_t OccupancyGrid::count_occupied() const {
  size_t n = 0;
  for (uint8_t v : voxels) n += v;
  return n;
}

void OccupancyGrid::dilate() {
  std::vector<uint8_t> out = voxels;
  const int res = resolution;
  for (int z = 0; z < res; ++z) {
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        if (voxels[index(x, y, z)]) continue;
        bool near = false;
        for (int dz = -1; dz <= 1 && !near; ++dz) {
          for (int dy = -1; dy <= 1 && !near; ++dy) {
            for (int dx = -1; dx <= 1 && !near; ++dx) {
              const int nx = x + dx, ny = y + dy, nz = z + dz;
              if (nx < 0 || ny < 0 || nz < 0 || nx >= res || ny >= res || nz >= res) continue;
              near = voxels[index(nx, ny, nz)] != 0;
            }
          }
        }
        if (near) out[index(x, y, z)] = 1;
      }
    }
  }
  voxels = std::move(out);
}

Ray make_camera_ray(const Camera& camera, float row, float col, const Aabb& aabb) {
  const Vec3d dir_cam{(double(col) - 0.5 * camera.width) / camera.focal,
                      -(double(row) - 0.5 * camera.height) / camera.focal, -1.0};
  const Vec3d dir_world = normalized(camera.pose.rotate(dir_cam));
  Ray ray;
  ray.origin = to_f(camera.pose.translation());
  ray.dir = to_f(dir_world);
  ray.hits_aabb = intersect_aabb(ray.origin, ray.dir, aabb, ray.t_near, ray.t_far);
  return ray;
}

std::vector<Ray> generate_rays(const Camera& camera, std::span<const PixelCoord> pixels,
                               const Aabb& aabb) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const PixelCoord& p : pixels) {
    rays.push_back(make_camera_ray(camera, float(p.row) + 0.5f, float(p.col) + 0.5f, aabb));
  }
  return rays;
}

int sample_ray(const Ray& ray, const OccupancyGrid* occupancy, float step, bool jitter,
               uint64_t ray_seed, std::vector<Sample>& out) {
  out.clear();
  if (!ray.hits_aabb || step <= 0.f) return 0;
  const float span = ray.t_far - ray.t_near;
  if (span <= 0.f) return 0;

  for (uint64_t k = 0;; ++k) {
    const float start = ray.t_near + float(k) * step;
    if (start >= ray.t_far) break;
    const float end = std::min(start + step, ray.t_far);
    const float delta = end - start;
    if (delta <= 1e-4f * step) continue;  // roundoff sliver at the far plane
    const float offset = jitter ? hash_unit_float(hash_combine(ray_seed, k)) : 0.5f;
    const float t = start + offset * delta;
    const Vec3 pos = ray.origin + ray.dir * t;
    if (occupancy && !occupancy->occupied(pos)) continue;
    out.push_back({pos, t, delta});
  }
  return int(out.size());
}

CompositeResult composite(std::span<const float> sigmas, std::span<const Vec3> colors,
                          std::span<const float> deltas, Vec3 background,
                          float stop_transmittance) {
  Compositor comp;
  for (size_t i = 0; i < sigmas.size(); ++i) {
    if (!comp.alive(stop_transmittance)) break;
    comp.add(sigmas[i], deltas[i], colors[i]);
  }
  return {comp.finish(background), float(comp.transmittance)};
}

RenderContext RenderContext::create(const Model& model) {
  RenderContext ctx;
  ctx.agg = make_scratch(model);
  ctx.f_color.resize(size_t(model.feature_dim()));
  ctx.dir_enc.resize(size_t(direction_encoding_dim(model.decoder.mlp.n_freq)));
  ctx.mlp.resize(model.decoder.mlp);
  return ctx;
}

Vec3 render_pixel(const Model& model, const Ray& ray, const RenderOptions& options,
                  RenderContext& ctx) {
  if (!ray.hits_aabb) return model.background;
  const float step = options.effective_step(model.aabb);
  sample_ray(ray, options.occupancy, step, options.jitter, options.seed, ctx.samples);
  if (ctx.samples.empty()) return model.background;

  encode_direction(ray.dir, model.decoder.mlp.n_freq, ctx.dir_enc.data());
  Compositor comp;
  for (const Sample& s : ctx.samples) {
    if (!comp.alive(options.stop_transmittance)) break;
    float f_sigma = 0.f;
    const int n_cover = aggregate_multiscale(model, s.pos, f_sigma, ctx.f_color.data(), ctx.agg);
    if (n_cover == 0) continue;  // outside every tensor: empty space
    float sigma;
    Vec3 color;
    if (options.bypass_decoder) {
      sigma = std::max(f_sigma, 0.f);
      color = options.bypass_color;
    } else {
      sigma = model.decoder.activation(f_sigma);
      color = model.decoder.mlp.forward(ctx.f_color.data(), ctx.dir_enc.data(), ctx.mlp);
    }
    comp.add(sigma, s.delta, color);
  }
  return comp.finish(model.background);
}

Vec3 render_pixel(const Model& model, const Ray& ray, const RenderOptions& options) {
  RenderContext ctx = RenderContext::create(model);
  return render_pixel(model, ray, options, ctx);
}

Image render_image(const Model& model, const Camera& camera, const RenderOptions& options) {
  Image img = Image::create(camera.width, camera.height, 3);
  RenderOptions opts = options;
  opts.jitter = false;

  auto render_rows = [&](int row0, int row1) {
    RenderContext ctx = RenderContext::create(model);
    for (int r = row0; r < row1; ++r) {
      for (int c = 0; c < camera.width; ++c) {
        const Ray ray = make_camera_ray(camera, float(r) + 0.5f, float(c) + 0.5f, model.aabb);
        img.set_rgb(r, c, render_pixel(model, ray, opts, ctx));
      }
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1 || camera.height < 2 * threads) {
    render_rows(0, camera.height);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (camera.height + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int r0 = t * chunk;
      const int r1 = std::min(camera.height, r0 + chunk);
      if (r0 >= r1) break;
      pool.emplace_back(render_rows, r0, r1);
    }
    for (auto& th : pool) th.join();
  }
  return img;
}

}  // namespace tvrf
