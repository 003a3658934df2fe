// Copyright 2026 The tvrf Authors
#include <cstdlib>
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

// Coarse DVGO-style geometry pass: a dense low-res density+RGB voxel grid is
// fit to the training views with the shared renderer and L2 loss, then the
// per-voxel alpha is thresholded into an occupancy grid.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "tvrf/decode.hpp"
#include "tvrf/factor_grid.hpp"
#include "tvrf/kernels.hpp"
#include "tvrf/render.hpp"
#include "tvrf/rng.hpp"
#include "tvrf/scenes.hpp"

namespace tvrf {

namespace {

struct DenseGrid {
  int res = 0;
  Aabb aabb;
  std::vector<float> density;  // res^3, node-centered at voxel centers
  std::vector<float> rgb;      // res^3 * 3

  size_t node(int x, int y, int z) const { return (size_t(z) * res + y) * res + x; }

  struct Lookup {
    AxisLerp lx, ly, lz;
  };

  Lookup locate(Vec3 p) const {
    const Vec3 ext = aabb.extent();
    Lookup lk;
    const float gx = (p.x - aabb.min.x) / ext.x * float(res) - 0.5f;
    const float gy = (p.y - aabb.min.y) / ext.y * float(res) - 0.5f;
    const float gz = (p.z - aabb.min.z) / ext.z * float(res) - 0.5f;
    lk.lx = axis_lerp(res, gx);
    lk.ly = axis_lerp(res, gy);
    lk.lz = axis_lerp(res, gz);
    return lk;
  }

  template <typename Fn>
  void for_corners(const Lookup& lk, Fn&& fn) const {
    for (int dz = 0; dz < 2; ++dz) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const float w = (dx ? lk.lx.t : 1.f - lk.lx.t) * (dy ? lk.ly.t : 1.f - lk.ly.t) *
                          (dz ? lk.lz.t : 1.f - lk.lz.t);
          fn(node(lk.lx.i0 + dx, lk.ly.i0 + dy, lk.lz.i0 + dz), w);
        }
      }
    }
  }

  float sample_density(const Lookup& lk) const {
    float v = 0.f;
    for_corners(lk, [&](size_t n, float w) { v += w * density[n]; });
    return v;
  }

  Vec3 sample_rgb(const Lookup& lk) const {
    Vec3 v{};
    for_corners(lk, [&](size_t n, float w) {
      v.x += w * rgb[3 * n + 0];
      v.y += w * rgb[3 * n + 1];
      v.z += w * rgb[3 * n + 2];
    });
    return v;
  }
};

struct SampleRec {
  DenseGrid::Lookup lk;
  float delta;
  float raw_density;
  float sigma;
  float alpha;
  float transmittance;  // before this sample
  Vec3 pre_rgb;
  Vec3 color;
};

struct Adam {
  std::vector<float> m, v;
  explicit Adam(size_t n) : m(n, 0.f), v(n, 0.f) {}
};

}  // namespace

CoarseResult coarse_occupancy(const SceneDataset& dataset, const CoarseConfig& cfg) {
  if (dataset.views.empty()) throw std::invalid_argument("coarse pass needs training views");
  if (cfg.resolution < 4) throw std::invalid_argument("coarse resolution too small");

  DenseGrid grid;
  grid.res = cfg.resolution;
  grid.aabb = dataset.aabb;
  const size_t n_nodes = size_t(grid.res) * grid.res * grid.res;
  grid.density.assign(n_nodes, 0.f);
  grid.rgb.assign(n_nodes * 3, 0.f);

  const DensityActivation act{cfg.density_shift};
  const Vec3 ext = grid.aabb.extent();
  const float voxel_edge = (ext.x + ext.y + ext.z) / (3.f * float(grid.res));
  const float march = cfg.step_scale * voxel_edge;

  Adam opt_density(n_nodes);
  Adam opt_rgb(n_nodes * 3);
  // The stochastic fit keeps wandering near the alpha threshold; the readout
  // below uses an exponential moving average of the density over the tail of
  // the run instead of the last iterate.
  std::vector<float> density_ema;
  const int ema_start = (7 * cfg.steps) / 10;
  std::vector<float> grad_density(n_nodes, 0.f);
  std::vector<float> grad_rgb(n_nodes * 3, 0.f);

  std::mt19937 rng(uint32_t(cfg.seed));
  std::uniform_int_distribution<int> pick_view(0, int(dataset.views.size()) - 1);
  std::uniform_int_distribution<int> pick_row(0, dataset.height() - 1);
  std::uniform_int_distribution<int> pick_col(0, dataset.width() - 1);

  // A solid-color background cannot penalize same-colored fog, so the fit
  // uses a random background per ray whenever the ground truth carries alpha.
  bool random_bg = true;
  for (const SceneView& v : dataset.views) random_bg &= v.image.channels == 4;

  std::vector<Sample> samples;
  std::vector<SampleRec> recs;

  for (int step = 0; step < cfg.steps; ++step) {
    std::fill(grad_density.begin(), grad_density.end(), 0.f);
    std::fill(grad_rgb.begin(), grad_rgb.end(), 0.f);

    for (int i = 0; i < cfg.batch_rays; ++i) {
      const int view = pick_view(rng);
      const int row = pick_row(rng);
      const int col = pick_col(rng);
      const Ray ray = make_camera_ray(dataset.views[size_t(view)].camera, float(row) + 0.5f,
                                      float(col) + 0.5f, grid.aabb);
      const uint64_t ray_seed = hash_combine(hash_combine(cfg.seed, uint64_t(step)), uint64_t(i));
      const Vec3 bg = random_bg ? Vec3{hash_unit_float(hash_combine(ray_seed, 101)),
                                       hash_unit_float(hash_combine(ray_seed, 102)),
                                       hash_unit_float(hash_combine(ray_seed, 103))}
                                : dataset.background;
      const Vec3 truth = dataset.truth_pixel(view, row, col, bg);

      sample_ray(ray, nullptr, march, true, ray_seed, samples);
      recs.clear();
      Compositor comp;
      for (const Sample& s : samples) {
        if (!comp.alive(1e-4f)) break;
        SampleRec rec;
        rec.lk = grid.locate(s.pos);
        rec.delta = s.delta;
        rec.raw_density = grid.sample_density(rec.lk);
        rec.sigma = act(rec.raw_density);
        rec.pre_rgb = grid.sample_rgb(rec.lk);
        rec.color = {sigmoid(rec.pre_rgb.x), sigmoid(rec.pre_rgb.y), sigmoid(rec.pre_rgb.z)};
        rec.transmittance = float(comp.transmittance);
        rec.alpha = float(-std::expm1(-double(rec.sigma) * double(rec.delta)));
        comp.add(rec.sigma, rec.delta, rec.color);
        recs.push_back(rec);
      }
      const Vec3 rendered = comp.finish(bg);
      const Vec3 g = (rendered - truth) * (2.f / float(cfg.batch_rays));

      // Reverse sweep: suffix holds everything composited behind the sample.
      Vec3d suffix = {comp.transmittance * bg.x, comp.transmittance * bg.y,
                      comp.transmittance * bg.z};
      for (int q = int(recs.size()) - 1; q >= 0; --q) {
        const SampleRec& rec = recs[size_t(q)];
        const double wq = double(rec.transmittance) * double(rec.alpha);
        const Vec3 dcolor{float(wq * g.x), float(wq * g.y), float(wq * g.z)};
        const Vec3 dpre{dcolor.x * rec.color.x * (1.f - rec.color.x),
                        dcolor.y * rec.color.y * (1.f - rec.color.y),
                        dcolor.z * rec.color.z * (1.f - rec.color.z)};
        // d/dsigma
        const double behind = double(g.x) * suffix.x + double(g.y) * suffix.y +
                              double(g.z) * suffix.z;
        const double front = double(rec.transmittance) * (1.0 - double(rec.alpha)) *
                             (double(g.x) * rec.color.x + double(g.y) * rec.color.y +
                              double(g.z) * rec.color.z);
        const float dsigma = float(double(rec.delta) * (front - behind));
        const float draw = dsigma * act.grad(rec.raw_density);

        grid.for_corners(rec.lk, [&](size_t n, float w) {
          grad_density[n] += w * draw;
          grad_rgb[3 * n + 0] += w * dpre.x;
          grad_rgb[3 * n + 1] += w * dpre.y;
          grad_rgb[3 * n + 2] += w * dpre.z;
        });

        suffix.x += wq * rec.color.x;
        suffix.y += wq * rec.color.y;
        suffix.z += wq * rec.color.z;
      }
    }

    if (step == ema_start) density_ema = grid.density;
    if (step > ema_start) {
      kernels::lerp_rows(density_ema.data(), grid.density.data(), 0.02f, density_ema.data(),
                         n_nodes);
    }
    if (std::getenv("TVRF_COARSE_DEBUG") && step % 100 == 0) {
      double dmin = 1e9, dmax = -1e9, dsum = 0;
      for (float v : grid.density) {
        dmin = std::min(dmin, double(v));
        dmax = std::max(dmax, double(v));
        dsum += v;
      }
      std::fprintf(stderr, "[coarse] step %d dmin=%.3f dmean=%.3f dmax=%.3f\n", step, dmin,
                   dsum / double(grid.density.size()), dmax);
    }
    const float c1 = 1.f / (1.f - std::pow(0.9f, float(step + 1)));
    const float c2 = 1.f / (1.f - std::pow(0.99f, float(step + 1)));
    const float lr = cfg.lr;
    kernels::adam_step(grid.density.data(), grad_density.data(), opt_density.m.data(),
                       opt_density.v.data(), n_nodes, lr, 0.9f, 0.99f, 1e-8f, c1, c2);
    kernels::adam_step(grid.rgb.data(), grad_rgb.data(), opt_rgb.m.data(), opt_rgb.v.data(),
                       n_nodes * 3, lr, 0.9f, 0.99f, 1e-8f, c1, c2);
  }

  CoarseResult result;
  result.grid = OccupancyGrid::create(grid.res, grid.aabb);
  const std::vector<float>& readout = density_ema.empty() ? grid.density : density_ema;
  for (int z = 0; z < grid.res; ++z) {
    for (int y = 0; y < grid.res; ++y) {
      for (int x = 0; x < grid.res; ++x) {
        const float sigma = act(readout[grid.node(x, y, z)]);
        const float alpha = -std::expm1(-sigma * voxel_edge);
        if (alpha > cfg.alpha_threshold) result.grid.set(x, y, z, true);
      }
    }
  }
  result.grid.dilate();

  const float inv = 1.f / float(grid.res);
  for (int z = 0; z < grid.res; ++z) {
    for (int y = 0; y < grid.res; ++y) {
      for (int x = 0; x < grid.res; ++x) {
        if (!result.grid.voxels[result.grid.index(x, y, z)]) continue;
        result.points.push_back({grid.aabb.min.x + ext.x * (float(x) + 0.5f) * inv,
                                 grid.aabb.min.y + ext.y * (float(y) + 0.5f) * inv,
                                 grid.aabb.min.z + ext.z * (float(z) + 0.5f) * inv});
      }
    }
  }
  if (result.points.empty()) {
    throw std::runtime_error(
        "coarse occupancy is empty; all per-voxel alphas fell below the threshold "
        "(try lowering coarse.alpha_threshold)");
  }
  return result;
}

}  // namespace tvrf
