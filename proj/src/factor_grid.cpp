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

#include "tvrf/factor_grid.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "tvrf/kernels.hpp"

namespace tvrf {

AxisLerp axis_lerp(int len, float coord) {
  assert(len >= 2);
  if (!(coord > 0.f)) return {0, 0.f};  // also catches NaN
  const float top = float(len - 1);
  if (coord >= top) return {len - 2, 1.f};
  int i0 = int(coord);
  if (i0 > len - 2) i0 = len - 2;
  return {i0, coord - float(i0)};
}

float lerp_vector(std::span<const float> vec, float coord) {
  const AxisLerp l = axis_lerp(int(vec.size()), coord);
  return vec[l.i0] + l.t * (vec[l.i0 + 1] - vec[l.i0]);
}

TriVectorTensor TriVectorTensor::create(Vec3 position, float edge, int r_sigma,
                                        int r_c, std::array<int, 3> res) {
  if (edge <= 0.f) throw std::invalid_argument("tensor edge must be positive");
  if (r_sigma < 1 || r_c < 1) throw std::invalid_argument("component counts must be >= 1");
  for (int len : res) {
    if (len < 2) throw std::invalid_argument("factor resolution must be >= 2");
  }
  TriVectorTensor t;
  t.position = position;
  t.edge = edge;
  t.r_sigma = r_sigma;
  t.r_c = r_c;
  t.res = res;
  for (int a = 0; a < 3; ++a) {
    t.axes[a].assign(size_t(res[a]) * size_t(t.rank()), 0.f);
  }
  return t;
}

void TriVectorTensor::init_normal(std::mt19937& rng, float stddev) {
  std::normal_distribution<float> dist(0.f, stddev);
  for (auto& axis : axes) {
    for (float& v : axis) v = dist(rng);
  }
}

bool TriVectorTensor::covers(Vec3 point) const {
  const float half = 0.5f * edge;
  return std::fabs(point.x - position.x) <= half &&
         std::fabs(point.y - position.y) <= half &&
         std::fabs(point.z - position.z) <= half;
}

Vec3 TriVectorTensor::to_grid_coord(Vec3 point) const {
  Vec3 g;
  const float half = 0.5f * edge;
  for (int a = 0; a < 3; ++a) {
    g[a] = (point[a] - position[a] + half) / edge * float(res[a] - 1);
  }
  return g;
}

void TriVectorTensor::eval_axis(int axis, float coord, float* out) const {
  const AxisLerp l = axis_lerp(res[axis], coord);
  const float* base = axes[axis].data() + size_t(l.i0) * size_t(rank());
  kernels::lerp_rows(base, base + rank(), l.t, out, size_t(rank()));
}

float TriVectorTensor::eval_density_feature(Vec3 point) const {
  std::vector<float> scratch(3 * size_t(rank()), 0.f);
  return eval_features(point, nullptr, scratch.data());
}

std::vector<float> TriVectorTensor::eval_appearance_components(Vec3 point) const {
  std::vector<float> comps(size_t(r_c), 0.f);
  std::vector<float> scratch(3 * size_t(rank()), 0.f);
  eval_features(point, comps.data(), scratch.data());
  return comps;
}

float TriVectorTensor::eval_features(Vec3 point, float* app_out, float* scratch) const {
  const int n = rank();
  float* vx = scratch;
  float* vy = scratch + n;
  float* vz = scratch + 2 * n;
  const Vec3 g = to_grid_coord(point);
  eval_axis(0, g.x, vx);
  eval_axis(1, g.y, vy);
  eval_axis(2, g.z, vz);
  // Reuse vx for the per-component triple products.
  kernels::mul3(vx, vy, vz, vx, size_t(n));
  if (app_out) {
    for (int r = 0; r < r_c; ++r) app_out[r] = vx[r_sigma + r];
  }
  return kernels::sum(vx, size_t(r_sigma));
}

FactorVector TriVectorTensor::factor(int axis, FactorKind kind, int r) const {
  const int col = (kind == FactorKind::kDensity) ? r : r_sigma + r;
  FactorVector out(size_t(res[axis]));
  for (int i = 0; i < res[axis]; ++i) {
    out[i] = axes[axis][size_t(i) * size_t(rank()) + col];
  }
  return out;
}

void TriVectorTensor::set_factor(int axis, FactorKind kind, int r,
                                 std::span<const float> values) {
  if (int(values.size()) != res[axis]) {
    throw std::invalid_argument("factor vector length does not match axis resolution");
  }
  const int col = (kind == FactorKind::kDensity) ? r : r_sigma + r;
  for (int i = 0; i < res[axis]; ++i) {
    axes[axis][size_t(i) * size_t(rank()) + col] = values[i];
  }
}

std::vector<float> resample_axis_rows(std::span<const float> data, int old_len,
                                      int new_len, int rank) {
  assert(int(data.size()) == old_len * rank);
  std::vector<float> out(size_t(new_len) * size_t(rank));
  if (new_len == old_len) {
    std::copy(data.begin(), data.end(), out.begin());
    return out;
  }
  for (int j = 0; j < new_len; ++j) {
    const double coord = double(j) * double(old_len - 1) / double(new_len - 1);
    const AxisLerp l = axis_lerp(old_len, float(coord));
    const float* lo = data.data() + size_t(l.i0) * size_t(rank);
    float* dst = out.data() + size_t(j) * size_t(rank);
    if (l.t == 0.f || l.t == 1.f) {
      // Shared knots copy bit-exactly.
      const float* src = l.t == 0.f ? lo : lo + rank;
      std::copy(src, src + rank, dst);
    } else {
      kernels::lerp_rows(lo, lo + rank, l.t, dst, size_t(rank));
    }
  }
  return out;
}

TriVectorTensor TriVectorTensor::upsampled(std::array<int, 3> new_res) const {
  for (int a = 0; a < 3; ++a) {
    if (new_res[a] < res[a]) {
      throw std::invalid_argument("upsample target resolution smaller than current");
    }
  }
  TriVectorTensor out = create(position, edge, r_sigma, r_c, new_res);
  for (int a = 0; a < 3; ++a) {
    out.axes[a] = resample_axis_rows(axes[a], res[a], new_res[a], rank());
  }
  return out;
}

}  // namespace tvrf
