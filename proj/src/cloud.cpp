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

#include "tvrf/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tvrf/kernels.hpp"

namespace tvrf {

namespace {

constexpr float kDistanceEps = 1e-6f;

CellCoord cell_from(Vec3 point, Vec3 origin, float spacing) {
  return {int(std::floor((point.x - origin.x) / spacing)),
          int(std::floor((point.y - origin.y) / spacing)),
          int(std::floor((point.z - origin.z) / spacing))};
}

}  // namespace

CellCoord ScaleCloud::cell_of(Vec3 point) const {
  return cell_from(point, lattice_origin, lattice_spacing);
}

Vec3 ScaleCloud::cell_center(CellCoord c) const {
  return {lattice_origin.x + lattice_spacing * (float(c.x) + 0.5f),
          lattice_origin.y + lattice_spacing * (float(c.y) + 0.5f),
          lattice_origin.z + lattice_spacing * (float(c.z) + 0.5f)};
}

int ScaleCloud::tensor_at(CellCoord c) const {
  auto it = cell_index.find(cell_key(c));
  return it == cell_index.end() ? -1 : it->second;
}

long ScaleCloud::total_factor_params() const {
  long n = 0;
  for (const auto& t : tensors) n += t.param_count();
  return n;
}

ScaleCloud distribute(std::span<const Vec3> geometry_points, Vec3 lattice_origin,
                      float lattice_spacing, float edge, std::array<int, 3> resolution,
                      int r_sigma, int r_c, int neighbor_count, std::mt19937& rng,
                      float init_std) {
  if (geometry_points.empty()) {
    throw std::runtime_error("no geometry to distribute on");
  }
  if (lattice_spacing <= 0.f || edge <= 0.f) {
    throw std::invalid_argument("lattice spacing and edge must be positive");
  }

  std::vector<CellCoord> cells;
  cells.reserve(geometry_points.size());
  for (const Vec3& p : geometry_points) {
    cells.push_back(cell_from(p, lattice_origin, lattice_spacing));
  }
  std::sort(cells.begin(), cells.end(), [](CellCoord a, CellCoord b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
  });
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  ScaleCloud cloud;
  cloud.lattice_origin = lattice_origin;
  cloud.lattice_spacing = lattice_spacing;
  cloud.edge = edge;
  cloud.neighbor_count = neighbor_count;
  cloud.cells = std::move(cells);
  cloud.tensors.reserve(cloud.cells.size());
  cloud.cell_index.reserve(cloud.cells.size());
  for (size_t i = 0; i < cloud.cells.size(); ++i) {
    TriVectorTensor t = TriVectorTensor::create(cloud.cell_center(cloud.cells[i]),
                                                edge, r_sigma, r_c, resolution);
    t.init_normal(rng, init_std);
    cloud.tensors.push_back(std::move(t));
    cloud.cell_index.emplace(cell_key(cloud.cells[i]), int32_t(i));
  }
  return cloud;
}

int query_neighbors(const ScaleCloud& cloud, Vec3 point, int m, NeighborHit* out) {
  struct Candidate {
    float dist;
    CellCoord cell;
    int tensor;
  };
  Candidate cands[27];
  int n_cand = 0;

  const CellCoord base = cloud.cell_of(point);
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const CellCoord c{base.x + dx, base.y + dy, base.z + dz};
        const int idx = cloud.tensor_at(c);
        if (idx < 0) continue;
        const TriVectorTensor& t = cloud.tensors[size_t(idx)];
        if (!t.covers(point)) continue;
        cands[n_cand++] = {length(point - t.position), c, idx};
      }
    }
  }
  if (n_cand == 0) return 0;

  std::sort(cands, cands + n_cand, [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.cell.z != b.cell.z) return a.cell.z < b.cell.z;
    if (a.cell.y != b.cell.y) return a.cell.y < b.cell.y;
    return a.cell.x < b.cell.x;
  });

  const int n = std::min(m, n_cand);
  float wsum = 0.f;
  for (int i = 0; i < n; ++i) {
    const float w = 1.f / std::max(cands[i].dist, kDistanceEps);
    out[i] = {cands[i].tensor, w};
    wsum += w;
  }
  for (int i = 0; i < n; ++i) out[i].weight /= wsum;
  return n;
}

bool aggregate_scale(const ScaleCloud& cloud, Vec3 point, int m, float& f_sigma,
                     float* comps, AggregateScratch& scratch) {
  const int r_c = cloud.tensors.empty() ? 0 : cloud.tensors.front().r_c;
  f_sigma = 0.f;
  std::fill(comps, comps + r_c, 0.f);

  NeighborHit hits[kMaxNeighbors];
  const int n = query_neighbors(cloud, point, std::min(m, kMaxNeighbors), hits);
  if (n == 0) return false;

  for (int i = 0; i < n; ++i) {
    const TriVectorTensor& t = cloud.tensors[size_t(hits[i].tensor)];
    const float d = t.eval_features(point, scratch.tensor_comps.data(), scratch.rows.data());
    f_sigma += hits[i].weight * d;
    kernels::axpy(hits[i].weight, scratch.tensor_comps.data(), comps, size_t(r_c));
  }
  return true;
}

long Decoder::network_param_count() const {
  long n = 0;
  for (const auto& b : appearance) n += long(b.w.size());
  return n + mlp.param_count();
}

long Model::vector_param_count() const {
  long n = 0;
  for (const auto& s : scales) n += s.total_factor_params();
  return n;
}

long Model::total_param_count() const {
  return vector_param_count() + decoder.network_param_count();
}

int aggregate_multiscale(const Model& model, Vec3 point, float& f_sigma,
                         float* f_color, AggregateScratch& scratch) {
  const int p = model.feature_dim();
  f_sigma = 0.f;
  std::fill(f_color, f_color + p, 0.f);

  int n_cover = 0;
  for (size_t s = 0; s < model.scales.size(); ++s) {
    const ScaleCloud& cloud = model.scales[s];
    float fs = 0.f;
    if (!aggregate_scale(cloud, point, cloud.neighbor_count, fs,
                         scratch.scale_comps.data(), scratch)) {
      continue;
    }
    model.decoder.appearance[s].apply(scratch.scale_comps.data(),
                                      scratch.scale_color.data());
    f_sigma += fs;
    kernels::axpy(1.f, scratch.scale_color.data(), f_color, size_t(p));
    ++n_cover;
  }
  if (n_cover > 1) {
    const float inv = 1.f / float(n_cover);
    f_sigma *= inv;
    for (int i = 0; i < p; ++i) f_color[i] *= inv;
  }
  return n_cover;
}

AggregateScratch make_scratch(const Model& model) {
  AggregateScratch s;
  s.rows.resize(3 * size_t(model.r_sigma + model.r_c));
  s.tensor_comps.resize(size_t(model.r_c));
  s.scale_comps.resize(size_t(model.r_c));
  s.scale_color.resize(size_t(model.feature_dim()));
  return s;
}

}  // namespace tvrf
