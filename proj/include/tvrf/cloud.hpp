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

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "tvrf/decode.hpp"
#include "tvrf/factor_grid.hpp"
#include "tvrf/vec.hpp"

namespace tvrf {

struct CellCoord {
  int x = 0, y = 0, z = 0;
  bool operator==(const CellCoord&) const = default;
};

inline uint64_t cell_key(CellCoord c) {
  constexpr uint64_t kBias = 1u << 20;
  return ((uint64_t(c.x) + kBias) << 42) | ((uint64_t(c.y) + kBias) << 21) |
         (uint64_t(c.z) + kBias);
}

/// All local tensors of one scale, placed at the centers of occupied cells
/// of a regular lattice. Topology is immutable after distribution.
struct ScaleCloud {
  Vec3 lattice_origin;
  float lattice_spacing = 0.f;
  float edge = 0.f;  // tensor coverage edge; > spacing so neighbors overlap
  int neighbor_count = 4;
  std::vector<TriVectorTensor> tensors;
  std::vector<CellCoord> cells;  // parallel to tensors
  std::unordered_map<uint64_t, int32_t> cell_index;

  CellCoord cell_of(Vec3 point) const;
  Vec3 cell_center(CellCoord c) const;
  int tensor_at(CellCoord c) const;
  long total_factor_params() const;
};

/// Rasterize geometry points onto the lattice and place one freshly
/// initialized tensor at every occupied cell center. Pure function of its
/// inputs, including tensor ordering (cells sorted ascending x, y, z).
ScaleCloud distribute(std::span<const Vec3> geometry_points, Vec3 lattice_origin,
                      float lattice_spacing, float edge, std::array<int, 3> resolution,
                      int r_sigma, int r_c, int neighbor_count, std::mt19937& rng,
                      float init_std);

struct NeighborHit {
  int tensor = -1;
  float weight = 0.f;
};

constexpr int kMaxNeighbors = 8;

/// The M nearest tensors (by center distance) whose cuboid contains the
/// point, searched over the 3x3x3 cell block. Weights are normalized inverse
/// distances; ties broken by ascending cell coordinate (z, then y, then x).
int query_neighbors(const ScaleCloud& cloud, Vec3 point, int m, NeighborHit* out);

struct AggregateScratch {
  std::vector<float> rows;      // 3 * rank
  std::vector<float> tensor_comps;  // r_c
  std::vector<float> scale_comps;   // r_c
  std::vector<float> scale_color;   // p
};

/// Inverse-distance aggregation over one scale. Returns false (and zeros)
/// when no tensor covers the point. `comps` receives the weighted component
/// sums, i.e. the appearance activation before the shared matrix.
bool aggregate_scale(const ScaleCloud& cloud, Vec3 point, int m, float& f_sigma,
                     float* comps, AggregateScratch& scratch);

/// The decoder half of the model: per-scale shared appearance matrices plus
/// the global color MLP and density activation.
struct Decoder {
  std::vector<AppearanceMatrix> appearance;  // one per scale
  ColorMlp mlp;
  DensityActivation activation;

  long network_param_count() const;
};

/// The full trainable scene representation.
struct Model {
  std::vector<ScaleCloud> scales;  // coarse -> fine
  Decoder decoder;
  int neighbor_count = 4;
  Aabb aabb;
  Vec3 background{1.f, 1.f, 1.f};
  int r_sigma = 16;
  int r_c = 48;

  int feature_dim() const { return decoder.mlp.p; }
  long vector_param_count() const;
  long total_param_count() const;
};

/// Mean of the per-scale density feature and post-matrix appearance feature
/// over the scales that cover the point. Returns the number of covering
/// scales; zero means empty space (both outputs zeroed).
int aggregate_multiscale(const Model& model, Vec3 point, float& f_sigma,
                         float* f_color, AggregateScratch& scratch);

AggregateScratch make_scratch(const Model& model);

}  // namespace tvrf
