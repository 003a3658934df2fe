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

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tvrf/vec.hpp"

namespace tvrf {

/// One 1D factor of a rank-1 component, sampled on a uniform grid.
using FactorVector = std::vector<float>;

enum class FactorKind { kDensity, kAppearance };

/// Clamped cell lookup for a grid coordinate in [0, len-1].
/// The top boundary resolves to the last cell with t = 1 so the read of
/// index i0+1 stays in range and integer coordinates are exact.
struct AxisLerp {
  int i0;
  float t;
};

AxisLerp axis_lerp(int len, float coord);

/// Linear interpolation of `vec` at a (clamped) fractional grid coordinate.
float lerp_vector(std::span<const float> vec, float coord);

/// A local feature grid factorized into rank-1 triples of axis vectors.
/// The first r_sigma components form the scalar density grid, the next r_c
/// the appearance grid. Per axis, storage interleaves components so that the
/// values of all components at one grid knot are contiguous:
///   axes[a][knot * rank() + component]
/// which makes the per-point interpolation a pair of contiguous-row lerps.
struct TriVectorTensor {
  Vec3 position;               // cuboid center p
  float edge = 1.f;            // cuboid edge length l
  int r_sigma = 1;
  int r_c = 1;
  std::array<int, 3> res{2, 2, 2};           // I, J, K
  std::array<std::vector<float>, 3> axes;    // interleaved factor storage

  static TriVectorTensor create(Vec3 position, float edge, int r_sigma, int r_c,
                                std::array<int, 3> res);

  int rank() const { return r_sigma + r_c; }
  long param_count() const { return long(rank()) * (res[0] + res[1] + res[2]); }

  /// Zero-mean normal init of every factor value.
  void init_normal(std::mt19937& rng, float stddev);

  bool covers(Vec3 point) const;

  /// Scene point -> per-axis fractional grid coordinates; the cuboid faces
  /// map to grid indices 0 and len-1.
  Vec3 to_grid_coord(Vec3 point) const;

  /// Interpolated values of all components along one axis, written to
  /// out[0..rank). Coordinates outside the grid clamp to the boundary.
  void eval_axis(int axis, float coord, float* out) const;

  float eval_density_feature(Vec3 point) const;
  std::vector<float> eval_appearance_components(Vec3 point) const;

  /// Single-pass evaluation of both feature kinds; scratch must hold
  /// 3 * rank() floats, app_out r_c floats.
  float eval_features(Vec3 point, float* app_out, float* scratch) const;

  /// Extract / replace one factor vector (copying across the interleaved
  /// layout). `r` indexes within its kind.
  FactorVector factor(int axis, FactorKind kind, int r) const;
  void set_factor(int axis, FactorKind kind, int r, std::span<const float> values);

  /// Linear resample of every factor vector onto `new_res` knots over the
  /// same coverage. Rejects shrinking.
  TriVectorTensor upsampled(std::array<int, 3> new_res) const;
};

/// Row-wise linear resample of an interleaved axis array (`rank` values per
/// knot) from old_len to new_len knots; endpoints are preserved exactly.
/// Shared by factor upsampling and optimizer-state resampling.
std::vector<float> resample_axis_rows(std::span<const float> data, int old_len,
                                      int new_len, int rank);

}  // namespace tvrf
