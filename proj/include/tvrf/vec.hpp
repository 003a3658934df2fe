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
#include <cmath>
#include <cstdint>
#include <limits>

namespace tvrf {

struct Vec3 {
  float x = 0.f, y = 0.f, z = 0.f;

  float& operator[](int i) { return (&x)[i]; }
  float operator[](int i) const { return (&x)[i]; }

  Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(float s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(float s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(Vec3 o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(Vec3 o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(float s) { x *= s; y *= s; z *= s; return *this; }
  bool operator==(const Vec3&) const = default;
};

inline Vec3 operator*(float s, Vec3 v) { return v * s; }
inline float dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline float length(Vec3 v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(Vec3 v) { return v / length(v); }
inline Vec3 cmul(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

struct Vec3d {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3d operator+(Vec3d o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3d operator-(Vec3d o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3d operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3d operator/(double s) const { return {x / s, y / s, z / s}; }
};

inline double dot(Vec3d a, Vec3d b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3d cross(Vec3d a, Vec3d b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(Vec3d v) { return std::sqrt(dot(v, v)); }
inline Vec3d normalized(Vec3d v) { return v / length(v); }
inline Vec3 to_f(Vec3d v) { return {float(v.x), float(v.y), float(v.z)}; }
inline Vec3d to_d(Vec3 v) { return {v.x, v.y, v.z}; }

/// Row-major 4x4 camera-to-world transform (OpenGL convention: -Z forward).
struct Mat4d {
  std::array<double, 16> m{};

  static Mat4d identity() {
    Mat4d r;
    r.m[0] = r.m[5] = r.m[10] = r.m[15] = 1.0;
    return r;
  }
  double at(int row, int col) const { return m[row * 4 + col]; }
  double& at(int row, int col) { return m[row * 4 + col]; }

  Vec3d rotate(Vec3d v) const {
    return {at(0, 0) * v.x + at(0, 1) * v.y + at(0, 2) * v.z,
            at(1, 0) * v.x + at(1, 1) * v.y + at(1, 2) * v.z,
            at(2, 0) * v.x + at(2, 1) * v.y + at(2, 2) * v.z};
  }
  Vec3d translation() const { return {at(0, 3), at(1, 3), at(2, 3)}; }
};

struct Aabb {
  Vec3 min{-1.f, -1.f, -1.f};
  Vec3 max{1.f, 1.f, 1.f};

  Vec3 extent() const { return max - min; }
  float diagonal() const { return length(extent()); }
  bool contains(Vec3 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
           p.z >= min.z && p.z <= max.z;
  }
};

/// Slab intersection of a ray with the box, clipped to t >= 0.
/// Returns false on a miss.
inline bool intersect_aabb(Vec3 origin, Vec3 dir, const Aabb& box, float& t_near, float& t_far) {
  float t0 = 0.f;
  float t1 = std::numeric_limits<float>::max();
  for (int a = 0; a < 3; ++a) {
    const float inv = 1.f / dir[a];
    float ta = (box.min[a] - origin[a]) * inv;
    float tb = (box.max[a] - origin[a]) * inv;
    if (inv < 0.f) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  t_near = t0;
  t_far = t1;
  return true;
}

}  // namespace tvrf
