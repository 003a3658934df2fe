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

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tvrf/cloud.hpp"
#include "tvrf/learn.hpp"

using namespace tvrf;

namespace {

ScaleCloud make_cloud(std::span<const Vec3> points, float spacing, float edge, int res,
                      int r_sigma, int r_c, uint32_t seed, int m = 4) {
  std::mt19937 rng(seed);
  return distribute(points, {-1.f, -1.f, -1.f}, spacing, edge, {res, res, res}, r_sigma, r_c,
                    m, rng, 0.3f);
}

}  // namespace

TEST_CASE("distribute places tensors at occupied voxel centers") {
  const Vec3 pts[] = {{0.1f, 0.1f, 0.1f}};
  std::mt19937 rng(1);
  ScaleCloud cloud =
      distribute(pts, {0.f, 0.f, 0.f}, 0.4f, 0.6f, {5, 5, 5}, 2, 3, 4, rng, 0.2f);
  REQUIRE(cloud.tensors.size() == 1);
  CHECK(cloud.tensors[0].position.x == doctest::Approx(0.2));
  CHECK(cloud.tensors[0].position.y == doctest::Approx(0.2));
  CHECK(cloud.tensors[0].position.z == doctest::Approx(0.2));
  CHECK(cloud.tensors[0].edge == 0.6f);

  // Two points in one cell deduplicate.
  const Vec3 two[] = {{0.05f, 0.1f, 0.2f}, {0.3f, 0.35f, 0.39f}};
  std::mt19937 rng2(1);
  ScaleCloud one = distribute(two, {0.f, 0.f, 0.f}, 0.4f, 0.6f, {5, 5, 5}, 2, 3, 4, rng2, 0.2f);
  CHECK(one.tensors.size() == 1);

  CHECK_THROWS_WITH_AS(distribute({}, {0, 0, 0}, 0.4f, 0.6f, {5, 5, 5}, 1, 1, 4, rng2, 0.2f),
                       "no geometry to distribute on", std::runtime_error);
}

TEST_CASE("distribute with the stock three-scale layout") {
  // Scene box [-1,1], spacings 0.4/0.2/0.1, coverage edges 0.6/0.3/0.15.
  std::vector<Vec3> ring;
  for (int i = 0; i < 64; ++i) {
    const float a = float(i) * 0.0981747704f;
    ring.push_back({0.6f * std::cos(a), 0.6f * std::sin(a), 0.05f});
  }
  const float spacings[3] = {0.4f, 0.2f, 0.1f};
  const float edges[3] = {0.6f, 0.3f, 0.15f};
  size_t prev = 0;
  for (int s = 0; s < 3; ++s) {
    ScaleCloud cloud = make_cloud(ring, spacings[s], edges[s], 5, 2, 3, 7);
    CHECK(cloud.edge > cloud.lattice_spacing);  // neighbors overlap
    CHECK(cloud.tensors.size() >= prev);        // finer lattice, more cells
    prev = cloud.tensors.size();
    for (size_t i = 0; i < cloud.tensors.size(); ++i) {
      const Vec3 expect = cloud.cell_center(cloud.cells[i]);
      CHECK(cloud.tensors[i].position.x == expect.x);
      CHECK(cloud.tensors[i].position.y == expect.y);
      CHECK(cloud.tensors[i].position.z == expect.z);
      CHECK(cloud.tensor_at(cloud.cells[i]) == int(i));
    }
  }
}

TEST_CASE("distribute is deterministic including ordering") {
  std::vector<Vec3> pts;
  std::mt19937 prng(9);
  std::uniform_real_distribution<float> u(-0.9f, 0.9f);
  for (int i = 0; i < 200; ++i) pts.push_back({u(prng), u(prng), u(prng)});

  ScaleCloud a = make_cloud(pts, 0.2f, 0.3f, 7, 2, 4, 42);
  ScaleCloud b = make_cloud(pts, 0.2f, 0.3f, 7, 2, 4, 42);
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (size_t i = 0; i < a.tensors.size(); ++i) {
    CHECK(a.cells[i] == b.cells[i]);
    for (int ax = 0; ax < 3; ++ax) CHECK(a.tensors[i].axes[size_t(ax)] == b.tensors[i].axes[size_t(ax)]);
  }
}

TEST_CASE("query_neighbors weights") {
  // Two adjacent tensors, point midway between their centers.
  const Vec3 pts[] = {{0.1f, 0.1f, 0.1f}, {0.5f, 0.1f, 0.1f}};
  std::mt19937 rng(3);
  ScaleCloud cloud =
      distribute(pts, {0.f, 0.f, 0.f}, 0.4f, 0.7f, {5, 5, 5}, 1, 1, 4, rng, 0.2f);
  REQUIRE(cloud.tensors.size() == 2);

  NeighborHit hits[kMaxNeighbors];
  const Vec3 midway{0.4f, 0.2f, 0.2f};
  const int n = query_neighbors(cloud, midway, 2, hits);
  REQUIRE(n == 2);
  CHECK(hits[0].weight == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(hits[1].weight == doctest::Approx(0.5).epsilon(1e-4));

  // At a tensor center the clamped distance keeps the weight finite.
  const int n1 = query_neighbors(cloud, cloud.tensors[0].position, 1, hits);
  REQUIRE(n1 == 1);
  CHECK(hits[0].tensor == 0);
  CHECK(hits[0].weight == doctest::Approx(1.0));

  // M larger than the covering set.
  const int n3 = query_neighbors(cloud, midway, 4, hits);
  CHECK(n3 == 2);
  float wsum = 0.f;
  for (int i = 0; i < n3; ++i) wsum += hits[i].weight;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-6));

  // No coverage at all.
  CHECK(query_neighbors(cloud, {0.9f, 0.9f, 0.9f}, 4, hits) == 0);
}

TEST_CASE("neighbor weights always normalize") {
  std::vector<Vec3> pts;
  std::mt19937 prng(5);
  std::uniform_real_distribution<float> u(-0.8f, 0.8f);
  for (int i = 0; i < 100; ++i) pts.push_back({u(prng), u(prng), u(prng)});
  ScaleCloud cloud = make_cloud(pts, 0.2f, 0.3f, 5, 1, 2, 6);

  NeighborHit hits[kMaxNeighbors];
  int covered = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vec3 p{u(prng), u(prng), u(prng)};
    const int n = query_neighbors(cloud, p, 4, hits);
    if (n == 0) continue;
    ++covered;
    float wsum = 0.f;
    for (int k = 0; k < n; ++k) {
      CHECK(hits[k].weight > 0.f);
      CHECK(cloud.tensors[size_t(hits[k].tensor)].covers(p));
      wsum += hits[k].weight;
    }
    CHECK(std::fabs(wsum - 1.f) <= 1e-6f);
  }
  CHECK(covered > 100);
}

TEST_CASE("aggregate_scale") {
  const Vec3 pts[] = {{0.1f, 0.1f, 0.1f}, {0.5f, 0.1f, 0.1f}};
  std::mt19937 rng(8);
  ScaleCloud cloud =
      distribute(pts, {0.f, 0.f, 0.f}, 0.4f, 0.7f, {5, 5, 5}, 2, 3, 4, rng, 0.4f);
  REQUIRE(cloud.tensors.size() == 2);

  Model shell;  // only used to size the scratch
  shell.r_sigma = 2;
  shell.r_c = 3;
  shell.decoder.mlp = ColorMlp::create(4, 0, 4);
  AggregateScratch scratch = make_scratch(shell);

  SUBCASE("single covering tensor returns its raw evaluation") {
    const Vec3 p = cloud.tensors[0].position;  // outside tensor 1's coverage
    REQUIRE(!cloud.tensors[1].covers(p));
    float f_sigma;
    float comps[3];
    REQUIRE(aggregate_scale(cloud, p, 4, f_sigma, comps, scratch));
    CHECK(f_sigma == doctest::Approx(cloud.tensors[0].eval_density_feature(p)).epsilon(1e-6));
    const auto want = cloud.tensors[0].eval_appearance_components(p);
    for (int r = 0; r < 3; ++r) CHECK(comps[r] == doctest::Approx(want[size_t(r)]).epsilon(1e-6));
  }

  SUBCASE("uncovered point reports covered=false and zeros") {
    float f_sigma = 99.f;
    float comps[3] = {9, 9, 9};
    CHECK(!aggregate_scale(cloud, {0.9f, 0.9f, 0.9f}, 4, f_sigma, comps, scratch));
    CHECK(f_sigma == 0.f);
    for (float c : comps) CHECK(c == 0.f);
  }
}

TEST_CASE("aggregation with identical factor values is value-preserving") {
  // Constant factors: every tensor evaluates to the same feature everywhere,
  // so any convex weighting must return that feature.
  const Vec3 pts[] = {{0.1f, 0.1f, 0.1f}, {0.5f, 0.1f, 0.1f}, {0.1f, 0.5f, 0.1f}};
  std::mt19937 rng(12);
  ScaleCloud cloud =
      distribute(pts, {0.f, 0.f, 0.f}, 0.4f, 0.7f, {4, 4, 4}, 1, 2, 4, rng, 0.2f);
  for (auto& t : cloud.tensors) {
    for (int a = 0; a < 3; ++a) {
      t.set_factor(a, FactorKind::kDensity, 0, FactorVector(4, 1.5f));
      t.set_factor(a, FactorKind::kAppearance, 0, FactorVector(4, 1.f));
      t.set_factor(a, FactorKind::kAppearance, 1, FactorVector(4, -1.f));
    }
  }
  Model shell;
  shell.r_sigma = 1;
  shell.r_c = 2;
  shell.decoder.mlp = ColorMlp::create(4, 0, 4);
  AggregateScratch scratch = make_scratch(shell);

  float f_sigma;
  float comps[2];
  REQUIRE(aggregate_scale(cloud, {0.3f, 0.25f, 0.2f}, 4, f_sigma, comps, scratch));
  CHECK(f_sigma == doctest::Approx(1.5 * 1.5 * 1.5).epsilon(1e-5));
  CHECK(comps[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(comps[1] == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("shared-matrix identity: weight-then-project equals project-then-weight") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<float> u(-0.35f, 0.75f);
  const Vec3 pts[] = {{0.1f, 0.1f, 0.1f}, {0.5f, 0.1f, 0.1f}, {0.1f, 0.5f, 0.1f},
                      {0.5f, 0.5f, 0.1f}, {0.3f, 0.3f, 0.5f}};
  ScaleCloud cloud =
      distribute(pts, {0.f, 0.f, 0.f}, 0.4f, 0.7f, {5, 5, 5}, 2, 4, 4, rng, 0.5f);
  AppearanceMatrix b = AppearanceMatrix::create(6, 4);
  b.init_fan_in(rng);

  Model shell;
  shell.r_sigma = 2;
  shell.r_c = 4;
  shell.decoder.mlp = ColorMlp::create(6, 0, 4);
  AggregateScratch scratch = make_scratch(shell);

  int checked = 0;
  while (checked < 1000) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    NeighborHit hits[kMaxNeighbors];
    const int n = query_neighbors(cloud, p, 4, hits);
    if (n < 2) continue;
    ++checked;

    // Library route: weighted component sums, then one projection.
    float f_sigma;
    float comps[4];
    REQUIRE(aggregate_scale(cloud, p, 4, f_sigma, comps, scratch));
    float fused[6];
    b.apply(comps, fused);

    // Literal route: project each tensor's components, then weight (double).
    double literal[6] = {0, 0, 0, 0, 0, 0};
    for (int h = 0; h < n; ++h) {
      const auto tc = cloud.tensors[size_t(hits[h].tensor)].eval_appearance_components(p);
      for (int row = 0; row < 6; ++row) {
        double acc = 0.0;
        for (int c = 0; c < 4; ++c) acc += double(b.w[size_t(row) * 4 + c]) * double(tc[size_t(c)]);
        literal[row] += double(hits[h].weight) * acc;
      }
    }
    for (int row = 0; row < 6; ++row) {
      CHECK(std::fabs(double(fused[row]) - literal[row]) <= 1e-5);
    }
  }
}

TEST_CASE("aggregate_multiscale means over covering scales") {
  // Three single-tensor scales sharing a center; constant factors chosen so
  // per-scale features are exactly known.
  std::mt19937 rng(14);
  const Vec3 pt[] = {{0.05f, 0.05f, 0.05f}};
  ModelSpec spec;
  spec.scales = {{0.4f, 0.6f, 4, 4, 4}, {0.2f, 0.3f, 4, 4, 4}, {0.1f, 0.15f, 4, 4, 4}};
  spec.r_sigma = 1;
  spec.r_c = 1;
  spec.p = 2;
  spec.n_freq = 0;
  spec.hidden = 4;
  Model model = build_model(spec, pt, rng);

  const float fs[3] = {1.f, 3.f, 5.f};
  for (int s = 0; s < 3; ++s) {
    auto& tensor = model.scales[size_t(s)].tensors[0];
    for (int a = 0; a < 3; ++a) {
      tensor.set_factor(a, FactorKind::kDensity, 0,
                        FactorVector(4, std::cbrt(fs[s])));
      tensor.set_factor(a, FactorKind::kAppearance, 0, FactorVector(4, 1.f));
    }
    model.decoder.appearance[size_t(s)].w = {float(s + 1), 0.f};  // p=2, r_c=1
  }

  AggregateScratch scratch = make_scratch(model);
  std::vector<float> f_color(2);
  float f_sigma;

  // The smallest tensor covers only near its cell; near the shared region all
  // three scales cover.
  const Vec3 covered_by_all = model.scales[2].tensors[0].position;
  const int n = aggregate_multiscale(model, covered_by_all, f_sigma, f_color.data(), scratch);
  CHECK(n == 3);
  CHECK(f_sigma == doctest::Approx((1.0 + 3.0 + 5.0) / 3.0).epsilon(1e-4));
  CHECK(f_color[0] == doctest::Approx((1.0 + 2.0 + 3.0) / 3.0).epsilon(1e-4));
  CHECK(f_color[1] == doctest::Approx(0.0));

  // A point covered by the coarse scale only.
  const Vec3 coarse_only =
      model.scales[0].tensors[0].position + Vec3{0.28f, 0.0f, 0.0f};
  REQUIRE(model.scales[0].tensors[0].covers(coarse_only));
  REQUIRE(!model.scales[1].tensors[0].covers(coarse_only));
  const int n1 = aggregate_multiscale(model, coarse_only, f_sigma, f_color.data(), scratch);
  CHECK(n1 == 1);
  CHECK(f_sigma == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(f_color[0] == doctest::Approx(1.0).epsilon(1e-4));

  // Uncovered everywhere: zeros.
  const int n0 = aggregate_multiscale(model, {0.9f, -0.9f, 0.9f}, f_sigma, f_color.data(),
                                      scratch);
  CHECK(n0 == 0);
  CHECK(f_sigma == 0.f);
  CHECK(f_color[0] == 0.f);

  // Two covering scales with features 1 and 3 average to 2.
  Model two = model;
  two.scales.pop_back();
  two.decoder.appearance.pop_back();
  const int n2 = aggregate_multiscale(two, two.scales[1].tensors[0].position, f_sigma,
                                      f_color.data(), scratch);
  CHECK(n2 == 2);
  CHECK(f_sigma == doctest::Approx(2.0).epsilon(1e-4));
}
