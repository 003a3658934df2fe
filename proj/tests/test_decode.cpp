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
#include "tvrf/decode.hpp"

using namespace tvrf;

TEST_CASE("apply_appearance_matrix") {
  AppearanceMatrix eye = AppearanceMatrix::create(3, 3);
  eye.w = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const float comps[3] = {0.5f, -1.f, 2.f};
  float out[3];
  eye.apply(comps, out);
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == doctest::Approx(-1.0));
  CHECK(out[2] == doctest::Approx(2.0));

  const float zeros[3] = {0, 0, 0};
  eye.apply(zeros, out);
  for (float v : out) CHECK(v == 0.f);

  // 3x2: columns c0, c1; comps [1,-1] -> c0 - c1.
  AppearanceMatrix b = AppearanceMatrix::create(3, 2);
  b.w = {2, 5, -1, 0.5, 4, -3};
  const float pm[2] = {1.f, -1.f};
  float diff[3];
  b.apply(pm, diff);
  CHECK(diff[0] == doctest::Approx(2 - 5));
  CHECK(diff[1] == doctest::Approx(-1 - 0.5));
  CHECK(diff[2] == doctest::Approx(4 + 3));
}

TEST_CASE("appearance matrix is linear") {
  std::mt19937 rng(11);
  AppearanceMatrix b = AppearanceMatrix::create(7, 5);
  b.init_fan_in(rng);
  std::uniform_real_distribution<float> u(-2.f, 2.f);
  float x[5], y[5], combo[5];
  for (int i = 0; i < 5; ++i) {
    x[i] = u(rng);
    y[i] = u(rng);
  }
  const float a = 1.7f, c = -0.4f;
  for (int i = 0; i < 5; ++i) combo[i] = a * x[i] + c * y[i];
  float bx[7], by[7], bc[7];
  b.apply(x, bx);
  b.apply(y, by);
  b.apply(combo, bc);
  for (int i = 0; i < 7; ++i) {
    CHECK(std::fabs(bc[i] - (a * bx[i] + c * by[i])) <= 1e-5f);
  }
}

TEST_CASE("density activation") {
  const DensityActivation plain{0.f};
  CHECK(plain(0.f) == doctest::Approx(std::log(2.0)));
  CHECK(plain(40.f) == doctest::Approx(40.0).epsilon(1e-6));

  const DensityActivation shifted{-10.f};
  CHECK(shifted(0.f) == doctest::Approx(4.5399931e-5).epsilon(1e-4));

  // Monotone and nonnegative.
  float prev = -1.f;
  for (float f = -30.f; f <= 60.f; f += 0.75f) {
    const float v = shifted(f);
    CHECK(v >= 0.f);
    CHECK(v >= prev);
    prev = v;
  }
  // Gradient matches the logistic on both branches.
  CHECK(shifted.grad(10.f) == doctest::Approx(0.5));
  CHECK(shifted.grad(12.f) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  CHECK(shifted.grad(8.f) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
}

TEST_CASE("encode_direction") {
  float out[27];
  CHECK(encode_direction({0.f, 1.f, 0.f}, 0, out) == 3);
  CHECK(out[0] == 0.f);
  CHECK(out[1] == 1.f);
  CHECK(out[2] == 0.f);

  CHECK(encode_direction({1.f, 0.f, 0.f}, 1, out) == 9);
  const float expected[9] = {1, 0, 0, 0, 0, 0, -1, 1, 1};
  for (int i = 0; i < 9; ++i) CHECK(std::fabs(out[i] - expected[i]) <= 1e-6f);

  CHECK(encode_direction({0.f, 0.f, 1.f}, 4, out) == 27);
  CHECK(direction_encoding_dim(4) == 27);

  // Non-unit input is renormalized.
  float a[9], b[9];
  encode_direction({2.f, 0.f, 0.f}, 1, a);
  encode_direction({1.f, 0.f, 0.f}, 1, b);
  for (int i = 0; i < 9; ++i) CHECK(a[i] == doctest::Approx(b[i]));
}

TEST_CASE("decode_color with zero weights is mid-gray") {
  ColorMlp mlp = ColorMlp::create(4, 1, 8);
  const std::vector<float> f(4, 3.f);
  const Vec3 c = decode_color(mlp, f.data(), {0.f, 0.f, -1.f});
  CHECK(c.x == doctest::Approx(0.5));
  CHECK(c.y == doctest::Approx(0.5));
  CHECK(c.z == doctest::Approx(0.5));
}

TEST_CASE("decode_color matches the naive double forward") {
  std::mt19937 rng(21);
  ColorMlp mlp = ColorMlp::create(6, 2, 16);
  mlp.init_fan_in(rng);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> f(6);
    for (float& v : f) v = u(rng);
    const Vec3 dir = normalized(Vec3{u(rng), u(rng), u(rng) + 2.f});
    std::vector<float> enc(size_t(direction_encoding_dim(mlp.n_freq)), 0.f);
    encode_direction(dir, mlp.n_freq, enc.data());

    const Vec3 got = decode_color(mlp, f.data(), dir);
    const Vec3d want = oracles::naive_mlp_forward(mlp, f, enc);
    CHECK(std::fabs(double(got.x) - want.x) <= 1e-6);
    CHECK(std::fabs(double(got.y) - want.y) <= 1e-6);
    CHECK(std::fabs(double(got.z) - want.z) <= 1e-6);
    CHECK(got.x > 0.f);
    CHECK(got.x < 1.f);
    CHECK(got.y > 0.f);
    CHECK(got.y < 1.f);
    CHECK(got.z > 0.f);
    CHECK(got.z < 1.f);
  }
}

TEST_CASE("output depends on direction only through the encoding") {
  std::mt19937 rng(22);
  ColorMlp mlp = ColorMlp::create(5, 2, 16);
  mlp.init_fan_in(rng);
  const std::vector<float> f(5, 0.3f);
  const Vec3 d1{0.f, 0.f, 1.f};
  const Vec3 c1 = decode_color(mlp, f.data(), d1);
  const Vec3 c1_again = decode_color(mlp, f.data(), d1);
  CHECK(c1.x == c1_again.x);  // deterministic
  const Vec3 c2 = decode_color(mlp, f.data(), {1.f, 0.f, 0.f});
  CHECK(c1.x != c2.x);  // direction reaches the output
}

TEST_CASE("fan-in init keeps first-layer pre-activation variance near one") {
  std::mt19937 rng(23);
  ColorMlp mlp = ColorMlp::create(27, 4, 128);
  mlp.init_fan_in(rng);
  const int in_dim = mlp.input_dim();

  std::normal_distribution<float> unit(0.f, 1.f);
  std::vector<float> x(size_t(in_dim), 0.f);
  std::vector<float> pre(size_t(mlp.hidden), 0.f);
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (int s = 0; s < 10000 / 16; ++s) {
    for (float& v : x) v = unit(rng);
    mlp.l1.forward(x.data(), pre.data());
    for (int i = 0; i < 16; ++i) {  // a few units per draw keep this cheap
      sum += pre[size_t(i * 8)];
      sum_sq += double(pre[size_t(i * 8)]) * pre[size_t(i * 8)];
      ++count;
    }
  }
  const double mean = sum / double(count);
  const double var = sum_sq / double(count) - mean * mean;
  CHECK(var >= 0.5);
  CHECK(var <= 2.0);
}
