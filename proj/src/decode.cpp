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

#include "tvrf/decode.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tvrf/kernels.hpp"

namespace tvrf {

AppearanceMatrix AppearanceMatrix::create(int p, int r_c) {
  if (p < 1 || r_c < 1) throw std::invalid_argument("appearance matrix dims must be >= 1");
  AppearanceMatrix m;
  m.p = p;
  m.r_c = r_c;
  m.w.assign(size_t(p) * size_t(r_c), 0.f);
  return m;
}

void AppearanceMatrix::init_fan_in(std::mt19937& rng) {
  std::normal_distribution<float> dist(0.f, 1.f / std::sqrt(float(r_c)));
  for (float& v : w) v = dist(rng);
}

void AppearanceMatrix::apply(const float* comps, float* out) const {
  kernels::matvec(w.data(), comps, nullptr, out, size_t(p), size_t(r_c));
}

float DensityActivation::operator()(float f_sigma) const {
  const float x = f_sigma + shift;
  if (x > 20.f) return x;
  return std::log1p(std::exp(x));
}

float DensityActivation::grad(float f_sigma) const {
  const float x = f_sigma + shift;
  if (x > 0.f) return 1.f / (1.f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.f + e);
}

int encode_direction(Vec3 d, int n_freq, float* out) {
  const float len = length(d);
  if (std::fabs(len - 1.f) > 1e-4f) d = d / len;
  out[0] = d.x;
  out[1] = d.y;
  out[2] = d.z;
  float freq = std::numbers::pi_v<float>;
  int o = 3;
  for (int k = 0; k < n_freq; ++k) {
    for (int a = 0; a < 3; ++a) out[o + a] = std::sin(freq * d[a]);
    for (int a = 0; a < 3; ++a) out[o + 3 + a] = std::cos(freq * d[a]);
    o += 6;
    freq *= 2.f;
  }
  return o;
}

DenseLayer DenseLayer::create(int out_dim, int in_dim) {
  DenseLayer l;
  l.out_dim = out_dim;
  l.in_dim = in_dim;
  l.w.assign(size_t(out_dim) * size_t(in_dim), 0.f);
  l.b.assign(size_t(out_dim), 0.f);
  return l;
}

void DenseLayer::init_fan_in(std::mt19937& rng) {
  std::normal_distribution<float> dist(0.f, 1.f / std::sqrt(float(in_dim)));
  for (float& v : w) v = dist(rng);
  for (float& v : b) v = 0.f;
}

void DenseLayer::forward(const float* x, float* out) const {
  kernels::matvec(w.data(), x, b.data(), out, size_t(out_dim), size_t(in_dim));
}

ColorMlp ColorMlp::create(int p, int n_freq, int hidden) {
  ColorMlp mlp;
  mlp.p = p;
  mlp.n_freq = n_freq;
  mlp.hidden = hidden;
  mlp.l1 = DenseLayer::create(hidden, mlp.input_dim());
  mlp.l2 = DenseLayer::create(hidden, hidden);
  mlp.l3 = DenseLayer::create(3, hidden);
  return mlp;
}

void ColorMlp::init_fan_in(std::mt19937& rng) {
  l1.init_fan_in(rng);
  l2.init_fan_in(rng);
  l3.init_fan_in(rng);
}

long ColorMlp::param_count() const {
  auto layer = [](const DenseLayer& l) {
    return long(l.w.size()) + long(l.b.size());
  };
  return layer(l1) + layer(l2) + layer(l3);
}

void ColorMlp::Buffers::resize(const ColorMlp& mlp) {
  input.resize(size_t(mlp.input_dim()));
  h1.resize(size_t(mlp.hidden));
  h2.resize(size_t(mlp.hidden));
  pre_out.resize(3);
}

Vec3 ColorMlp::forward(const float* f_color, const float* dir_enc, Buffers& buf) const {
  const int enc_dim = direction_encoding_dim(n_freq);
  std::copy(f_color, f_color + p, buf.input.begin());
  std::copy(dir_enc, dir_enc + enc_dim, buf.input.begin() + p);
  l1.forward(buf.input.data(), buf.h1.data());
  for (float& v : buf.h1) v = v > 0.f ? v : 0.f;
  l2.forward(buf.h1.data(), buf.h2.data());
  for (float& v : buf.h2) v = v > 0.f ? v : 0.f;
  l3.forward(buf.h2.data(), buf.pre_out.data());
  return {sigmoid(buf.pre_out[0]), sigmoid(buf.pre_out[1]), sigmoid(buf.pre_out[2])};
}

Vec3 decode_color(const ColorMlp& mlp, const float* f_color, Vec3 dir) {
  std::vector<float> enc(size_t(direction_encoding_dim(mlp.n_freq)));
  encode_direction(dir, mlp.n_freq, enc.data());
  ColorMlp::Buffers buf;
  buf.resize(mlp);
  return mlp.forward(f_color, enc.data(), buf);
}

}  // namespace tvrf
