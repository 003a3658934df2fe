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

#include <random>
#include <vector>

#include "tvrf/vec.hpp"

namespace tvrf {

/// Per-scale shared appearance matrix: maps the R_c aggregated component
/// activations to a P-channel appearance feature. Bias-free linear map.
struct AppearanceMatrix {
  int p = 0;
  int r_c = 0;
  std::vector<float> w;  // row-major p x r_c

  static AppearanceMatrix create(int p, int r_c);
  void init_fan_in(std::mt19937& rng);
  void apply(const float* comps, float* out) const;
};

/// Shifted softplus; the shift keeps a freshly initialized field near
/// transparent.
struct DensityActivation {
  float shift = -10.f;

  float operator()(float f_sigma) const;
  /// d sigma / d f_sigma (the logistic of the shifted input).
  float grad(float f_sigma) const;
};

/// [d, sin(2^k pi d), cos(2^k pi d) | k=0..n_freq-1]; length 3 + 6*n_freq.
/// Non-unit directions are renormalized first.
int encode_direction(Vec3 d, int n_freq, float* out);
inline int direction_encoding_dim(int n_freq) { return 3 + 6 * n_freq; }

struct DenseLayer {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<float> w;  // row-major out_dim x in_dim
  std::vector<float> b;

  static DenseLayer create(int out_dim, int in_dim);
  void init_fan_in(std::mt19937& rng);
  void forward(const float* x, float* out) const;
};

/// Two ReLU hidden layers, sigmoid RGB output. Input is the P-channel
/// appearance feature concatenated with the encoded view direction.
struct ColorMlp {
  int p = 27;
  int n_freq = 4;
  int hidden = 128;
  DenseLayer l1, l2, l3;

  static ColorMlp create(int p, int n_freq, int hidden);
  void init_fan_in(std::mt19937& rng);
  int input_dim() const { return p + direction_encoding_dim(n_freq); }
  long param_count() const;

  /// Scratch for one forward/backward evaluation.
  struct Buffers {
    std::vector<float> input, h1, h2, pre_out;
    void resize(const ColorMlp& mlp);
  };

  /// f_color is the P-channel feature; dir_enc the precomputed encoding.
  /// Hidden activations are left in `buf` for the backward pass.
  Vec3 forward(const float* f_color, const float* dir_enc, Buffers& buf) const;
};

Vec3 decode_color(const ColorMlp& mlp, const float* f_color, Vec3 dir);

inline float sigmoid(float x) { return 1.f / (1.f + std::exp(-x)); }

}  // namespace tvrf
