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

#include "tvrf/kernels.hpp"

#include <cmath>

namespace tvrf::kernels::scalar {

namespace {

void lerp_rows(const float* lo, const float* hi, float t, float* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = lo[i] + t * (hi[i] - lo[i]);
}

void mul3(const float* a, const float* b, const float* c, float* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i] * c[i];
}

void axpy(float s, const float* x, float* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

float dot(const float* a, const float* b, size_t n) {
  float acc = 0.f;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

float sum(const float* x, size_t n) {
  float acc = 0.f;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

float abs_sum(const float* x, size_t n) {
  float acc = 0.f;
  for (size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
  return acc;
}

void matvec(const float* w, size_t row_stride, const float* x, const float* bias,
            float* out, size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    const float* row = w + r * row_stride;
    float acc = bias ? bias[r] : 0.f;
    for (size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

void matvec_t_accum(const float* w, size_t row_stride, const float* g, float* dx,
                    size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    const float* row = w + r * row_stride;
    const float gr = g[r];
    for (size_t c = 0; c < cols; ++c) dx[c] += gr * row[c];
  }
}

void outer_accum(const float* g, const float* x, float* dw, size_t row_stride,
                 size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    float* row = dw + r * row_stride;
    const float gr = g[r];
    for (size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

void sign_axpy(float s, const float* x, float* y, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (x[i] > 0.f) y[i] += s;
    else if (x[i] < 0.f) y[i] -= s;
  }
}

void adam_step(float* p, const float* g, float* m, float* v, size_t n, float lr,
               float beta1, float beta2, float eps, float c1, float c2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
    const float mhat = m[i] * c1;
    const float vhat = v[i] * c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Ops ops = {
    lerp_rows, mul3,        axpy,      dot,       sum,      abs_sum,
    matvec,    matvec_t_accum, outer_accum, sign_axpy, adam_step,
};

}  // namespace tvrf::kernels::scalar
