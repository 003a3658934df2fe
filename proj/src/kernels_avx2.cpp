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

#if TVRF_HAVE_AVX2

#include <immintrin.h>

#include <cmath>

namespace tvrf::kernels::avx2 {

namespace {

// Lane-order-stable horizontal reduce: (lo + hi) then pairwise.
inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
  return _mm_cvtss_f32(s);
}

void lerp_rows(const float* lo, const float* hi, float t, float* out, size_t n) {
  const __m256 vt = _mm256_set1_ps(t);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 a = _mm256_loadu_ps(lo + i);
    const __m256 b = _mm256_loadu_ps(hi + i);
    _mm256_storeu_ps(out + i, _mm256_fmadd_ps(vt, _mm256_sub_ps(b, a), a));
  }
  for (; i < n; ++i) out[i] = std::fma(t, hi[i] - lo[i], lo[i]);
}

void mul3(const float* a, const float* b, const float* c, float* out, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_mul_ps(_mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)),
                                   _mm256_loadu_ps(c + i));
    _mm256_storeu_ps(out + i, v);
  }
  for (; i < n; ++i) out[i] = a[i] * b[i] * c[i];
}

void axpy(float s, const float* x, float* y, size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vy = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(vs, _mm256_loadu_ps(x + i), vy));
  }
  for (; i < n; ++i) y[i] = std::fma(s, x[i], y[i]);
}

float dot(const float* a, const float* b, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  }
  float r = hsum(acc);
  for (; i < n; ++i) r = std::fma(a[i], b[i], r);
  return r;
}

float sum(const float* x, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float r = hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

float abs_sum(const float* x, size_t n) {
  const __m256 mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_add_ps(acc, _mm256_and_ps(mask, _mm256_loadu_ps(x + i)));
  }
  float r = hsum(acc);
  for (; i < n; ++i) r += std::fabs(x[i]);
  return r;
}

void matvec(const float* w, size_t row_stride, const float* x, const float* bias,
            float* out, size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    const float* row = w + r * row_stride;
    __m256 acc = _mm256_setzero_ps();
    size_t c = 0;
    for (; c + 8 <= cols; c += 8) {
      acc = _mm256_fmadd_ps(_mm256_loadu_ps(row + c), _mm256_loadu_ps(x + c), acc);
    }
    float v = hsum(acc);
    for (; c < cols; ++c) v = std::fma(row[c], x[c], v);
    out[r] = bias ? v + bias[r] : v;
  }
}

void matvec_t_accum(const float* w, size_t row_stride, const float* g, float* dx,
                    size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    axpy(g[r], w + r * row_stride, dx, cols);
  }
}

void outer_accum(const float* g, const float* x, float* dw, size_t row_stride,
                 size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    axpy(g[r], x, dw + r * row_stride, cols);
  }
}

void sign_axpy(float s, const float* x, float* y, size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vx = _mm256_loadu_ps(x + i);
    const __m256 pos = _mm256_and_ps(_mm256_cmp_ps(vx, zero, _CMP_GT_OQ), vs);
    const __m256 neg = _mm256_and_ps(_mm256_cmp_ps(vx, zero, _CMP_LT_OQ), vs);
    const __m256 vy = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(y + i, _mm256_sub_ps(_mm256_add_ps(vy, pos), neg));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.f) y[i] += s;
    else if (x[i] < 0.f) y[i] -= s;
  }
}

void adam_step(float* p, const float* g, float* m, float* v, size_t n, float lr,
               float beta1, float beta2, float eps, float c1, float c2) {
  const __m256 vb1 = _mm256_set1_ps(beta1);
  const __m256 vb1c = _mm256_set1_ps(1.f - beta1);
  const __m256 vb2 = _mm256_set1_ps(beta2);
  const __m256 vb2c = _mm256_set1_ps(1.f - beta2);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 veps = _mm256_set1_ps(eps);
  const __m256 vc1 = _mm256_set1_ps(c1);
  const __m256 vc2 = _mm256_set1_ps(c2);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vg = _mm256_loadu_ps(g + i);
    __m256 vm = _mm256_loadu_ps(m + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    vm = _mm256_fmadd_ps(vb1c, vg, _mm256_mul_ps(vb1, vm));
    vv = _mm256_fmadd_ps(vb2c, _mm256_mul_ps(vg, vg), _mm256_mul_ps(vb2, vv));
    _mm256_storeu_ps(m + i, vm);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(vm, vc1);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vv, vc2)), veps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

}  // namespace

const Ops ops = {
    lerp_rows, mul3,        axpy,      dot,       sum,      abs_sum,
    matvec,    matvec_t_accum, outer_accum, sign_axpy, adam_step,
};

}  // namespace tvrf::kernels::avx2

#endif  // TVRF_HAVE_AVX2
