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

#include <cstddef>

// Arithmetic inner loops shared by the whole pipeline. Every operation has a
// scalar reference implementation and, on x86-64, an AVX2/FMA variant. The
// dispatch table is resolved once at startup from cpuid; tests can pin a
// backend to compare the two bit streams against each other.

namespace tvrf::kernels {

enum class Backend { kScalar = 0, kAvx2 = 1 };

struct Ops {
  // out[i] = lo[i] + t * (hi[i] - lo[i])
  void (*lerp_rows)(const float* lo, const float* hi, float t, float* out, size_t n);
  // out[i] = a[i] * b[i] * c[i]
  void (*mul3)(const float* a, const float* b, const float* c, float* out, size_t n);
  // y[i] += s * x[i]
  void (*axpy)(float s, const float* x, float* y, size_t n);
  float (*dot)(const float* a, const float* b, size_t n);
  float (*sum)(const float* x, size_t n);
  float (*abs_sum)(const float* x, size_t n);
  // out = W x + bias over the first `cols` entries of each row; rows are
  // `row_stride` floats apart (row_stride == cols for a dense matrix).
  // bias may be null.
  void (*matvec)(const float* w, size_t row_stride, const float* x, const float* bias,
                 float* out, size_t rows, size_t cols);
  // dx[j] += sum_i W[i][j] * g[i]
  void (*matvec_t_accum)(const float* w, size_t row_stride, const float* g, float* dx,
                         size_t rows, size_t cols);
  // dW[i][j] += g[i] * x[j]
  void (*outer_accum)(const float* g, const float* x, float* dw, size_t row_stride,
                      size_t rows, size_t cols);
  // y[i] += s * sign(x[i]), sign(0) = 0
  void (*sign_axpy)(float s, const float* x, float* y, size_t n);
  // Adam with bias correction folded into c1 = 1/(1-b1^t), c2 = 1/(1-b2^t).
  void (*adam_step)(float* p, const float* g, float* m, float* v, size_t n,
                    float lr, float beta1, float beta2, float eps,
                    float c1, float c2);
};

namespace scalar {
extern const Ops ops;
}

#if TVRF_HAVE_AVX2
namespace avx2 {
extern const Ops ops;
}
#endif

/// Table currently routed to; resolved from cpuid on first use.
const Ops& ops();

Backend active_backend();
bool backend_supported(Backend b);
/// Pin the dispatch (tests). Throws std::runtime_error if unsupported here.
void force_backend(Backend b);
const char* backend_name(Backend b);

// Convenience forwarders through the active table.
inline void lerp_rows(const float* lo, const float* hi, float t, float* out, size_t n) {
  ops().lerp_rows(lo, hi, t, out, n);
}
inline void mul3(const float* a, const float* b, const float* c, float* out, size_t n) {
  ops().mul3(a, b, c, out, n);
}
inline void axpy(float s, const float* x, float* y, size_t n) { ops().axpy(s, x, y, n); }
inline float dot(const float* a, const float* b, size_t n) { return ops().dot(a, b, n); }
inline float sum(const float* x, size_t n) { return ops().sum(x, n); }
inline float abs_sum(const float* x, size_t n) { return ops().abs_sum(x, n); }
inline void matvec(const float* w, const float* x, const float* bias, float* out,
                   size_t rows, size_t cols) {
  ops().matvec(w, cols, x, bias, out, rows, cols);
}
inline void matvec(const float* w, size_t row_stride, const float* x, const float* bias,
                   float* out, size_t rows, size_t cols) {
  ops().matvec(w, row_stride, x, bias, out, rows, cols);
}
inline void matvec_t_accum(const float* w, const float* g, float* dx, size_t rows,
                           size_t cols) {
  ops().matvec_t_accum(w, cols, g, dx, rows, cols);
}
inline void matvec_t_accum(const float* w, size_t row_stride, const float* g, float* dx,
                           size_t rows, size_t cols) {
  ops().matvec_t_accum(w, row_stride, g, dx, rows, cols);
}
inline void outer_accum(const float* g, const float* x, float* dw, size_t rows,
                        size_t cols) {
  ops().outer_accum(g, x, dw, cols, rows, cols);
}
inline void outer_accum(const float* g, const float* x, float* dw, size_t row_stride,
                        size_t rows, size_t cols) {
  ops().outer_accum(g, x, dw, row_stride, rows, cols);
}
inline void sign_axpy(float s, const float* x, float* y, size_t n) {
  ops().sign_axpy(s, x, y, n);
}
inline void adam_step(float* p, const float* g, float* m, float* v, size_t n, float lr,
                      float beta1, float beta2, float eps, float c1, float c2) {
  ops().adam_step(p, g, m, v, n, lr, beta1, beta2, eps, c1, c2);
}

}  // namespace tvrf::kernels
