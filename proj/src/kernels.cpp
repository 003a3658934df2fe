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

#include <stdexcept>
#include <string>

namespace tvrf::kernels {

namespace {

bool cpu_has_avx2() {
#if TVRF_HAVE_AVX2 && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() { return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar; }

Backend g_backend = detect();

const Ops& table_for(Backend b) {
#if TVRF_HAVE_AVX2
  if (b == Backend::kAvx2) return avx2::ops;
#endif
  (void)b;
  return scalar::ops;
}

}  // namespace

const Ops& ops() { return table_for(g_backend); }

Backend active_backend() { return g_backend; }

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::kScalar: return true;
    case Backend::kAvx2: return cpu_has_avx2();
  }
  return false;
}

void force_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::runtime_error(std::string("kernel backend not supported on this cpu: ") +
                             backend_name(b));
  }
  g_backend = b;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
  }
  return "?";
}

}  // namespace tvrf::kernels
