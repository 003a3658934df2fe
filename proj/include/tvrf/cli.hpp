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

#include <vector>

#include "tvrf/cloud.hpp"

namespace tvrf {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;      // generic / non-finite loss
inline constexpr int kExitMissingInput = 2;  // dataset, geometry or config path
inline constexpr int kExitBadCheckpoint = 3;
inline constexpr int kExitDimensionMismatch = 4;

struct InspectReport {
  struct ScaleRow {
    int tensors = 0;
    long factor_params = 0;
  };
  std::vector<ScaleRow> scales;
  long vector_params = 0;
  long appearance_params = 0;
  long mlp_params = 0;
  long total = 0;
};

InspectReport inspect_model(const Model& model);

/// Entry point behind main(); returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace tvrf
