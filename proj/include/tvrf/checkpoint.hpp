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

#include <filesystem>
#include <stdexcept>

#include "tvrf/config.hpp"
#include "tvrf/learn.hpp"

namespace tvrf {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Single binary file: magic+version, config echo, clouds with factors,
/// decoder parameters, the sampling occupancy grid, optional optimizer
/// state, and the training step. Save -> load -> save is byte-identical.
struct Checkpoint {
  RunConfig config;
  Model model;
  OccupancyGrid occupancy;  // resolution 0 when absent
  bool has_optimizer = false;
  AdamState optimizer;
  uint32_t step = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tvrf
