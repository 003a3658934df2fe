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
#include <span>
#include <string>

#include <json.hpp>

#include "tvrf/learn.hpp"
#include "tvrf/scenes.hpp"

namespace tvrf {

/// One JSON document configures a whole run. Unknown keys are rejected with
/// the offending dotted path named; `--set path=value` overrides individual
/// entries, where assigning an integer to an array truncates it to that many
/// leading elements (e.g. `--set model.scales=2`).
struct RunConfig {
  uint64_t seed = 0;
  int threads = 1;

  Aabb aabb{{-1.f, -1.f, -1.f}, {1.f, 1.f, 1.f}};
  Vec3 background{1.f, 1.f, 1.f};

  std::string dataset_dir;
  std::string geometry_file;
  std::string output_dir = "out";

  ModelSpec model;

  float step_divisor = 512.f;  // march step = aabb diagonal / divisor
  float stop_transmittance = 1e-4f;

  TrainConfig train;
  CoarseConfig coarse;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  /// Parse a config file, then apply overrides; every stage re-validates.
  static RunConfig load(const std::filesystem::path& path,
                        std::span<const std::string> overrides);
  static RunConfig from_json_text(const std::string& text,
                                  std::span<const std::string> overrides = {});

  /// Model spec with the scene box and background folded in.
  ModelSpec model_spec() const;
  /// Train config with seed, threads and march step folded in.
  TrainConfig train_config() const;
  float march_step() const { return aabb.diagonal() / step_divisor; }
};

/// Rejects keys that do not exist in the default-config schema; throws with
/// the dotted path of the first offender.
void validate_config_keys(const nlohmann::json& input);

/// Applies one `path=value` override in place.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace tvrf
