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

#include "tvrf/config.hpp"

#include <fstream>
#include <stdexcept>

namespace tvrf {

namespace {

using nlohmann::json;

json vec3_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const json& j) {
  return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()};
}

void check_keys(const json& input, const json& schema, const std::string& path) {
  if (input.is_object()) {
    if (!schema.is_object()) {
      throw std::runtime_error("config: unexpected object at " + (path.empty() ? "<root>" : path));
    }
    for (const auto& [key, value] : input.items()) {
      const std::string child = path.empty() ? key : path + "." + key;
      if (!schema.contains(key)) {
        throw std::runtime_error("config: unknown key '" + child + "'");
      }
      check_keys(value, schema[key], child);
    }
  } else if (input.is_array() && schema.is_array() && !schema.empty()) {
    for (size_t i = 0; i < input.size(); ++i) {
      check_keys(input[i], schema[0], path + "[" + std::to_string(i) + "]");
    }
  }
}

/// Recursive overlay of `patch` onto `base` (objects merged, rest replaced).
void merge(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

json parse_override_value(const std::string& text) {
  const json parsed = json::parse(text, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  return json(text);  // bare string
}

}  // namespace

json RunConfig::to_json() const {
  json scales = json::array();
  for (const ScaleSpec& s : model.scales) {
    scales.push_back({{"spacing", s.spacing},
                      {"edge", s.edge},
                      {"start_res", s.start_res},
                      {"end_res", s.end_res},
                      {"m", s.m}});
  }
  return json{
      {"seed", seed},
      {"threads", threads},
      {"scene",
       {{"aabb", json::array({vec3_json(aabb.min), vec3_json(aabb.max)})},
        {"background", vec3_json(background)}}},
      {"paths",
       {{"dataset", dataset_dir}, {"geometry", geometry_file}, {"output", output_dir}}},
      {"model",
       {{"scales", scales},
        {"r_sigma", model.r_sigma},
        {"r_c", model.r_c},
        {"p", model.p},
        {"n_freq", model.n_freq},
        {"hidden", model.hidden},
        {"density_shift", model.density_shift},
        {"init_std", model.init_std}}},
      {"render",
       {{"step_divisor", step_divisor}, {"stop_transmittance", stop_transmittance}}},
      {"train",
       {{"steps", train.steps},
        {"batch_rays", train.batch_rays},
        {"lr_vectors", train.lr_vectors},
        {"lr_networks", train.lr_networks},
        {"alpha_l1", train.alpha_l1},
        {"beta1", train.beta1},
        {"beta2", train.beta2},
        {"adam_eps", train.adam_eps},
        {"upsample_steps", train.upsample_steps},
        {"lr_decay", train.lr_decay},
        {"log_every", train.log_every},
        {"checkpoint_every", train.checkpoint_every},
        {"jitter", train.jitter},
        {"random_background", train.random_background}}},
      {"coarse",
       {{"resolution", coarse.resolution},
        {"steps", coarse.steps},
        {"batch_rays", coarse.batch_rays},
        {"lr", coarse.lr},
        {"density_shift", coarse.density_shift},
        {"alpha_threshold", coarse.alpha_threshold},
        {"step_scale", coarse.step_scale}}}};
}

void validate_config_keys(const json& input) {
  check_keys(input, RunConfig{}.to_json(), "");
}

RunConfig RunConfig::from_json(const json& j) {
  validate_config_keys(j);
  json merged = RunConfig{}.to_json();
  merge(merged, j);

  RunConfig cfg;
  cfg.seed = merged["seed"].get<uint64_t>();
  cfg.threads = merged["threads"].get<int>();
  cfg.aabb.min = vec3_from(merged["scene"]["aabb"][0]);
  cfg.aabb.max = vec3_from(merged["scene"]["aabb"][1]);
  cfg.background = vec3_from(merged["scene"]["background"]);
  cfg.dataset_dir = merged["paths"]["dataset"].get<std::string>();
  cfg.geometry_file = merged["paths"]["geometry"].get<std::string>();
  cfg.output_dir = merged["paths"]["output"].get<std::string>();

  cfg.model.scales.clear();
  for (const auto& s : merged["model"]["scales"]) {
    ScaleSpec spec;
    spec.spacing = s.at("spacing").get<float>();
    spec.edge = s.at("edge").get<float>();
    spec.start_res = s.at("start_res").get<int>();
    spec.end_res = s.at("end_res").get<int>();
    spec.m = s.at("m").get<int>();
    cfg.model.scales.push_back(spec);
  }
  cfg.model.r_sigma = merged["model"]["r_sigma"].get<int>();
  cfg.model.r_c = merged["model"]["r_c"].get<int>();
  cfg.model.p = merged["model"]["p"].get<int>();
  cfg.model.n_freq = merged["model"]["n_freq"].get<int>();
  cfg.model.hidden = merged["model"]["hidden"].get<int>();
  cfg.model.density_shift = merged["model"]["density_shift"].get<float>();
  cfg.model.init_std = merged["model"]["init_std"].get<float>();

  cfg.step_divisor = merged["render"]["step_divisor"].get<float>();
  cfg.stop_transmittance = merged["render"]["stop_transmittance"].get<float>();

  const auto& t = merged["train"];
  cfg.train.steps = t["steps"].get<int>();
  cfg.train.batch_rays = t["batch_rays"].get<int>();
  cfg.train.lr_vectors = t["lr_vectors"].get<float>();
  cfg.train.lr_networks = t["lr_networks"].get<float>();
  cfg.train.alpha_l1 = t["alpha_l1"].get<float>();
  cfg.train.beta1 = t["beta1"].get<float>();
  cfg.train.beta2 = t["beta2"].get<float>();
  cfg.train.adam_eps = t["adam_eps"].get<float>();
  cfg.train.upsample_steps = t["upsample_steps"].get<std::vector<int>>();
  cfg.train.lr_decay = t["lr_decay"].get<float>();
  cfg.train.log_every = t["log_every"].get<int>();
  cfg.train.checkpoint_every = t["checkpoint_every"].get<int>();
  cfg.train.jitter = t["jitter"].get<bool>();
  cfg.train.random_background = t["random_background"].get<bool>();

  const auto& c = merged["coarse"];
  cfg.coarse.resolution = c["resolution"].get<int>();
  cfg.coarse.steps = c["steps"].get<int>();
  cfg.coarse.batch_rays = c["batch_rays"].get<int>();
  cfg.coarse.lr = c["lr"].get<float>();
  cfg.coarse.density_shift = c["density_shift"].get<float>();
  cfg.coarse.alpha_threshold = c["alpha_threshold"].get<float>();
  cfg.coarse.step_scale = c["step_scale"].get<float>();
  return cfg;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("override must look like path=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const json value = parse_override_value(assignment.substr(eq + 1));

  json* node = &config;
  size_t i = 0;
  std::string key;
  auto descend_key = [&](const std::string& k, bool last) -> bool {
    if (!node->is_object() || !node->contains(k)) {
      throw std::runtime_error("config: unknown key '" + path + "'");
    }
    if (last) {
      // Assigning an integer to an array truncates it.
      json& target = (*node)[k];
      if (target.is_array() && value.is_number_integer()) {
        const auto n = value.get<size_t>();
        if (n > target.size()) {
          throw std::runtime_error("config: cannot truncate " + k + " to " +
                                   std::to_string(n) + " elements");
        }
        json shrunk = json::array();
        for (size_t e = 0; e < n; ++e) shrunk.push_back(target[e]);
        target = shrunk;
      } else {
        target = value;
      }
      return true;
    }
    node = &(*node)[k];
    return false;
  };

  while (i < path.size()) {
    if (path[i] == '.') {
      ++i;
      continue;
    }
    if (path[i] == '[') {
      const auto close = path.find(']', i);
      if (close == std::string::npos) throw std::runtime_error("bad override path: " + path);
      const int idx = std::stoi(path.substr(i + 1, close - i - 1));
      if (!node->is_array() || idx < 0 || size_t(idx) >= node->size()) {
        throw std::runtime_error("config: index out of range in '" + path + "'");
      }
      const bool last = close + 1 >= path.size();
      if (last) {
        (*node)[idx] = value;
        return;
      }
      node = &(*node)[idx];
      i = close + 1;
      continue;
    }
    size_t end = i;
    while (end < path.size() && path[end] != '.' && path[end] != '[') ++end;
    key = path.substr(i, end - i);
    const bool last = end >= path.size();
    if (descend_key(key, last)) return;
    i = end;
  }
  throw std::runtime_error("bad override path: " + path);
}

RunConfig RunConfig::from_json_text(const std::string& text,
                                    std::span<const std::string> overrides) {
  json j = json::parse(text);
  validate_config_keys(j);
  json merged = RunConfig{}.to_json();
  merge(merged, j);
  for (const std::string& o : overrides) apply_override(merged, o);
  validate_config_keys(merged);
  return from_json(merged);
}

RunConfig RunConfig::load(const std::filesystem::path& path,
                          std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return from_json_text(text, overrides);
  } catch (const json::exception& e) {
    throw std::runtime_error("failed to parse config " + path.string() + ": " + e.what());
  }
}

ModelSpec RunConfig::model_spec() const {
  ModelSpec spec = model;
  spec.aabb = aabb;
  spec.background = background;
  return spec;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.threads = threads;
  t.step_size = march_step();
  t.stop_transmittance = stop_transmittance;
  return t;
}

}  // namespace tvrf
