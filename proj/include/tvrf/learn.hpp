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

#include <functional>
#include <span>
#include <vector>

#include "tvrf/cloud.hpp"
#include "tvrf/render.hpp"
#include "tvrf/scenes.hpp"

namespace tvrf {

struct ScaleSpec {
  float spacing = 0.4f;
  float edge = 0.6f;
  int start_res = 29;
  int end_res = 121;
  int m = 4;  // neighbors queried per sample at this scale
};

struct ModelSpec {
  std::vector<ScaleSpec> scales{{0.4f, 0.6f, 29, 121, 4},
                                {0.2f, 0.3f, 15, 61, 4},
                                {0.1f, 0.15f, 7, 31, 4}};
  int r_sigma = 16;
  int r_c = 48;
  int p = 27;
  int n_freq = 4;
  int hidden = 128;
  float density_shift = -10.f;
  float init_std = 0.2f;
  Aabb aabb;
  Vec3 background{1.f, 1.f, 1.f};
};

/// Distribute one cloud per scale around the geometry and initialize the
/// decoder. Deterministic for a given rng state.
Model build_model(const ModelSpec& spec, std::span<const Vec3> geometry, std::mt19937& rng);

struct TrainConfig {
  int steps = 30000;
  int batch_rays = 4096;
  float lr_vectors = 0.02f;
  float lr_networks = 0.001f;
  float alpha_l1 = 1e-5f;
  float beta1 = 0.9f;
  float beta2 = 0.99f;
  float adam_eps = 1e-8f;
  std::vector<int> upsample_steps{2000, 3000, 4000, 5500, 7000};
  float lr_decay = 0.1f;  // lr ends at lr_decay * initial
  uint64_t seed = 0;
  int log_every = 100;
  int checkpoint_every = 0;  // 0: no intermediate checkpoints
  int threads = 1;
  bool jitter = true;
  float step_size = 0.f;  // ray-march step; 0 picks aabb diagonal / 512
  float stop_transmittance = 1e-4f;
  bool random_background = false;
};

struct LossReport {
  double render_loss = 0.0;
  double l1_loss = 0.0;
  double total = 0.0;
  double psnr = 0.0;
};

/// Mean over rays of the squared L2 color error.
double render_loss(std::span<const Vec3> pred, std::span<const Vec3> truth);
/// Mean absolute value over every density factor entry of the model.
double l1_density_loss(const Model& model);
inline double total_loss(double render, double l1, double alpha) { return render + alpha * l1; }
/// Number of density factor entries (the N of the L1 normalization).
long density_entry_count(const Model& model);

/// One gradient buffer per trainable array, shapes mirroring the model.
struct GradientStore {
  struct TensorGrad {
    std::array<std::vector<float>, 3> axes;
  };
  std::vector<std::vector<TensorGrad>> factors;  // [scale][tensor]
  std::vector<std::vector<float>> appearance;    // [scale], p x r_c
  std::vector<float> w1, b1, w2, b2, w3, b3;

  static GradientStore like(const Model& model);
  void zero();
  void accumulate(const GradientStore& other);
  float max_abs() const;
};

struct BackwardOptions {
  float stop_transmittance = 1e-4f;
  int threads = 1;
};

/// Forward with per-ray recording, then reverse-mode accumulation of
/// dL/dtheta into `grads` (added, not overwritten) for the full objective
/// including the alpha-weighted L1 term.
LossReport backward(const Model& model, const RayBatch& batch, float alpha_l1,
                    GradientStore& grads, const BackwardOptions& options = {});

/// Adam moments per trainable array plus per-group step counters
/// (vectors vs networks).
struct AdamState {
  struct Moments {
    std::vector<float> m, v;
  };
  struct TensorMoments {
    std::array<Moments, 3> axes;
  };
  std::vector<std::vector<TensorMoments>> factors;
  std::vector<Moments> appearance;
  Moments w1, b1, w2, b2, w3, b3;
  long t_vectors = 0;
  long t_networks = 0;

  static AdamState like(const Model& model);
};

/// One Adam update over both parameter groups at the given learning rates.
void adam_apply(Model& model, const GradientStore& grads, AdamState& state,
                const TrainConfig& config, float lr_vectors, float lr_networks);

/// Exponential decay from lr0 to lr_decay*lr0 across the run.
float scheduled_lr(float lr0, float decay, int step, int total_steps);

/// Resolution after each upsampling event: geometric interpolation between
/// start and end rounded to the nearest odd integer (keeping a center knot),
/// non-decreasing, exact at the final event.
std::vector<int> upsample_stage_resolutions(int start, int end, int n_events);

struct UpsampleSchedule {
  std::vector<int> event_steps;
  std::vector<std::vector<int>> stages;  // [scale][event]

  static UpsampleSchedule build(const ModelSpec& spec, const TrainConfig& config);
};

/// Advances factor resolutions when `step` is a scheduled event; Adam moments
/// are resampled alongside the parameters. Returns true if anything changed.
bool maybe_upsample(Model& model, AdamState* state, int step,
                    const UpsampleSchedule& schedule);

/// Assemble one batch of training rays: random (view, pixel) draws from
/// `rng`, ray/AABB clip, stratified sampling with optional jitter keyed on
/// (seed, step_index, ray index).
RayBatch make_training_batch(const SceneDataset& dataset, const Aabb& aabb, Vec3 background,
                             const OccupancyGrid* occupancy, int n_rays, float step_size,
                             bool jitter, bool random_background, uint64_t seed,
                             int step_index, std::mt19937& rng);

struct MetricsRow {
  int step = 0;
  double loss = 0, render_loss = 0, l1_loss = 0, psnr = 0;
  double lr_vectors = 0, lr_networks = 0;
  long n_params = 0;
};

struct TrainHooks {
  std::function<void(const MetricsRow&)> on_log;
  std::function<void(int step, const Model&)> on_checkpoint;
};

struct TrainResult {
  Model model;
  std::vector<MetricsRow> metrics;
};

/// The full optimization loop; throws std::runtime_error with step/lr/grad
/// diagnostics if the loss goes non-finite.
TrainResult train(const ModelSpec& spec, const TrainConfig& config,
                  const SceneDataset& dataset, std::span<const Vec3> geometry,
                  const OccupancyGrid* occupancy, const TrainHooks& hooks = {});

}  // namespace tvrf
