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

#include "tvrf/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tvrf/kernels.hpp"
#include "tvrf/rng.hpp"

namespace tvrf {

Model build_model(const ModelSpec& spec, std::span<const Vec3> geometry, std::mt19937& rng) {
  if (spec.scales.empty() || spec.scales.size() > 8) {
    throw std::invalid_argument("model needs between 1 and 8 scales");
  }
  Model model;
  model.aabb = spec.aabb;
  model.background = spec.background;
  model.r_sigma = spec.r_sigma;
  model.r_c = spec.r_c;
  model.neighbor_count = spec.scales.front().m;

  for (const ScaleSpec& s : spec.scales) {
    if (s.edge <= s.spacing) {
      throw std::invalid_argument("tensor edge must exceed lattice spacing");
    }
    model.scales.push_back(distribute(geometry, spec.aabb.min, s.spacing, s.edge,
                                      {s.start_res, s.start_res, s.start_res}, spec.r_sigma,
                                      spec.r_c, s.m, rng, spec.init_std));
  }
  for (size_t i = 0; i < spec.scales.size(); ++i) {
    AppearanceMatrix b = AppearanceMatrix::create(spec.p, spec.r_c);
    b.init_fan_in(rng);
    model.decoder.appearance.push_back(std::move(b));
  }
  model.decoder.mlp = ColorMlp::create(spec.p, spec.n_freq, spec.hidden);
  model.decoder.mlp.init_fan_in(rng);
  model.decoder.activation.shift = spec.density_shift;
  return model;
}

double render_loss(std::span<const Vec3> pred, std::span<const Vec3> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("batch size mismatch");
  if (pred.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const Vec3 d = pred[i] - truth[i];
    acc += double(d.x) * d.x + double(d.y) * d.y + double(d.z) * d.z;
  }
  return acc / double(pred.size());
}

long density_entry_count(const Model& model) {
  long n = 0;
  for (const ScaleCloud& cloud : model.scales) {
    for (const TriVectorTensor& t : cloud.tensors) {
      n += long(t.r_sigma) * (t.res[0] + t.res[1] + t.res[2]);
    }
  }
  return n;
}

double l1_density_loss(const Model& model) {
  double acc = 0.0;
  for (const ScaleCloud& cloud : model.scales) {
    for (const TriVectorTensor& t : cloud.tensors) {
      const int rank = t.rank();
      for (int a = 0; a < 3; ++a) {
        const float* data = t.axes[a].data();
        for (int i = 0; i < t.res[a]; ++i) {
          acc += kernels::abs_sum(data + size_t(i) * rank, size_t(t.r_sigma));
        }
      }
    }
  }
  const long n = density_entry_count(model);
  return n > 0 ? acc / double(n) : 0.0;
}

GradientStore GradientStore::like(const Model& model) {
  GradientStore g;
  g.factors.resize(model.scales.size());
  for (size_t s = 0; s < model.scales.size(); ++s) {
    g.factors[s].resize(model.scales[s].tensors.size());
    for (size_t t = 0; t < model.scales[s].tensors.size(); ++t) {
      for (int a = 0; a < 3; ++a) {
        g.factors[s][t].axes[a].assign(model.scales[s].tensors[t].axes[a].size(), 0.f);
      }
    }
  }
  g.appearance.resize(model.decoder.appearance.size());
  for (size_t s = 0; s < g.appearance.size(); ++s) {
    g.appearance[s].assign(model.decoder.appearance[s].w.size(), 0.f);
  }
  const ColorMlp& mlp = model.decoder.mlp;
  g.w1.assign(mlp.l1.w.size(), 0.f);
  g.b1.assign(mlp.l1.b.size(), 0.f);
  g.w2.assign(mlp.l2.w.size(), 0.f);
  g.b2.assign(mlp.l2.b.size(), 0.f);
  g.w3.assign(mlp.l3.w.size(), 0.f);
  g.b3.assign(mlp.l3.b.size(), 0.f);
  return g;
}

void GradientStore::zero() {
  auto clear = [](std::vector<float>& v) { std::fill(v.begin(), v.end(), 0.f); };
  for (auto& scale : factors) {
    for (auto& t : scale) {
      for (auto& axis : t.axes) clear(axis);
    }
  }
  for (auto& b : appearance) clear(b);
  clear(w1);
  clear(b1);
  clear(w2);
  clear(b2);
  clear(w3);
  clear(b3);
}

void GradientStore::accumulate(const GradientStore& other) {
  auto add = [](std::vector<float>& dst, const std::vector<float>& src) {
    kernels::axpy(1.f, src.data(), dst.data(), dst.size());
  };
  for (size_t s = 0; s < factors.size(); ++s) {
    for (size_t t = 0; t < factors[s].size(); ++t) {
      for (int a = 0; a < 3; ++a) add(factors[s][t].axes[a], other.factors[s][t].axes[a]);
    }
  }
  for (size_t s = 0; s < appearance.size(); ++s) add(appearance[s], other.appearance[s]);
  add(w1, other.w1);
  add(b1, other.b1);
  add(w2, other.w2);
  add(b2, other.b2);
  add(w3, other.w3);
  add(b3, other.b3);
}

float GradientStore::max_abs() const {
  float m = 0.f;
  auto scan = [&m](const std::vector<float>& v) {
    for (float x : v) m = std::max(m, std::fabs(x));
  };
  for (const auto& scale : factors) {
    for (const auto& t : scale) {
      for (const auto& axis : t.axes) scan(axis);
    }
  }
  for (const auto& b : appearance) scan(b);
  scan(w1);
  scan(b1);
  scan(w2);
  scan(b2);
  scan(w3);
  scan(b3);
  return m;
}

namespace {

/// Per-thread recording arena for one ray's forward pass.
struct RayWorkspace {
  int n_scales = 0, rank = 0, r_sigma = 0, r_c = 0, p = 0;
  int hidden = 0, enc_dim = 0, mmax = 0;
  int q = 0;           // recorded samples
  double final_t = 1.0;

  std::vector<float> enc, dir_part;
  std::vector<float> f_sigma;
  std::vector<double> alpha, trans;
  std::vector<float> delta;
  std::vector<Vec3> color;
  std::vector<int> n_cover;
  std::vector<uint8_t> covered;
  std::vector<int> n_hits;
  std::vector<NeighborHit> hits;
  std::vector<AxisLerp> lerps;
  std::vector<float> rows;
  std::vector<float> comps;
  std::vector<float> fc;
  std::vector<float> h1, h2;

  std::vector<float> prod, dprod, tmp;
  std::vector<float> scale_color, dcomps, dfc, dfc_s, dh1, dh2;
  float pre3[3];

  void init(const Model& model) {
    n_scales = int(model.scales.size());
    r_sigma = model.r_sigma;
    r_c = model.r_c;
    rank = r_sigma + r_c;
    p = model.feature_dim();
    hidden = model.decoder.mlp.hidden;
    enc_dim = direction_encoding_dim(model.decoder.mlp.n_freq);
    mmax = 1;
    for (const auto& s : model.scales) {
      mmax = std::max(mmax, std::min(s.neighbor_count, kMaxNeighbors));
    }
    enc.resize(size_t(enc_dim));
    dir_part.resize(size_t(hidden));
    prod.resize(size_t(rank));
    dprod.resize(size_t(rank));
    tmp.resize(size_t(rank));
    scale_color.resize(size_t(p));
    dcomps.resize(size_t(r_c));
    dfc.resize(size_t(p));
    dfc_s.resize(size_t(p));
    dh1.resize(size_t(hidden));
    dh2.resize(size_t(hidden));
  }

  void ensure(int capacity) {
    if (int(f_sigma.size()) >= capacity) return;
    const size_t c = size_t(capacity);
    f_sigma.resize(c);
    alpha.resize(c);
    trans.resize(c);
    delta.resize(c);
    color.resize(c);
    n_cover.resize(c);
    covered.resize(c * n_scales);
    n_hits.resize(c * n_scales);
    hits.resize(c * n_scales * mmax);
    lerps.resize(c * n_scales * mmax * 3);
    rows.resize(c * n_scales * mmax * 3 * rank);
    comps.resize(c * n_scales * r_c);
    fc.resize(c * p);
    h1.resize(c * hidden);
    h2.resize(c * hidden);
  }

  // Record indexing helpers.
  NeighborHit* hit_ptr(int qi, int si) { return hits.data() + (size_t(qi) * n_scales + si) * mmax; }
  AxisLerp* lerp_ptr(int qi, int si, int hi) {
    return lerps.data() + ((size_t(qi) * n_scales + si) * mmax + hi) * 3;
  }
  float* row_ptr(int qi, int si, int hi, int axis) {
    return rows.data() + (((size_t(qi) * n_scales + si) * mmax + hi) * 3 + axis) * rank;
  }
  float* comps_ptr(int qi, int si) { return comps.data() + (size_t(qi) * n_scales + si) * r_c; }
  float* fc_ptr(int qi) { return fc.data() + size_t(qi) * p; }
  float* h1_ptr(int qi) { return h1.data() + size_t(qi) * hidden; }
  float* h2_ptr(int qi) { return h2.data() + size_t(qi) * hidden; }
};

Vec3 forward_record(const Model& model, const RayBatch::Entry& entry,
                    std::span<const Sample> samples, float stop_transmittance,
                    RayWorkspace& ws) {
  ws.q = 0;
  ws.final_t = 1.0;
  if (!entry.ray.hits_aabb || samples.empty()) return entry.background;

  const ColorMlp& mlp = model.decoder.mlp;
  const int in_dim = mlp.input_dim();
  encode_direction(entry.ray.dir, mlp.n_freq, ws.enc.data());
  // Direction columns of layer 1 are constant along the ray.
  kernels::matvec(mlp.l1.w.data() + ws.p, size_t(in_dim), ws.enc.data(), mlp.l1.b.data(),
                  ws.dir_part.data(), size_t(ws.hidden), size_t(ws.enc_dim));

  Compositor comp;
  ws.ensure(int(samples.size()));
  for (const Sample& s : samples) {
    if (!comp.alive(stop_transmittance)) break;
    const int qi = ws.q;
    float* fcq = ws.fc_ptr(qi);
    std::fill(fcq, fcq + ws.p, 0.f);
    float fsig = 0.f;
    int ncov = 0;
    for (int si = 0; si < ws.n_scales; ++si) {
      const ScaleCloud& cloud = model.scales[size_t(si)];
      NeighborHit* hits = ws.hit_ptr(qi, si);
      const int m = std::min(cloud.neighbor_count, ws.mmax);
      const int n = query_neighbors(cloud, s.pos, m, hits);
      ws.n_hits[size_t(qi) * ws.n_scales + si] = n;
      ws.covered[size_t(qi) * ws.n_scales + si] = n > 0;
      if (n == 0) continue;

      float* comps_s = ws.comps_ptr(qi, si);
      std::fill(comps_s, comps_s + ws.r_c, 0.f);
      float fsig_s = 0.f;
      for (int h = 0; h < n; ++h) {
        const TriVectorTensor& tensor = cloud.tensors[size_t(hits[h].tensor)];
        const Vec3 g = tensor.to_grid_coord(s.pos);
        AxisLerp* lerps = ws.lerp_ptr(qi, si, h);
        for (int a = 0; a < 3; ++a) {
          lerps[a] = axis_lerp(tensor.res[a], g[a]);
          const float* base = tensor.axes[a].data() + size_t(lerps[a].i0) * ws.rank;
          kernels::lerp_rows(base, base + ws.rank, lerps[a].t, ws.row_ptr(qi, si, h, a),
                             size_t(ws.rank));
        }
        kernels::mul3(ws.row_ptr(qi, si, h, 0), ws.row_ptr(qi, si, h, 1),
                      ws.row_ptr(qi, si, h, 2), ws.prod.data(), size_t(ws.rank));
        fsig_s += hits[h].weight * kernels::sum(ws.prod.data(), size_t(ws.r_sigma));
        kernels::axpy(hits[h].weight, ws.prod.data() + ws.r_sigma, comps_s, size_t(ws.r_c));
      }
      model.decoder.appearance[size_t(si)].apply(comps_s, ws.scale_color.data());
      kernels::axpy(1.f, ws.scale_color.data(), fcq, size_t(ws.p));
      fsig += fsig_s;
      ++ncov;
    }
    if (ncov == 0) continue;  // empty space: the sample is skipped entirely
    if (ncov > 1) {
      const float inv = 1.f / float(ncov);
      fsig *= inv;
      for (int i = 0; i < ws.p; ++i) fcq[i] *= inv;
    }
    ws.f_sigma[size_t(qi)] = fsig;
    ws.n_cover[size_t(qi)] = ncov;

    const float sigma = model.decoder.activation(fsig);
    float* h1q = ws.h1_ptr(qi);
    float* h2q = ws.h2_ptr(qi);
    kernels::matvec(mlp.l1.w.data(), size_t(in_dim), fcq, ws.dir_part.data(), h1q,
                    size_t(ws.hidden), size_t(ws.p));
    for (int i = 0; i < ws.hidden; ++i) h1q[i] = h1q[i] > 0.f ? h1q[i] : 0.f;
    mlp.l2.forward(h1q, h2q);
    for (int i = 0; i < ws.hidden; ++i) h2q[i] = h2q[i] > 0.f ? h2q[i] : 0.f;
    mlp.l3.forward(h2q, ws.pre3);
    const Vec3 color{sigmoid(ws.pre3[0]), sigmoid(ws.pre3[1]), sigmoid(ws.pre3[2])};

    ws.delta[size_t(qi)] = s.delta;
    ws.color[size_t(qi)] = color;
    ws.trans[size_t(qi)] = comp.transmittance;
    ws.alpha[size_t(qi)] = -std::expm1(-double(sigma) * double(s.delta));
    comp.add(sigma, s.delta, color);
    ++ws.q;
  }
  ws.final_t = comp.transmittance;
  return comp.finish(entry.background);
}

void backward_ray(const Model& model, const RayBatch::Entry& entry, Vec3 dc,
                  RayWorkspace& ws, GradientStore& grads) {
  const ColorMlp& mlp = model.decoder.mlp;
  const int in_dim = mlp.input_dim();
  const Vec3d g{dc.x, dc.y, dc.z};

  Vec3d suffix{ws.final_t * entry.background.x, ws.final_t * entry.background.y,
               ws.final_t * entry.background.z};
  for (int qi = ws.q - 1; qi >= 0; --qi) {
    const double t_q = ws.trans[size_t(qi)];
    const double a_q = ws.alpha[size_t(qi)];
    const Vec3 color = ws.color[size_t(qi)];
    const double w_q = t_q * a_q;

    // Color gradient through the sigmoid.
    const Vec3 dpre{float(g.x * w_q) * color.x * (1.f - color.x),
                    float(g.y * w_q) * color.y * (1.f - color.y),
                    float(g.z * w_q) * color.z * (1.f - color.z)};

    // Density gradient: this sample's own alpha plus the shading it removes
    // from everything composited behind it.
    const double front =
        t_q * (1.0 - a_q) * (g.x * color.x + g.y * color.y + g.z * color.z);
    const double behind = g.x * suffix.x + g.y * suffix.y + g.z * suffix.z;
    const float dsigma = float(double(ws.delta[size_t(qi)]) * (front - behind));
    const float dfsig_total =
        dsigma * model.decoder.activation.grad(ws.f_sigma[size_t(qi)]);

    // MLP backward.
    const float* h1q = ws.h1_ptr(qi);
    const float* h2q = ws.h2_ptr(qi);
    const float dpre3[3] = {dpre.x, dpre.y, dpre.z};
    kernels::outer_accum(dpre3, h2q, grads.w3.data(), size_t(ws.hidden), 3, size_t(ws.hidden));
    kernels::axpy(1.f, dpre3, grads.b3.data(), 3);
    std::fill(ws.dh2.begin(), ws.dh2.end(), 0.f);
    kernels::matvec_t_accum(mlp.l3.w.data(), size_t(ws.hidden), dpre3, ws.dh2.data(), 3,
                            size_t(ws.hidden));
    for (int i = 0; i < ws.hidden; ++i) {
      if (h2q[i] <= 0.f) ws.dh2[size_t(i)] = 0.f;
    }
    kernels::outer_accum(ws.dh2.data(), h1q, grads.w2.data(), size_t(ws.hidden),
                         size_t(ws.hidden), size_t(ws.hidden));
    kernels::axpy(1.f, ws.dh2.data(), grads.b2.data(), size_t(ws.hidden));
    std::fill(ws.dh1.begin(), ws.dh1.end(), 0.f);
    kernels::matvec_t_accum(mlp.l2.w.data(), size_t(ws.hidden), ws.dh2.data(), ws.dh1.data(),
                            size_t(ws.hidden), size_t(ws.hidden));
    for (int i = 0; i < ws.hidden; ++i) {
      if (h1q[i] <= 0.f) ws.dh1[size_t(i)] = 0.f;
    }
    const float* fcq = ws.fc_ptr(qi);
    kernels::outer_accum(ws.dh1.data(), fcq, grads.w1.data(), size_t(in_dim),
                         size_t(ws.hidden), size_t(ws.p));
    kernels::outer_accum(ws.dh1.data(), ws.enc.data(), grads.w1.data() + ws.p, size_t(in_dim),
                         size_t(ws.hidden), size_t(ws.enc_dim));
    kernels::axpy(1.f, ws.dh1.data(), grads.b1.data(), size_t(ws.hidden));
    std::fill(ws.dfc.begin(), ws.dfc.end(), 0.f);
    kernels::matvec_t_accum(mlp.l1.w.data(), size_t(in_dim), ws.dh1.data(), ws.dfc.data(),
                            size_t(ws.hidden), size_t(ws.p));

    // Multi-scale mean.
    const float inv = 1.f / float(ws.n_cover[size_t(qi)]);
    const float dfsig = dfsig_total * inv;
    for (int i = 0; i < ws.p; ++i) ws.dfc_s[size_t(i)] = ws.dfc[size_t(i)] * inv;

    for (int si = 0; si < ws.n_scales; ++si) {
      if (!ws.covered[size_t(qi) * ws.n_scales + si]) continue;
      const ScaleCloud& cloud = model.scales[size_t(si)];
      const AppearanceMatrix& b = model.decoder.appearance[size_t(si)];
      const float* comps_s = ws.comps_ptr(qi, si);

      kernels::outer_accum(ws.dfc_s.data(), comps_s, grads.appearance[size_t(si)].data(),
                           size_t(ws.r_c), size_t(ws.p), size_t(ws.r_c));
      std::fill(ws.dcomps.begin(), ws.dcomps.end(), 0.f);
      kernels::matvec_t_accum(b.w.data(), size_t(ws.r_c), ws.dfc_s.data(), ws.dcomps.data(),
                              size_t(ws.p), size_t(ws.r_c));

      const int n = ws.n_hits[size_t(qi) * ws.n_scales + si];
      const NeighborHit* hits = ws.hit_ptr(qi, si);
      for (int h = 0; h < n; ++h) {
        const float w = hits[h].weight;
        for (int r = 0; r < ws.r_sigma; ++r) ws.dprod[size_t(r)] = w * dfsig;
        for (int r = 0; r < ws.r_c; ++r) {
          ws.dprod[size_t(ws.r_sigma + r)] = w * ws.dcomps[size_t(r)];
        }
        const AxisLerp* lerps = ws.lerp_ptr(qi, si, h);
        const float* rx = ws.row_ptr(qi, si, h, 0);
        const float* ry = ws.row_ptr(qi, si, h, 1);
        const float* rz = ws.row_ptr(qi, si, h, 2);
        auto& gaxes = grads.factors[size_t(si)][size_t(hits[h].tensor)].axes;
        const float* others[3][2] = {{ry, rz}, {rx, rz}, {rx, ry}};
        for (int a = 0; a < 3; ++a) {
          kernels::mul3(ws.dprod.data(), others[a][0], others[a][1], ws.tmp.data(),
                        size_t(ws.rank));
          float* gax = gaxes[a].data() + size_t(lerps[a].i0) * ws.rank;
          kernels::axpy(1.f - lerps[a].t, ws.tmp.data(), gax, size_t(ws.rank));
          kernels::axpy(lerps[a].t, ws.tmp.data(), gax + ws.rank, size_t(ws.rank));
        }
      }
    }

    suffix.x += w_q * color.x;
    suffix.y += w_q * color.y;
    suffix.z += w_q * color.z;
  }
}

struct RaySliceResult {
  double sq_error = 0.0;
};

RaySliceResult backward_slice(const Model& model, const RayBatch& batch, size_t begin,
                              size_t end, float stop_transmittance, size_t batch_size,
                              GradientStore& grads, RayWorkspace& ws) {
  RaySliceResult res;
  const float dscale = 2.f / float(batch_size);
  for (size_t i = begin; i < end; ++i) {
    const RayBatch::Entry& entry = batch.rays[i];
    const std::span<const Sample> samples(batch.samples.data() + entry.sample_begin,
                                          size_t(entry.sample_count));
    const Vec3 c = forward_record(model, entry, samples, stop_transmittance, ws);
    const Vec3 err = c - entry.truth;
    res.sq_error += double(err.x) * err.x + double(err.y) * err.y + double(err.z) * err.z;
    if (ws.q > 0) backward_ray(model, entry, err * dscale, ws, grads);
  }
  return res;
}

}  // namespace

LossReport backward(const Model& model, const RayBatch& batch, float alpha_l1,
                    GradientStore& grads, const BackwardOptions& options) {
  LossReport report;
  const size_t n_rays = batch.rays.size();
  if (n_rays > 0) {
    const int threads = std::clamp(options.threads, 1, int(n_rays));
    double sq_error = 0.0;
    if (threads == 1) {
      RayWorkspace ws;
      ws.init(model);
      sq_error = backward_slice(model, batch, 0, n_rays, options.stop_transmittance, n_rays,
                                grads, ws)
                     .sq_error;
    } else {
      std::vector<GradientStore> partial;
      partial.resize(size_t(threads));
      std::vector<RaySliceResult> results;
      results.resize(size_t(threads));
      std::vector<std::thread> pool;
      const size_t chunk = (n_rays + threads - 1) / size_t(threads);
      for (int t = 0; t < threads; ++t) {
        const size_t begin = size_t(t) * chunk;
        const size_t end = std::min(n_rays, begin + chunk);
        if (begin >= end) break;
        partial[size_t(t)] = GradientStore::like(model);
        pool.emplace_back([&, t, begin, end] {
          RayWorkspace ws;
          ws.init(model);
          results[size_t(t)] = backward_slice(model, batch, begin, end,
                                              options.stop_transmittance, n_rays,
                                              partial[size_t(t)], ws);
        });
      }
      for (auto& th : pool) th.join();
      // Fixed-order reduction keeps results independent of scheduling.
      for (size_t t = 0; t < pool.size(); ++t) {
        sq_error += results[t].sq_error;
        grads.accumulate(partial[t]);
      }
    }
    report.render_loss = sq_error / double(n_rays);
  }

  report.l1_loss = l1_density_loss(model);
  report.total = total_loss(report.render_loss, report.l1_loss, alpha_l1);
  const double mse = report.render_loss / 3.0;
  report.psnr = mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mse);

  if (alpha_l1 > 0.f) {
    const long n = density_entry_count(model);
    if (n > 0) {
      const float scale = alpha_l1 / float(n);
      for (size_t s = 0; s < model.scales.size(); ++s) {
        const auto& tensors = model.scales[s].tensors;
        for (size_t ti = 0; ti < tensors.size(); ++ti) {
          const TriVectorTensor& t = tensors[ti];
          const int rank = t.rank();
          for (int a = 0; a < 3; ++a) {
            const float* v = t.axes[a].data();
            float* gv = grads.factors[s][ti].axes[a].data();
            for (int i = 0; i < t.res[a]; ++i) {
              kernels::sign_axpy(scale, v + size_t(i) * rank, gv + size_t(i) * rank,
                                 size_t(t.r_sigma));
            }
          }
        }
      }
    }
  }
  return report;
}

AdamState AdamState::like(const Model& model) {
  AdamState st;
  auto init = [](Moments& m, size_t n) {
    m.m.assign(n, 0.f);
    m.v.assign(n, 0.f);
  };
  st.factors.resize(model.scales.size());
  for (size_t s = 0; s < model.scales.size(); ++s) {
    st.factors[s].resize(model.scales[s].tensors.size());
    for (size_t t = 0; t < model.scales[s].tensors.size(); ++t) {
      for (int a = 0; a < 3; ++a) {
        init(st.factors[s][t].axes[a], model.scales[s].tensors[t].axes[a].size());
      }
    }
  }
  st.appearance.resize(model.decoder.appearance.size());
  for (size_t s = 0; s < st.appearance.size(); ++s) {
    init(st.appearance[s], model.decoder.appearance[s].w.size());
  }
  const ColorMlp& mlp = model.decoder.mlp;
  init(st.w1, mlp.l1.w.size());
  init(st.b1, mlp.l1.b.size());
  init(st.w2, mlp.l2.w.size());
  init(st.b2, mlp.l2.b.size());
  init(st.w3, mlp.l3.w.size());
  init(st.b3, mlp.l3.b.size());
  return st;
}

float scheduled_lr(float lr0, float decay, int step, int total_steps) {
  if (total_steps <= 0 || decay <= 0.f) return lr0;
  return lr0 * std::pow(decay, float(step) / float(total_steps));
}

void adam_apply(Model& model, const GradientStore& grads, AdamState& state,
                const TrainConfig& config, float lr_vectors, float lr_networks) {
  ++state.t_vectors;
  ++state.t_networks;
  const float c1v = 1.f / (1.f - std::pow(config.beta1, float(state.t_vectors)));
  const float c2v = 1.f / (1.f - std::pow(config.beta2, float(state.t_vectors)));
  const float c1n = 1.f / (1.f - std::pow(config.beta1, float(state.t_networks)));
  const float c2n = 1.f / (1.f - std::pow(config.beta2, float(state.t_networks)));

  auto step = [&](std::vector<float>& p, const std::vector<float>& g, AdamState::Moments& m,
                  float lr, float c1, float c2) {
    kernels::adam_step(p.data(), g.data(), m.m.data(), m.v.data(), p.size(), lr, config.beta1,
                       config.beta2, config.adam_eps, c1, c2);
  };

  for (size_t s = 0; s < model.scales.size(); ++s) {
    auto& tensors = model.scales[s].tensors;
    for (size_t t = 0; t < tensors.size(); ++t) {
      for (int a = 0; a < 3; ++a) {
        step(tensors[t].axes[a], grads.factors[s][t].axes[a], state.factors[s][t].axes[a],
             lr_vectors, c1v, c2v);
      }
    }
  }
  for (size_t s = 0; s < model.decoder.appearance.size(); ++s) {
    step(model.decoder.appearance[s].w, grads.appearance[s], state.appearance[s], lr_networks,
         c1n, c2n);
  }
  ColorMlp& mlp = model.decoder.mlp;
  step(mlp.l1.w, grads.w1, state.w1, lr_networks, c1n, c2n);
  step(mlp.l1.b, grads.b1, state.b1, lr_networks, c1n, c2n);
  step(mlp.l2.w, grads.w2, state.w2, lr_networks, c1n, c2n);
  step(mlp.l2.b, grads.b2, state.b2, lr_networks, c1n, c2n);
  step(mlp.l3.w, grads.w3, state.w3, lr_networks, c1n, c2n);
  step(mlp.l3.b, grads.b3, state.b3, lr_networks, c1n, c2n);
}

std::vector<int> upsample_stage_resolutions(int start, int end, int n_events) {
  if (start < 2 || end < start) throw std::invalid_argument("bad resolution range");
  std::vector<int> stages(size_t(std::max(n_events, 0)));
  if (n_events <= 0) return stages;
  const double ratio = double(end) / double(start);
  int prev = start;
  for (int i = 1; i <= n_events; ++i) {
    int r;
    if (i == n_events) {
      r = end;
    } else {
      const double x = double(start) * std::pow(ratio, double(i) / double(n_events));
      const int f = int(std::floor(x));
      const int lo = (f % 2 != 0) ? f : f - 1;
      const int hi = lo + 2;
      r = (x - lo <= hi - x) ? lo : hi;
    }
    r = std::clamp(r, prev, end);
    stages[size_t(i - 1)] = r;
    prev = r;
  }
  return stages;
}

UpsampleSchedule UpsampleSchedule::build(const ModelSpec& spec, const TrainConfig& config) {
  UpsampleSchedule sched;
  sched.event_steps = config.upsample_steps;
  if (!std::is_sorted(sched.event_steps.begin(), sched.event_steps.end()) ||
      std::adjacent_find(sched.event_steps.begin(), sched.event_steps.end()) !=
          sched.event_steps.end()) {
    throw std::invalid_argument("upsample steps must be strictly increasing");
  }
  for (const ScaleSpec& s : spec.scales) {
    sched.stages.push_back(
        upsample_stage_resolutions(s.start_res, s.end_res, int(sched.event_steps.size())));
  }
  return sched;
}

bool maybe_upsample(Model& model, AdamState* state, int step,
                    const UpsampleSchedule& schedule) {
  const auto it =
      std::find(schedule.event_steps.begin(), schedule.event_steps.end(), step);
  if (it == schedule.event_steps.end()) return false;
  const size_t event = size_t(it - schedule.event_steps.begin());

  bool changed = false;
  for (size_t s = 0; s < model.scales.size(); ++s) {
    const int target = schedule.stages[s][event];
    auto& tensors = model.scales[s].tensors;
    for (size_t t = 0; t < tensors.size(); ++t) {
      TriVectorTensor& tensor = tensors[t];
      if (tensor.res[0] >= target && tensor.res[1] >= target && tensor.res[2] >= target) {
        continue;
      }
      const std::array<int, 3> old_res = tensor.res;
      const int rank = tensor.rank();
      tensor = tensor.upsampled({target, target, target});
      if (state) {
        for (int a = 0; a < 3; ++a) {
          auto& mom = state->factors[s][t].axes[a];
          mom.m = resample_axis_rows(mom.m, old_res[a], target, rank);
          mom.v = resample_axis_rows(mom.v, old_res[a], target, rank);
        }
      }
      changed = true;
    }
  }
  return changed;
}

RayBatch make_training_batch(const SceneDataset& dataset, const Aabb& aabb, Vec3 background,
                             const OccupancyGrid* occupancy, int n_rays, float step_size,
                             bool jitter, bool random_background, uint64_t seed,
                             int step_index, std::mt19937& rng) {
  if (dataset.views.empty()) throw std::invalid_argument("dataset has no views");
  std::uniform_int_distribution<int> pick_view(0, int(dataset.views.size()) - 1);
  std::uniform_int_distribution<int> pick_row(0, dataset.height() - 1);
  std::uniform_int_distribution<int> pick_col(0, dataset.width() - 1);

  RayBatch batch;
  batch.rays.reserve(size_t(n_rays));
  std::vector<Sample> tmp;
  const uint64_t step_seed = hash_combine(seed, uint64_t(step_index));
  for (int i = 0; i < n_rays; ++i) {
    const int v = pick_view(rng);
    const int row = pick_row(rng);
    const int col = pick_col(rng);
    RayBatch::Entry entry;
    entry.ray = make_camera_ray(dataset.views[size_t(v)].camera, float(row) + 0.5f,
                                float(col) + 0.5f, aabb);
    const uint64_t ray_seed = hash_combine(step_seed, uint64_t(i));
    if (random_background) {
      entry.background = {hash_unit_float(hash_combine(ray_seed, 101)),
                          hash_unit_float(hash_combine(ray_seed, 102)),
                          hash_unit_float(hash_combine(ray_seed, 103))};
    } else {
      entry.background = background;
    }
    entry.truth = dataset.truth_pixel(v, row, col, entry.background);
    sample_ray(entry.ray, occupancy, step_size, jitter, ray_seed, tmp);
    entry.sample_begin = int(batch.samples.size());
    entry.sample_count = int(tmp.size());
    batch.samples.insert(batch.samples.end(), tmp.begin(), tmp.end());
    batch.rays.push_back(entry);
  }
  return batch;
}

TrainResult train(const ModelSpec& spec, const TrainConfig& config,
                  const SceneDataset& dataset, std::span<const Vec3> geometry,
                  const OccupancyGrid* occupancy, const TrainHooks& hooks) {
  std::mt19937 rng(uint32_t(config.seed ^ (config.seed >> 32)));
  TrainResult result{build_model(spec, geometry, rng), {}};
  Model& model = result.model;

  const UpsampleSchedule schedule = UpsampleSchedule::build(spec, config);
  GradientStore grads = GradientStore::like(model);
  AdamState state = AdamState::like(model);
  const float step_size =
      config.step_size > 0.f ? config.step_size : spec.aabb.diagonal() / 512.f;

  BackwardOptions bw_opts;
  bw_opts.stop_transmittance = config.stop_transmittance;
  bw_opts.threads = config.threads;

  for (int step = 0; step < config.steps; ++step) {
    const RayBatch batch = make_training_batch(
        dataset, spec.aabb, spec.background, occupancy, config.batch_rays, step_size,
        config.jitter, config.random_background, config.seed, step, rng);
    grads.zero();
    const LossReport report = backward(model, batch, config.alpha_l1, grads, bw_opts);

    const float lr_v = scheduled_lr(config.lr_vectors, config.lr_decay, step, config.steps);
    const float lr_n = scheduled_lr(config.lr_networks, config.lr_decay, step, config.steps);
    if (!std::isfinite(report.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (lr_vectors=" << lr_v
          << ", lr_networks=" << lr_n << ", max|grad|=" << grads.max_abs() << ")";
      throw std::runtime_error(msg.str());
    }
    adam_apply(model, grads, state, config, lr_v, lr_n);

    const int done = step + 1;
    if (maybe_upsample(model, &state, done, schedule)) {
      grads = GradientStore::like(model);
    }
    const bool log_now =
        (config.log_every > 0 && done % config.log_every == 0) || done == config.steps;
    if (log_now) {
      MetricsRow row;
      row.step = done;
      row.loss = report.total;
      row.render_loss = report.render_loss;
      row.l1_loss = report.l1_loss;
      row.psnr = report.psnr;
      row.lr_vectors = lr_v;
      row.lr_networks = lr_n;
      row.n_params = model.total_param_count();
      result.metrics.push_back(row);
      if (hooks.on_log) hooks.on_log(row);
    }
    if (hooks.on_checkpoint && config.checkpoint_every > 0 &&
        done % config.checkpoint_every == 0) {
      hooks.on_checkpoint(done, model);
    }
  }
  return result;
}

}  // namespace tvrf
