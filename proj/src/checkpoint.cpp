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

#include "tvrf/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tvrf {

namespace {

constexpr char kMagic[4] = {'T', 'V', 'R', 'F'};
constexpr uint32_t kVersion = 1;

struct Writer {
  std::ofstream out;

  explicit Writer(const std::filesystem::path& path) : out(path, std::ios::binary) {
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  }
  void bytes(const void* p, size_t n) { out.write(static_cast<const char*>(p), std::streamsize(n)); }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void floats(const std::vector<float>& v) { bytes(v.data(), v.size() * 4); }
  void vec3(Vec3 v) {
    f32(v.x);
    f32(v.y);
    f32(v.z);
  }
};

struct Reader {
  std::ifstream in;
  std::filesystem::path path;

  explicit Reader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw CheckpointError("cannot open checkpoint: " + p.string());
  }
  [[noreturn]] void fail(const std::string& what) {
    throw CheckpointError("bad checkpoint " + path.string() + ": " + what);
  }
  void bytes(void* p, size_t n) {
    in.read(static_cast<char*>(p), std::streamsize(n));
    if (!in) fail("truncated");
  }
  uint32_t u32() {
    uint32_t v;
    bytes(&v, 4);
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    bytes(&v, 8);
    return v;
  }
  float f32() {
    float v;
    bytes(&v, 4);
    return v;
  }
  void floats(std::vector<float>& v, size_t n) {
    v.resize(n);
    bytes(v.data(), n * 4);
  }
  Vec3 vec3() {
    Vec3 v;
    v.x = f32();
    v.y = f32();
    v.z = f32();
    return v;
  }
};

void write_factor(Writer& w, const TriVectorTensor& t, FactorKind kind, int count) {
  for (int r = 0; r < count; ++r) {
    for (int a = 0; a < 3; ++a) {
      const FactorVector vec = t.factor(a, kind, r);
      w.bytes(vec.data(), vec.size() * 4);
    }
  }
}

void read_factor(Reader& rd, TriVectorTensor& t, FactorKind kind, int count) {
  for (int r = 0; r < count; ++r) {
    for (int a = 0; a < 3; ++a) {
      FactorVector vec(size_t(t.res[a]));
      rd.bytes(vec.data(), vec.size() * 4);
      t.set_factor(a, kind, r, vec);
    }
  }
}

void write_layer(Writer& w, const DenseLayer& l) {
  w.u32(uint32_t(l.out_dim));
  w.u32(uint32_t(l.in_dim));
  w.floats(l.w);
  w.floats(l.b);
}

DenseLayer read_layer(Reader& rd) {
  const uint32_t out_dim = rd.u32();
  const uint32_t in_dim = rd.u32();
  DenseLayer l = DenseLayer::create(int(out_dim), int(in_dim));
  rd.floats(l.w, size_t(out_dim) * in_dim);
  rd.floats(l.b, out_dim);
  return l;
}

void write_moments(Writer& w, const AdamState::Moments& m) {
  w.u64(m.m.size());
  w.floats(m.m);
  w.floats(m.v);
}

void read_moments(Reader& rd, AdamState::Moments& m) {
  const uint64_t n = rd.u64();
  rd.floats(m.m, n);
  rd.floats(m.v, n);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);

  const std::string cfg = ckpt.config.to_json().dump();
  w.u64(cfg.size());
  w.bytes(cfg.data(), cfg.size());
  w.u32(ckpt.step);

  const Model& model = ckpt.model;
  w.vec3(model.aabb.min);
  w.vec3(model.aabb.max);
  w.vec3(model.background);
  w.u32(uint32_t(model.neighbor_count));
  w.u32(uint32_t(model.r_sigma));
  w.u32(uint32_t(model.r_c));

  w.u32(uint32_t(model.scales.size()));
  for (const ScaleCloud& cloud : model.scales) {
    w.vec3(cloud.lattice_origin);
    w.f32(cloud.lattice_spacing);
    w.f32(cloud.edge);
    w.u32(uint32_t(cloud.neighbor_count));
    w.u64(cloud.tensors.size());
    for (const TriVectorTensor& t : cloud.tensors) {
      w.vec3(t.position);
      w.f32(t.edge);
      w.u32(uint32_t(t.r_sigma));
      w.u32(uint32_t(t.r_c));
      w.u32(uint32_t(t.res[0]));
      w.u32(uint32_t(t.res[1]));
      w.u32(uint32_t(t.res[2]));
      write_factor(w, t, FactorKind::kDensity, t.r_sigma);
      write_factor(w, t, FactorKind::kAppearance, t.r_c);
    }
  }

  const Decoder& dec = model.decoder;
  w.u32(uint32_t(dec.mlp.p));
  w.u32(uint32_t(dec.appearance.size()));
  for (const AppearanceMatrix& b : dec.appearance) {
    w.u32(uint32_t(b.p));
    w.u32(uint32_t(b.r_c));
    w.floats(b.w);
  }
  w.u32(uint32_t(dec.mlp.n_freq));
  w.u32(uint32_t(dec.mlp.hidden));
  write_layer(w, dec.mlp.l1);
  write_layer(w, dec.mlp.l2);
  write_layer(w, dec.mlp.l3);
  w.f32(dec.activation.shift);

  w.u32(uint32_t(ckpt.occupancy.resolution));
  if (ckpt.occupancy.resolution > 0) {
    w.vec3(ckpt.occupancy.aabb.min);
    w.vec3(ckpt.occupancy.aabb.max);
    w.bytes(ckpt.occupancy.voxels.data(), ckpt.occupancy.voxels.size());
  }

  w.u32(ckpt.has_optimizer ? 1 : 0);
  if (ckpt.has_optimizer) {
    const AdamState& st = ckpt.optimizer;
    w.u64(uint64_t(st.t_vectors));
    w.u64(uint64_t(st.t_networks));
    for (const auto& scale : st.factors) {
      for (const auto& t : scale) {
        for (const auto& axis : t.axes) write_moments(w, axis);
      }
    }
    for (const auto& b : st.appearance) write_moments(w, b);
    write_moments(w, st.w1);
    write_moments(w, st.b1);
    write_moments(w, st.w2);
    write_moments(w, st.b2);
    write_moments(w, st.w3);
    write_moments(w, st.b3);
  }
  if (!w.out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader rd(path);
  char magic[4];
  rd.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) rd.fail("wrong magic");
  const uint32_t version = rd.u32();
  if (version != kVersion) {
    rd.fail("unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const uint64_t cfg_len = rd.u64();
  std::string cfg_text(cfg_len, '\0');
  rd.bytes(cfg_text.data(), cfg_len);
  try {
    ckpt.config = RunConfig::from_json(nlohmann::json::parse(cfg_text));
  } catch (const std::exception& e) {
    rd.fail(std::string("embedded config invalid: ") + e.what());
  }
  ckpt.step = rd.u32();

  Model& model = ckpt.model;
  model.aabb.min = rd.vec3();
  model.aabb.max = rd.vec3();
  model.background = rd.vec3();
  model.neighbor_count = int(rd.u32());
  model.r_sigma = int(rd.u32());
  model.r_c = int(rd.u32());

  const uint32_t n_scales = rd.u32();
  if (n_scales == 0 || n_scales > 8) rd.fail("scale count out of range");
  for (uint32_t s = 0; s < n_scales; ++s) {
    ScaleCloud cloud;
    cloud.lattice_origin = rd.vec3();
    cloud.lattice_spacing = rd.f32();
    cloud.edge = rd.f32();
    cloud.neighbor_count = int(rd.u32());
    const uint64_t n_tensors = rd.u64();
    cloud.tensors.reserve(n_tensors);
    cloud.cells.reserve(n_tensors);
    for (uint64_t i = 0; i < n_tensors; ++i) {
      const Vec3 pos = rd.vec3();
      const float edge = rd.f32();
      const int r_sigma = int(rd.u32());
      const int r_c = int(rd.u32());
      std::array<int, 3> res{int(rd.u32()), int(rd.u32()), int(rd.u32())};
      TriVectorTensor t = TriVectorTensor::create(pos, edge, r_sigma, r_c, res);
      read_factor(rd, t, FactorKind::kDensity, r_sigma);
      read_factor(rd, t, FactorKind::kAppearance, r_c);
      const CellCoord cell = cloud.cell_of(pos);
      cloud.cells.push_back(cell);
      cloud.cell_index.emplace(cell_key(cell), int32_t(i));
      cloud.tensors.push_back(std::move(t));
    }
    model.scales.push_back(std::move(cloud));
  }

  Decoder& dec = model.decoder;
  const uint32_t p = rd.u32();
  const uint32_t n_b = rd.u32();
  if (n_b != n_scales) rd.fail("appearance matrix count mismatch");
  for (uint32_t s = 0; s < n_b; ++s) {
    const uint32_t bp = rd.u32();
    const uint32_t br = rd.u32();
    AppearanceMatrix b = AppearanceMatrix::create(int(bp), int(br));
    rd.floats(b.w, size_t(bp) * br);
    dec.appearance.push_back(std::move(b));
  }
  const uint32_t n_freq = rd.u32();
  const uint32_t hidden = rd.u32();
  dec.mlp.p = int(p);
  dec.mlp.n_freq = int(n_freq);
  dec.mlp.hidden = int(hidden);
  dec.mlp.l1 = read_layer(rd);
  dec.mlp.l2 = read_layer(rd);
  dec.mlp.l3 = read_layer(rd);
  dec.activation.shift = rd.f32();

  const uint32_t occ_res = rd.u32();
  if (occ_res > 0) {
    Aabb box;
    box.min = rd.vec3();
    box.max = rd.vec3();
    ckpt.occupancy = OccupancyGrid::create(int(occ_res), box);
    rd.bytes(ckpt.occupancy.voxels.data(), ckpt.occupancy.voxels.size());
  }

  const uint32_t has_opt = rd.u32();
  if (has_opt) {
    ckpt.has_optimizer = true;
    AdamState& st = ckpt.optimizer;
    st = AdamState::like(model);
    st.t_vectors = long(rd.u64());
    st.t_networks = long(rd.u64());
    for (auto& scale : st.factors) {
      for (auto& t : scale) {
        for (auto& axis : t.axes) read_moments(rd, axis);
      }
    }
    for (auto& b : st.appearance) read_moments(rd, b);
    read_moments(rd, st.w1);
    read_moments(rd, st.b1);
    read_moments(rd, st.w2);
    read_moments(rd, st.b2);
    read_moments(rd, st.w3);
    read_moments(rd, st.b3);
  }
  return ckpt;
}

}  // namespace tvrf
