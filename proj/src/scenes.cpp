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

#include "tvrf/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tvrf/rng.hpp"

namespace tvrf {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("failed to parse " + path.string() + ": " + what);
}

Mat4d read_matrix(const json& rows, const std::filesystem::path& path) {
  if (!rows.is_array() || rows.size() != 4) parse_fail(path, "transform_matrix must be 4x4");
  Mat4d m;
  for (int r = 0; r < 4; ++r) {
    if (!rows[r].is_array() || rows[r].size() != 4) {
      parse_fail(path, "transform_matrix must be 4x4");
    }
    for (int c = 0; c < 4; ++c) m.at(r, c) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace

Vec3 SceneDataset::truth_pixel(int v, int row, int col, Vec3 bg) const {
  const Image& img = views[size_t(v)].image;
  const float* p = img.pixel(row, col);
  if (img.channels == 3) return {p[0], p[1], p[2]};
  const float a = p[3];
  return {p[0] * a + bg.x * (1.f - a), p[1] * a + bg.y * (1.f - a),
          p[2] * a + bg.z * (1.f - a)};
}

SceneDataset load_nerf_synthetic(const std::filesystem::path& dir, const std::string& split,
                                 const Aabb& aabb, Vec3 background) {
  const std::filesystem::path json_path = dir / ("transforms_" + split + ".json");
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open " + json_path.string());

  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    parse_fail(json_path, e.what());
  }
  if (!root.contains("camera_angle_x")) parse_fail(json_path, "missing camera_angle_x");
  if (!root.contains("frames")) parse_fail(json_path, "missing frames");
  const double angle_x = root["camera_angle_x"].get<double>();
  const auto& frames = root["frames"];
  if (!frames.is_array() || frames.empty()) parse_fail(json_path, "no frames");

  SceneDataset ds;
  ds.split = split;
  ds.aabb = aabb;
  ds.background = background;
  ds.views.reserve(frames.size());
  for (const auto& frame : frames) {
    if (!frame.contains("file_path")) parse_fail(json_path, "frame missing file_path");
    if (!frame.contains("transform_matrix")) parse_fail(json_path, "frame missing transform_matrix");
    SceneView view;
    view.name = frame["file_path"].get<std::string>();
    std::filesystem::path img_path = dir / view.name;
    if (!std::filesystem::exists(img_path)) img_path += ".png";
    view.image = read_png(img_path);
    view.camera.width = view.image.width;
    view.camera.height = view.image.height;
    view.camera.focal = 0.5 * view.image.width / std::tan(0.5 * angle_x);
    view.camera.pose = read_matrix(frame["transform_matrix"], json_path);
    ds.views.push_back(std::move(view));
  }
  for (const auto& v : ds.views) {
    if (v.image.width != ds.width() || v.image.height != ds.height()) {
      parse_fail(json_path, "views have mixed resolutions");
    }
  }
  return ds;
}

void save_nerf_synthetic(const SceneDataset& dataset, const std::filesystem::path& dir) {
  if (dataset.views.empty()) throw std::invalid_argument("dataset has no views");
  std::filesystem::create_directories(dir / dataset.split);

  const Camera& cam0 = dataset.views.front().camera;
  json root;
  root["camera_angle_x"] = 2.0 * std::atan(0.5 * cam0.width / cam0.focal);
  json frames = json::array();
  for (size_t i = 0; i < dataset.views.size(); ++i) {
    const SceneView& view = dataset.views[i];
    char name[64];
    std::snprintf(name, sizeof(name), "r_%zu", i);
    const std::string rel = "./" + dataset.split + "/" + name;
    write_png(dir / dataset.split / (std::string(name) + ".png"), view.image);
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c = 0; c < 4; ++c) row.push_back(view.camera.pose.at(r, c));
      rows.push_back(row);
    }
    frames.push_back({{"file_path", rel}, {"transform_matrix", rows}});
  }
  root["frames"] = frames;
  std::ofstream out(dir / ("transforms_" + dataset.split + ".json"));
  out << root.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed to write transforms json");
}

bool Primitive::contains(Vec3 p) const {
  if (kind == Kind::kSphere) {
    const Vec3 d = p - center;
    return dot(d, d) <= radius * radius;
  }
  return std::fabs(p.x - center.x) <= half_size.x &&
         std::fabs(p.y - center.y) <= half_size.y &&
         std::fabs(p.z - center.z) <= half_size.z;
}

void ProceduralScene::field(Vec3 p, float& sigma, Vec3& albedo) const {
  sigma = 0.f;
  Vec3 acc{};
  for (const Primitive& prim : primitives) {
    if (!prim.contains(p)) continue;
    sigma += prim.sigma;
    acc += prim.albedo * prim.sigma;
  }
  albedo = sigma > 0.f ? acc / sigma : Vec3{};
}

ProceduralScene ProceduralScene::sample_scene() {
  ProceduralScene s;
  s.aabb = {{-1.f, -1.f, -1.f}, {1.f, 1.f, 1.f}};
  s.background = {1.f, 1.f, 1.f};
  Primitive box1;
  box1.kind = Primitive::Kind::kBox;
  box1.center = {-0.35f, -0.12f, 0.05f};
  box1.half_size = {0.24f, 0.3f, 0.2f};
  box1.sigma = 40.f;
  box1.albedo = {0.85f, 0.25f, 0.2f};
  Primitive box2;
  box2.kind = Primitive::Kind::kBox;
  box2.center = {0.32f, -0.28f, -0.12f};
  box2.half_size = {0.2f, 0.14f, 0.28f};
  box2.sigma = 40.f;
  box2.albedo = {0.2f, 0.45f, 0.85f};
  Primitive ball;
  ball.kind = Primitive::Kind::kSphere;
  ball.center = {0.12f, 0.3f, 0.18f};
  ball.radius = 0.3f;
  ball.sigma = 40.f;
  ball.albedo = {0.95f, 0.78f, 0.25f};
  s.primitives = {box1, box2, ball};
  return s;
}

ProceduralScene ProceduralScene::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    parse_fail(path, e.what());
  }
  ProceduralScene s;
  if (root.contains("background")) {
    for (int i = 0; i < 3; ++i) s.background[i] = root["background"][i].get<float>();
  }
  if (root.contains("aabb")) {
    for (int i = 0; i < 3; ++i) s.aabb.min[i] = root["aabb"][0][i].get<float>();
    for (int i = 0; i < 3; ++i) s.aabb.max[i] = root["aabb"][1][i].get<float>();
  }
  for (const auto& p : root.value("primitives", json::array())) {
    Primitive prim;
    const std::string kind = p.at("kind").get<std::string>();
    if (kind == "sphere") {
      prim.kind = Primitive::Kind::kSphere;
      prim.radius = p.at("radius").get<float>();
    } else if (kind == "box") {
      prim.kind = Primitive::Kind::kBox;
      for (int i = 0; i < 3; ++i) prim.half_size[i] = p.at("half_size")[i].get<float>();
    } else {
      parse_fail(path, "unknown primitive kind '" + kind + "'");
    }
    for (int i = 0; i < 3; ++i) prim.center[i] = p.at("center")[i].get<float>();
    prim.sigma = p.at("sigma").get<float>();
    for (int i = 0; i < 3; ++i) prim.albedo[i] = p.at("albedo")[i].get<float>();
    s.primitives.push_back(prim);
  }
  return s;
}

namespace {

/// RGBA march used for both the public oracle and dataset generation.
void oracle_ray(const ProceduralScene& scene, const Ray& ray, double step, Vec3d& premult,
                double& transmittance) {
  premult = {};
  transmittance = 1.0;
  if (!ray.hits_aabb) return;
  for (uint64_t k = 0;; ++k) {
    const double start = double(ray.t_near) + double(k) * step;
    if (start >= double(ray.t_far)) break;
    const double end = std::min(start + step, double(ray.t_far));
    const double delta = end - start;
    if (delta <= 1e-4 * step) continue;
    const double t = start + 0.5 * delta;
    const Vec3 pos = ray.origin + ray.dir * float(t);
    float sigma;
    Vec3 albedo;
    scene.field(pos, sigma, albedo);
    if (sigma <= 0.f) continue;
    const double alpha = -std::expm1(-double(sigma) * delta);
    const double w = transmittance * alpha;
    premult.x += w * albedo.x;
    premult.y += w * albedo.y;
    premult.z += w * albedo.z;
    transmittance *= 1.0 - alpha;
  }
}

Image oracle_render_rgba(const ProceduralScene& scene, const Camera& camera, double step) {
  Image img = Image::create(camera.width, camera.height, 4);
  for (int r = 0; r < camera.height; ++r) {
    for (int c = 0; c < camera.width; ++c) {
      const Ray ray = make_camera_ray(camera, float(r) + 0.5f, float(c) + 0.5f, scene.aabb);
      Vec3d premult;
      double transmittance;
      oracle_ray(scene, ray, step, premult, transmittance);
      const double alpha = 1.0 - transmittance;
      float* px = img.pixel(r, c);
      if (alpha > 0.0) {
        px[0] = float(premult.x / alpha);
        px[1] = float(premult.y / alpha);
        px[2] = float(premult.z / alpha);
      }
      px[3] = float(alpha);
    }
  }
  return img;
}

}  // namespace

Image oracle_render(const ProceduralScene& scene, const Camera& camera, double step) {
  Image img = Image::create(camera.width, camera.height, 3);
  for (int r = 0; r < camera.height; ++r) {
    for (int c = 0; c < camera.width; ++c) {
      const Ray ray = make_camera_ray(camera, float(r) + 0.5f, float(c) + 0.5f, scene.aabb);
      Vec3d premult;
      double transmittance;
      oracle_ray(scene, ray, step, premult, transmittance);
      img.set_rgb(r, c,
                  {float(premult.x + transmittance * scene.background.x),
                   float(premult.y + transmittance * scene.background.y),
                   float(premult.z + transmittance * scene.background.z)});
    }
  }
  return img;
}

Camera look_at_camera(Vec3d position, Vec3d target, int width, int height, double focal) {
  const Vec3d forward = normalized(target - position);
  const Vec3d world_up{0.0, 0.0, 1.0};
  Vec3d right = cross(forward, world_up);
  const double rl = length(right);
  right = rl > 1e-9 ? right / rl : Vec3d{1.0, 0.0, 0.0};
  const Vec3d up = cross(right, forward);

  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.focal = focal;
  // Columns: +X right, +Y up, +Z backward.
  for (int r = 0; r < 3; ++r) {
    cam.pose.at(r, 0) = (&right.x)[r];
    cam.pose.at(r, 1) = (&up.x)[r];
    cam.pose.at(r, 2) = -(&forward.x)[r];
    cam.pose.at(r, 3) = (&position.x)[r];
  }
  cam.pose.at(3, 3) = 1.0;
  return cam;
}

SceneDataset generate_dataset(const ProceduralScene& scene, int n_views, int resolution,
                              double radius, uint64_t seed) {
  if (n_views < 1) throw std::invalid_argument("n_views must be >= 1");
  SceneDataset ds;
  ds.aabb = scene.aabb;
  ds.background = scene.background;
  ds.views.reserve(size_t(n_views));

  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double phase = hash_unit_double(seed) * 2.0 * std::numbers::pi;
  const double focal = 0.5 * resolution / std::tan(0.5 * 0.6911112);
  const double march = scene.aabb.diagonal() / 1024.0;
  for (int i = 0; i < n_views; ++i) {
    const double frac = n_views == 1 ? 0.5 : double(i) / double(n_views - 1);
    const double elev = (-15.0 + 75.0 * frac) * std::numbers::pi / 180.0;
    const double azim = phase + golden * double(i);
    const Vec3d pos{radius * std::cos(elev) * std::cos(azim),
                    radius * std::cos(elev) * std::sin(azim), radius * std::sin(elev)};
    SceneView view;
    view.camera = look_at_camera(pos, {0, 0, 0}, resolution, resolution, focal);
    view.image = oracle_render_rgba(scene, view.camera, march);
    char name[32];
    std::snprintf(name, sizeof(name), "r_%d", i);
    view.name = name;
    ds.views.push_back(std::move(view));
  }
  return ds;
}

std::vector<Vec3> load_geometry_points(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot open geometry file " + path.string());
  char magic[4] = {};
  probe.read(magic, 4);
  probe.close();
  if (std::string_view(magic, 4) == "OCCG") {
    const OccupancyGrid grid = load_occupancy_grid(path);
    std::vector<Vec3> points;
    const Vec3 ext = grid.aabb.extent();
    const float inv = 1.f / float(grid.resolution);
    for (int z = 0; z < grid.resolution; ++z) {
      for (int y = 0; y < grid.resolution; ++y) {
        for (int x = 0; x < grid.resolution; ++x) {
          if (!grid.voxels[grid.index(x, y, z)]) continue;
          points.push_back({grid.aabb.min.x + ext.x * (float(x) + 0.5f) * inv,
                            grid.aabb.min.y + ext.y * (float(y) + 0.5f) * inv,
                            grid.aabb.min.z + ext.z * (float(z) + 0.5f) * inv});
        }
      }
    }
    if (points.empty()) throw std::runtime_error("geometry grid has no occupied voxels");
    return points;
  }

  std::ifstream in(path);
  std::vector<Vec3> points;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    Vec3 p;
    if (!(ss >> p.x >> p.y >> p.z)) {
      throw std::runtime_error("bad geometry line " + std::to_string(line_no) + " in " +
                               path.string());
    }
    points.push_back(p);
  }
  if (points.empty()) throw std::runtime_error("geometry file has no points: " + path.string());
  return points;
}

void save_occupancy_grid(const OccupancyGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write("OCCG", 4);
  const uint32_t res = uint32_t(grid.resolution);
  out.write(reinterpret_cast<const char*>(&res), 4);
  out.write(reinterpret_cast<const char*>(&grid.aabb.min), 3 * sizeof(float));
  out.write(reinterpret_cast<const char*>(&grid.aabb.max), 3 * sizeof(float));
  out.write(reinterpret_cast<const char*>(grid.voxels.data()),
            std::streamsize(grid.voxels.size()));
  if (!out) throw std::runtime_error("occupancy grid write failed");
}

OccupancyGrid load_occupancy_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::string_view(magic, 4) != "OCCG") {
    throw std::runtime_error("not an occupancy grid file: " + path.string());
  }
  uint32_t res = 0;
  in.read(reinterpret_cast<char*>(&res), 4);
  Aabb box;
  in.read(reinterpret_cast<char*>(&box.min), 3 * sizeof(float));
  in.read(reinterpret_cast<char*>(&box.max), 3 * sizeof(float));
  OccupancyGrid grid = OccupancyGrid::create(int(res), box);
  in.read(reinterpret_cast<char*>(grid.voxels.data()), std::streamsize(grid.voxels.size()));
  if (!in) throw std::runtime_error("occupancy grid truncated: " + path.string());
  return grid;
}

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("psnr: image dimensions differ");
  }
  double se = 0.0;
  for (int r = 0; r < a.height; ++r) {
    for (int c = 0; c < a.width; ++c) {
      const Vec3 d = a.rgb(r, c) - b.rgb(r, c);
      se += double(d.x) * d.x + double(d.y) * d.y + double(d.z) * d.z;
    }
  }
  const double mse = se / (3.0 * a.width * a.height);
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("ssim: image dimensions differ");
  }
  constexpr int kRadius = 5;  // 11x11 window
  if (a.width < 2 * kRadius + 1 || a.height < 2 * kRadius + 1) {
    throw std::invalid_argument("ssim: image smaller than the filter window");
  }
  double kernel[11][11];
  double ksum = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      const double di = i - kRadius, dj = j - kRadius;
      kernel[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      ksum += kernel[i][j];
    }
  }
  for (auto& row : kernel) {
    for (double& k : row) k /= ksum;
  }

  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  double total = 0.0;
  size_t count = 0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = kRadius; r < a.height - kRadius; ++r) {
      for (int c = kRadius; c < a.width - kRadius; ++c) {
        double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
        for (int i = -kRadius; i <= kRadius; ++i) {
          for (int j = -kRadius; j <= kRadius; ++j) {
            const double k = kernel[i + kRadius][j + kRadius];
            const double va = a.pixel(r + i, c + j)[ch];
            const double vb = b.pixel(r + i, c + j)[ch];
            ma += k * va;
            mb += k * vb;
            maa += k * va * va;
            mbb += k * vb * vb;
            mab += k * va * vb;
          }
        }
        const double var_a = maa - ma * ma;
        const double var_b = mbb - mb * mb;
        const double cov = mab - ma * mb;
        total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                 ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
        ++count;
      }
    }
  }
  return total / double(count);
}

}  // namespace tvrf
