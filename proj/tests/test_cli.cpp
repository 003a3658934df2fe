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

#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "tvrf/checkpoint.hpp"
#include "tvrf/cli.hpp"
#include "tvrf/config.hpp"
#include "tvrf/image.hpp"
#include "tvrf/scenes.hpp"

using namespace tvrf;
namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"tvrf"};
  owned.insert(owned.end(), args);
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data());
}

/// run_cli with stdout captured into a string.
int run_capture(std::initializer_list<std::string> args, std::string& out) {
  std::fflush(stdout);
  const int saved = dup(fileno(stdout));
  const fs::path tmp = fs::temp_directory_path() / "tvrf_test_stdout.txt";
  FILE* f = std::freopen(tmp.string().c_str(), "w", stdout);
  REQUIRE(f != nullptr);
  const int code = run(args);
  std::fflush(stdout);
  dup2(saved, fileno(stdout));
  close(saved);
  std::ifstream in(tmp);
  std::stringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return code;
}

fs::path temp_dir(const char* tag) {
  const fs::path dir = fs::temp_directory_path() / (std::string("tvrf_cli_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Shared tiny dataset + geometry + config for the command tests.
struct Fixture {
  fs::path dir;
  fs::path config_path;

  explicit Fixture(const char* tag) : dir(temp_dir(tag)) {
    REQUIRE(run({"make-scene", "--out", (dir / "data").string(), "--views", "6",
                 "--test-views", "2", "--resolution", "24", "--seed", "4"}) == kExitOk);

    std::ofstream geo(dir / "geometry.txt");
    for (float x = -0.6f; x <= 0.61f; x += 0.15f) {
      for (float y = -0.6f; y <= 0.61f; y += 0.15f) {
        for (float z = -0.6f; z <= 0.61f; z += 0.15f) geo << x << " " << y << " " << z << "\n";
      }
    }
    geo.close();

    nlohmann::json cfg{
        {"seed", 11},
        {"paths",
         {{"dataset", (dir / "data").string()},
          {"geometry", (dir / "geometry.txt").string()},
          {"output", (dir / "out").string()}}},
        {"model",
         {{"scales", nlohmann::json::array({{{"spacing", 0.4},
                                             {"edge", 0.6},
                                             {"start_res", 5},
                                             {"end_res", 9},
                                             {"m", 2}}})},
          {"r_sigma", 2},
          {"r_c", 3},
          {"p", 4},
          {"n_freq", 1},
          {"hidden", 8}}},
        {"render", {{"step_divisor", 128.0}}},
        {"train",
         {{"steps", 5}, {"batch_rays", 64}, {"log_every", 1}, {"upsample_steps", {2, 4}}}},
        {"coarse", {{"resolution", 16}, {"steps", 10}, {"batch_rays", 64}}}};
    config_path = dir / "config.json";
    std::ofstream(config_path) << cfg.dump(2);
  }
};

}  // namespace

TEST_CASE("defaults match the stock recipe") {
  const RunConfig cfg;
  REQUIRE(cfg.model.scales.size() == 3);
  CHECK(cfg.model.scales[0].spacing == 0.4f);
  CHECK(cfg.model.scales[0].edge == 0.6f);
  CHECK(cfg.model.scales[0].start_res == 29);
  CHECK(cfg.model.scales[0].end_res == 121);
  CHECK(cfg.model.scales[1].spacing == 0.2f);
  CHECK(cfg.model.scales[1].start_res == 15);
  CHECK(cfg.model.scales[1].end_res == 61);
  CHECK(cfg.model.scales[2].spacing == 0.1f);
  CHECK(cfg.model.scales[2].start_res == 7);
  CHECK(cfg.model.scales[2].end_res == 31);
  for (const auto& s : cfg.model.scales) CHECK(s.m == 4);
  CHECK(cfg.model.r_sigma == 16);
  CHECK(cfg.model.r_c == 48);
  CHECK(cfg.model.p == 27);
  CHECK(cfg.model.hidden == 128);
  CHECK(cfg.train.steps == 30000);
  CHECK(cfg.train.batch_rays == 4096);
  CHECK(cfg.train.lr_vectors == 0.02f);
  CHECK(cfg.train.lr_networks == 0.001f);
  CHECK(cfg.train.alpha_l1 == 1e-5f);
  CHECK(cfg.train.beta1 == 0.9f);
  CHECK(cfg.train.beta2 == 0.99f);
  CHECK(cfg.train.upsample_steps == std::vector<int>{2000, 3000, 4000, 5500, 7000});
  CHECK(cfg.coarse.resolution == 100);
  CHECK(cfg.aabb.min.x == -1.f);
  CHECK(cfg.aabb.max.x == 1.f);
  CHECK(cfg.background.x == 1.f);

  // Round trip through json.
  const RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"trian": {}})"),
                       doctest::Contains("trian"), std::runtime_error);
  CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"train": {"step": 10}})"),
                       doctest::Contains("train.step"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      RunConfig::from_json_text(R"({"model": {"scales": [{"spacin": 0.4}]}})"),
      doctest::Contains("spacin"), std::runtime_error);
}

TEST_CASE("overrides") {
  SUBCASE("scalar and nested paths") {
    const std::vector<std::string> overrides{"train.steps=123", "model.r_c=24",
                                             "scene.background=[0,0,0]"};
    const RunConfig cfg = RunConfig::from_json_text("{}", overrides);
    CHECK(cfg.train.steps == 123);
    CHECK(cfg.model.r_c == 24);
    CHECK(cfg.background.x == 0.f);
  }

  SUBCASE("array element and truncation reproduce the fast preset") {
    const std::vector<std::string> overrides{"model.scales=2", "model.scales[0].m=2",
                                             "model.scales[1].m=2"};
    const RunConfig cfg = RunConfig::from_json_text("{}", overrides);
    REQUIRE(cfg.model.scales.size() == 2);
    CHECK(cfg.model.scales[0].edge == 0.6f);
    CHECK(cfg.model.scales[1].edge == 0.3f);
    CHECK(cfg.model.scales[0].m == 2);
    CHECK(cfg.model.scales[1].m == 2);
  }

  SUBCASE("bad paths fail loudly") {
    CHECK_THROWS(RunConfig::from_json_text("{}", std::vector<std::string>{"nope.x=1"}));
    CHECK_THROWS(RunConfig::from_json_text("{}", std::vector<std::string>{"model.scales[7].m=2"}));
    CHECK_THROWS(RunConfig::from_json_text("{}", std::vector<std::string>{"train.steps"}));
  }
}

TEST_CASE("checkpoint round trip is byte-identical") {
  std::mt19937 rng(31);
  const Vec3 geom[] = {{0.f, 0.f, 0.f}, {0.4f, 0.2f, -0.3f}};
  ModelSpec spec;
  spec.scales = {{0.4f, 0.6f, 5, 9, 4}, {0.2f, 0.3f, 3, 5, 4}};
  spec.r_sigma = 2;
  spec.r_c = 3;
  spec.p = 4;
  spec.n_freq = 1;
  spec.hidden = 8;

  Checkpoint ckpt;
  ckpt.config = RunConfig{};
  ckpt.model = build_model(spec, geom, rng);
  ckpt.occupancy = OccupancyGrid::create(8, {{-1, -1, -1}, {1, 1, 1}});
  ckpt.occupancy.set(1, 2, 3, true);
  ckpt.has_optimizer = true;
  ckpt.optimizer = AdamState::like(ckpt.model);
  ckpt.optimizer.t_vectors = 17;
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  for (float& v : ckpt.optimizer.w1.m) v = u(rng);
  ckpt.step = 42;

  const fs::path dir = temp_dir("ckpt");
  save_checkpoint(ckpt, dir / "a.tvrf");
  const Checkpoint loaded = load_checkpoint(dir / "a.tvrf");
  CHECK(loaded.step == 42);
  CHECK(loaded.model.scales.size() == 2);
  CHECK(loaded.has_optimizer);
  CHECK(loaded.optimizer.t_vectors == 17);
  save_checkpoint(loaded, dir / "b.tvrf");
  CHECK(read_file(dir / "a.tvrf") == read_file(dir / "b.tvrf"));

  // Corrupt magic is rejected.
  std::ofstream(dir / "bad.tvrf", std::ios::binary) << "NOPE";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.tvrf"), CheckpointError);
}

TEST_CASE("inspect_model param accounting") {
  std::mt19937 rng(32);
  const Vec3 geom[] = {{0.f, 0.f, 0.f}};
  ModelSpec spec;
  spec.scales = {{0.7f, 0.9f, 2, 2, 1}};
  spec.r_sigma = 1;
  spec.r_c = 1;
  spec.p = 2;
  spec.n_freq = 0;
  spec.hidden = 4;
  const Model model = build_model(spec, geom, rng);
  const InspectReport report = inspect_model(model);
  REQUIRE(report.scales.size() == 1);
  CHECK(report.scales[0].tensors == 1);
  CHECK(report.vector_params == 12);  // (1+1) * (2+2+2)
  CHECK(report.appearance_params == 2 * 1);
  // MLP: 4x5+4 + 4x4+4 + 3x4+3 with enc_dim 3, p 2.
  CHECK(report.mlp_params == (4 * 5 + 4) + (4 * 4 + 4) + (3 * 4 + 3));
  CHECK(report.total == report.vector_params + report.appearance_params + report.mlp_params);
}

TEST_CASE("train command writes checkpoints and metrics") {
  const Fixture fx("train");

  SUBCASE("zero steps still produces a checkpoint") {
    CHECK(run({"train", fx.config_path.string(), "--set", "train.steps=0"}) == kExitOk);
    CHECK(fs::exists(fx.dir / "out" / "model.tvrf"));
    const Checkpoint ckpt = load_checkpoint(fx.dir / "out" / "model.tvrf");
    CHECK(ckpt.step == 0);
    const std::string metrics = read_file(fx.dir / "out" / "metrics.csv");
    CHECK(metrics == "step,loss,render_loss,l1_loss,psnr,lr_vectors,lr_networks,n_params\n");
  }

  SUBCASE("missing dataset exits with code 2 naming the path") {
    CHECK(run({"train", fx.config_path.string(), "--set", "paths.dataset=/nonexistent/dir"}) ==
          kExitMissingInput);
    CHECK(run({"train", (fx.dir / "missing_config.json").string()}) == kExitMissingInput);
  }

  SUBCASE("two runs are byte-identical") {
    const std::string out_a = (fx.dir / "out_a").string();
    const std::string out_b = (fx.dir / "out_b").string();
    CHECK(run({"train", fx.config_path.string(), "--set", "paths.output=" + out_a}) == kExitOk);
    CHECK(run({"train", fx.config_path.string(), "--set", "paths.output=" + out_b}) == kExitOk);
    CHECK(read_file(fs::path(out_a) / "model.tvrf") == read_file(fs::path(out_b) / "model.tvrf"));
    CHECK(read_file(fs::path(out_a) / "metrics.csv") == read_file(fs::path(out_b) / "metrics.csv"));
    const std::string metrics = read_file(fs::path(out_a) / "metrics.csv");
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 6);  // header + 5 steps
  }
}

TEST_CASE("render, eval and inspect commands") {
  const Fixture fx("render");
  REQUIRE(run({"train", fx.config_path.string(), "--set", "train.steps=0"}) == kExitOk);
  const std::string ckpt = (fx.dir / "out" / "model.tvrf").string();

  SUBCASE("rendering an untrained model gives background-only images") {
    const std::string out1 = (fx.dir / "render1").string();
    CHECK(run({"render", ckpt, "--out", out1, "--dataset", (fx.dir / "data").string(),
               "--split", "test", "--raw"}) == kExitOk);
    const Image img = read_png(fs::path(out1) / "r_0.png");
    CHECK(img.width == 24);
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        CHECK(img.rgb(r, c).x == 1.f);
        CHECK(img.rgb(r, c).y == 1.f);
        CHECK(img.rgb(r, c).z == 1.f);
      }
    }

    // A second render is bit-identical.
    const std::string out2 = (fx.dir / "render2").string();
    CHECK(run({"render", ckpt, "--out", out2, "--dataset", (fx.dir / "data").string(),
               "--split", "test", "--raw"}) == kExitOk);
    CHECK(read_file(fs::path(out1) / "r_0.png") == read_file(fs::path(out2) / "r_0.png"));
    CHECK(read_file(fs::path(out1) / "r_0.raw") == read_file(fs::path(out2) / "r_0.raw"));
    CHECK(fs::file_size(fs::path(out1) / "r_1.raw") == 8 + 24 * 24 * 3 * 4);
  }

  SUBCASE("bad checkpoint exits 3") {
    std::ofstream(fx.dir / "junk.tvrf", std::ios::binary) << "garbage";
    CHECK(run({"render", (fx.dir / "junk.tvrf").string(), "--out", (fx.dir / "x").string()}) ==
          kExitBadCheckpoint);
    CHECK(run({"eval", (fx.dir / "nonexistent.tvrf").string()}) == kExitBadCheckpoint);
  }

  SUBCASE("eval prints per-view and mean rows") {
    std::string csv;
    const int code = run_capture({"eval", ckpt, "--split", "test"}, csv);
    CHECK(code == kExitOk);
    CHECK(csv.find("view,psnr,ssim\n") == 0);
    CHECK(csv.find("mean,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 2 views + mean
  }

  SUBCASE("empty split yields a header-only csv and exit 0") {
    std::ofstream(fx.dir / "data" / "transforms_val.json")
        << R"({"camera_angle_x": 0.69, "frames": []})";
    std::string csv;
    const int code = run_capture({"eval", ckpt, "--split", "val"}, csv);
    CHECK(code == kExitOk);
    CHECK(csv == "view,psnr,ssim\n");
  }

  SUBCASE("inspect reports group totals that add up") {
    std::string text;
    const int code =
        run_capture({"inspect", ckpt, "--points", (fx.dir / "cloud.txt").string()}, text);
    CHECK(code == kExitOk);
    long vectors = 0, appearance = 0, mlp = 0, total = 0;
    std::sscanf(text.substr(text.find("vectors=")).c_str(),
                "vectors=%ld\nappearance=%ld\nmlp=%ld\ntotal=%ld", &vectors, &appearance, &mlp,
                &total);
    CHECK(total == vectors + appearance + mlp);
    CHECK(vectors > 0);

    // Point cloud file: one "x y z edge" line per tensor.
    const Checkpoint loaded = load_checkpoint(ckpt);
    size_t n_tensors = 0;
    for (const auto& s : loaded.model.scales) n_tensors += s.tensors.size();
    const std::string cloud = read_file(fx.dir / "cloud.txt");
    CHECK(size_t(std::count(cloud.begin(), cloud.end(), '\n')) == n_tensors);
  }
}
