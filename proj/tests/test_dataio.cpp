#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "lane/dataio.hpp"

using namespace lane;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("lane_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (auto& v : img.rgb) v = u(rng);
  return img;
}

Camera simple_camera(int w, int h) {
  Camera cam;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = w;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  return cam;
}

DatasetManifest tiny_dataset(const fs::path& dir, Rng& rng) {
  DatasetManifest m;
  m.root = dir;
  SceneMeta scene;
  scene.id = "s0";
  scene.seed = 1;
  scene.sky = {0.7, 0.7, 0.75};
  scene.bounds = Eigen::AlignedBox3d(Eigen::Vector3d(-6, -6, 0), Eigen::Vector3d(6, 6, 4));
  m.scenes.push_back(scene);
  m.lighting = {LightingCondition{.id = "l0", .azimuth_deg = 120, .elevation_deg = 45,
                                  .sun_intensity = 0.9, .ambient = 0.25}};
  m.instances.push_back(InstanceMeta{"car0", {0.8, 0.2, 0.2}, {1.0, 0.5, 0.4}});

  FrameRecord f;
  f.id = "f0000";
  f.scene = "s0";
  f.lighting = "l0";
  f.split = "train";
  f.image_path = "images/f0000.ppm";
  f.depth_path = "depth/f0000.pfm";
  f.camera = simple_camera(16, 12);

  Image img = random_image(16, 12, rng);
  write_ppm(dir / f.image_path, img);
  DepthMap depth(16, 12);
  std::uniform_real_distribution<float> u(0.5f, 9.f);
  for (auto& v : depth.depth) v = u(rng);
  write_pfm(dir / f.depth_path, depth);

  FrameObject obj;
  obj.instance = "car0";
  obj.mask_path = "masks/car0/f0000.ppm";
  obj.pose.translation = {1, 0, 0.4};
  obj.pose.half_extents = {1.0, 0.5, 0.4};
  Mask mask(16, 12);
  mask.at(3, 4) = 1;
  mask.at(4, 4) = 1;
  write_ppm(dir / obj.mask_path, mask_to_image(mask));
  f.objects.push_back(obj);

  m.frames.push_back(f);
  return m;
}

}  // namespace

TEST_CASE("ppm round-trip: quantization-bounded and idempotent") {
  Rng rng(5);
  Image img = random_image(2, 2, rng);
  Image back = decode_ppm(encode_ppm(img));
  REQUIRE(back.width == 2);
  REQUIRE(back.height == 2);
  for (size_t i = 0; i < img.rgb.size(); ++i)
    CHECK(std::abs(back.rgb[i] - img.rgb[i]) <= 0.5f / 255.0f + 1e-7f);

  // second pass is exact (idempotent under re-encode)
  Image again = decode_ppm(encode_ppm(back));
  CHECK(again.rgb == back.rgb);
}

TEST_CASE("pfm round-trip is bit-exact") {
  Rng rng(6);
  DepthMap d(5, 3);
  std::uniform_real_distribution<float> u(0.f, 100.f);
  for (auto& v : d.depth) v = u(rng);
  d.depth[7] = 0.f;
  DepthMap back = decode_pfm(encode_pfm(d));
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 3);
  CHECK(std::memcmp(back.depth.data(), d.depth.data(), d.depth.size() * 4) == 0);
}

TEST_CASE("malformed headers report byte offsets") {
  auto ppm = encode_ppm(Image(2, 2));
  ppm[1] = '5';  // P5 instead of P6
  try {
    decode_ppm(ppm);
    FAIL("expected parse error");
  } catch (const RuntimeFailure& e) {
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }

  DepthMap d(2, 2);
  auto pfm = encode_pfm(d);
  pfm.resize(pfm.size() - 3);  // truncate samples
  CHECK_THROWS_AS(decode_pfm(pfm), RuntimeFailure);
}

TEST_CASE("dataset write -> read round-trip preserves pixels and manifest") {
  Rng rng(7);
  fs::path dir = temp_dir("roundtrip");
  DatasetManifest m = tiny_dataset(dir, rng);
  write_manifest(m);

  DatasetManifest r = read_dataset(dir);
  REQUIRE(r.frames.size() == 1);
  CHECK(r.scenes.size() == 1);
  CHECK(r.lighting.size() == 1);
  CHECK(r.frames[0].id == "f0000");
  CHECK(r.frames[0].objects.size() == 1);
  CHECK(r.condition("l0").elevation_deg == 45);

  Image orig = read_ppm(dir / m.frames[0].image_path);
  Image loaded = load_frame_image(r, r.frames[0]);
  CHECK(orig.rgb == loaded.rgb);

  auto depth = load_frame_depth(r, r.frames[0]);
  REQUIRE(depth.has_value());
  CHECK(depth->width == 16);

  Mask mask = load_object_mask(r, r.frames[0].objects[0]);
  CHECK(mask.count() == 2);

  // camera pose survives
  CHECK((r.frames[0].camera.translation - m.frames[0].camera.translation).norm() == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("dataset validation: missing image names the path") {
  Rng rng(8);
  fs::path dir = temp_dir("missing");
  DatasetManifest m = tiny_dataset(dir, rng);
  write_manifest(m);
  fs::remove(dir / "images/f0000.ppm");
  try {
    read_dataset(dir);
    FAIL("expected validation error");
  } catch (const RuntimeFailure& e) {
    CHECK(std::string(e.what()).find("f0000.ppm") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("dataset validation: table of referential inconsistencies") {
  Rng rng(9);
  struct Case {
    const char* name;
    std::function<void(DatasetManifest&)> corrupt;
  };
  const std::vector<Case> cases = {
      {"unknown scene", [](DatasetManifest& m) { m.frames[0].scene = "nope"; }},
      {"unknown lighting", [](DatasetManifest& m) { m.frames[0].lighting = "nope"; }},
      {"unknown instance", [](DatasetManifest& m) { m.frames[0].objects[0].instance = "ghost"; }},
      {"bad split", [](DatasetManifest& m) { m.frames[0].split = "validation"; }},
      {"missing mask", [](DatasetManifest& m) { m.frames[0].objects[0].mask_path = "masks/x.ppm"; }},
      {"camera mismatch", [](DatasetManifest& m) { m.frames[0].camera.width = 99; }},
  };
  for (const auto& c : cases) {
    INFO("case: " << c.name);
    fs::path dir = temp_dir("refcheck");
    DatasetManifest m = tiny_dataset(dir, rng);
    c.corrupt(m);
    if (std::string(c.name) == "camera mismatch") {
      // keep pixels, change declared camera; must fail dimension agreement
      m.frames[0].camera.height = 12;
      m.frames[0].camera.cx = 49.5;
    }
    write_manifest(m);
    CHECK_THROWS(read_dataset(dir));
    fs::remove_all(dir);
  }
}

TEST_CASE("checkpoint: bitwise round-trip for f64 and f32") {
  fs::path dir = temp_dir("ckpt");
  Rng rng(10);
  std::uniform_real_distribution<double> u(-2, 2);

  ad::ParamSet<double> params;
  params.add(ad::Tensor<double>::param({2, 3}, {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)},
                                       "net.W"));
  params.add(ad::Tensor<double>::param({3}, {u(rng), u(rng), u(rng)}, "net.b"));

  Checkpoint ckpt;
  ckpt.step = 123;
  ckpt.config_hash = "abc";
  append_params(ckpt, params);
  save_checkpoint(dir / "model.ckpt", ckpt);

  Checkpoint loaded = load_checkpoint(dir / "model.ckpt");
  CHECK(loaded.step == 123);
  CHECK(loaded.config_hash == "abc");

  ad::ParamSet<double> fresh;
  fresh.add(ad::Tensor<double>::param({2, 3}, std::vector<double>(6, 0.0), "net.W"));
  fresh.add(ad::Tensor<double>::param({3}, std::vector<double>(3, 0.0), "net.b"));
  load_params(loaded, fresh);
  for (size_t i = 0; i < params.size(); ++i)
    CHECK(std::memcmp(params[i].data().data(), fresh[i].data().data(),
                      params[i].data().size() * sizeof(double)) == 0);

  // f32 set round-trips bitwise as well
  ad::ParamSet<float> fparams;
  fparams.add(ad::Tensor<float>::param({4}, {0.1f, -0.2f, 0.33f, 7.25f}, "p"));
  Checkpoint fc;
  append_params(fc, fparams);
  save_checkpoint(dir / "f32.ckpt", fc);
  ad::ParamSet<float> ffresh;
  ffresh.add(ad::Tensor<float>::param({4}, std::vector<float>(4, 0.f), "p"));
  load_params(load_checkpoint(dir / "f32.ckpt"), ffresh);
  CHECK(std::memcmp(fparams[0].data().data(), ffresh[0].data().data(), 4 * sizeof(float)) == 0);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: truncation and shape mismatch leave the model untouched") {
  fs::path dir = temp_dir("ckpt_bad");
  ad::ParamSet<double> params;
  params.add(ad::Tensor<double>::param({2}, {1.5, -2.5}, "p"));
  Checkpoint ckpt;
  append_params(ckpt, params);
  save_checkpoint(dir / "ok.ckpt", ckpt);

  // truncated file
  auto bytes = read_file(dir / "ok.ckpt");
  bytes.resize(bytes.size() - 4);
  write_file(dir / "trunc.ckpt", bytes);
  ad::ParamSet<double> target;
  target.add(ad::Tensor<double>::param({2}, {7.0, 8.0}, "p"));
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt"), RuntimeFailure);
  CHECK(target[0].data() == std::vector<double>{7.0, 8.0});

  // shape mismatch fails atomically
  ad::ParamSet<double> wrong;
  wrong.add(ad::Tensor<double>::param({3}, {0, 0, 0}, "p"));
  Checkpoint good = load_checkpoint(dir / "ok.ckpt");
  CHECK_THROWS_AS(load_params(good, wrong), RuntimeFailure);
  CHECK(wrong[0].data() == std::vector<double>{0, 0, 0});

  // magic mismatch
  auto bad = read_file(dir / "ok.ckpt");
  bad[0] = 'X';
  write_file(dir / "bad.ckpt", bad);
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), RuntimeFailure);
  fs::remove_all(dir);
}
