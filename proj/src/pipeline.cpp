#include "lane/pipeline.hpp"

#include <cinttypes>

namespace lane {

namespace fs = std::filesystem;

namespace {

Camera make_look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, int size) {
  Camera cam;
  cam.width = cam.height = size;
  cam.fx = cam.fy = 0.9 * size;
  cam.cx = cam.cy = size / 2.0;
  Eigen::Vector3d fwd = (target - eye).normalized();
  Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitZ()).normalized();
  Eigen::Vector3d down = fwd.cross(right);
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = fwd;
  cam.translation = eye;
  cam.validate();
  return cam;
}

struct Placement {
  int instance;
  ObjectPose pose;
  Camera camera;
  bool carfree;
};

}  // namespace

std::vector<int> mask_pixels(const Mask& mask) {
  std::vector<int> out;
  for (size_t i = 0; i < mask.on.size(); ++i)
    if (mask.on[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> all_pixels(int width, int height) {
  std::vector<int> out(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
  return out;
}

std::vector<int> complement_pixels(const Mask& mask) {
  std::vector<int> out;
  for (size_t i = 0; i < mask.on.size(); ++i)
    if (!mask.on[i]) out.push_back(static_cast<int>(i));
  return out;
}

OracleScene scene_from_manifest(const DatasetManifest& manifest, const std::string& scene_id) {
  const SceneMeta& meta = manifest.scene(scene_id);
  return build_scene(meta.spec, meta.seed, meta.id);
}

std::vector<PlacedCar> placed_cars_of_frame(const DatasetManifest& manifest,
                                            const FrameRecord& frame) {
  std::vector<PlacedCar> cars;
  for (const auto& obj : frame.objects) {
    PlacedCar car;
    car.pose = obj.pose;
    car.instance = 0;
    for (size_t i = 0; i < manifest.instances.size(); ++i)
      if (manifest.instances[i].id == obj.instance) car.instance = static_cast<int>(i);
    cars.push_back(car);
  }
  return cars;
}

DatasetManifest generate_dataset(const DatasetSpec& spec, const fs::path& dir) {
  LANE_CHECK(spec.num_scenes >= 1, "gen-data: need at least one scene");
  spec.scene.validate();
  fs::create_directories(dir);

  DatasetManifest manifest;
  manifest.root = dir;
  manifest.lighting = default_lighting_rig();

  int frame_counter = 0;
  for (int s = 0; s < spec.num_scenes; ++s) {
    const std::string scene_id = "s" + std::to_string(s);
    const std::uint64_t scene_seed = spec.seed * 1000 + s;
    OracleScene scene = build_scene(spec.scene, scene_seed, scene_id);

    if (s == 0) {
      for (const auto& inst : scene.instances)
        manifest.instances.push_back(InstanceMeta{inst.id, inst.albedo, inst.half_extents});
    }
    SceneMeta meta;
    meta.id = scene_id;
    meta.seed = scene_seed;
    meta.sky = scene.sky;
    meta.bounds = scene.bounds;
    meta.spec = spec.scene;
    manifest.scenes.push_back(meta);

    // one placement/camera set per scene, shared across lighting conditions
    Rng rng(scene_seed * 7919 + 13);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Placement> placements;
    const int n_car = spec.frames_per_env - spec.carfree_frames;
    for (int i = 0; i < spec.frames_per_env; ++i) {
      Placement p;
      p.carfree = i >= n_car;
      p.instance = i % spec.scene.num_instances;
      const auto& inst = scene.instances[p.instance];
      // cars sit on the road strip, which the generator keeps clear
      const double x = -4.2 + 8.4 * u01(rng);
      const double y = (2 * u01(rng) - 1) * (scene.road_half_width - 0.55);
      const double yaw = 2 * kPi * u01(rng);
      p.pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
      p.pose.translation = {x, y, inst.half_extents.z()};
      p.pose.half_extents = inst.half_extents;

      const Eigen::Vector3d target =
          p.carfree ? Eigen::Vector3d(x, y, 0.5)
                    : p.pose.translation + Eigen::Vector3d(0.4 * (u01(rng) - 0.5),
                                                           0.4 * (u01(rng) - 0.5), 0.1);
      const double cam_az = 2 * kPi * u01(rng);
      const double cam_dist = 3.6 + 1.8 * u01(rng);
      const double cam_h = 1.9 + 1.3 * u01(rng);
      Eigen::Vector3d eye = target + Eigen::Vector3d(cam_dist * std::cos(cam_az),
                                                     cam_dist * std::sin(cam_az), 0.0);
      eye.z() = cam_h;
      const double b = spec.scene.bounds_half - 0.4;
      eye.x() = std::clamp(eye.x(), -b, b);
      eye.y() = std::clamp(eye.y(), -b, b);
      p.camera = make_look_at(eye, target, spec.image_size);
      placements.push_back(p);
    }

    const int eval_start = static_cast<int>(std::lround(n_car * (1.0 - spec.eval_fraction)));
    for (const auto& light : manifest.lighting) {
      for (int i = 0; i < spec.frames_per_env; ++i) {
        const Placement& p = placements[i];
        std::vector<PlacedCar> cars;
        if (!p.carfree) cars.push_back(PlacedCar{p.instance, p.pose});

        OracleRender render = oracle_render(scene, p.camera, light, cars);

        char buf[16];
        std::snprintf(buf, sizeof(buf), "f%05d", frame_counter++);
        FrameRecord rec;
        rec.id = buf;
        rec.scene = scene_id;
        rec.lighting = light.id;
        const bool is_eval = p.carfree ? (i == spec.frames_per_env - 1) : (i >= eval_start);
        rec.split = is_eval ? "eval" : "train";
        rec.camera = p.camera;
        rec.image_path = "images/" + rec.id + ".ppm";
        write_ppm(dir / rec.image_path, render.image);
        if (spec.with_depth) {
          rec.depth_path = "depth/" + rec.id + ".pfm";
          write_pfm(dir / rec.depth_path, render.depth);
        }
        if (!p.carfree) {
          FrameObject obj;
          obj.instance = scene.instances[p.instance].id;
          obj.pose = p.pose;
          obj.mask_path = "masks/" + obj.instance + "/" + rec.id + ".ppm";
          write_ppm(dir / obj.mask_path, mask_to_image(render.masks[0]));
          rec.objects.push_back(obj);
        }
        manifest.frames.push_back(rec);
      }
    }
  }

  write_manifest(manifest);
  return read_dataset(dir);  // run the validator before handing the dataset back
}

LoadedDataset load_training_data(const fs::path& dir) {
  LoadedDataset data;
  data.manifest = read_dataset(dir);
  data.frames.reserve(data.manifest.frames.size());
  for (const auto& rec : data.manifest.frames) {
    LoadedFrame f;
    f.rec = &rec;
    for (size_t s = 0; s < data.manifest.scenes.size(); ++s)
      if (data.manifest.scenes[s].id == rec.scene) f.scene_index = static_cast<int>(s);
    f.lighting_index = data.manifest.lighting_index(rec.lighting);
    f.image = load_frame_image(data.manifest, rec);
    if (auto d = load_frame_depth(data.manifest, rec)) f.depth = std::move(*d);

    f.any_object = Mask(f.image.width, f.image.height);
    for (const auto& obj : rec.objects) {
      Mask m = load_object_mask(data.manifest, obj);
      LANE_CHECK(m.width == f.image.width && m.height == f.image.height,
                 "dataset: mask dimensions do not match image for frame " + rec.id);
      for (size_t i = 0; i < m.on.size(); ++i)
        if (m.on[i]) f.any_object.on[i] = 1;
      f.masks.push_back(std::move(m));
    }
    f.world_pixels = complement_pixels(f.any_object);

    f.box_pixels.resize(rec.objects.size());
    for (size_t o = 0; o < rec.objects.size(); ++o) {
      const ObjectPose& pose = rec.objects[o].pose;
      for (int p = 0; p < f.image.width * f.image.height; ++p) {
        const Ray ray = pixel_ray(rec.camera, p);
        auto hit = ray_box_intersect(ray, pose);
        if (!hit) continue;
        if (std::min(hit->second, ray.t_far) - std::max(hit->first, ray.t_near) < 1e-6)
          continue;
        f.box_pixels[o].push_back({p, f.masks[o].on[p] != 0});
      }
    }
    data.frames.push_back(std::move(f));
  }
  return data;
}

double psnr_pixels(const std::vector<float>& pred, const Image& gt,
                   const std::vector<int>& pixels) {
  LANE_CHECK(pred.size() == pixels.size() * 3, "psnr_pixels: size mismatch");
  LANE_CHECK(!pixels.empty(), "psnr_pixels: empty pixel set");
  double acc = 0;
  for (size_t i = 0; i < pixels.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const double d = static_cast<double>(pred[3 * i + k]) -
                       gt.rgb[3 * static_cast<size_t>(pixels[i]) + k];
      acc += d * d;
    }
  }
  const double err = acc / (3.0 * static_cast<double>(pixels.size()));
  if (err <= 0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / err));
}

}  // namespace lane
