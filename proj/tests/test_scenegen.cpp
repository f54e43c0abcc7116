#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lane/scenegen.hpp"

using namespace lane;

namespace {

Camera look_at_camera(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, int w, int h) {
  Camera cam;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = 0.9 * w;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  Eigen::Vector3d fwd = (target - eye).normalized();
  Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitZ()).normalized();
  Eigen::Vector3d down = fwd.cross(right);
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = fwd;
  cam.translation = eye;
  return cam;
}

OracleScene empty_scene(Eigen::Vector3d ground_albedo) {
  OracleScene s;
  s.id = "t";
  s.ground_albedo = std::move(ground_albedo);
  s.sky = {0.7, 0.7, 0.7};
  s.bounds = Eigen::AlignedBox3d(Eigen::Vector3d(-6, -6, 0), Eigen::Vector3d(6, 6, 4));
  return s;
}

}  // namespace

TEST_CASE("build_scene: deterministic for (spec, seed)") {
  SceneSpec spec;
  auto a = build_scene(spec, 42, "s0");
  auto b = build_scene(spec, 42, "s0");
  REQUIRE(a.boxes.size() == b.boxes.size());
  CHECK(a.ground_albedo == b.ground_albedo);
  for (size_t i = 0; i < a.boxes.size(); ++i) {
    CHECK(a.boxes[i].center == b.boxes[i].center);
    CHECK(a.boxes[i].yaw == b.boxes[i].yaw);
  }
  auto c = build_scene(spec, 43, "s0");
  CHECK(a.ground_albedo != c.ground_albedo);
}

TEST_CASE("build_scene: occluders pairwise disjoint and off the road (property)") {
  SceneSpec spec;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    auto scene = build_scene(spec, seed, "s");
    REQUIRE(scene.boxes.size() >= 1);
    // pairwise XY footprint disjointness
    for (size_t i = 0; i < scene.boxes.size(); ++i) {
      const auto& bi = scene.boxes[i];
      const double ri = std::hypot(bi.half.x(), bi.half.y());
      CHECK(std::abs(bi.center.y()) > scene.road_half_width);  // road kept clear
      for (size_t j = i + 1; j < scene.boxes.size(); ++j) {
        const auto& bj = scene.boxes[j];
        const double rj = std::hypot(bj.half.x(), bj.half.y());
        const double d = std::hypot(bi.center.x() - bj.center.x(), bi.center.y() - bj.center.y());
        CHECK(d >= ri + rj);
      }
      for (const auto& s : scene.spheres) {
        const double d = std::hypot(bi.center.x() - s.center.x(), bi.center.y() - s.center.y());
        CHECK(d >= ri + s.radius);
      }
    }
    // guaranteed tall occluder
    double tallest = 0;
    for (const auto& b : scene.boxes) tallest = std::max(tallest, 2 * b.half.z());
    CHECK(tallest >= 2 * spec.tall_occluder_height - 1e-12);
  }
}

TEST_CASE("no occluders means no shadowed ground points") {
  SceneSpec spec;
  spec.num_boxes = 0;
  spec.num_spheres = 0;
  auto scene = build_scene(spec, 7, "s");
  for (const auto& light : default_lighting_rig()) {
    for (double x = -5; x <= 5; x += 1.3)
      for (double y = -5; y <= 5; y += 1.1)
        CHECK_FALSE(sun_occluded(scene, {}, {x, y, 0.0}, light.sun_dir()));
  }
}

TEST_CASE("shade_point: horizontal plane under 30 degree sun") {
  auto scene = empty_scene({1, 1, 1});
  LightingCondition light{.id = "t", .azimuth_deg = 70, .elevation_deg = 30,
                          .sun_intensity = 1.0, .ambient = 0.0};
  Eigen::Vector3d c =
      shade_point(scene, {}, {0.5, -0.3, 0.0}, Eigen::Vector3d::UnitZ(), {1, 1, 1}, light);
  for (int k = 0; k < 3; ++k) CHECK(c[k] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("shade_point: shadowed point gets exactly ambient * albedo") {
  auto scene = empty_scene({0.6, 0.5, 0.4});
  OracleBox wall;
  wall.center = {0, 2, 1.0};
  wall.half = {2.0, 0.3, 1.0};
  wall.albedo = {0.5, 0.5, 0.5};
  scene.boxes.push_back(wall);
  // sun from +y at low elevation; points just -y of the wall are shadowed
  LightingCondition light{.id = "t", .azimuth_deg = 90, .elevation_deg = 25,
                          .sun_intensity = 0.9, .ambient = 0.2};
  Eigen::Vector3d p(0, 1.0, 0.0);
  REQUIRE(sun_occluded(scene, {}, p, light.sun_dir()));
  Eigen::Vector3d c =
      shade_point(scene, {}, p, Eigen::Vector3d::UnitZ(), scene.ground_albedo, light);
  for (int k = 0; k < 3; ++k)
    CHECK(c[k] == doctest::Approx(0.2 * scene.ground_albedo[k]).epsilon(1e-15));
}

TEST_CASE("shade_point: sphere top under zenith sun") {
  auto scene = empty_scene({0.5, 0.5, 0.5});
  OracleSphere s;
  s.center = {0, 0, 1.0};
  s.radius = 1.0;
  s.albedo = {0.7, 0.6, 0.5};
  scene.spheres.push_back(s);
  LightingCondition light{.id = "t", .azimuth_deg = 0, .elevation_deg = 90,
                          .sun_intensity = 0.8, .ambient = 0.15};
  Eigen::Vector3d top(0, 0, 2.0);
  Eigen::Vector3d c = shade_point(scene, {}, top, Eigen::Vector3d::UnitZ(), s.albedo, light);
  for (int k = 0; k < 3; ++k)
    CHECK(c[k] == doctest::Approx(s.albedo[k] * (0.15 + 0.8)).epsilon(1e-12));
}

TEST_CASE("oracle_irradiance: shadowed, aligned, and elevation-ratio cases") {
  auto scene = empty_scene({0.5, 0.5, 0.5});

  LightingCondition zenith{.id = "a", .azimuth_deg = 0, .elevation_deg = 90,
                           .sun_intensity = 0.75, .ambient = 0.2};
  // open plane, n parallel to l
  CHECK(oracle_irradiance(scene, {}, {1, 1, 0}, zenith) == doctest::Approx(0.95));

  LightingCondition low = zenith;
  low.elevation_deg = 30;
  low.ambient = 0.0;
  LightingCondition high = low;
  high.elevation_deg = 90;
  const double ratio = oracle_irradiance(scene, {}, {0, 0, 0}, low) /
                       oracle_irradiance(scene, {}, {0, 0, 0}, high);
  CHECK(ratio == doctest::Approx(0.5).epsilon(1e-12));

  // shadowed -> ambient only
  OracleBox wall;
  wall.center = {0, 2, 1.0};
  wall.half = {2.0, 0.3, 1.0};
  wall.albedo = {0.5, 0.5, 0.5};
  scene.boxes.push_back(wall);
  LightingCondition side{.id = "b", .azimuth_deg = 90, .elevation_deg = 25,
                         .sun_intensity = 0.9, .ambient = 0.2};
  CHECK(oracle_irradiance(scene, {}, {0, 1.0, 0}, side) == doctest::Approx(0.2));

  // a point in free space is a contract error
  CHECK_THROWS_AS(oracle_irradiance(scene, {}, {0, 0, 2.7}, side), ContractError);
}

TEST_CASE("oracle_irradiance: monotone in elevation at unshadowed plane points (property)") {
  SceneSpec spec;
  spec.num_boxes = 0;
  spec.num_spheres = 0;
  auto scene = build_scene(spec, 3, "s");
  LightingCondition light{.id = "t", .azimuth_deg = 45, .elevation_deg = 10,
                          .sun_intensity = 0.9, .ambient = 0.1};
  for (double x = -4; x <= 4; x += 2.1) {
    for (double y = -4; y <= 4; y += 1.7) {
      double prev = -1;
      for (double e = 10; e <= 90; e += 8) {
        light.elevation_deg = e;
        const double irr = oracle_irradiance(scene, {}, {x, y, 0.0}, light);
        CHECK(irr >= prev);
        prev = irr;
      }
    }
  }
}

TEST_CASE("oracle_render: bit-exact reproducibility, depth and mask consistency") {
  SceneSpec spec;
  auto scene = build_scene(spec, 11, "s");
  PlacedCar car0{0, {}};
  car0.pose.translation = {0.0, 0.0, scene.instances[0].half_extents.z()};
  car0.pose.half_extents = scene.instances[0].half_extents;
  PlacedCar car1{1, {}};
  car1.pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.9, Eigen::Vector3d::UnitZ()));
  car1.pose.translation = {2.4, 0.2, scene.instances[1].half_extents.z()};
  car1.pose.half_extents = scene.instances[1].half_extents;
  std::vector<PlacedCar> cars = {car0, car1};

  Camera cam = look_at_camera({-4.5, -4.0, 2.8}, {0.5, 0, 0.4}, 48, 48);
  auto light = default_lighting_rig()[1];
  auto a = oracle_render(scene, cam, light, cars);
  auto b = oracle_render(scene, cam, light, cars);
  CHECK(a.image.rgb == b.image.rgb);
  CHECK(a.depth.depth == b.depth.depth);

  REQUIRE(a.masks.size() == 2);
  CHECK(a.masks[0].count() > 30);  // both cars visible
  CHECK(a.masks[1].count() > 30);

  // masks partition: at most one instance per pixel, set exactly at pixels
  // whose first hit is that car
  int checked = 0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      CHECK(a.masks[0].at(x, y) + a.masks[1].at(x, y) <= 1);
      const Ray ray = generate_ray(cam, x + 0.5, y + 0.5, 1e-4, 1e9);
      auto hit = raycast(scene, cars, ray.origin, ray.dir, ray.t_near, ray.t_far);
      if (hit && (x + y) % 7 == 0) {
        CHECK(a.depth.at(x, y) == doctest::Approx(hit->t));
        for (int i = 0; i < 2; ++i)
          CHECK(a.masks[i].at(x, y) == (hit->placed_car == i ? 1 : 0));
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("raycast: car hemisphere cabin is visible from above") {
  SceneSpec spec;
  auto scene = build_scene(spec, 2, "s");
  PlacedCar car{0, {}};
  car.pose.translation = {0, 0, scene.instances[0].half_extents.z()};
  car.pose.half_extents = scene.instances[0].half_extents;

  // straight down onto the cabin center
  auto hit = raycast(scene, {car}, {0, 0, 5.0}, {0, 0, -1}, 1e-4, 100.0);
  REQUIRE(hit.has_value());
  CHECK(hit->placed_car == 0);
  const double hz = car.pose.half_extents.z();
  const double cabin_top = hz * (kCarBodyTop + kCarCabinRadius);
  CHECK(hit->point.z() == doctest::Approx(hz + cabin_top).epsilon(1e-9));
  CHECK((hit->normal - Eigen::Vector3d::UnitZ()).norm() < 1e-9);
}
