#include "lane/scenegen.hpp"

#include <algorithm>
#include <cmath>

namespace lane {

namespace {

constexpr double kShadowBias = 1e-4;

// XY footprint radius used for disjointness during placement.
double footprint(const OracleBox& b) { return std::hypot(b.half.x(), b.half.y()); }

struct CarLocalHit {
  double t;
  Eigen::Vector3d normal_local;  // in normalized coordinates
};

// Intersection with the car shape in its normalized frame.  The ray keeps
// the world parameterization: p'(t) = o' + t d' with o', d' transformed.
std::optional<CarLocalHit> intersect_car_local(const Eigen::Vector3d& o,
                                               const Eigen::Vector3d& d, double t_min,
                                               double t_max) {
  std::optional<CarLocalHit> best;

  // body box: [-1,1] x [-1,1] x [-1, kCarBodyTop]
  {
    const Eigen::Vector3d lo(-1, -1, -1), hi(1, 1, kCarBodyTop);
    double t0 = t_min, t1 = t_max;
    int axis_in = -1;
    for (int a = 0; a < 3 && t0 <= t1; ++a) {
      if (std::abs(d[a]) < 1e-12) {
        if (o[a] < lo[a] || o[a] > hi[a]) t0 = t1 + 1;
        continue;
      }
      double ta = (lo[a] - o[a]) / d[a];
      double tb = (hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        axis_in = a;
      }
      t1 = std::min(t1, tb);
    }
    if (t0 <= t1 && t0 > t_min && axis_in >= 0) {
      Eigen::Vector3d n = Eigen::Vector3d::Zero();
      n[axis_in] = d[axis_in] > 0 ? -1.0 : 1.0;
      best = CarLocalHit{t0, n};
    }
  }

  // cabin hemisphere: |p - c| = r, z >= kCarBodyTop
  {
    const Eigen::Vector3d c(0, 0, kCarBodyTop);
    const double r = kCarCabinRadius;
    const Eigen::Vector3d oc = o - c;
    const double A = d.dot(d);
    const double B = 2.0 * oc.dot(d);
    const double C = oc.dot(oc) - r * r;
    const double disc = B * B - 4 * A * C;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-B - sq) / (2 * A), (-B + sq) / (2 * A)}) {
        if (t <= t_min || t > t_max) continue;
        Eigen::Vector3d p = o + t * d;
        if (p.z() < kCarBodyTop) continue;
        if (!best || t < best->t) best = CarLocalHit{t, (p - c).normalized()};
        break;
      }
    }
  }
  return best;
}

std::optional<double> intersect_sphere(const OracleSphere& s, const Eigen::Vector3d& o,
                                       const Eigen::Vector3d& d, double t_min, double t_max) {
  const Eigen::Vector3d oc = o - s.center;
  const double B = 2.0 * oc.dot(d);
  const double C = oc.dot(oc) - s.radius * s.radius;
  const double disc = B * B - 4 * C;  // |d| = 1
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (double t : {(-B - sq) / 2, (-B + sq) / 2})
    if (t > t_min && t <= t_max) return t;
  return std::nullopt;
}

// Box intersection in the box's normalized frame, returning entry t and the
// world-space normal.
std::optional<std::pair<double, Eigen::Vector3d>> intersect_box(const OracleBox& b,
                                                                const Eigen::Vector3d& o,
                                                                const Eigen::Vector3d& d,
                                                                double t_min, double t_max) {
  const ObjectPose pose = b.pose();
  const Eigen::Vector3d ol = transform_to_object(o, pose);
  const Eigen::Vector3d dl =
      (pose.rotation.conjugate() * d).cwiseQuotient(pose.half_extents);
  double t0 = t_min, t1 = t_max;
  int axis_in = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dl[a]) < 1e-12) {
      if (ol[a] < -1 || ol[a] > 1) return std::nullopt;
      continue;
    }
    double ta = (-1 - ol[a]) / dl[a];
    double tb = (1 - ol[a]) / dl[a];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis_in = a;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (axis_in < 0 || t0 <= t_min) return std::nullopt;
  Eigen::Vector3d nl = Eigen::Vector3d::Zero();
  nl[axis_in] = dl[axis_in] > 0 ? -1.0 : 1.0;
  Eigen::Vector3d nw = (pose.rotation * nl.cwiseQuotient(pose.half_extents)).normalized();
  return std::make_pair(t0, nw);
}

}  // namespace

std::optional<Hit> raycast(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                           const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                           double t_min, double t_max) {
  std::optional<Hit> best;
  auto consider = [&](double t, const Eigen::Vector3d& n, const Eigen::Vector3d& albedo,
                      int placed) {
    if (!best || t < best->t)
      best = Hit{t, origin + t * dir, n, albedo, placed};
  };

  // ground plane z = 0
  if (std::abs(dir.z()) > 1e-12) {
    const double t = -origin.z() / dir.z();
    if (t > t_min && t <= t_max) {
      Eigen::Vector3d p = origin + t * dir;
      if (std::abs(p.x()) <= scene.bounds.max().x() * 2.5 &&
          std::abs(p.y()) <= scene.bounds.max().y() * 2.5)
        consider(t, Eigen::Vector3d::UnitZ(), scene.ground_albedo, -1);
    }
  }

  for (const auto& b : scene.boxes) {
    const double cap = best ? best->t : t_max;
    if (auto hit = intersect_box(b, origin, dir, t_min, cap))
      consider(hit->first, hit->second, b.albedo, -1);
  }
  for (const auto& s : scene.spheres) {
    const double cap = best ? best->t : t_max;
    if (auto t = intersect_sphere(s, origin, dir, t_min, cap))
      consider(*t, (origin + *t * dir - s.center).normalized(), s.albedo, -1);
  }
  for (size_t i = 0; i < cars.size(); ++i) {
    const auto& pose = cars[i].pose;
    const Eigen::Vector3d ol = transform_to_object(origin, pose);
    const Eigen::Vector3d dl = (pose.rotation.conjugate() * dir).cwiseQuotient(pose.half_extents);
    const double cap = best ? best->t : t_max;
    if (auto hit = intersect_car_local(ol, dl, t_min, cap)) {
      Eigen::Vector3d nw =
          (pose.rotation * hit->normal_local.cwiseQuotient(pose.half_extents)).normalized();
      consider(hit->t, nw, scene.instances[cars[i].instance].albedo, static_cast<int>(i));
    }
  }
  return best;
}

bool sun_occluded(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                  const Eigen::Vector3d& point, const Eigen::Vector3d& sun_dir) {
  // Shadow rays point above the horizon, so the ground plane is never hit;
  // the bias keeps the ray off its own surface.
  return raycast(scene, cars, point + kShadowBias * sun_dir, sun_dir, kShadowBias, 1e9)
      .has_value();
}

Eigen::Vector3d shade_point(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                            const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                            const Eigen::Vector3d& albedo, const LightingCondition& light) {
  const Eigen::Vector3d l = light.sun_dir();
  const double lambert = std::max(0.0, normal.dot(l));
  double sun = 0.0;
  if (lambert > 0.0 && !sun_occluded(scene, cars, point, l)) sun = light.sun_intensity * lambert;
  Eigen::Vector3d c = albedo * (light.ambient + sun);
  return c.cwiseMin(1.0).cwiseMax(0.0);
}

OracleRender oracle_render(const OracleScene& scene, const Camera& cam,
                           const LightingCondition& light,
                           const std::vector<PlacedCar>& cars) {
  cam.validate();
  light.validate();
  OracleRender out;
  out.image = Image(cam.width, cam.height);
  out.depth = DepthMap(cam.width, cam.height);
  out.masks.assign(cars.size(), Mask(cam.width, cam.height));

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = generate_ray(cam, x + 0.5, y + 0.5, 1e-4, 1e9);
      Eigen::Vector3d color = scene.sky.cwiseMin(1.0).cwiseMax(0.0);
      if (auto hit = raycast(scene, cars, ray.origin, ray.dir, ray.t_near, ray.t_far)) {
        color = shade_point(scene, cars, hit->point, hit->normal, hit->albedo, light);
        out.depth.at(x, y) = static_cast<float>(hit->t);
        if (hit->placed_car >= 0) out.masks[hit->placed_car].at(x, y) = 1;
      }
      float* px = out.image.pixel(x, y);
      for (int k = 0; k < 3; ++k) px[k] = static_cast<float>(color[k]);
    }
  }
  return out;
}

std::optional<Eigen::Vector3d> surface_normal_at(const OracleScene& scene,
                                                 const std::vector<PlacedCar>& cars,
                                                 const Eigen::Vector3d& point, double tol) {
  // ground plane
  if (std::abs(point.z()) < tol) return Eigen::Vector3d::UnitZ();

  for (const auto& b : scene.boxes) {
    const Eigen::Vector3d pl = transform_to_object(point, b.pose());
    for (int a = 0; a < 3; ++a) {
      // on face a: |pl[a]| == 1 (within tol, in world units) and inside the
      // other two slabs
      if (std::abs(std::abs(pl[a]) - 1.0) * b.half[a] >= tol) continue;
      bool inside = true;
      for (int o = 0; o < 3; ++o)
        if (o != a && std::abs(pl[o]) > 1.0 + tol / b.half[o]) inside = false;
      if (!inside) continue;
      Eigen::Vector3d nl = Eigen::Vector3d::Zero();
      nl[a] = pl[a] > 0 ? 1.0 : -1.0;
      return (b.pose().rotation * nl.cwiseQuotient(b.half)).normalized();
    }
  }
  for (const auto& s : scene.spheres) {
    if (std::abs((point - s.center).norm() - s.radius) < tol)
      return (point - s.center).normalized();
  }
  for (const auto& car : cars) {
    const Eigen::Vector3d pl = transform_to_object(point, car.pose);
    const Eigen::Vector3d h = car.pose.half_extents;
    // cabin
    const Eigen::Vector3d c(0, 0, kCarBodyTop);
    if (pl.z() >= kCarBodyTop &&
        std::abs((pl - c).norm() - kCarCabinRadius) * h.minCoeff() < tol)
      return (car.pose.rotation * (pl - c).cwiseQuotient(h)).normalized();
    // body box faces
    const Eigen::Vector3d lo(-1, -1, -1), hi(1, 1, kCarBodyTop);
    if ((pl.array() >= lo.array() - tol).all() && (pl.array() <= hi.array() + tol).all()) {
      for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d nl = Eigen::Vector3d::Zero();
        if (std::abs(pl[a] - hi[a]) * h[a] < tol) {
          nl[a] = 1;
          return (car.pose.rotation * nl.cwiseQuotient(h)).normalized();
        }
        if (std::abs(pl[a] - lo[a]) * h[a] < tol) {
          nl[a] = -1;
          return (car.pose.rotation * nl.cwiseQuotient(h)).normalized();
        }
      }
    }
  }
  return std::nullopt;
}

double oracle_irradiance(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                         const Eigen::Vector3d& point, const LightingCondition& light) {
  auto normal = surface_normal_at(scene, cars, point);
  LANE_CHECK(normal.has_value(), "oracle_irradiance: point is not on a surface");
  const Eigen::Vector3d l = light.sun_dir();
  const double lambert = std::max(0.0, normal->dot(l));
  double sun = 0.0;
  if (lambert > 0.0 && !sun_occluded(scene, cars, point, l))
    sun = light.sun_intensity * lambert;
  return light.ambient + sun;
}

OracleScene build_scene(const SceneSpec& spec, std::uint64_t seed, const std::string& id) {
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  OracleScene scene;
  scene.id = id;
  scene.road_half_width = spec.road_half_width;
  const double b = spec.bounds_half;
  scene.bounds = Eigen::AlignedBox3d(Eigen::Vector3d(-b, -b, 0), Eigen::Vector3d(b, b, 4.0));
  scene.ground_albedo =
      Eigen::Vector3d(0.42, 0.42, 0.45) + 0.18 * u01(rng) * Eigen::Vector3d::Ones();
  const double sky_level = 0.62 + 0.18 * u01(rng);
  scene.sky = Eigen::Vector3d(sky_level * 0.92, sky_level * 0.96, sky_level);

  const Eigen::Vector3d palette[6] = {
      {0.80, 0.22, 0.18}, {0.20, 0.34, 0.82}, {0.22, 0.66, 0.30},
      {0.85, 0.72, 0.18}, {0.78, 0.78, 0.80}, {0.38, 0.25, 0.55},
  };
  for (int i = 0; i < spec.num_instances; ++i) {
    CarInstance car;
    car.id = "car" + std::to_string(i);
    car.albedo = palette[i];
    car.half_extents = {1.00 + 0.07 * i, 0.50 + 0.025 * i, 0.40 + 0.02 * i};
    scene.instances.push_back(car);
  }

  auto road_clear = [&](double cx, double cy, double r) {
    return std::abs(cy) > spec.road_half_width + r + 0.25 && std::abs(cx) < b - r &&
           std::abs(cy) < b - r;
  };
  auto disjoint = [&](double cx, double cy, double r) {
    for (const auto& box : scene.boxes)
      if (std::hypot(cx - box.center.x(), cy - box.center.y()) < r + footprint(box) + 0.3)
        return false;
    for (const auto& s : scene.spheres)
      if (std::hypot(cx - s.center.x(), cy - s.center.y()) < r + s.radius + 0.3) return false;
    return true;
  };
  auto random_albedo = [&]() {
    return Eigen::Vector3d(0.25 + 0.5 * u01(rng), 0.25 + 0.5 * u01(rng), 0.25 + 0.5 * u01(rng));
  };

  for (int i = 0; i < spec.num_boxes; ++i) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      OracleBox box;
      const double sx = spec.min_box_half + (spec.max_box_half - spec.min_box_half) * u01(rng);
      const double sy = spec.min_box_half + (spec.max_box_half - spec.min_box_half) * u01(rng);
      double sz = 0.4 + 0.8 * u01(rng);
      if (i == 0) sz = spec.tall_occluder_height;  // guaranteed shadow caster
      box.half = {sx, sy, sz};
      const double r = footprint(box);
      double cx, cy;
      if (i == 0) {
        // next to the road on the sun side so its shadow sweeps the strip
        cx = -b * 0.45 + 0.9 * b * u01(rng);
        cy = spec.road_half_width + r + 0.35 + 0.8 * u01(rng);
      } else {
        cx = (2 * u01(rng) - 1) * (b - 1);
        cy = (2 * u01(rng) - 1) * (b - 1);
      }
      if (!road_clear(cx, cy, r) || !disjoint(cx, cy, r)) continue;
      box.center = {cx, cy, sz};
      box.yaw = 2 * kPi * u01(rng);
      box.albedo = random_albedo();
      scene.boxes.push_back(box);
      break;
    }
  }
  for (int i = 0; i < spec.num_spheres; ++i) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      OracleSphere s;
      s.radius = 0.35 + 0.45 * u01(rng);
      const double cx = (2 * u01(rng) - 1) * (b - 1);
      const double cy = (2 * u01(rng) - 1) * (b - 1);
      if (!road_clear(cx, cy, s.radius) || !disjoint(cx, cy, s.radius)) continue;
      s.center = {cx, cy, s.radius};
      s.albedo = random_albedo();
      scene.spheres.push_back(s);
      break;
    }
  }
  return scene;
}

std::vector<LightingCondition> default_lighting_rig() {
  std::vector<LightingCondition> rig;
  const double elevations[5] = {28, 42, 55, 68, 82};
  for (int i = 0; i < 5; ++i) {
    LightingCondition c;
    c.id = "l" + std::to_string(i);
    c.azimuth_deg = 120.0;
    c.elevation_deg = elevations[i];
    c.sun_intensity = 0.9;
    c.ambient = 0.25;
    rig.push_back(c);
  }
  return rig;
}

}  // namespace lane
