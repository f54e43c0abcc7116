#pragma once

#include <Eigen/Geometry>

#include <optional>
#include <string>
#include <vector>

#include "lane/image.hpp"
#include "lane/rendering.hpp"

namespace lane {

// Procedural ground-truth world: a ground plane, yawed boxes, spheres, and
// movable car primitives, lit by a directional sun plus constant ambient,
// rendered by an analytic Lambertian ray tracer with hard shadows.

struct LightingCondition {
  std::string id;
  double azimuth_deg = 0;
  double elevation_deg = 45;  // in (0, 90]
  double sun_intensity = 1.0;
  double ambient = 0.2;

  Eigen::Vector3d sun_dir() const {  // unit vector pointing toward the sun
    const double az = deg2rad(azimuth_deg), el = deg2rad(elevation_deg);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  }

  void validate() const {
    LANE_CHECK(elevation_deg > 0 && elevation_deg <= 90,
               "lighting: elevation must be in (0, 90]");
    LANE_CHECK(sun_intensity >= 0 && ambient >= 0, "lighting: intensities must be nonnegative");
  }
};

struct OracleBox {
  Eigen::Vector3d center;
  Eigen::Vector3d half;
  double yaw = 0;
  Eigen::Vector3d albedo;

  ObjectPose pose() const {
    ObjectPose p;
    p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
    p.translation = center;
    p.half_extents = half;
    return p;
  }
};

struct OracleSphere {
  Eigen::Vector3d center;
  double radius = 1;
  Eigen::Vector3d albedo;
};

// A car is a body box with a hemisphere cabin, both defined in the
// normalized [-1,1]^3 box of its pose, so one shape serves any box size.
struct CarInstance {
  std::string id;
  Eigen::Vector3d albedo;
  Eigen::Vector3d half_extents;  // default box size when placed
};

constexpr double kCarBodyTop = 0.25;    // body box spans z in [-1, kCarBodyTop]
constexpr double kCarCabinRadius = 0.6; // cabin hemisphere on top of the body

struct PlacedCar {
  int instance = 0;  // index into OracleScene::instances
  ObjectPose pose;
};

struct SceneSpec {
  int num_boxes = 4;
  int num_spheres = 2;
  int num_instances = 2;
  double bounds_half = 6.0;       // scene square [-b, b]^2
  double road_half_width = 1.6;   // strip kept clear for car placements
  double min_box_half = 0.35;
  double max_box_half = 0.9;
  double tall_occluder_height = 1.35;  // one box this tall is guaranteed

  void validate() const {
    LANE_CHECK(num_boxes >= 0 && num_spheres >= 0, "scene spec: negative primitive count");
    LANE_CHECK(num_instances >= 1 && num_instances <= 6,
               "scene spec: instance count must be in 1..6");
    LANE_CHECK(bounds_half > 2.0, "scene spec: bounds too small");
    LANE_CHECK(max_box_half >= min_box_half && min_box_half > 0, "scene spec: bad box size range");
  }
};

struct OracleScene {
  std::string id;
  Eigen::Vector3d ground_albedo;
  Eigen::Vector3d sky;  // constant sky radiance
  std::vector<OracleBox> boxes;
  std::vector<OracleSphere> spheres;
  std::vector<CarInstance> instances;
  Eigen::AlignedBox3d bounds;
  double road_half_width = 1.6;
};

struct Hit {
  double t = 0;
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
  Eigen::Vector3d albedo;
  int placed_car = -1;  // index into the placed list, -1 for world geometry
};

// Deterministic for (spec, seed).  Static occluders are rejection-sampled to
// be pairwise disjoint and clear of the road strip; one box is forced tall
// enough to shade the road at low sun.
OracleScene build_scene(const SceneSpec& spec, std::uint64_t seed, const std::string& id);

std::optional<Hit> raycast(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                           const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                           double t_min, double t_max);

bool sun_occluded(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                  const Eigen::Vector3d& point, const Eigen::Vector3d& sun_dir);

// Lambertian radiance of a surface point: albedo * (ambient + sun * max(0, n.l) * vis).
Eigen::Vector3d shade_point(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                            const Eigen::Vector3d& point, const Eigen::Vector3d& normal,
                            const Eigen::Vector3d& albedo, const LightingCondition& light);

struct OracleRender {
  Image image;
  DepthMap depth;
  std::vector<Mask> masks;  // one per placed car, in order
};

OracleRender oracle_render(const OracleScene& scene, const Camera& cam,
                           const LightingCondition& light,
                           const std::vector<PlacedCar>& cars);

// Scalar irradiance at a surface point (the normal is resolved from the
// scene geometry; off-surface points are a contract error).
double oracle_irradiance(const OracleScene& scene, const std::vector<PlacedCar>& cars,
                         const Eigen::Vector3d& point, const LightingCondition& light);

// Surface lookup used by oracle_irradiance and the diagnostics; returns the
// outward normal of the geometry the point lies on (within tol).
std::optional<Eigen::Vector3d> surface_normal_at(const OracleScene& scene,
                                                 const std::vector<PlacedCar>& cars,
                                                 const Eigen::Vector3d& point,
                                                 double tol = 1e-4);

// Default five-condition lighting rig shared by every scene: fixed azimuth,
// elevations sweeping low sun to near-zenith.
std::vector<LightingCondition> default_lighting_rig();

}  // namespace lane
