#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <vector>

#include "lane/encoding.hpp"
#include "lane/ops.hpp"

namespace lane {

// Pinhole camera.  rotation maps camera axes (x right, y down, z forward)
// into world coordinates; translation is the camera origin.
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    LANE_CHECK(fx > 0 && fy > 0, "camera: focal lengths must be positive");
    LANE_CHECK(width > 0 && height > 0, "camera: image size must be positive");
    Eigen::Matrix3d should_be_I = rotation * rotation.transpose();
    LANE_CHECK((should_be_I - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6,
               "camera: rotation is not orthonormal");
  }
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;  // unit length
  double t_near = 0, t_far = 0;
};

// Pixel coordinates are continuous; (cx, cy) maps exactly to the camera
// forward axis.
inline Ray generate_ray(const Camera& cam, double px, double py, double t_near, double t_far) {
  Eigen::Vector3d d_cam((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
  Ray r;
  r.origin = cam.translation;
  r.dir = (cam.rotation * d_cam).normalized();
  r.t_near = t_near;
  r.t_far = t_far;
  return r;
}

inline std::vector<Ray> generate_rays(const Camera& cam,
                                      const std::vector<std::pair<double, double>>& pixels,
                                      double t_near, double t_far) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (auto [px, py] : pixels) {
    LANE_CHECK(px >= 0 && px < cam.width && py >= 0 && py < cam.height,
               "generate_rays: pixel outside image bounds");
    rays.push_back(generate_ray(cam, px, py, t_near, t_far));
  }
  return rays;
}

// 3D box pose: object-to-world rotation (quaternion is authoritative),
// translation, and per-axis half extents.  Normalized object coordinates
// live in [-1,1]^3.
struct ObjectPose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();

  void validate() const {
    LANE_CHECK(std::abs(rotation.norm() - 1.0) < 1e-6, "pose: quaternion must be unit length");
    LANE_CHECK(half_extents.minCoeff() > 0, "pose: half extents must be positive");
  }
};

inline Eigen::Vector3d transform_to_object(const Eigen::Vector3d& x_scene,
                                           const ObjectPose& pose) {
  Eigen::Vector3d local = pose.rotation.conjugate() * (x_scene - pose.translation);
  return local.cwiseQuotient(pose.half_extents);
}

inline Eigen::Vector3d transform_to_world(const Eigen::Vector3d& x_object,
                                          const ObjectPose& pose) {
  return pose.rotation * x_object.cwiseProduct(pose.half_extents) + pose.translation;
}

inline Eigen::Vector3d dir_to_object(const Eigen::Vector3d& d_world, const ObjectPose& pose) {
  return pose.rotation.conjugate() * d_world;
}

// Slab test against the normalized [-1,1]^3 box; the returned interval is in
// the world ray's own parameterization (entry may be negative when the
// origin is inside the box).
inline std::optional<std::pair<double, double>> ray_box_intersect(const Ray& ray,
                                                                  const ObjectPose& pose) {
  Eigen::Vector3d o = transform_to_object(ray.origin, pose);
  Eigen::Vector3d d =
      (pose.rotation.conjugate() * ray.dir).cwiseQuotient(pose.half_extents);
  double t_in = -std::numeric_limits<double>::infinity();
  double t_out = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < -1.0 || o[a] > 1.0) return std::nullopt;
      continue;
    }
    double t0 = (-1.0 - o[a]) / d[a];
    double t1 = (1.0 - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_in = std::max(t_in, t0);
    t_out = std::min(t_out, t1);
  }
  if (t_in > t_out) return std::nullopt;
  return std::make_pair(t_in, t_out);
}

// n strictly increasing depths in [t_near, t_far]; bin midpoints without
// jitter, one uniform draw per bin with jitter.
inline std::vector<double> stratified_samples(const Ray& ray, int n, bool jitter, Rng& rng) {
  LANE_CHECK(n >= 1, "stratified_samples: need at least one sample");
  LANE_CHECK(ray.t_far > ray.t_near, "stratified_samples: degenerate ray interval");
  const double bin = (ray.t_far - ray.t_near) / n;
  std::vector<double> t(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double frac = jitter ? u(rng) : 0.5;
    t[i] = ray.t_near + (i + frac) * bin;
  }
  return t;
}

// Deterministic Fibonacci-sphere direction set.
inline std::vector<Eigen::Vector3d> sample_secondary_dirs(int n) {
  LANE_CHECK(n >= 1, "sample_secondary_dirs: need at least one direction");
  std::vector<Eigen::Vector3d> dirs(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs[i] = Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

// ---- volume rendering quadrature ----

// Differentiable render of R rays batched as ragged segments.
template <typename T>
struct VolumeRender {
  ad::Tensor<T> color;    // [R,3]
  ad::Tensor<T> alpha;    // [R]   accumulated alpha M
  ad::Tensor<T> depth;    // [R]   expected depth (0 where M < eps)
  ad::Tensor<T> weights;  // [m]   per-sample T_i * alpha_i
};

// alpha_i = 1 - exp(-sigma_i * delta_i), T_i = exp(-sum_{j<i} sigma_j delta_j),
// C = sum T_i alpha_i c_i, M = sum T_i alpha_i, z = sum T_i alpha_i t_i / max(M, eps).
// delta within a segment is the forward difference of t; the last sample of
// each segment uses delta_cap[r].
template <typename T>
VolumeRender<T> volume_render(const ad::Tensor<T>& sigma, const ad::Tensor<T>& radiance,
                              const std::vector<double>& t, const std::vector<int>& offsets,
                              const std::vector<double>& delta_cap, double depth_eps = 1e-3) {
  using ad::Tensor;
  const int m = static_cast<int>(t.size());
  LANE_CHECK(sigma.shape().size() == 1 && sigma.shape()[0] == m,
             "volume_render: sigma must be a length-m vector");
  LANE_CHECK(radiance.shape().size() == 2 && radiance.shape()[0] == m &&
                 radiance.shape()[1] == 3,
             "volume_render: radiance must be [m,3]");
  const int R = static_cast<int>(offsets.size()) - 1;
  LANE_CHECK(static_cast<int>(delta_cap.size()) == R,
             "volume_render: need one delta cap per ray");
  for (T v : sigma.data())
    LANE_CHECK(v >= T(0), "volume_render: densities must be nonnegative");

  std::vector<T> delta(m);
  for (int r = 0; r < R; ++r) {
    for (int i = offsets[r]; i < offsets[r + 1]; ++i) {
      if (i + 1 < offsets[r + 1]) {
        LANE_CHECK(t[i + 1] > t[i], "volume_render: sample depths must be strictly increasing");
        delta[i] = static_cast<T>(t[i + 1] - t[i]);
      } else {
        delta[i] = static_cast<T>(delta_cap[r]);
      }
    }
  }

  Tensor<T> delta_c = Tensor<T>::constant({m}, std::move(delta));
  Tensor<T> s = ad::mul(sigma, delta_c);                       // sigma_i * delta_i
  Tensor<T> acc = ad::segment_exclusive_cumsum(s, offsets);    // sum_{j<i}
  Tensor<T> transmit = ad::exp_(ad::affine(acc, T(-1), T(0)));  // T_i
  Tensor<T> alpha = ad::affine(ad::exp_(ad::affine(s, T(-1), T(0))), T(-1), T(1));
  Tensor<T> w = ad::mul(transmit, alpha);

  VolumeRender<T> out;
  out.weights = w;
  out.color = ad::segment_sum_rows(ad::scale_rows(radiance, w), offsets);
  out.alpha = ad::segment_sum(w, offsets);

  std::vector<T> tv(m);
  for (int i = 0; i < m; ++i) tv[i] = static_cast<T>(t[i]);
  Tensor<T> t_c = Tensor<T>::constant({m}, std::move(tv));
  Tensor<T> zsum = ad::segment_sum(ad::mul(w, t_c), offsets);
  out.depth = ad::div(zsum, ad::max_scalar(out.alpha, static_cast<T>(depth_eps)));
  return out;
}

// Single-ray convenience; the cap defaults to the mean sample spacing.
template <typename T>
VolumeRender<T> volume_render_ray(const ad::Tensor<T>& sigma, const ad::Tensor<T>& radiance,
                                  const std::vector<double>& t, double t_near, double t_far) {
  const int n = static_cast<int>(t.size());
  LANE_CHECK(n >= 1, "volume_render_ray: need samples");
  std::vector<int> offsets = {0, n};
  std::vector<double> cap = {(t_far - t_near) / n};
  return volume_render(sigma, radiance, t, offsets, cap);
}

}  // namespace lane
