#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "lane/fields.hpp"

namespace lane {

enum class ShadeMode {
  kLearned,  // use the trained shader / multiplier
  kOne,      // multiply by a literal 1 (identity-check mode)
  kNone,     // skip the multiplication entirely (lighting-agnostic render)
};

enum class ShaderKind { kNone, kLocalGlobal, kLightField };

template <typename T>
struct PlacedObject {
  const ObjectModel<T>* model = nullptr;
  std::string instance;
  ObjectPose pose;
  ShaderKind shader = ShaderKind::kNone;
  const LocalGlobalShader<T>* lg = nullptr;
  const LightFieldShader<T>* lf = nullptr;
  std::string env_id;  // tau key (scene+lighting) for the local-global shader
};

struct ComposeOptions {
  int world_samples = 48;
  int object_samples = 24;
  int secondary_rays = 24;
  double occupancy_threshold = 0.5;  // per-sample alpha gate for secondary shading
  bool jitter = false;
  std::uint64_t seed = 0;
  int active_freqs = -1;
  ShadeMode world_shade = ShadeMode::kLearned;
  ShadeMode object_shade = ShadeMode::kLearned;
  bool include_world = true;
  bool include_background = true;
};

// Per-surface-point attention record kept for the attended-direction
// diagnostic images.
struct SurfacePointDiag {
  int object_index = 0;
  Eigen::Vector3d p_world;
  Eigen::Vector3d p_obj;
  std::vector<double> weights;
};

struct ComposeDiagnostics {
  std::vector<Eigen::Vector3d> dirs_world;                 // shared Fibonacci set
  std::vector<std::vector<Eigen::Vector3d>> dirs_object;   // per placed object
  std::vector<SurfacePointDiag> surface_points;
};

// World model + lighting latent + normalization context for one render.
// `bounds` must be set when rendering without a world model (the shaders
// need normalized scene coordinates).
template <typename T>
struct SceneContext {
  const WorldModel<T>* world = nullptr;
  ad::Tensor<T> lighting;  // latent f
  Eigen::AlignedBox3d bounds;

  const Eigen::AlignedBox3d& scene_bounds() const {
    return world ? world->bounds : bounds;
  }
};

namespace detail {

template <typename T>
ad::Tensor<T> ones_like_rows(int rows) {
  return ad::Tensor<T>::constant({rows, 3}, std::vector<T>(static_cast<size_t>(rows) * 3, T(1)));
}

// Scatter helper for the direct-RGB ablation: keep c on unselected rows and
// replace selected rows with the regressed color.
template <typename T>
ad::Tensor<T> splice_rows(const ad::Tensor<T>& base, const std::vector<int>& idx,
                          const ad::Tensor<T>& replacement) {
  const int m = base.shape()[0];
  ad::Tensor<T> keep = ad::scatter_rows(
      m, idx,
      ad::Tensor<T>::constant({static_cast<int>(idx.size()), 3},
                              std::vector<T>(idx.size() * 3, T(0))),
      T(1));
  return ad::add(ad::mul(base, keep), ad::scatter_rows(m, idx, replacement, T(0)));
}

}  // namespace detail

// Renders a batch of rays through the world field merged with every placed
// object's samples: one quadrature per ray over the t-sorted union.  Object
// radiance is c * s_car, world radiance is c * N_ws(f), plus a learned
// lighting-agnostic background behind the last sample.
template <typename T>
VolumeRender<T> render_composed(const SceneContext<T>& ctx,
                                const std::vector<PlacedObject<T>>& objects,
                                const std::vector<Ray>& rays, const ComposeOptions& opts,
                                ComposeDiagnostics* diag = nullptr) {
  LANE_CHECK(!opts.include_world || ctx.world != nullptr,
             "render_composed: world model required when include_world is set");
  const int R = static_cast<int>(rays.size());
  const int n_obj = static_cast<int>(objects.size());

  struct MergedSample {
    double t;
    int source;  // -1 world, otherwise object index
    int row;     // row in that source's eval batch
  };
  std::vector<std::vector<MergedSample>> per_ray(R);

  std::vector<double> world_pos;  // [Mw * 3]
  struct ObjectBatch {
    std::vector<double> pos_obj;    // normalized object coords [Mo*3]
    std::vector<double> pos_world;  // [Mo*3]
    std::vector<double> view_obj;   // ray dirs in object frame [Mo*3]
    std::vector<double> delta;      // object-local spacing for the alpha gate
    std::vector<double> t;
  };
  std::vector<ObjectBatch> obj_batches(n_obj);

  for (int r = 0; r < R; ++r) {
    const Ray& ray = rays[r];
    Rng ray_rng(opts.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(r) + 1);
    if (opts.include_world) {
      auto t = stratified_samples(ray, opts.world_samples, opts.jitter, ray_rng);
      for (double ti : t) {
        const Eigen::Vector3d p = ray.origin + ti * ray.dir;
        per_ray[r].push_back({ti, -1, static_cast<int>(world_pos.size() / 3)});
        world_pos.insert(world_pos.end(), {p.x(), p.y(), p.z()});
      }
    }
    for (int o = 0; o < n_obj; ++o) {
      auto hit = ray_box_intersect(ray, objects[o].pose);
      if (!hit) continue;
      const double t0 = std::max(hit->first, ray.t_near);
      const double t1 = std::min(hit->second, ray.t_far);
      if (t1 - t0 < 1e-6) continue;
      Ray sub = ray;
      sub.t_near = t0;
      sub.t_far = t1;
      auto t = stratified_samples(sub, opts.object_samples, opts.jitter, ray_rng);
      const double spacing = (t1 - t0) / opts.object_samples;
      auto& batch = obj_batches[o];
      const Eigen::Vector3d view_obj = dir_to_object(ray.dir, objects[o].pose);
      for (double ti : t) {
        const Eigen::Vector3d pw = ray.origin + ti * ray.dir;
        const Eigen::Vector3d po = transform_to_object(pw, objects[o].pose);
        per_ray[r].push_back({ti, o, static_cast<int>(batch.t.size())});
        batch.pos_obj.insert(batch.pos_obj.end(), {po.x(), po.y(), po.z()});
        batch.pos_world.insert(batch.pos_world.end(), {pw.x(), pw.y(), pw.z()});
        batch.view_obj.insert(batch.view_obj.end(), {view_obj.x(), view_obj.y(), view_obj.z()});
        batch.delta.push_back(spacing);
        batch.t.push_back(ti);
      }
    }
    std::stable_sort(per_ray[r].begin(), per_ray[r].end(),
                     [](const MergedSample& a, const MergedSample& b) {
                       if (a.t != b.t) return a.t < b.t;
                       return a.source < b.source;
                     });
  }

  // ---- field evaluations ----
  std::vector<ad::Tensor<T>> sigma_parts, radiance_parts;
  std::vector<int> part_offset;  // starting row of each part in the concat
  int total_rows = 0;

  const int Mw = static_cast<int>(world_pos.size() / 3);
  if (Mw > 0) {
    FieldSample<T> w = world_eval(*ctx.world, world_pos, opts.active_freqs);
    ad::Tensor<T> radiance;
    switch (opts.world_shade) {
      case ShadeMode::kLearned:
        radiance = world_shade(w.color, world_multiplier(*ctx.world, ctx.lighting));
        break;
      case ShadeMode::kOne:
        radiance = ad::mul(w.color, detail::ones_like_rows<T>(Mw));
        break;
      case ShadeMode::kNone:
        radiance = w.color;
        break;
    }
    sigma_parts.push_back(w.sigma);
    radiance_parts.push_back(radiance);
    part_offset.push_back(total_rows);
    total_rows += Mw;
  } else {
    part_offset.push_back(0);
  }

  if (diag && n_obj > 0) {
    diag->dirs_world = sample_secondary_dirs(opts.secondary_rays);
    diag->dirs_object.resize(n_obj);
  }

  std::vector<int> obj_part_offset(n_obj, -1);
  for (int o = 0; o < n_obj; ++o) {
    auto& batch = obj_batches[o];
    const int Mo = static_cast<int>(batch.t.size());
    if (Mo == 0) continue;
    const PlacedObject<T>& obj = objects[o];
    LANE_CHECK(obj.model != nullptr, "render_composed: placed object without a model");
    FieldSample<T> fs = object_eval(*obj.model, batch.pos_obj, obj.instance, opts.active_freqs);

    ad::Tensor<T> radiance;
    const bool shade = opts.object_shade == ShadeMode::kLearned &&
                       obj.shader != ShaderKind::kNone;
    if (opts.object_shade == ShadeMode::kOne) {
      radiance = ad::mul(fs.color, detail::ones_like_rows<T>(Mo));
    } else if (!shade) {
      radiance = fs.color;
    } else if (obj.shader == ShaderKind::kLocalGlobal) {
      LANE_CHECK(obj.lg != nullptr, "render_composed: missing local-global shader");
      std::vector<double> scene_norm(batch.pos_world.size());
      for (int i = 0; i < Mo; ++i) {
        Eigen::Vector3d p(batch.pos_world[3 * i], batch.pos_world[3 * i + 1],
                          batch.pos_world[3 * i + 2]);
        Eigen::Vector3d pn = normalize_position(ctx.scene_bounds(), p);
        for (int k = 0; k < 3; ++k) scene_norm[3 * i + k] = pn[k];
      }
      ad::Tensor<T> s = shade_local_global(*obj.lg, batch.pos_obj, scene_norm,
                                           obj.pose.rotation, obj.env_id);
      radiance = obj.lg->cfg.shader_direct_rgb ? s : ad::mul(fs.color, s);
    } else {
      LANE_CHECK(obj.lf != nullptr, "render_composed: missing light-field shader");
      LANE_CHECK(ctx.world != nullptr,
                 "render_composed: light-field shading queries the world's light field");
      // surface gate on per-sample opacity, object-local spacing
      std::vector<int> sel;
      for (int i = 0; i < Mo; ++i) {
        const double alpha =
            1.0 - std::exp(-static_cast<double>(fs.sigma.data()[i]) * batch.delta[i]);
        if (alpha > opts.occupancy_threshold) sel.push_back(i);
      }
      if (sel.empty()) {
        radiance = fs.color;  // s_car = 1 everywhere
      } else {
        const int P = static_cast<int>(sel.size());
        const int S = opts.secondary_rays;
        std::vector<double> p_obj_sel(3 * P), view_sel(3 * P);
        std::vector<Eigen::Vector3d> origins;
        origins.reserve(static_cast<size_t>(P) * S);
        const auto dirs_world = sample_secondary_dirs(S);
        std::vector<Eigen::Vector3d> dirs_obj(S);
        for (int k = 0; k < S; ++k) dirs_obj[k] = dir_to_object(dirs_world[k], obj.pose);
        std::vector<Eigen::Vector3d> dirs_tiled;
        dirs_tiled.reserve(static_cast<size_t>(P) * S);
        for (int i = 0; i < P; ++i) {
          for (int k = 0; k < 3; ++k) {
            p_obj_sel[3 * i + k] = batch.pos_obj[3 * sel[i] + k];
            view_sel[3 * i + k] = batch.view_obj[3 * sel[i] + k];
          }
          const Eigen::Vector3d pw(batch.pos_world[3 * sel[i]],
                                   batch.pos_world[3 * sel[i] + 1],
                                   batch.pos_world[3 * sel[i] + 2]);
          for (int k = 0; k < S; ++k) {
            origins.push_back(pw);
            dirs_tiled.push_back(dirs_world[k]);
          }
        }
        ad::Tensor<T> light = light_eval(*ctx.world, origins, dirs_tiled, ctx.lighting);
        AttentionResult<T> attn = attention_pool(*obj.lf, p_obj_sel, dirs_obj, light);
        ad::Tensor<T> s_sel = shade_light_field(
            *obj.lf, attn.pooled, p_obj_sel, obj.model->shape_codes.at(obj.instance),
            obj.model->color_codes.at(obj.instance),
            obj.lf->cfg.shader_view_dependent ? &view_sel : nullptr);
        radiance = obj.lf->cfg.shader_direct_rgb
                       ? detail::splice_rows(fs.color, sel, s_sel)
                       : ad::mul(fs.color, ad::scatter_rows(Mo, sel, s_sel, T(1)));
        if (diag) {
          diag->dirs_object[o] = dirs_obj;
          for (int i = 0; i < P; ++i) {
            SurfacePointDiag d;
            d.object_index = o;
            d.p_world = Eigen::Vector3d(batch.pos_world[3 * sel[i]],
                                        batch.pos_world[3 * sel[i] + 1],
                                        batch.pos_world[3 * sel[i] + 2]);
            d.p_obj = Eigen::Vector3d(p_obj_sel[3 * i], p_obj_sel[3 * i + 1],
                                      p_obj_sel[3 * i + 2]);
            d.weights.resize(S);
            for (int k = 0; k < S; ++k)
              d.weights[k] = static_cast<double>(attn.weights.data()[i * S + k]);
            diag->surface_points.push_back(std::move(d));
          }
        }
      }
    }
    obj_part_offset[o] = total_rows;
    sigma_parts.push_back(fs.sigma);
    radiance_parts.push_back(radiance);
    total_rows += Mo;
  }

  // ---- merge and integrate ----
  std::vector<double> t_merged;
  std::vector<int> offsets = {0};
  std::vector<double> caps;
  std::vector<int> perm;
  t_merged.reserve(total_rows);
  perm.reserve(total_rows);
  for (int r = 0; r < R; ++r) {
    for (const auto& s : per_ray[r]) {
      t_merged.push_back(s.t);
      perm.push_back(s.source < 0 ? s.row : obj_part_offset[s.source] + s.row);
    }
    offsets.push_back(static_cast<int>(t_merged.size()));
    const int n_r = offsets[r + 1] - offsets[r];
    caps.push_back(n_r > 0 ? (rays[r].t_far - rays[r].t_near) / n_r : 0.0);
  }
  LANE_CHECK(total_rows == static_cast<int>(t_merged.size()),
             "render_composed: sample bookkeeping mismatch");
  if (total_rows == 0) {
    VolumeRender<T> empty;
    empty.color = ad::Tensor<T>::zeros({R, 3});
    empty.alpha = ad::Tensor<T>::zeros({R});
    empty.depth = ad::Tensor<T>::zeros({R});
    empty.weights = ad::Tensor<T>::zeros({0});
    return empty;
  }

  ad::Tensor<T> sigma_cat = ad::concat_rows(sigma_parts);
  ad::Tensor<T> radiance_cat = ad::concat_rows(radiance_parts);
  ad::Tensor<T> sigma_m = ad::reshape(
      ad::gather_rows(ad::reshape(sigma_cat, {total_rows, 1}), perm), {total_rows});
  ad::Tensor<T> radiance_m = ad::gather_rows(radiance_cat, perm);

  VolumeRender<T> out = volume_render(sigma_m, radiance_m, t_merged, offsets, caps);
  if (opts.include_world && opts.include_background) {
    ad::Tensor<T> t_end = ad::affine(out.alpha, T(-1), T(1));  // residual transmittance
    ad::Tensor<T> bg = ad::matmul(ad::reshape(t_end, {R, 1}),
                                  ad::reshape(world_background_color(*ctx.world), {1, 3}));
    out.color = ad::add(out.color, bg);
  }
  return out;
}

// World-only convenience used by training and the identity checks.
template <typename T>
VolumeRender<T> render_world(const SceneContext<T>& ctx, const std::vector<Ray>& rays,
                             const ComposeOptions& opts) {
  return render_composed<T>(ctx, {}, rays, opts);
}

}  // namespace lane
