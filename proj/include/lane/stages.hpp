#pragma once

#include <fstream>
#include <iomanip>
#include <map>

#include "lane/pipeline.hpp"

// High-level stage runners shared by the CLI and the acceptance harness.

namespace lane {

namespace fs_ = std::filesystem;

// Loads a cached checkpoint when its config hash matches; retrains otherwise.
template <typename T, typename MakeFn, typename TrainFn, typename LoadFn>
auto stage_cached(const fs_::path& ckpt_path, const std::string& cfg_hash, bool reuse,
                  MakeFn&& make, TrainFn&& train, LoadFn&& load) {
  if (reuse && !ckpt_path.empty() && fs_::exists(ckpt_path)) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (ckpt.config_hash == cfg_hash) {
      std::cerr << "reusing " << ckpt_path.string() << " (step " << ckpt.step << ")\n";
      return load(ckpt);
    }
    std::cerr << "config changed; retraining " << ckpt_path.string() << "\n";
  }
  auto model = make();
  train(model);
  return model;
}

template <typename T>
WorldModel<T> stage_train_world(const LoadedDataset& data, const std::string& scene_id,
                                const TrainingConfig& cfg, const fs_::path& ckpt_path,
                                bool light_only = false, bool reuse = false) {
  std::vector<std::string> conditions;
  for (const auto& l : data.manifest.lighting) conditions.push_back(l.id);
  const std::string hash =
      config_hash(training_config_to_json(cfg) + "|world|" + scene_id +
                  (light_only ? "|light" : ""));
  return stage_cached<T>(
      ckpt_path, hash, reuse,
      [&] {
        Rng rng(cfg.seed);
        return make_world_model<T>(cfg.arch, data.manifest.scene(scene_id).bounds, conditions,
                                   rng);
      },
      [&](WorldModel<T>& m) {
        train_world(m, data, scene_id, cfg, ckpt_path, light_only);
        if (!ckpt_path.empty())  // stamp the stage hash for reuse checks
          save_checkpoint(ckpt_path, world_checkpoint(m, cfg.steps, hash));
      },
      [&](const Checkpoint& c) { return world_from_checkpoint<T>(c); });
}

template <typename T>
ObjectModel<T> stage_train_object(const LoadedDataset& data, const TrainingConfig& cfg,
                                  const fs_::path& ckpt_path, bool reuse = false) {
  std::vector<std::string> instances;
  for (const auto& i : data.manifest.instances) instances.push_back(i.id);
  const std::string hash = config_hash(training_config_to_json(cfg) + "|object");
  return stage_cached<T>(
      ckpt_path, hash, reuse,
      [&] {
        Rng rng(cfg.seed);
        return make_object_model<T>(cfg.arch, instances, rng);
      },
      [&](ObjectModel<T>& m) {
        train_object(m, data, cfg, ckpt_path);
        if (!ckpt_path.empty())
          save_checkpoint(ckpt_path, object_checkpoint(m, cfg.steps, hash));
      },
      [&](const Checkpoint& c) { return object_from_checkpoint<T>(c); });
}

template <typename T>
LocalGlobalShader<T> stage_train_shader_lg(const LoadedDataset& data,
                                           const ObjectModel<T>& object_frozen,
                                           const ShaderDataSelect& select,
                                           const TrainingConfig& cfg,
                                           const fs_::path& ckpt_path, bool reuse = false) {
  std::vector<std::string> envs;
  for (const auto& f : data.frames)
    if (select.admits(*f.rec)) envs.push_back(env_id_of(*f.rec));
  std::sort(envs.begin(), envs.end());
  envs.erase(std::unique(envs.begin(), envs.end()), envs.end());
  std::string select_tag;
  for (const auto& e : envs) select_tag += e + ",";
  const std::string hash =
      config_hash(training_config_to_json(cfg) + "|shader_lg|" + select_tag);
  return stage_cached<T>(
      ckpt_path, hash, reuse,
      [&] {
        Rng rng(cfg.seed + 11);
        return make_local_global_shader<T>(cfg.arch, envs, rng);
      },
      [&](LocalGlobalShader<T>& s) {
        train_shader<T>(s, object_frozen, {}, data, select, cfg, ckpt_path);
        if (!ckpt_path.empty())
          save_checkpoint(ckpt_path, shader_checkpoint(s, cfg.steps, hash));
      },
      [&](const Checkpoint& c) { return lg_shader_from_checkpoint<T>(c); });
}

template <typename T>
LightFieldShader<T> stage_train_shader_lf(
    const LoadedDataset& data, const ObjectModel<T>& object_frozen,
    const std::map<std::string, const WorldModel<T>*>& worlds_frozen,
    const ShaderDataSelect& select, const TrainingConfig& cfg, const fs_::path& ckpt_path,
    bool reuse = false) {
  std::string select_tag;
  for (const auto& s : select.scenes) select_tag += s + ",";
  for (const auto& c : select.conditions) select_tag += c + ",";
  const std::string hash =
      config_hash(training_config_to_json(cfg) + "|shader_lf|" + select_tag);
  return stage_cached<T>(
      ckpt_path, hash, reuse,
      [&] {
        Rng rng(cfg.seed + 12);
        return make_light_field_shader<T>(cfg.arch, rng);
      },
      [&](LightFieldShader<T>& s) {
        train_shader<T>(s, object_frozen, worlds_frozen, data, select, cfg, ckpt_path);
        if (!ckpt_path.empty())
          save_checkpoint(ckpt_path, shader_checkpoint(s, cfg.steps, hash));
      },
      [&](const Checkpoint& c) { return lf_shader_from_checkpoint<T>(c); });
}

// ---- object-render evaluation over a frame selection ----

struct ObjectRenderEval {
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  int frames = 0;
};

namespace stage_detail {

inline void finalize(std::vector<double>& psnrs, std::vector<double>& ssims,
                     ObjectRenderEval& out) {
  out.frames = static_cast<int>(psnrs.size());
  if (psnrs.empty()) return;
  double mean = 0, mean_s = 0;
  for (double v : psnrs) mean += v;
  for (double v : ssims) mean_s += v;
  mean /= psnrs.size();
  mean_s /= ssims.size();
  double var = 0, var_s = 0;
  for (double v : psnrs) var += (v - mean) * (v - mean);
  for (double v : ssims) var_s += (v - mean_s) * (v - mean_s);
  out.psnr_mean = mean;
  out.psnr_std = std::sqrt(var / psnrs.size());
  out.ssim_mean = mean_s;
  out.ssim_std = std::sqrt(var_s / ssims.size());
}

}  // namespace stage_detail

// Renders the instance-mask pixels of every admitted frame with the chosen
// shading and reports masked PSNR plus SSIM of the mask-composited image.
template <typename T>
ObjectRenderEval eval_object_renders(
    const LoadedDataset& data, const ShaderDataSelect& select, const ObjectModel<T>& object,
    ShaderKind kind, const LocalGlobalShader<T>* lg, const LightFieldShader<T>* lf,
    const std::map<std::string, const WorldModel<T>*>& worlds, const TrainingConfig& cfg,
    ShadeMode shade_mode) {
  std::vector<double> psnrs, ssims;
  for (const auto& frame : data.frames) {
    if (!select.admits(*frame.rec)) continue;
    for (size_t o = 0; o < frame.rec->objects.size(); ++o) {
      const auto pixels = mask_pixels(frame.masks[o]);
      if (pixels.size() < 16) continue;
      const FrameObject& fo = frame.rec->objects[o];

      PlacedObject<T> placed;
      placed.model = &object;
      placed.instance = fo.instance;
      placed.pose = fo.pose;
      placed.shader = kind;
      placed.lg = lg;
      placed.lf = lf;
      placed.env_id = env_id_of(*frame.rec);

      const WorldModel<T>* world = nullptr;
      if (kind == ShaderKind::kLightField && shade_mode == ShadeMode::kLearned) {
        auto it = worlds.find(frame.rec->scene);
        LANE_CHECK(it != worlds.end(),
                   "eval_object_renders: missing world for scene " + frame.rec->scene);
        world = it->second;
      }
      ComposeOptions opts;
      opts.include_world = false;
      opts.include_background = false;
      opts.object_samples = cfg.object_samples;
      opts.secondary_rays = cfg.secondary_rays;
      opts.occupancy_threshold = cfg.occupancy_threshold;
      opts.object_shade = shade_mode;
      SceneContext<T> ctx{world, {}, data.manifest.scene(frame.rec->scene).bounds};
      if (world) ctx.lighting = world->light_codes.at(frame.rec->lighting);

      const auto colors =
          render_pixels(ctx, {placed}, frame.rec->camera, pixels, opts, cfg.threads);
      psnrs.push_back(psnr_pixels(colors, frame.image, pixels));

      Image composite = frame.image;
      for (size_t i = 0; i < pixels.size(); ++i)
        for (int k = 0; k < 3; ++k)
          composite.rgb[3 * static_cast<size_t>(pixels[i]) + k] =
              std::min(1.0f, std::max(0.0f, colors[3 * i + k]));
      ssims.push_back(ssim(composite, frame.image));
    }
  }
  ObjectRenderEval out;
  stage_detail::finalize(psnrs, ssims, out);
  return out;
}

// ---- gradient verification suite (acceptance criterion harness) ----

struct GradSuiteEntry {
  std::string network;
  double max_rel_err = 0;
};

// End-to-end finite-difference checks through volume rendering for every
// network, in f64.  Small widths keep the FD sweeps tractable; the depth
// matches the real architecture.
std::vector<GradSuiteEntry> gradient_suite(int coords_per_param = 4);

// ---- prediction-folder evaluation (eval subcommand) ----

struct EvalRow {
  std::string variant, scene, lighting;
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  int count = 0;
};

std::vector<EvalRow> evaluate_predictions(const DatasetManifest& manifest,
                                          const fs_::path& pred_dir, const std::string& split);
void write_eval_csv(const fs_::path& path, const std::vector<EvalRow>& rows);

// ---- compose stage ----

struct ComposeRequest {
  fs_::path world_ckpt;
  fs_::path light_ckpt;   // empty -> use world checkpoint
  fs_::path object_ckpt;
  fs_::path shader_ckpt;  // empty -> unshaded composition
  fs_::path placements;
  std::string lighting;
  fs_::path out_dir;
  bool also_unshaded = false;
  int world_samples = 48;
  int object_samples = 24;
  int secondary_rays = 24;
  int threads = 1;
};

template <typename T>
void stage_compose(const ComposeRequest& req) {
  WorldModel<T> world = world_from_checkpoint<T>(load_checkpoint(req.world_ckpt));
  if (!req.light_ckpt.empty() && req.light_ckpt != req.world_ckpt) {
    WorldModel<T> light = world_from_checkpoint<T>(load_checkpoint(req.light_ckpt));
    world.light_mlp = light.light_mlp;
    world.light_codes = light.light_codes;
  }
  ObjectModel<T> object = object_from_checkpoint<T>(load_checkpoint(req.object_ckpt));

  std::optional<LocalGlobalShader<T>> lg;
  std::optional<LightFieldShader<T>> lf;
  ShaderKind kind = ShaderKind::kNone;
  if (!req.shader_ckpt.empty()) {
    Checkpoint ckpt = load_checkpoint(req.shader_ckpt);
    kind = checkpoint_shader_kind(ckpt);
    if (kind == ShaderKind::kLocalGlobal)
      lg = lg_shader_from_checkpoint<T>(ckpt);
    else if (kind == ShaderKind::kLightField)
      lf = lf_shader_from_checkpoint<T>(ckpt);
    else
      LANE_FAIL("compose: checkpoint is not a shader: " + req.shader_ckpt.string());
  }

  const auto frames = read_placements(req.placements);
  fs_::create_directories(req.out_dir);
  SceneContext<T> ctx{&world, world.light_codes.at(req.lighting), world.bounds};

  for (size_t fi = 0; fi < frames.size(); ++fi) {
    std::vector<PlacedObject<T>> placed;
    for (const auto& [instance, pose] : frames[fi].objects) {
      PlacedObject<T> p;
      p.model = &object;
      p.instance = instance;
      p.pose = pose;
      p.shader = kind;
      p.lg = lg ? &*lg : nullptr;
      p.lf = lf ? &*lf : nullptr;
      p.env_id = "compose:" + req.lighting;  // only used when tau contains it
      placed.push_back(p);
    }
    ComposeOptions opts;
    opts.world_samples = req.world_samples;
    opts.object_samples = req.object_samples;
    opts.secondary_rays = req.secondary_rays;
    opts.object_shade = kind == ShaderKind::kNone ? ShadeMode::kNone : ShadeMode::kLearned;

    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu", fi);
    write_ppm(req.out_dir / (std::string(name) + ".ppm"),
              render_image(ctx, placed, frames[fi].camera, opts, req.threads));
    if (req.also_unshaded && kind != ShaderKind::kNone) {
      ComposeOptions uopts = opts;
      uopts.object_shade = ShadeMode::kNone;
      write_ppm(req.out_dir / (std::string(name) + "_unshaded.ppm"),
                render_image(ctx, placed, frames[fi].camera, uopts, req.threads));
    }
  }
}

// ---- ablation harness ----

struct AblationRow {
  std::string label;
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
};

void write_ablation_csv(const fs_::path& path, const std::string& key_column,
                        const std::vector<AblationRow>& rows);

// Micro-scale defaults shared by all ablation sweeps.
TrainingConfig ablation_config();
DatasetSpec ablation_dataset_spec(int instances);

std::vector<AblationRow> ablate_secondary_rays(const fs_::path& work,
                                               const std::vector<int>& counts,
                                               const TrainingConfig& base);
std::vector<AblationRow> ablate_instance_count(const fs_::path& work,
                                               const TrainingConfig& base);
std::vector<AblationRow> ablate_shading_variants(const fs_::path& work,
                                                 const TrainingConfig& base);
std::vector<AblationRow> ablate_view_dependence(const fs_::path& work,
                                                const TrainingConfig& base);

}  // namespace lane
