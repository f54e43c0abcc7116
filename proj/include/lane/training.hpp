#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "lane/compositor.hpp"
#include "lane/config.hpp"
#include "lane/dataio.hpp"
#include "lane/metrics.hpp"
#include "lane/model_io.hpp"

namespace lane {

// ---- loaded training data ----

struct LoadedFrame {
  const FrameRecord* rec = nullptr;
  int scene_index = 0;
  int lighting_index = 0;
  Image image;
  std::optional<DepthMap> depth;
  std::vector<Mask> masks;      // parallel to rec->objects
  Mask any_object;              // union of instance masks
  std::vector<int> world_pixels;  // pixel ids outside every object mask
  // per object: pixels whose ray intersects the 3D box, with the mask bit
  std::vector<std::vector<std::pair<int, bool>>> box_pixels;
};

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<LoadedFrame> frames;

  std::vector<int> frames_of_scene(const std::string& scene, const std::string& split) const {
    std::vector<int> out;
    for (size_t i = 0; i < frames.size(); ++i)
      if (frames[i].rec->scene == scene && frames[i].rec->split == split)
        out.push_back(static_cast<int>(i));
    return out;
  }
};

constexpr double kRayNear = 0.05;
constexpr double kRayFar = 16.0;

inline Ray pixel_ray(const Camera& cam, int pixel_id) {
  const int x = pixel_id % cam.width;
  const int y = pixel_id / cam.width;
  return generate_ray(cam, x + 0.5, y + 0.5, kRayNear, kRayFar);
}

LoadedDataset load_training_data(const std::filesystem::path& dir);

// ---- losses ----

template <typename T>
ad::Tensor<T> photometric_loss(const ad::Tensor<T>& pred, const ad::Tensor<T>& target) {
  return ad::mse(pred, target);
}

template <typename T>
ad::Tensor<T> mask_loss(const ad::Tensor<T>& alpha, const ad::Tensor<T>& target) {
  return ad::mse(alpha, target);
}

template <typename T>
struct DepthLossResult {
  ad::Tensor<T> loss;
  int valid_rays = 0;
};

// MSE over rays with a finite target depth and enough accumulated alpha for
// the expected depth to mean anything.  The validity gate is evaluated on
// the forward values, so it is constant within a step.
template <typename T>
DepthLossResult<T> depth_loss(const ad::Tensor<T>& depth, const ad::Tensor<T>& alpha,
                              const std::vector<double>& target, double min_alpha = 0.1) {
  const int R = depth.shape()[0];
  LANE_CHECK(static_cast<int>(target.size()) == R, "depth_loss: target size mismatch");
  std::vector<int> valid;
  std::vector<T> tgt;
  for (int r = 0; r < R; ++r) {
    if (target[r] > 0.0 && static_cast<double>(alpha.data()[r]) >= min_alpha) {
      valid.push_back(r);
      tgt.push_back(static_cast<T>(target[r]));
    }
  }
  DepthLossResult<T> out;
  out.valid_rays = static_cast<int>(valid.size());
  if (valid.empty()) {
    out.loss = ad::Tensor<T>::scalar(T(0));
    return out;
  }
  ad::Tensor<T> z = ad::reshape(
      ad::gather_rows(ad::reshape(depth, {R, 1}), valid), {out.valid_rays});
  out.loss = ad::mse(z, ad::Tensor<T>::constant({out.valid_rays}, std::move(tgt)));
  return out;
}

// ---- batched pixel rendering (evaluation path) ----

// Renders the listed pixels in fixed-size chunks; chunking (and therefore
// arithmetic) is independent of the thread count.
template <typename T>
std::vector<float> render_pixels(const SceneContext<T>& ctx,
                                 const std::vector<PlacedObject<T>>& objects,
                                 const Camera& cam, const std::vector<int>& pixels,
                                 const ComposeOptions& opts, int threads = 1) {
  const int kChunk = 512;
  const int n = static_cast<int>(pixels.size());
  std::vector<float> out(static_cast<size_t>(n) * 3);
  const int n_chunks = (n + kChunk - 1) / kChunk;
  std::atomic<int> next{0};
  auto work = [&]() {
    while (true) {
      const int c = next.fetch_add(1);
      if (c >= n_chunks) break;
      const int lo = c * kChunk, hi = std::min(n, lo + kChunk);
      std::vector<Ray> rays;
      rays.reserve(hi - lo);
      for (int i = lo; i < hi; ++i) rays.push_back(pixel_ray(cam, pixels[i]));
      auto render = render_composed<T>(ctx, objects, rays, opts);
      for (int i = lo; i < hi; ++i)
        for (int k = 0; k < 3; ++k)
          out[static_cast<size_t>(i) * 3 + k] =
              static_cast<float>(render.color.data()[(i - lo) * 3 + k]);
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

template <typename T>
Image render_image(const SceneContext<T>& ctx, const std::vector<PlacedObject<T>>& objects,
                   const Camera& cam, const ComposeOptions& opts, int threads = 1) {
  std::vector<int> pixels(static_cast<size_t>(cam.width) * cam.height);
  for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<int>(i);
  const auto colors = render_pixels(ctx, objects, cam, pixels, opts, threads);
  Image img(cam.width, cam.height);
  for (size_t i = 0; i < pixels.size(); ++i)
    for (int k = 0; k < 3; ++k)
      img.rgb[3 * i + k] = std::min(1.0f, std::max(0.0f, colors[3 * i + k]));
  return img;
}

double psnr_pixels(const std::vector<float>& pred, const Image& gt,
                   const std::vector<int>& pixels);

// ---- training loops ----

struct TrainLogger {
  std::string stage;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void log(long step, long total, double loss) const {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double eta = step > 0 ? elapsed / step * (total - step) : 0.0;
    std::cerr << stage << " step " << step << "/" << total << " loss " << loss << " eta "
              << static_cast<long>(eta) << "s\n";
  }
};

namespace detail {

template <typename T>
ad::Tensor<T> colors_tensor(const Image& img, const std::vector<int>& pixels) {
  std::vector<T> data;
  data.reserve(pixels.size() * 3);
  for (int p : pixels)
    for (int k = 0; k < 3; ++k) data.push_back(static_cast<T>(img.rgb[3 * static_cast<size_t>(p) + k]));
  return ad::Tensor<T>::constant({static_cast<int>(pixels.size()), 3}, std::move(data));
}

inline std::vector<int> sample_pixels(const std::vector<int>& pool, int count, Rng& rng) {
  std::vector<int> out(count);
  std::uniform_int_distribution<size_t> dist(0, pool.size() - 1);
  for (int i = 0; i < count; ++i) out[i] = pool[dist(rng)];
  return out;
}

inline std::uint64_t step_seed(std::uint64_t seed, long step) {
  return seed * 0x100000001B3ull + static_cast<std::uint64_t>(step) * 2654435761ull + 17;
}

// Abort-with-diagnostic wrapper: a non-finite loss or gradient raises, and
// the message names the last checkpoint that was written.
[[noreturn]] inline void abort_training(const std::string& stage, long step,
                                        const std::string& last_ckpt,
                                        const std::string& why) {
  LANE_FAIL(stage + ": aborted at step " + std::to_string(step) + " (" + why + "); " +
            (last_ckpt.empty() ? std::string("no checkpoint was written yet")
                               : "last good checkpoint: " + last_ckpt));
}

}  // namespace detail

struct WorldTrainResult {
  long steps_run = 0;
  double final_loss = 0;
  double eval_psnr = 0;  // last held-out PSNR (0 when never evaluated)
};

// Trains the lighting-agnostic world field, the multiplier branch, the
// light-field network, and the per-condition lighting codes of one scene.
// Frames of other scenes are ignored.  When `light_only` is set the
// geometry stays untouched (train-light subcommand).
template <typename T>
WorldTrainResult train_world(WorldModel<T>& world, const LoadedDataset& data,
                             const std::string& scene_id, const TrainingConfig& cfg,
                             const std::filesystem::path& ckpt_path, bool light_only = false,
                             long start_step = 0) {
  cfg.validate();
  const auto train_frames = data.frames_of_scene(scene_id, "train");
  LANE_CHECK(!train_frames.empty(), "train_world: no training frames for scene " + scene_id);
  const auto eval_frames = data.frames_of_scene(scene_id, "eval");

  ad::ParamSet<T> params;
  if (!light_only) {
    world.collect_geometry_params(params);
    world.collect_ws_params(params);
  }
  world.collect_light_params(params);
  world.collect_code_params(params);
  ad::Adam<T> opt(params, {.lr = cfg.lr});
  opt.set_step_count(start_step);

  Rng rng(cfg.seed);
  TrainLogger logger{light_only ? "train-light[" + scene_id + "]" : "train-world[" + scene_id + "]"};
  std::string last_ckpt;
  WorldTrainResult result;

  const std::string cfg_hash = config_hash(training_config_to_json(cfg));
  auto save = [&](long step) {
    if (ckpt_path.empty()) return;
    save_checkpoint(ckpt_path, world_checkpoint(world, step, cfg_hash));
    last_ckpt = ckpt_path.string();
  };

  for (long step = start_step; step < cfg.steps; ++step) {
    const LoadedFrame& frame = data.frames[train_frames[rng() % train_frames.size()]];
    const auto pixels = detail::sample_pixels(frame.world_pixels, cfg.batch_rays, rng);
    const ad::Tensor<T> target = detail::colors_tensor<T>(frame.image, pixels);
    const ad::Tensor<T>& f = world.light_codes.at(frame.rec->lighting);

    ad::Tensor<T> loss;
    if (!light_only) {
      std::vector<Ray> rays;
      rays.reserve(pixels.size());
      for (int p : pixels) rays.push_back(pixel_ray(frame.rec->camera, p));
      ComposeOptions opts;
      opts.world_samples = cfg.world_samples;
      opts.jitter = true;
      opts.seed = detail::step_seed(cfg.seed, step);
      opts.active_freqs = coarse_to_fine(static_cast<int>(step), cfg.c2f_window,
                                         cfg.arch.pe_pos.num_frequencies);
      SceneContext<T> ctx{&world, f, world.bounds};
      auto render = render_world(ctx, rays, opts);
      loss = ad::affine(photometric_loss(render.color, target), static_cast<T>(cfg.lambda_p),
                        T(0));
      if (cfg.lambda_depth > 0 && frame.depth) {
        std::vector<double> dt(pixels.size());
        for (size_t i = 0; i < pixels.size(); ++i) dt[i] = frame.depth->depth[pixels[i]];
        auto dl = depth_loss(render.depth, render.alpha, dt);
        if (dl.valid_rays > 0)
          loss = ad::add(loss, ad::affine(dl.loss, static_cast<T>(cfg.lambda_depth), T(0)));
      }
    }
    {
      std::vector<Eigen::Vector3d> origins(pixels.size()), dirs(pixels.size());
      for (size_t i = 0; i < pixels.size(); ++i) {
        const Ray r = pixel_ray(frame.rec->camera, pixels[i]);
        origins[i] = r.origin;
        dirs[i] = r.dir;
      }
      ad::Tensor<T> lf_loss = photometric_loss(light_eval(world, origins, dirs, f), target);
      loss = loss.defined() ? ad::add(loss, lf_loss) : lf_loss;
    }

    const double loss_val = static_cast<double>(loss.item());
    if (!std::isfinite(loss_val))
      detail::abort_training(logger.stage, step, last_ckpt, "non-finite loss");
    params.zero_grad();
    ad::backward(loss);
    opt.set_lr(lr_at_step(cfg, step));
    try {
      opt.step(params);
    } catch (const RuntimeFailure& e) {
      detail::abort_training(logger.stage, step, last_ckpt, e.what());
    }

    result.steps_run = step + 1;
    result.final_loss = loss_val;
    if (cfg.log_every > 0 && (step + 1) % cfg.log_every == 0)
      logger.log(step + 1, cfg.steps, loss_val);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) save(step + 1);

    if (!light_only && cfg.target_psnr > 0 && cfg.eval_every > 0 &&
        (step + 1) % cfg.eval_every == 0 && !eval_frames.empty()) {
      // held-out view check on the first car-free eval frame
      int probe = eval_frames.front();
      for (int idx : eval_frames)
        if (data.frames[idx].rec->objects.empty()) {
          probe = idx;
          break;
        }
      const LoadedFrame& ef = data.frames[probe];
      ComposeOptions eopts;
      eopts.world_samples = cfg.world_samples;
      eopts.active_freqs = coarse_to_fine(static_cast<int>(step), cfg.c2f_window,
                                          cfg.arch.pe_pos.num_frequencies);
      SceneContext<T> ctx{&world, world.light_codes.at(ef.rec->lighting), world.bounds};
      const auto colors = render_pixels(ctx, {}, ef.rec->camera, ef.world_pixels, eopts,
                                        cfg.threads);
      result.eval_psnr = psnr_pixels(colors, ef.image, ef.world_pixels);
      std::cerr << logger.stage << " step " << (step + 1) << " held-out psnr "
                << result.eval_psnr << "\n";
      if (result.eval_psnr >= cfg.target_psnr) {
        save(step + 1);
        return result;
      }
    }
  }
  save(result.steps_run);
  return result;
}

// Object field training: rays restricted to the 3D boxes, photometric loss
// on mask pixels plus mask loss everywhere, across all scenes and lighting
// conditions (the field learns lighting-averaged appearance).
template <typename T>
double train_object(ObjectModel<T>& object, const LoadedDataset& data,
                    const TrainingConfig& cfg, const std::filesystem::path& ckpt_path,
                    long start_step = 0) {
  cfg.validate();
  struct Entry {
    int frame;
    int object;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < data.frames.size(); ++i) {
    if (data.frames[i].rec->split != "train") continue;
    for (size_t o = 0; o < data.frames[i].rec->objects.size(); ++o)
      if (!data.frames[i].box_pixels[o].empty())
        entries.push_back({static_cast<int>(i), static_cast<int>(o)});
  }
  LANE_CHECK(!entries.empty(), "train_object: no frames with objects");

  ad::ParamSet<T> params = object.all_params();
  ad::Adam<T> opt(params, {.lr = cfg.lr});
  opt.set_step_count(start_step);
  Rng rng(cfg.seed + 1);
  TrainLogger logger{"train-object"};
  std::string last_ckpt;
  const std::string cfg_hash = config_hash(training_config_to_json(cfg));
  double last_loss = 0;

  for (long step = start_step; step < cfg.steps; ++step) {
    const Entry e = entries[rng() % entries.size()];
    const LoadedFrame& frame = data.frames[e.frame];
    const auto& pool = frame.box_pixels[e.object];
    std::uniform_int_distribution<size_t> dist(0, pool.size() - 1);
    std::vector<int> pixels(cfg.batch_rays);
    std::vector<T> mask_target(cfg.batch_rays);
    std::vector<int> mask_rows;
    for (int i = 0; i < cfg.batch_rays; ++i) {
      const auto& [pix, inside] = pool[dist(rng)];
      pixels[i] = pix;
      mask_target[i] = inside ? T(1) : T(0);
      if (inside) mask_rows.push_back(i);
    }
    const FrameObject& fo = frame.rec->objects[e.object];

    std::vector<Ray> rays;
    rays.reserve(pixels.size());
    for (int p : pixels) rays.push_back(pixel_ray(frame.rec->camera, p));

    PlacedObject<T> placed;
    placed.model = &object;
    placed.instance = fo.instance;
    placed.pose = fo.pose;

    ComposeOptions opts;
    opts.include_world = false;
    opts.include_background = false;
    opts.object_samples = cfg.object_samples;
    opts.object_shade = ShadeMode::kNone;  // lighting-agnostic training
    opts.jitter = true;
    opts.seed = detail::step_seed(cfg.seed, step);
    opts.active_freqs = coarse_to_fine(static_cast<int>(step), cfg.c2f_window,
                                       cfg.arch.pe_pos.num_frequencies);
    SceneContext<T> ctx{nullptr, {}, data.manifest.scene(frame.rec->scene).bounds};
    auto render = render_composed<T>(ctx, {placed}, rays, opts);

    ad::Tensor<T> loss = ad::affine(
        mask_loss(render.alpha, ad::Tensor<T>::constant({cfg.batch_rays}, mask_target)),
        static_cast<T>(cfg.lambda_mask), T(0));
    if (!mask_rows.empty()) {
      std::vector<int> sel_pixels;
      for (int r : mask_rows) sel_pixels.push_back(pixels[r]);
      ad::Tensor<T> pred = ad::gather_rows(render.color, mask_rows);
      loss = ad::add(loss, ad::affine(photometric_loss(
                               pred, detail::colors_tensor<T>(frame.image, sel_pixels)),
                           static_cast<T>(cfg.lambda_p), T(0)));
    }

    last_loss = static_cast<double>(loss.item());
    if (!std::isfinite(last_loss))
      detail::abort_training(logger.stage, step, last_ckpt, "non-finite loss");
    params.zero_grad();
    ad::backward(loss);
    opt.set_lr(lr_at_step(cfg, step));
    try {
      opt.step(params);
    } catch (const RuntimeFailure& e2) {
      detail::abort_training(logger.stage, step, last_ckpt, e2.what());
    }

    if (cfg.log_every > 0 && (step + 1) % cfg.log_every == 0)
      logger.log(step + 1, cfg.steps, last_loss);
    if (!ckpt_path.empty() && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(ckpt_path, object_checkpoint(object, step + 1, cfg_hash));
      last_ckpt = ckpt_path.string();
    }
  }
  if (!ckpt_path.empty())
    save_checkpoint(ckpt_path, object_checkpoint(object, cfg.steps, cfg_hash));
  return last_loss;
}

// Frame filter for shader training/evaluation.
struct ShaderDataSelect {
  std::set<std::string> scenes;      // empty = all
  std::set<std::string> conditions;  // empty = all
  std::string split = "train";

  bool admits(const FrameRecord& rec) const {
    if (rec.split != split || rec.objects.empty()) return false;
    if (!scenes.empty() && !scenes.count(rec.scene)) return false;
    if (!conditions.empty() && !conditions.count(rec.lighting)) return false;
    return true;
  }
};

inline std::string env_id_of(const FrameRecord& rec) { return rec.scene + ":" + rec.lighting; }

// Shader training: object density/albedo and the world (light field) are
// frozen; only shader parameters move.  Rays sample the instance mask, the
// loss is photometric on the shaded object render.
template <typename T, typename Shader>
double train_shader(Shader& shader, const ObjectModel<T>& object_frozen,
                    const std::map<std::string, const WorldModel<T>*>& worlds_frozen,
                    const LoadedDataset& data, const ShaderDataSelect& select,
                    const TrainingConfig& cfg, const std::filesystem::path& ckpt_path,
                    ad::ParamSet<T>* train_params = nullptr) {
  cfg.validate();
  constexpr bool is_lg = std::is_same_v<Shader, LocalGlobalShader<T>>;

  struct Entry {
    int frame;
    int object;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < data.frames.size(); ++i) {
    const auto& frame = data.frames[i];
    if (!select.admits(*frame.rec)) continue;
    for (size_t o = 0; o < frame.rec->objects.size(); ++o)
      if (frame.masks[o].count() >= 8) entries.push_back({static_cast<int>(i), static_cast<int>(o)});
  }
  LANE_CHECK(!entries.empty(), "train_shader: no frames admitted by the data selection");

  ad::ParamSet<T> own_params;
  if (!train_params) {
    shader.collect_params(own_params);
    train_params = &own_params;
  }
  ad::Adam<T> opt(*train_params, {.lr = cfg.lr});
  Rng rng(cfg.seed + 2);
  TrainLogger logger{is_lg ? "train-shader[local-global]" : "train-shader[light-field]"};
  std::string last_ckpt;
  const std::string cfg_hash = config_hash(training_config_to_json(cfg));
  double last_loss = 0;

  for (long step = 0; step < cfg.steps; ++step) {
    const Entry e = entries[rng() % entries.size()];
    const LoadedFrame& frame = data.frames[e.frame];
    const FrameObject& fo = frame.rec->objects[e.object];
    const Mask& mask = frame.masks[e.object];
    std::vector<int> mask_pixels;
    for (size_t p = 0; p < mask.on.size(); ++p)
      if (mask.on[p]) mask_pixels.push_back(static_cast<int>(p));
    const auto pixels = detail::sample_pixels(mask_pixels, cfg.batch_rays, rng);

    std::vector<Ray> rays;
    rays.reserve(pixels.size());
    for (int p : pixels) rays.push_back(pixel_ray(frame.rec->camera, p));

    PlacedObject<T> placed;
    placed.model = &object_frozen;
    placed.instance = fo.instance;
    placed.pose = fo.pose;
    const WorldModel<T>* world = nullptr;
    if constexpr (is_lg) {
      placed.shader = ShaderKind::kLocalGlobal;
      placed.lg = &shader;
      placed.env_id = env_id_of(*frame.rec);
    } else {
      placed.shader = ShaderKind::kLightField;
      placed.lf = &shader;
      auto it = worlds_frozen.find(frame.rec->scene);
      LANE_CHECK(it != worlds_frozen.end(),
                 "train_shader: missing frozen world for scene " + frame.rec->scene);
      world = it->second;
    }

    ComposeOptions opts;
    opts.include_world = false;
    opts.include_background = false;
    opts.object_samples = cfg.object_samples;
    opts.secondary_rays = cfg.secondary_rays;
    opts.occupancy_threshold = cfg.occupancy_threshold;
    opts.jitter = true;
    opts.seed = detail::step_seed(cfg.seed, step);
    SceneContext<T> ctx{world, {}, data.manifest.scene(frame.rec->scene).bounds};
    if (world) ctx.lighting = world->light_codes.at(frame.rec->lighting);
    auto render = render_composed<T>(ctx, {placed}, rays, opts);

    ad::Tensor<T> loss = photometric_loss(render.color,
                                          detail::colors_tensor<T>(frame.image, pixels));
    last_loss = static_cast<double>(loss.item());
    if (!std::isfinite(last_loss))
      detail::abort_training(logger.stage, step, last_ckpt, "non-finite loss");
    train_params->zero_grad();
    ad::backward(loss);
    opt.set_lr(lr_at_step(cfg, step));
    try {
      opt.step(*train_params);
    } catch (const RuntimeFailure& e2) {
      detail::abort_training(logger.stage, step, last_ckpt, e2.what());
    }

    if (cfg.log_every > 0 && (step + 1) % cfg.log_every == 0)
      logger.log(step + 1, cfg.steps, last_loss);
    if (!ckpt_path.empty() && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(ckpt_path, shader_checkpoint(shader, step + 1, cfg_hash));
      last_ckpt = ckpt_path.string();
    }
  }
  if (!ckpt_path.empty())
    save_checkpoint(ckpt_path, shader_checkpoint(shader, cfg.steps, cfg_hash));
  return last_loss;
}

// Optimizes a fresh lighting code against the frozen light field's
// reconstruction loss (unseen-condition fitting).
template <typename T>
struct LatentFitResult {
  ad::Tensor<T> code;
  double initial_loss = 0;
  double final_loss = 0;
};

template <typename T>
LatentFitResult<T> fit_lighting_code(const WorldModel<T>& world_frozen,
                                     const LoadedDataset& data,
                                     const std::vector<int>& frame_indices,
                                     const TrainingConfig& cfg) {
  LANE_CHECK(!frame_indices.empty(), "fit_lighting_code: no frames");
  Rng rng(cfg.seed + 3);
  std::uniform_real_distribution<double> init(-0.1, 0.1);
  std::vector<T> v(world_frozen.cfg.f_dim);
  for (auto& x : v) x = static_cast<T>(init(rng));
  LatentFitResult<T> out;
  out.code = ad::Tensor<T>::param({world_frozen.cfg.f_dim}, std::move(v), "light.code.fit");

  ad::ParamSet<T> params;
  params.add(out.code);
  ad::Adam<T> opt(params, {.lr = cfg.lr});

  auto batch_loss = [&](const LoadedFrame& frame, const std::vector<int>& pixels) {
    std::vector<Eigen::Vector3d> origins(pixels.size()), dirs(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) {
      const Ray r = pixel_ray(frame.rec->camera, pixels[i]);
      origins[i] = r.origin;
      dirs[i] = r.dir;
    }
    return photometric_loss(light_eval(world_frozen, origins, dirs, out.code),
                            detail::colors_tensor<T>(frame.image, pixels));
  };

  // fixed probe batch so the before/after losses are comparable
  const LoadedFrame& probe_frame = data.frames[frame_indices.front()];
  Rng probe_rng(cfg.seed + 4);
  const auto probe_pixels =
      detail::sample_pixels(probe_frame.world_pixels, 4 * cfg.batch_rays, probe_rng);
  out.initial_loss = static_cast<double>(batch_loss(probe_frame, probe_pixels).item());

  for (long step = 0; step < cfg.steps; ++step) {
    const LoadedFrame& frame = data.frames[frame_indices[rng() % frame_indices.size()]];
    ad::Tensor<T> loss =
        batch_loss(frame, detail::sample_pixels(frame.world_pixels, cfg.batch_rays, rng));
    params.zero_grad();
    ad::backward(loss);
    opt.step(params);
  }
  out.final_loss = static_cast<double>(batch_loss(probe_frame, probe_pixels).item());
  return out;
}

// Fits fresh scene codes (tau) for environments the local-global shader was
// not trained on.  The caller passes a shader whose MLP tensors are frozen
// and whose tau table holds exactly the new environments; only those codes
// are optimized here.
template <typename T>
void fit_scene_code(LocalGlobalShader<T>& shader_frozen_mlp, const ObjectModel<T>& object_frozen,
                    const LoadedDataset& data, const ShaderDataSelect& select,
                    const TrainingConfig& cfg) {
  ad::ParamSet<T> params;
  shader_frozen_mlp.tau.collect_params(params);
  train_shader<T, LocalGlobalShader<T>>(shader_frozen_mlp, object_frozen, {}, data, select,
                                        cfg, {}, &params);
}

}  // namespace lane
