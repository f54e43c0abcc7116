#include "lane/stages.hpp"

namespace lane {

namespace {

FieldConfig grad_suite_config() {
  FieldConfig cfg;
  cfg.world_width = 16;
  cfg.world_depth = 8;
  cfg.object_width = 16;
  cfg.object_depth = 8;
  cfg.light_width = 16;
  cfg.light_depth = 8;
  cfg.ws_width = 8;
  cfg.shader_width = 16;
  cfg.attn_key_dim = 8;
  cfg.attn_val_dim = 8;
  cfg.eta_shape_dim = 4;
  cfg.eta_color_dim = 4;
  cfg.tau_dim = 4;
  cfg.pe_pos = {4, true};
  cfg.pe_shader = {2, true};
  cfg.pe_dir = {2, true};
  return cfg;
}

}  // namespace

std::vector<GradSuiteEntry> gradient_suite(int coords_per_param) {
  using DT = ad::Tensor<double>;
  const FieldConfig cfg = grad_suite_config();
  const Eigen::AlignedBox3d bounds(Eigen::Vector3d(-6, -6, 0), Eigen::Vector3d(6, 6, 4));

  Rng rng(15);
  auto world = make_world_model<double>(cfg, bounds, {"l0"}, rng);
  auto object = make_object_model<double>(cfg, {"car0"}, rng);
  auto lg = make_local_global_shader<double>(cfg, {"env"}, rng);
  auto lf = make_light_field_shader<double>(cfg, rng);
  object.sigma_head.bias.data() = {6.0};  // alpha gate well above the 0.5 threshold

  ObjectPose pose;
  pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitZ()));
  pose.translation = {0.5, 0.3, 0.4};
  pose.half_extents = {1.0, 0.5, 0.4};

  std::vector<Ray> rays;
  for (int i = 0; i < 2; ++i) {
    Ray r;
    r.origin = {-3.0, -2.5 + 0.05 * i, 1.6};
    r.dir = (pose.translation + Eigen::Vector3d(0.05 * i - 0.1, 0, 0) - r.origin).normalized();
    r.t_near = 0.05;
    r.t_far = 12.0;
    rays.push_back(r);
  }

  SceneContext<double> ctx{&world, world.light_codes.at("l0"), bounds};
  PlacedObject<double> with_lg;
  with_lg.model = &object;
  with_lg.instance = "car0";
  with_lg.pose = pose;
  with_lg.shader = ShaderKind::kLocalGlobal;
  with_lg.lg = &lg;
  with_lg.env_id = "env";
  PlacedObject<double> with_lf = with_lg;
  with_lf.shader = ShaderKind::kLightField;
  with_lf.lg = nullptr;
  with_lf.lf = &lf;

  ComposeOptions opts;
  opts.world_samples = 6;
  opts.object_samples = 5;
  opts.secondary_rays = 6;

  DT target = DT::constant({2, 3}, {0.3, 0.5, 0.2, 0.6, 0.4, 0.7});
  Rng coord_rng(99);

  std::vector<GradSuiteEntry> out;
  auto run = [&](const PlacedObject<double>& placed, ad::ParamSet<double>& params,
                 const std::string& label) {
    auto loss_fn = [&]() {
      auto render = render_composed<double>(ctx, {placed}, rays, opts);
      return ad::mse(render.color, target);
    };
    out.push_back({label, ad::grad_check_params(loss_fn, params, 1e-5, coords_per_param,
                                                coord_rng)});
  };

  {
    ad::ParamSet<double> p;
    world.collect_geometry_params(p);
    run(with_lg, p, "world");
  }
  {
    ad::ParamSet<double> p;
    world.collect_ws_params(p);
    world.collect_code_params(p);
    run(with_lg, p, "world_multiplier");
  }
  {
    ad::ParamSet<double> p;
    world.collect_light_params(p);
    run(with_lf, p, "light_field");
  }
  {
    ad::ParamSet<double> p;
    object.collect_params(p);
    run(with_lg, p, "object");
  }
  {
    ad::ParamSet<double> p;
    lg.collect_params(p);
    run(with_lg, p, "shader_local_global");
  }
  {
    ad::ParamSet<double> p;
    lf.collect_params(p);
    run(with_lf, p, "shader_light_field");
  }
  return out;
}

std::vector<EvalRow> evaluate_predictions(const DatasetManifest& manifest,
                                          const fs_::path& pred_dir,
                                          const std::string& split) {
  LANE_CHECK(fs_::exists(pred_dir), "eval: prediction directory does not exist: " +
                                        pred_dir.string());
  std::vector<std::string> variants;
  for (const auto& entry : fs_::directory_iterator(pred_dir))
    if (entry.is_directory()) variants.push_back(entry.path().filename().string());
  std::sort(variants.begin(), variants.end());
  LANE_CHECK(!variants.empty(), "eval: no variant subdirectories under " + pred_dir.string());

  std::vector<const FrameRecord*> frames;
  for (const auto& f : manifest.frames)
    if (split.empty() || f.split == split) frames.push_back(&f);
  LANE_CHECK(!frames.empty(), "eval: no frames in split '" + split + "'");

  std::vector<EvalRow> rows;
  for (const auto& variant : variants) {
    // group metrics by (scene, lighting)
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> groups;
    size_t found = 0;
    for (const FrameRecord* f : frames) {
      const fs_::path pred_path = pred_dir / variant / (f->id + ".ppm");
      if (!fs_::exists(pred_path)) continue;
      ++found;
      Image pred = read_ppm(pred_path);
      Image gt = load_frame_image(manifest, *f);
      groups[{f->scene, f->lighting}].push_back({psnr(pred, gt), ssim(pred, gt)});
    }
    if (found != frames.size())
      LANE_FAIL("eval: variant '" + variant + "' has " + std::to_string(found) +
                " predictions for " + std::to_string(frames.size()) + " reference frames");
    for (const auto& [key, vals] : groups) {
      EvalRow row;
      row.variant = variant;
      row.scene = key.first;
      row.lighting = key.second;
      row.count = static_cast<int>(vals.size());
      double mp = 0, ms = 0;
      for (const auto& [p, s] : vals) {
        mp += p;
        ms += s;
      }
      mp /= vals.size();
      ms /= vals.size();
      double vp = 0, vs = 0;
      for (const auto& [p, s] : vals) {
        vp += (p - mp) * (p - mp);
        vs += (s - ms) * (s - ms);
      }
      row.psnr_mean = mp;
      row.psnr_std = std::sqrt(vp / vals.size());
      row.ssim_mean = ms;
      row.ssim_std = std::sqrt(vs / vals.size());
      rows.push_back(row);
    }
  }
  return rows;
}

void write_eval_csv(const fs_::path& path, const std::vector<EvalRow>& rows) {
  if (path.has_parent_path()) fs_::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) LANE_FAIL("eval: cannot write " + path.string());
  out << "variant,scene,lighting,psnr_mean,psnr_std,ssim_mean,ssim_std,count\n";
  out << std::setprecision(10);
  for (const auto& r : rows)
    out << r.variant << ',' << r.scene << ',' << r.lighting << ',' << r.psnr_mean << ','
        << r.psnr_std << ',' << r.ssim_mean << ',' << r.ssim_std << ',' << r.count << '\n';
}

void write_ablation_csv(const fs_::path& path, const std::string& key_column,
                        const std::vector<AblationRow>& rows) {
  if (path.has_parent_path()) fs_::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) LANE_FAIL("ablate: cannot write " + path.string());
  out << key_column << ",psnr_mean,psnr_std,ssim_mean,ssim_std\n";
  out << std::setprecision(10);
  for (const auto& r : rows)
    out << r.label << ',' << r.psnr_mean << ',' << r.psnr_std << ',' << r.ssim_mean << ','
        << r.ssim_std << '\n';
}

TrainingConfig ablation_config() {
  TrainingConfig cfg;
  cfg.arch.world_width = 64;
  cfg.arch.world_depth = 4;
  cfg.arch.object_width = 64;
  cfg.arch.object_depth = 4;
  cfg.arch.light_width = 48;
  cfg.arch.light_depth = 4;
  cfg.arch.ws_width = 24;
  cfg.arch.shader_width = 64;
  cfg.arch.attn_key_dim = 32;
  cfg.arch.attn_val_dim = 32;
  cfg.batch_rays = 64;
  cfg.steps = 600;
  cfg.world_samples = 24;
  cfg.object_samples = 16;
  cfg.secondary_rays = 24;
  cfg.lr = 1.5e-3;
  cfg.c2f_window = 300;
  cfg.log_every = 0;
  cfg.checkpoint_every = 0;
  cfg.eval_every = 0;
  return cfg;
}

DatasetSpec ablation_dataset_spec(int instances) {
  DatasetSpec spec;
  spec.num_scenes = 1;
  spec.frames_per_env = 12;
  spec.carfree_frames = 2;
  spec.image_size = 48;
  spec.seed = 21;
  spec.scene.num_boxes = 3;
  spec.scene.num_spheres = 1;
  spec.scene.num_instances = instances;
  return spec;
}

namespace {

struct AblationFixture {
  LoadedDataset data;
  ObjectModel<float> object;
  WorldModel<float> world;

  AblationFixture(const fs_::path& work, const TrainingConfig& base, int instances) {
    const fs_::path dir = work / ("dataset_i" + std::to_string(instances));
    if (!fs_::exists(dir / "manifest.json"))
      generate_dataset(ablation_dataset_spec(instances), dir);
    data = load_training_data(dir);

    TrainingConfig ocfg = base;
    object = stage_train_object<float>(data, ocfg,
                                       work / ("object_i" + std::to_string(instances) + ".ckpt"),
                                       /*reuse=*/true);
    TrainingConfig lcfg = base;
    lcfg.steps = std::max(400, base.steps);
    world = stage_train_world<float>(data, "s0", lcfg,
                                     work / ("light_i" + std::to_string(instances) + ".ckpt"),
                                     /*light_only=*/true, /*reuse=*/true);
  }
};

}  // namespace

std::vector<AblationRow> ablate_secondary_rays(const fs_::path& work,
                                               const std::vector<int>& counts,
                                               const TrainingConfig& base) {
  AblationFixture fix(work, base, 2);
  auto object_frozen = freeze_object(fix.object);
  auto world_frozen = freeze_world(fix.world);
  std::map<std::string, const WorldModel<float>*> worlds{{"s0", &world_frozen}};
  ShaderDataSelect train_sel;  // all scenes/conditions, train split
  ShaderDataSelect eval_sel;
  eval_sel.split = "eval";

  std::vector<AblationRow> rows;
  for (int n : counts) {
    TrainingConfig cfg = base;
    cfg.secondary_rays = n;
    auto shader = stage_train_shader_lf<float>(
        fix.data, object_frozen, worlds, train_sel, cfg,
        work / ("shader_rays_" + std::to_string(n) + ".ckpt"), /*reuse=*/true);
    auto eval = eval_object_renders<float>(fix.data, eval_sel, object_frozen,
                                           ShaderKind::kLightField, nullptr, &shader, worlds,
                                           cfg, ShadeMode::kLearned);
    rows.push_back({std::to_string(n), eval.psnr_mean, eval.psnr_std, eval.ssim_mean,
                    eval.ssim_std});
    std::cerr << "ablate rays " << n << ": psnr " << eval.psnr_mean << "\n";
  }
  return rows;
}

std::vector<AblationRow> ablate_instance_count(const fs_::path& work,
                                               const TrainingConfig& base) {
  std::vector<AblationRow> rows;
  for (int k = 1; k <= 6; ++k) {
    AblationFixture fix(work, base, k);
    auto object_frozen = freeze_object(fix.object);
    ShaderDataSelect train_sel;
    auto lg = stage_train_shader_lg<float>(fix.data, object_frozen, train_sel, base,
                                           work / ("shader_lg_i" + std::to_string(k) + ".ckpt"),
                                           /*reuse=*/true);
    ShaderDataSelect eval_sel;
    eval_sel.split = "eval";
    auto eval = eval_object_renders<float>(fix.data, eval_sel, object_frozen,
                                           ShaderKind::kLocalGlobal, &lg, nullptr, {}, base,
                                           ShadeMode::kLearned);
    rows.push_back({std::to_string(k), eval.psnr_mean, eval.psnr_std, eval.ssim_mean,
                    eval.ssim_std});
    std::cerr << "ablate instances " << k << ": psnr " << eval.psnr_mean << "\n";
  }
  return rows;
}

namespace {

std::vector<AblationRow> ablate_lf_flag(const fs_::path& work, const TrainingConfig& base,
                                        bool FieldConfig::* flag, const char* on_label,
                                        const char* off_label, const char* tag) {
  AblationFixture fix(work, base, 2);
  auto object_frozen = freeze_object(fix.object);
  auto world_frozen = freeze_world(fix.world);
  std::map<std::string, const WorldModel<float>*> worlds{{"s0", &world_frozen}};
  ShaderDataSelect train_sel;
  ShaderDataSelect eval_sel;
  eval_sel.split = "eval";

  std::vector<AblationRow> rows;
  for (bool on : {false, true}) {
    TrainingConfig cfg = base;
    cfg.arch.*flag = on;
    auto shader = stage_train_shader_lf<float>(
        fix.data, object_frozen, worlds, train_sel, cfg,
        work / (std::string("shader_") + tag + (on ? "_on" : "_off") + ".ckpt"),
        /*reuse=*/true);
    auto eval = eval_object_renders<float>(fix.data, eval_sel, object_frozen,
                                           ShaderKind::kLightField, nullptr, &shader, worlds,
                                           cfg, ShadeMode::kLearned);
    rows.push_back({on ? on_label : off_label, eval.psnr_mean, eval.psnr_std, eval.ssim_mean,
                    eval.ssim_std});
    std::cerr << "ablate " << tag << " " << (on ? on_label : off_label) << ": psnr "
              << eval.psnr_mean << "\n";
  }
  return rows;
}

}  // namespace

std::vector<AblationRow> ablate_shading_variants(const fs_::path& work,
                                                 const TrainingConfig& base) {
  return ablate_lf_flag(work, base, &FieldConfig::shader_direct_rgb, "color_regression",
                        "shading_factor", "rgbmode");
}

std::vector<AblationRow> ablate_view_dependence(const fs_::path& work,
                                                const TrainingConfig& base) {
  return ablate_lf_flag(work, base, &FieldConfig::shader_view_dependent, "view_dependent",
                        "lambertian", "viewdep");
}

}  // namespace lane
