// Command-line front end: dataset generation, the four training stages,
// composition, rendering, evaluation, and the ablation harnesses.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "lane/stages.hpp"

namespace {

using namespace lane;
namespace fs = std::filesystem;

template <typename F>
auto dispatch_precision(const std::string& precision, F&& f) {
  if (precision == "f64") return f.template operator()<double>();
  return f.template operator()<float>();
}

std::string slurp(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

struct CommonTrainArgs {
  std::string dataset;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "model.ckpt";
  std::string resume;
  int threads = 0;
  bool grad_check = false;

  TrainingConfig resolve() const {
    TrainingConfig cfg;
    if (!config_path.empty()) cfg = training_config_from_json(slurp(config_path));
    apply_config_overrides(cfg, overrides);
    if (threads > 0) cfg.threads = threads;
    if (const char* env_seed = std::getenv("LANE_SEED")) {
      try {
        cfg.seed = std::stoull(env_seed);
      } catch (const std::exception&) {
        throw ContractError("LANE_SEED must be an integer, got '" + std::string(env_seed) +
                            "'");
      }
    }
    cfg.validate();
    return cfg;
  }
};

void add_train_options(CLI::App* cmd, CommonTrainArgs& args, bool needs_dataset = true) {
  if (needs_dataset)
    cmd->add_option("--dataset", args.dataset, "dataset directory")->required();
  cmd->add_option("--config", args.config_path, "training config JSON file");
  cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
  cmd->add_option("--out", args.out, "output checkpoint path");
  cmd->add_option("--resume", args.resume, "resume from checkpoint");
  cmd->add_option("--threads", args.threads, "worker threads");
}

int run_grad_suite() {
  bool ok = true;
  for (const auto& entry : gradient_suite(6)) {
    const bool pass = entry.max_rel_err < 1e-4;
    ok = ok && pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << entry.network
              << " max relative error " << entry.max_rel_err << "\n";
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lighting-aware compositional neural fields"};
  app.require_subcommand(1);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "generate a procedural multi-lighting dataset");
  std::string gen_out, gen_spec_path;
  std::vector<std::string> gen_overrides;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--spec", gen_spec_path, "dataset spec JSON file");
  gen->add_option("--set", gen_overrides, "spec override key=value (repeatable)");
  gen->add_option("--seed", gen_seed, "seed override");

  // ---- training stages ----
  CommonTrainArgs world_args, light_args, object_args, shader_args;
  std::string world_scene = "s0", light_scene = "s0";
  auto* train_world_cmd = app.add_subcommand("train-world", "train world field + light field");
  add_train_options(train_world_cmd, world_args);
  train_world_cmd->add_option("--scene", world_scene, "scene id");
  train_world_cmd->add_flag("--grad-check", world_args.grad_check,
                            "run the finite-difference gradient suite and exit");

  auto* train_light_cmd =
      app.add_subcommand("train-light", "train the light field network only");
  add_train_options(train_light_cmd, light_args);
  train_light_cmd->add_option("--scene", light_scene, "scene id");

  auto* train_object_cmd = app.add_subcommand("train-object", "train the shared object field");
  add_train_options(train_object_cmd, object_args);

  auto* train_shader_cmd = app.add_subcommand("train-shader", "train an object shader");
  add_train_options(train_shader_cmd, shader_args);
  std::string shader_variant = "light-field", shader_object_ckpt;
  std::vector<std::string> shader_worlds, shader_scenes, shader_conditions;
  train_shader_cmd->add_option("--variant", shader_variant,
                               "local-global | light-field");
  train_shader_cmd->add_option("--object", shader_object_ckpt, "frozen object checkpoint")
      ->required();
  train_shader_cmd->add_option("--world", shader_worlds,
                               "scene=checkpoint with a trained light field (repeatable)");
  train_shader_cmd->add_option("--scenes", shader_scenes, "restrict training scenes");
  train_shader_cmd->add_option("--conditions", shader_conditions,
                               "restrict training lighting conditions");

  // ---- compose / render ----
  auto* compose_cmd = app.add_subcommand("compose", "compose objects into a scene");
  ComposeRequest compose_req;
  std::string compose_world, compose_light, compose_object, compose_shader,
      compose_placements, compose_out;
  compose_cmd->add_option("--world", compose_world, "world checkpoint")->required();
  compose_cmd->add_option("--light", compose_light, "light-field checkpoint (default: world)");
  compose_cmd->add_option("--object", compose_object, "object checkpoint")->required();
  compose_cmd->add_option("--shader", compose_shader, "shader checkpoint or 'none'");
  compose_cmd->add_option("--placements", compose_placements, "placements JSON")->required();
  compose_cmd->add_option("--lighting", compose_req.lighting, "lighting condition id")
      ->required();
  compose_cmd->add_option("--out", compose_out, "output directory")->required();
  compose_cmd->add_flag("--unshaded", compose_req.also_unshaded,
                        "also write lighting-agnostic renders");
  compose_cmd->add_option("--world-samples", compose_req.world_samples, "samples per ray");
  compose_cmd->add_option("--object-samples", compose_req.object_samples,
                          "object samples per box interval");
  compose_cmd->add_option("--secondary-rays", compose_req.secondary_rays,
                          "secondary rays per surface point");
  compose_cmd->add_option("--threads", compose_req.threads, "worker threads");
  std::string compose_precision = "f32";
  compose_cmd->add_option("--precision", compose_precision, "f32 | f64");

  auto* render_cmd = app.add_subcommand("render", "world-only render");
  std::string render_world_ckpt, render_light_ckpt, render_placements, render_lighting,
      render_out, render_precision = "f32";
  int render_threads = 1, render_samples = 48;
  bool render_depth = false;
  render_cmd->add_option("--world", render_world_ckpt, "world checkpoint")->required();
  render_cmd->add_option("--light", render_light_ckpt, "light checkpoint (default: world)");
  render_cmd->add_option("--placements", render_placements, "placements JSON (cameras)")
      ->required();
  render_cmd->add_option("--lighting", render_lighting, "lighting condition id")->required();
  render_cmd->add_option("--out", render_out, "output directory")->required();
  render_cmd->add_flag("--depth", render_depth, "also write expected-depth PFM maps");
  render_cmd->add_option("--threads", render_threads, "worker threads");
  render_cmd->add_option("--world-samples", render_samples, "samples per ray");
  render_cmd->add_option("--precision", render_precision, "f32 | f64");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM tables for prediction folders");
  std::string eval_dataset, eval_pred, eval_split = "eval", eval_out = "eval.csv";
  eval_cmd->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval_cmd->add_option("--pred", eval_pred, "predictions directory (variant subdirs)")
      ->required();
  eval_cmd->add_option("--split", eval_split, "dataset split to evaluate (train|eval|all)");
  eval_cmd->add_option("--out", eval_out, "output CSV path");

  // ---- ablate ----
  auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation sweep");
  std::string ablate_which, ablate_work = "ablate_work", ablate_out = "ablation.csv";
  std::vector<std::string> ablate_overrides;
  ablate_cmd
      ->add_option("--which", ablate_which, "rays | instances | variants | view-dep")
      ->required();
  ablate_cmd->add_option("--work", ablate_work, "working directory (caches micro models)");
  ablate_cmd->add_option("--out", ablate_out, "output CSV path");
  ablate_cmd->add_option("--set", ablate_overrides, "config override key=value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      DatasetSpec spec;
      if (!gen_spec_path.empty()) spec = dataset_spec_from_json(slurp(gen_spec_path));
      apply_dataset_overrides(spec, gen_overrides);
      if (gen_seed != 0) spec.seed = gen_seed;
      if (const char* env_seed = std::getenv("LANE_SEED")) spec.seed = std::stoull(env_seed);
      const auto manifest = generate_dataset(spec, gen_out);
      std::cout << "wrote " << manifest.frames.size() << " frames to " << gen_out << "\n";
      return 0;
    }

    if (train_world_cmd->parsed() || train_light_cmd->parsed()) {
      const bool light_only = train_light_cmd->parsed();
      CommonTrainArgs& args = light_only ? light_args : world_args;
      const std::string scene = light_only ? light_scene : world_scene;
      TrainingConfig cfg = args.resolve();
      if (args.grad_check) {
        LANE_CHECK(cfg.precision == "f64",
                   "--grad-check requires --set precision=f64 (finite differences)");
        return run_grad_suite();
      }
      LoadedDataset data = load_training_data(args.dataset);
      return dispatch_precision(cfg.precision, [&]<typename T>() {
        WorldModel<T> world = [&] {
          if (!args.resume.empty())
            return world_from_checkpoint<T>(load_checkpoint(args.resume));
          Rng rng(cfg.seed);
          std::vector<std::string> conditions;
          for (const auto& l : data.manifest.lighting) conditions.push_back(l.id);
          return make_world_model<T>(cfg.arch, data.manifest.scene(scene).bounds, conditions,
                                     rng);
        }();
        const long start = args.resume.empty() ? 0 : load_checkpoint(args.resume).step;
        train_world(world, data, scene, cfg, args.out, light_only, start);
        std::cout << "wrote " << args.out << "\n";
        return 0;
      });
    }

    if (train_object_cmd->parsed()) {
      TrainingConfig cfg = object_args.resolve();
      LoadedDataset data = load_training_data(object_args.dataset);
      return dispatch_precision(cfg.precision, [&]<typename T>() {
        ObjectModel<T> object = [&] {
          if (!object_args.resume.empty())
            return object_from_checkpoint<T>(load_checkpoint(object_args.resume));
          Rng rng(cfg.seed);
          std::vector<std::string> instances;
          for (const auto& i : data.manifest.instances) instances.push_back(i.id);
          return make_object_model<T>(cfg.arch, instances, rng);
        }();
        const long start = object_args.resume.empty() ? 0
                                                      : load_checkpoint(object_args.resume).step;
        train_object(object, data, cfg, object_args.out, start);
        std::cout << "wrote " << object_args.out << "\n";
        return 0;
      });
    }

    if (train_shader_cmd->parsed()) {
      TrainingConfig cfg = shader_args.resolve();
      LANE_CHECK(shader_variant == "local-global" || shader_variant == "light-field",
                 "train-shader: --variant must be local-global or light-field");
      LoadedDataset data = load_training_data(shader_args.dataset);
      ShaderDataSelect select;
      for (const auto& s : shader_scenes) select.scenes.insert(s);
      for (const auto& c : shader_conditions) select.conditions.insert(c);
      return dispatch_precision(cfg.precision, [&]<typename T>() {
        ObjectModel<T> object =
            object_from_checkpoint<T>(load_checkpoint(shader_object_ckpt));
        ObjectModel<T> object_frozen = freeze_object(object);
        if (shader_variant == "local-global") {
          stage_train_shader_lg<T>(data, object_frozen, select, cfg, shader_args.out);
        } else {
          std::map<std::string, WorldModel<T>> owned;
          std::map<std::string, const WorldModel<T>*> worlds;
          for (const auto& spec : shader_worlds) {
            const auto eq = spec.find('=');
            LANE_CHECK(eq != std::string::npos,
                       "train-shader: --world expects scene=checkpoint, got '" + spec + "'");
            const std::string scene = spec.substr(0, eq);
            WorldModel<T> w = world_from_checkpoint<T>(load_checkpoint(spec.substr(eq + 1)));
            owned.emplace(scene, freeze_world(w));
          }
          for (const auto& [scene, model] : owned) worlds[scene] = &model;
          LANE_CHECK(!worlds.empty(),
                     "train-shader: the light-field variant needs at least one --world");
          stage_train_shader_lf<T>(data, object_frozen, worlds, select, cfg, shader_args.out);
        }
        std::cout << "wrote " << shader_args.out << "\n";
        return 0;
      });
    }

    if (compose_cmd->parsed()) {
      compose_req.world_ckpt = compose_world;
      compose_req.light_ckpt = compose_light;
      compose_req.object_ckpt = compose_object;
      if (!compose_shader.empty() && compose_shader != "none")
        compose_req.shader_ckpt = compose_shader;
      compose_req.placements = compose_placements;
      compose_req.out_dir = compose_out;
      return dispatch_precision(compose_precision, [&]<typename T>() {
        stage_compose<T>(compose_req);
        std::cout << "wrote renders to " << compose_out << "\n";
        return 0;
      });
    }

    if (render_cmd->parsed()) {
      return dispatch_precision(render_precision, [&]<typename T>() {
        WorldModel<T> world = world_from_checkpoint<T>(load_checkpoint(render_world_ckpt));
        if (!render_light_ckpt.empty()) {
          WorldModel<T> light = world_from_checkpoint<T>(load_checkpoint(render_light_ckpt));
          world.light_mlp = light.light_mlp;
          world.light_codes = light.light_codes;
        }
        const auto frames = read_placements(render_placements);
        fs::create_directories(render_out);
        SceneContext<T> ctx{&world, world.light_codes.at(render_lighting), world.bounds};
        ComposeOptions opts;
        opts.world_samples = render_samples;
        for (size_t i = 0; i < frames.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof(name), "frame_%04zu", i);
          write_ppm(fs::path(render_out) / (std::string(name) + ".ppm"),
                    render_image(ctx, {}, frames[i].camera, opts, render_threads));
          if (render_depth) {
            // expected depth per pixel
            const Camera& cam = frames[i].camera;
            DepthMap depth(cam.width, cam.height);
            std::vector<Ray> rays;
            rays.reserve(1024);
            std::vector<int> ids;
            for (int p = 0; p < cam.width * cam.height; ++p) {
              rays.push_back(pixel_ray(cam, p));
              ids.push_back(p);
              if (rays.size() == 1024 || p + 1 == cam.width * cam.height) {
                auto out = render_world(ctx, rays, opts);
                for (size_t k = 0; k < ids.size(); ++k)
                  depth.depth[ids[k]] = static_cast<float>(out.depth.data()[k]);
                rays.clear();
                ids.clear();
              }
            }
            write_pfm(fs::path(render_out) / (std::string(name) + "_depth.pfm"), depth);
          }
        }
        std::cout << "wrote renders to " << render_out << "\n";
        return 0;
      });
    }

    if (eval_cmd->parsed()) {
      DatasetManifest manifest = read_dataset(eval_dataset);
      const std::string split = eval_split == "all" ? "" : eval_split;
      const auto rows = evaluate_predictions(manifest, eval_pred, split);
      write_eval_csv(eval_out, rows);
      std::cout << "wrote " << rows.size() << " rows to " << eval_out << "\n";
      return 0;
    }

    if (ablate_cmd->parsed()) {
      TrainingConfig cfg = ablation_config();
      apply_config_overrides(cfg, ablate_overrides);
      if (const char* env_seed = std::getenv("LANE_SEED")) cfg.seed = std::stoull(env_seed);
      std::vector<AblationRow> rows;
      std::string key;
      if (ablate_which == "rays") {
        rows = ablate_secondary_rays(ablate_work, {18, 24, 36, 54, 72, 144}, cfg);
        key = "num_rays";
      } else if (ablate_which == "instances") {
        rows = ablate_instance_count(ablate_work, cfg);
        key = "num_instances";
      } else if (ablate_which == "variants") {
        rows = ablate_shading_variants(ablate_work, cfg);
        key = "architecture";
      } else if (ablate_which == "view-dep") {
        rows = ablate_view_dependence(ablate_work, cfg);
        key = "model";
      } else {
        throw ContractError("ablate: unknown sweep '" + ablate_which +
                            "' (rays | instances | variants | view-dep)");
      }
      write_ablation_csv(ablate_out, key, rows);
      std::cout << "wrote " << rows.size() << " rows to " << ablate_out << "\n";
      return 0;
    }
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
