#include "lane/config.hpp"

#include <json.hpp>

namespace lane {

using nlohmann::json;

namespace {

json pos_enc_to_json(const PosEncConfig& p) {
  return json{{"num_frequencies", p.num_frequencies}, {"include_input", p.include_input}};
}

PosEncConfig pos_enc_from_json(const json& j, PosEncConfig dflt) {
  dflt.num_frequencies = j.value("num_frequencies", dflt.num_frequencies);
  dflt.include_input = j.value("include_input", dflt.include_input);
  return dflt;
}

json field_config_to_json_obj(const FieldConfig& c) {
  return json{{"world_width", c.world_width},
              {"world_depth", c.world_depth},
              {"object_width", c.object_width},
              {"object_depth", c.object_depth},
              {"light_width", c.light_width},
              {"light_depth", c.light_depth},
              {"ws_width", c.ws_width},
              {"shader_width", c.shader_width},
              {"attn_key_dim", c.attn_key_dim},
              {"attn_val_dim", c.attn_val_dim},
              {"eta_shape_dim", c.eta_shape_dim},
              {"eta_color_dim", c.eta_color_dim},
              {"tau_dim", c.tau_dim},
              {"f_dim", c.f_dim},
              {"pe_pos", pos_enc_to_json(c.pe_pos)},
              {"pe_shader", pos_enc_to_json(c.pe_shader)},
              {"pe_dir", pos_enc_to_json(c.pe_dir)},
              {"pe_light", pos_enc_to_json(c.pe_light)},
              {"shader_view_dependent", c.shader_view_dependent},
              {"shader_direct_rgb", c.shader_direct_rgb}};
}

FieldConfig field_config_from_json_obj(const json& j) {
  FieldConfig c;
  c.world_width = j.value("world_width", c.world_width);
  c.world_depth = j.value("world_depth", c.world_depth);
  c.object_width = j.value("object_width", c.object_width);
  c.object_depth = j.value("object_depth", c.object_depth);
  c.light_width = j.value("light_width", c.light_width);
  c.light_depth = j.value("light_depth", c.light_depth);
  c.ws_width = j.value("ws_width", c.ws_width);
  c.shader_width = j.value("shader_width", c.shader_width);
  c.attn_key_dim = j.value("attn_key_dim", c.attn_key_dim);
  c.attn_val_dim = j.value("attn_val_dim", c.attn_val_dim);
  c.eta_shape_dim = j.value("eta_shape_dim", c.eta_shape_dim);
  c.eta_color_dim = j.value("eta_color_dim", c.eta_color_dim);
  c.tau_dim = j.value("tau_dim", c.tau_dim);
  c.f_dim = j.value("f_dim", c.f_dim);
  if (j.contains("pe_pos")) c.pe_pos = pos_enc_from_json(j["pe_pos"], c.pe_pos);
  if (j.contains("pe_shader")) c.pe_shader = pos_enc_from_json(j["pe_shader"], c.pe_shader);
  if (j.contains("pe_dir")) c.pe_dir = pos_enc_from_json(j["pe_dir"], c.pe_dir);
  if (j.contains("pe_light")) c.pe_light = pos_enc_from_json(j["pe_light"], c.pe_light);
  c.shader_view_dependent = j.value("shader_view_dependent", c.shader_view_dependent);
  c.shader_direct_rgb = j.value("shader_direct_rgb", c.shader_direct_rgb);
  return c;
}

json training_config_to_json_obj(const TrainingConfig& c) {
  return json{{"lambda_p", c.lambda_p},
              {"lambda_mask", c.lambda_mask},
              {"lambda_depth", c.lambda_depth},
              {"batch_rays", c.batch_rays},
              {"steps", c.steps},
              {"world_samples", c.world_samples},
              {"object_samples", c.object_samples},
              {"secondary_rays", c.secondary_rays},
              {"occupancy_threshold", c.occupancy_threshold},
              {"lr", c.lr},
              {"lr_decay", c.lr_decay},
              {"c2f_window", c.c2f_window},
              {"seed", c.seed},
              {"precision", c.precision},
              {"threads", c.threads},
              {"checkpoint_every", c.checkpoint_every},
              {"log_every", c.log_every},
              {"eval_every", c.eval_every},
              {"target_psnr", c.target_psnr},
              {"arch", field_config_to_json_obj(c.arch)}};
}

json scene_spec_to_json_obj(const SceneSpec& s) {
  return json{{"num_boxes", s.num_boxes},
              {"num_spheres", s.num_spheres},
              {"num_instances", s.num_instances},
              {"bounds_half", s.bounds_half},
              {"road_half_width", s.road_half_width},
              {"min_box_half", s.min_box_half},
              {"max_box_half", s.max_box_half},
              {"tall_occluder_height", s.tall_occluder_height}};
}

SceneSpec scene_spec_from_json_obj(const json& j) {
  SceneSpec s;
  s.num_boxes = j.value("num_boxes", s.num_boxes);
  s.num_spheres = j.value("num_spheres", s.num_spheres);
  s.num_instances = j.value("num_instances", s.num_instances);
  s.bounds_half = j.value("bounds_half", s.bounds_half);
  s.road_half_width = j.value("road_half_width", s.road_half_width);
  s.min_box_half = j.value("min_box_half", s.min_box_half);
  s.max_box_half = j.value("max_box_half", s.max_box_half);
  s.tall_occluder_height = j.value("tall_occluder_height", s.tall_occluder_height);
  return s;
}

json parse_or_throw(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ContractError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

}  // namespace

std::string field_config_to_json(const FieldConfig& cfg) {
  return field_config_to_json_obj(cfg).dump();
}

FieldConfig field_config_from_json(const std::string& text) {
  return field_config_from_json_obj(parse_or_throw(text, "field config"));
}

std::string training_config_to_json(const TrainingConfig& cfg) {
  return training_config_to_json_obj(cfg).dump();
}

TrainingConfig training_config_from_json(const std::string& text) {
  const json j = parse_or_throw(text, "training config");
  TrainingConfig c;
  c.lambda_p = j.value("lambda_p", c.lambda_p);
  c.lambda_mask = j.value("lambda_mask", c.lambda_mask);
  c.lambda_depth = j.value("lambda_depth", c.lambda_depth);
  c.batch_rays = j.value("batch_rays", c.batch_rays);
  c.steps = j.value("steps", c.steps);
  c.world_samples = j.value("world_samples", c.world_samples);
  c.object_samples = j.value("object_samples", c.object_samples);
  c.secondary_rays = j.value("secondary_rays", c.secondary_rays);
  c.occupancy_threshold = j.value("occupancy_threshold", c.occupancy_threshold);
  c.lr = j.value("lr", c.lr);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.c2f_window = j.value("c2f_window", c.c2f_window);
  c.seed = j.value("seed", c.seed);
  c.precision = j.value("precision", c.precision);
  c.threads = j.value("threads", c.threads);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_every = j.value("log_every", c.log_every);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.target_psnr = j.value("target_psnr", c.target_psnr);
  if (j.contains("arch")) c.arch = field_config_from_json_obj(j["arch"]);
  c.validate();
  return c;
}

std::string dataset_spec_to_json(const DatasetSpec& spec) {
  json j{{"num_scenes", spec.num_scenes},
         {"frames_per_env", spec.frames_per_env},
         {"carfree_frames", spec.carfree_frames},
         {"image_size", spec.image_size},
         {"eval_fraction", spec.eval_fraction},
         {"with_depth", spec.with_depth},
         {"seed", spec.seed},
         {"scene", scene_spec_to_json_obj(spec.scene)}};
  return j.dump();
}

DatasetSpec dataset_spec_from_json(const std::string& text) {
  const json j = parse_or_throw(text, "dataset spec");
  DatasetSpec s;
  s.num_scenes = j.value("num_scenes", s.num_scenes);
  s.frames_per_env = j.value("frames_per_env", s.frames_per_env);
  s.carfree_frames = j.value("carfree_frames", s.carfree_frames);
  s.image_size = j.value("image_size", s.image_size);
  s.eval_fraction = j.value("eval_fraction", s.eval_fraction);
  s.with_depth = j.value("with_depth", s.with_depth);
  s.seed = j.value("seed", s.seed);
  if (j.contains("scene")) s.scene = scene_spec_from_json_obj(j["scene"]);
  LANE_CHECK(s.num_scenes >= 1, "dataset spec: need at least one scene");
  LANE_CHECK(s.frames_per_env > s.carfree_frames, "dataset spec: too few frames per env");
  LANE_CHECK(s.image_size >= 16, "dataset spec: image size too small");
  s.scene.validate();
  return s;
}

namespace {

// Merges one dotted "key=value" pair into a json object tree.  Only keys
// already present are accepted, so a typo exits with the field named.
void merge_override(json& root, const std::string& assignment, const char* what) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ContractError(std::string(what) + ": override must be key=value, got '" +
                        assignment + "'");
  std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &root;
  size_t start = 0;
  while (true) {
    const size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ContractError(std::string(what) + ": empty key in '" + key + "'");
    if (!node->contains(part))
      throw ContractError(std::string(what) + ": unknown field '" + key + "'");
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::exception&) {
        parsed = value;  // plain string
      }
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace

void apply_config_override(TrainingConfig& cfg, const std::string& assignment) {
  json j = json::parse(training_config_to_json(cfg));
  merge_override(j, assignment, "config override");
  cfg = training_config_from_json(j.dump());
}

void apply_dataset_override(DatasetSpec& spec, const std::string& assignment) {
  json j = json::parse(dataset_spec_to_json(spec));
  merge_override(j, assignment, "dataset override");
  spec = dataset_spec_from_json(j.dump());
}

void apply_config_overrides(TrainingConfig& cfg, const std::vector<std::string>& assignments) {
  json j = json::parse(training_config_to_json(cfg));
  for (const auto& a : assignments) merge_override(j, a, "config override");
  cfg = training_config_from_json(j.dump());
}

void apply_dataset_overrides(DatasetSpec& spec, const std::vector<std::string>& assignments) {
  json j = json::parse(dataset_spec_to_json(spec));
  for (const auto& a : assignments) merge_override(j, a, "dataset override");
  spec = dataset_spec_from_json(j.dump());
}

std::string config_hash(const std::string& canonical_json) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical_json) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lane
