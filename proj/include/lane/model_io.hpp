#pragma once

#include <json.hpp>

#include "lane/config.hpp"
#include "lane/dataio.hpp"
#include "lane/fields.hpp"

// Checkpoint metadata ("extra") carries the architecture and id lists, so a
// model can be rebuilt from the file alone; parameter order is by blob name.

namespace lane {

namespace model_io_detail {

inline nlohmann::json bounds_to_json(const Eigen::AlignedBox3d& b) {
  return nlohmann::json{{"min", {b.min().x(), b.min().y(), b.min().z()}},
                        {"max", {b.max().x(), b.max().y(), b.max().z()}}};
}

inline Eigen::AlignedBox3d bounds_from_json(const nlohmann::json& j) {
  const auto& lo = j.at("min");
  const auto& hi = j.at("max");
  return Eigen::AlignedBox3d(
      Eigen::Vector3d(lo[0].get<double>(), lo[1].get<double>(), lo[2].get<double>()),
      Eigen::Vector3d(hi[0].get<double>(), hi[1].get<double>(), hi[2].get<double>()));
}

inline nlohmann::json parse_extra(const Checkpoint& ckpt, const char* kind) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ckpt.extra);
  } catch (const nlohmann::json::exception&) {
    LANE_FAIL("checkpoint: missing or malformed model metadata");
  }
  if (j.value("kind", "") != kind)
    LANE_FAIL("checkpoint: expected a '" + std::string(kind) + "' model, found '" +
              j.value("kind", "?") + "'");
  return j;
}

}  // namespace model_io_detail

template <typename T>
Checkpoint world_checkpoint(const WorldModel<T>& m, long step, const std::string& cfg_hash) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.config_hash = cfg_hash;
  nlohmann::json extra;
  extra["kind"] = "world";
  extra["arch"] = nlohmann::json::parse(field_config_to_json(m.cfg));
  extra["conditions"] = m.light_codes.ids();
  extra["bounds"] = model_io_detail::bounds_to_json(m.bounds);
  ckpt.extra = extra.dump();
  append_params(ckpt, m.all_params());
  return ckpt;
}

template <typename T>
WorldModel<T> world_from_checkpoint(const Checkpoint& ckpt) {
  const auto extra = model_io_detail::parse_extra(ckpt, "world");
  const FieldConfig cfg = field_config_from_json(extra.at("arch").dump());
  Rng rng(0);
  WorldModel<T> m = make_world_model<T>(cfg, model_io_detail::bounds_from_json(extra.at("bounds")),
                                        extra.at("conditions").get<std::vector<std::string>>(),
                                        rng);
  auto params = m.all_params();
  load_params(ckpt, params);
  return m;
}

template <typename T>
Checkpoint object_checkpoint(const ObjectModel<T>& m, long step, const std::string& cfg_hash) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.config_hash = cfg_hash;
  nlohmann::json extra;
  extra["kind"] = "object";
  extra["arch"] = nlohmann::json::parse(field_config_to_json(m.cfg));
  extra["instances"] = m.shape_codes.ids();
  ckpt.extra = extra.dump();
  append_params(ckpt, m.all_params());
  return ckpt;
}

template <typename T>
ObjectModel<T> object_from_checkpoint(const Checkpoint& ckpt) {
  const auto extra = model_io_detail::parse_extra(ckpt, "object");
  const FieldConfig cfg = field_config_from_json(extra.at("arch").dump());
  Rng rng(0);
  ObjectModel<T> m =
      make_object_model<T>(cfg, extra.at("instances").get<std::vector<std::string>>(), rng);
  auto params = m.all_params();
  load_params(ckpt, params);
  return m;
}

template <typename T>
Checkpoint shader_checkpoint(const LocalGlobalShader<T>& s, long step,
                             const std::string& cfg_hash) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.config_hash = cfg_hash;
  nlohmann::json extra;
  extra["kind"] = "shader_lg";
  extra["arch"] = nlohmann::json::parse(field_config_to_json(s.cfg));
  extra["envs"] = s.tau.ids();
  ckpt.extra = extra.dump();
  append_params(ckpt, s.all_params());
  return ckpt;
}

template <typename T>
Checkpoint shader_checkpoint(const LightFieldShader<T>& s, long step,
                             const std::string& cfg_hash) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.config_hash = cfg_hash;
  nlohmann::json extra;
  extra["kind"] = "shader_lf";
  extra["arch"] = nlohmann::json::parse(field_config_to_json(s.cfg));
  ckpt.extra = extra.dump();
  append_params(ckpt, s.all_params());
  return ckpt;
}

inline ShaderKind checkpoint_shader_kind(const Checkpoint& ckpt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ckpt.extra);
  } catch (const nlohmann::json::exception&) {
    return ShaderKind::kNone;
  }
  const std::string kind = j.value("kind", "");
  if (kind == "shader_lg") return ShaderKind::kLocalGlobal;
  if (kind == "shader_lf") return ShaderKind::kLightField;
  return ShaderKind::kNone;
}

template <typename T>
LocalGlobalShader<T> lg_shader_from_checkpoint(const Checkpoint& ckpt) {
  const auto extra = model_io_detail::parse_extra(ckpt, "shader_lg");
  const FieldConfig cfg = field_config_from_json(extra.at("arch").dump());
  Rng rng(0);
  LocalGlobalShader<T> s = make_local_global_shader<T>(
      cfg, extra.at("envs").get<std::vector<std::string>>(), rng);
  auto params = s.all_params();
  load_params(ckpt, params);
  return s;
}

template <typename T>
LightFieldShader<T> lf_shader_from_checkpoint(const Checkpoint& ckpt) {
  const auto extra = model_io_detail::parse_extra(ckpt, "shader_lf");
  const FieldConfig cfg = field_config_from_json(extra.at("arch").dump());
  Rng rng(0);
  LightFieldShader<T> s = make_light_field_shader<T>(cfg, rng);
  auto params = s.all_params();
  load_params(ckpt, params);
  return s;
}

}  // namespace lane
