#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lane/encoding.hpp"
#include "lane/rendering.hpp"

namespace lane {

// Architecture knobs for the five networks.  Widths are desk-scale
// configurable; layer counts follow the eight-layer trunks with four-layer
// shading branches.
struct FieldConfig {
  int world_width = 256;
  int world_depth = 8;
  int object_width = 128;
  int object_depth = 8;
  int light_width = 96;
  int light_depth = 8;
  int ws_width = 48;       // four-layer multiplier branch
  int shader_width = 128;  // four-layer shader MLPs
  int attn_key_dim = 64;
  int attn_val_dim = 64;
  int eta_shape_dim = 16;
  int eta_color_dim = 16;
  int tau_dim = 16;
  int f_dim = kLightingLatentDim;
  PosEncConfig pe_pos{10, true};     // field positions
  PosEncConfig pe_shader{4, true};   // shader positions and quaternions
  PosEncConfig pe_dir{4, true};      // secondary directions (attention keys)
  PosEncConfig pe_light{0, true};    // Plucker inputs; low-frequency works best
  bool shader_view_dependent = false;
  bool shader_direct_rgb = false;  // ablation: regress color instead of a factor
};

// Isotropic normalization used for light-field ray origins (anisotropic
// scaling would break Plucker sliding invariance).
struct LightFrame {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;

  static LightFrame from_bounds(const Eigen::AlignedBox3d& b) {
    return {b.center(), 0.5 * b.diagonal().norm()};
  }
};

inline Eigen::Vector3d normalize_position(const Eigen::AlignedBox3d& bounds,
                                          const Eigen::Vector3d& x) {
  Eigen::Vector3d t = (x - bounds.min()).cwiseQuotient(bounds.diagonal());
  return 2.0 * t - Eigen::Vector3d::Ones();
}

template <typename T>
struct FieldSample {
  ad::Tensor<T> sigma;   // [m]
  ad::Tensor<T> color;   // [m,3]
};

// ---- world model: lighting-agnostic field + per-condition multiplier +
// light field network, sharing the lighting codes f ----

template <typename T>
struct WorldModel {
  FieldConfig cfg;
  Eigen::AlignedBox3d bounds;
  ad::Mlp<T> trunk;
  ad::Linear<T> sigma_head;
  ad::Linear<T> albedo_head;
  ad::Mlp<T> ws;            // f -> 3 multiplier, softplus output
  ad::Tensor<T> background;  // pre-sigmoid sky color
  ad::Mlp<T> light_mlp;      // plucker (+ f) -> LDR radiance
  LatentTable<T> light_codes;

  void collect_geometry_params(ad::ParamSet<T>& out) const {
    trunk.collect_params(out);
    out.add(sigma_head.weight);
    out.add(sigma_head.bias);
    out.add(albedo_head.weight);
    out.add(albedo_head.bias);
    out.add(background);
  }
  void collect_ws_params(ad::ParamSet<T>& out) const { ws.collect_params(out); }
  void collect_light_params(ad::ParamSet<T>& out) const { light_mlp.collect_params(out); }
  void collect_code_params(ad::ParamSet<T>& out) const { light_codes.collect_params(out); }
  ad::ParamSet<T> all_params() const {
    ad::ParamSet<T> out;
    collect_geometry_params(out);
    collect_ws_params(out);
    collect_light_params(out);
    collect_code_params(out);
    return out;
  }
};

template <typename T>
WorldModel<T> make_world_model(const FieldConfig& cfg, const Eigen::AlignedBox3d& bounds,
                               const std::vector<std::string>& condition_ids, Rng& rng) {
  WorldModel<T> m;
  m.cfg = cfg;
  m.bounds = bounds;
  std::vector<int> widths = {cfg.pe_pos.out_dim(3)};
  for (int i = 0; i < cfg.world_depth; ++i) widths.push_back(cfg.world_width);
  m.trunk = ad::make_mlp<T>(widths, ad::Activation::kRelu, rng, "world.trunk");
  m.trunk.hidden = ad::Activation::kRelu;
  m.sigma_head = ad::make_linear<T>(cfg.world_width, 1, rng, "world.sigma");
  m.albedo_head = ad::make_linear<T>(cfg.world_width, 3, rng, "world.albedo");
  m.ws = ad::make_mlp<T>({cfg.f_dim, cfg.ws_width, cfg.ws_width, cfg.ws_width, 3},
                         ad::Activation::kSoftplus, rng, "world.ws");
  m.background = ad::Tensor<T>::param({3}, {T(0), T(0), T(0)}, "world.background");
  std::vector<int> lw = {6 * (2 * cfg.pe_light.num_frequencies + 1) + cfg.f_dim};
  for (int i = 0; i < cfg.light_depth - 1; ++i) lw.push_back(cfg.light_width);
  lw.push_back(3);
  m.light_mlp = ad::make_mlp<T>(lw, ad::Activation::kSigmoid, rng, "light.mlp");
  m.light_codes = LatentTable<T>(cfg.f_dim, "light.code");
  for (const auto& id : condition_ids) m.light_codes.create(id, rng);
  return m;
}

// sigma >= 0 via softplus, albedo in [0,1] via sigmoid.  positions are raw
// world coordinates, flattened [m*3]; they are normalized and encoded here.
template <typename T>
FieldSample<T> world_eval(const WorldModel<T>& m, const std::vector<double>& positions,
                          int active_freqs = -1) {
  const int n = static_cast<int>(positions.size()) / 3;
  std::vector<double> norm(positions.size());
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d x(positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]);
    Eigen::Vector3d xn = normalize_position(m.bounds, x);
    for (int k = 0; k < 3; ++k) norm[3 * i + k] = xn[k];
  }
  ad::Tensor<T> enc = encode_batch<T>(norm, 3, m.cfg.pe_pos, active_freqs);
  ad::Tensor<T> feat = m.trunk.forward(enc);
  FieldSample<T> out;
  out.sigma = ad::reshape(
      ad::softplus(ad::add_row_bias(ad::matmul(feat, m.sigma_head.weight), m.sigma_head.bias)),
      {n});
  out.color = ad::sigmoid(
      ad::add_row_bias(ad::matmul(feat, m.albedo_head.weight), m.albedo_head.bias));
  return out;
}

// Per-condition multiplicative factor shared by every spatial sample.
template <typename T>
ad::Tensor<T> world_multiplier(const WorldModel<T>& m, const ad::Tensor<T>& f) {
  return m.ws.forward_vec(f);
}

template <typename T>
ad::Tensor<T> world_background_color(const WorldModel<T>& m) {
  return ad::sigmoid(m.background);
}

// c_tilde = c * N_ws(f), broadcast over rows.
template <typename T>
ad::Tensor<T> world_shade(const ad::Tensor<T>& albedo, const ad::Tensor<T>& multiplier) {
  return ad::mul(albedo, ad::repeat_row(multiplier, albedo.shape()[0]));
}

// Light field: rays (origin, direction) -> radiance, conditioned on f.  The
// ray is reduced to Plucker coordinates in an isotropically normalized
// frame, so the output depends on the line only.
template <typename T>
ad::Tensor<T> light_eval(const WorldModel<T>& m, const std::vector<Eigen::Vector3d>& origins,
                         const std::vector<Eigen::Vector3d>& dirs, const ad::Tensor<T>& f) {
  LANE_CHECK(origins.size() == dirs.size(), "light_eval: origin/direction count mismatch");
  const int n = static_cast<int>(origins.size());
  const LightFrame frame = LightFrame::from_bounds(m.bounds);
  std::vector<double> rows(static_cast<size_t>(n) * 6);
  for (int i = 0; i < n; ++i) {
    LANE_CHECK(dirs[i].norm() > 1e-12, "light_eval: zero direction");
    const Eigen::Vector3d d = dirs[i].normalized();
    const Eigen::Vector3d o = (origins[i] - frame.center) / frame.radius;
    const auto pl = plucker(o, d);
    for (int k = 0; k < 6; ++k) rows[static_cast<size_t>(i) * 6 + k] = pl[k];
  }
  ad::Tensor<T> enc = encode_batch<T>(rows, 6, m.cfg.pe_light);
  ad::Tensor<T> input = ad::concat_cols(enc, ad::repeat_row(f, n));
  return m.light_mlp.forward(input);
}

// ---- object model: shared field with per-instance shape/color codes ----

template <typename T>
struct ObjectModel {
  FieldConfig cfg;
  ad::Mlp<T> trunk;       // [pe(x_obj), eta_shape] -> features
  ad::Linear<T> sigma_head;
  ad::Mlp<T> color_mlp;   // [features, eta_color] -> rgb
  LatentTable<T> shape_codes;
  LatentTable<T> color_codes;

  void collect_params(ad::ParamSet<T>& out) const {
    trunk.collect_params(out);
    out.add(sigma_head.weight);
    out.add(sigma_head.bias);
    color_mlp.collect_params(out);
    shape_codes.collect_params(out);
    color_codes.collect_params(out);
  }
  ad::ParamSet<T> all_params() const {
    ad::ParamSet<T> out;
    collect_params(out);
    return out;
  }
};

template <typename T>
ObjectModel<T> make_object_model(const FieldConfig& cfg,
                                 const std::vector<std::string>& instance_ids, Rng& rng) {
  ObjectModel<T> m;
  m.cfg = cfg;
  std::vector<int> widths = {cfg.pe_pos.out_dim(3) + cfg.eta_shape_dim};
  for (int i = 0; i < cfg.object_depth; ++i) widths.push_back(cfg.object_width);
  m.trunk = ad::make_mlp<T>(widths, ad::Activation::kRelu, rng, "object.trunk");
  m.sigma_head = ad::make_linear<T>(cfg.object_width, 1, rng, "object.sigma");
  m.color_mlp = ad::make_mlp<T>({cfg.object_width + cfg.eta_color_dim, cfg.object_width / 2, 3},
                                ad::Activation::kSigmoid, rng, "object.color");
  m.shape_codes = LatentTable<T>(cfg.eta_shape_dim, "object.eta_shape");
  m.color_codes = LatentTable<T>(cfg.eta_color_dim, "object.eta_color");
  for (const auto& id : instance_ids) {
    m.shape_codes.create(id, rng);
    m.color_codes.create(id, rng);
  }
  return m;
}

// positions are normalized object coordinates in [-1,1]^3, flattened [m*3].
template <typename T>
FieldSample<T> object_eval(const ObjectModel<T>& m, const std::vector<double>& positions,
                           const std::string& instance, int active_freqs = -1) {
  const int n = static_cast<int>(positions.size()) / 3;
  ad::Tensor<T> enc = encode_batch<T>(positions, 3, m.cfg.pe_pos, active_freqs);
  ad::Tensor<T> input =
      ad::concat_cols(enc, ad::repeat_row(m.shape_codes.at(instance), n));
  ad::Tensor<T> feat = m.trunk.forward(input);
  FieldSample<T> out;
  out.sigma = ad::reshape(
      ad::softplus(ad::add_row_bias(ad::matmul(feat, m.sigma_head.weight), m.sigma_head.bias)),
      {n});
  out.color = m.color_mlp.forward(
      ad::concat_cols(feat, ad::repeat_row(m.color_codes.at(instance), n)));
  return out;
}

// ---- known-scene shader: local+global coordinates and a scene code ----

template <typename T>
struct LocalGlobalShader {
  FieldConfig cfg;
  ad::Mlp<T> mlp;
  LatentTable<T> tau;  // per (scene, lighting) environment

  void collect_params(ad::ParamSet<T>& out) const {
    mlp.collect_params(out);
    tau.collect_params(out);
  }
  ad::ParamSet<T> all_params() const {
    ad::ParamSet<T> out;
    collect_params(out);
    return out;
  }
};

template <typename T>
LocalGlobalShader<T> make_local_global_shader(const FieldConfig& cfg,
                                              const std::vector<std::string>& env_ids,
                                              Rng& rng) {
  LocalGlobalShader<T> s;
  s.cfg = cfg;
  const int in = cfg.pe_shader.out_dim(3) + cfg.pe_shader.out_dim(3) +
                 cfg.pe_shader.out_dim(4) + cfg.tau_dim;
  s.mlp = ad::make_mlp<T>({in, cfg.shader_width, cfg.shader_width, cfg.shader_width, 3},
                          cfg.shader_direct_rgb ? ad::Activation::kSigmoid
                                                : ad::Activation::kTwoSigmoid,
                          rng, "shader_lg.mlp");
  s.tau = LatentTable<T>(cfg.tau_dim, "shader_lg.tau");
  for (const auto& id : env_ids) s.tau.create(id, rng);
  return s;
}

// s_car for a batch of samples: x_object normalized object coordinates,
// x_scene normalized world coordinates, one pose quaternion per batch.
template <typename T>
ad::Tensor<T> shade_local_global(const LocalGlobalShader<T>& s,
                                 const std::vector<double>& x_object,
                                 const std::vector<double>& x_scene,
                                 const Eigen::Quaterniond& rotation, const std::string& env) {
  const int n = static_cast<int>(x_object.size()) / 3;
  Eigen::Quaterniond q = rotation.normalized();
  if (q.w() < 0) q.coeffs() *= -1;  // canonical sign
  std::vector<double> quat = {q.w(), q.x(), q.y(), q.z()};
  std::vector<double> quat_rows;
  quat_rows.reserve(4 * n);
  for (int i = 0; i < n; ++i) quat_rows.insert(quat_rows.end(), quat.begin(), quat.end());

  ad::Tensor<T> input = ad::concat_cols(
      ad::concat_cols(encode_batch<T>(x_object, 3, s.cfg.pe_shader),
                      encode_batch<T>(x_scene, 3, s.cfg.pe_shader)),
      ad::concat_cols(encode_batch<T>(quat_rows, 4, s.cfg.pe_shader),
                      ad::repeat_row(s.tau.at(env), n)));
  return s.mlp.forward(input);
}

// ---- unknown-scene shader: attention over secondary-ray light samples ----

template <typename T>
struct LightFieldShader {
  FieldConfig cfg;
  ad::Tensor<T> w_query;  // [pe(p_obj), dk]
  ad::Tensor<T> w_key;    // [pe(d_obj)+3, dk]
  ad::Tensor<T> w_value;  // [pe(d_obj)+3, dv]
  ad::Mlp<T> mlp;         // [f_l, pe(p_obj), eta (, pe(view))] -> 3

  void collect_params(ad::ParamSet<T>& out) const {
    out.add(w_query);
    out.add(w_key);
    out.add(w_value);
    mlp.collect_params(out);
  }
  ad::ParamSet<T> all_params() const {
    ad::ParamSet<T> out;
    collect_params(out);
    return out;
  }
};

template <typename T>
LightFieldShader<T> make_light_field_shader(const FieldConfig& cfg, Rng& rng) {
  LightFieldShader<T> s;
  s.cfg = cfg;
  const int dq_in = cfg.pe_shader.out_dim(3);
  const int dk_in = cfg.pe_dir.out_dim(3) + 3;
  auto init = [&](int in, int out, const std::string& name) {
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<T> w(static_cast<size_t>(in) * out);
    for (auto& v : w) v = static_cast<T>(dist(rng));
    return ad::Tensor<T>::param({in, out}, std::move(w), name);
  };
  s.w_query = init(dq_in, cfg.attn_key_dim, "shader_lf.Wq");
  s.w_key = init(dk_in, cfg.attn_key_dim, "shader_lf.Wk");
  s.w_value = init(dk_in, cfg.attn_val_dim, "shader_lf.Wv");
  int mlp_in = cfg.attn_val_dim + cfg.pe_shader.out_dim(3) + cfg.eta_shape_dim +
               cfg.eta_color_dim;
  if (cfg.shader_view_dependent) mlp_in += cfg.pe_shader.out_dim(3);
  s.mlp = ad::make_mlp<T>({mlp_in, cfg.shader_width, cfg.shader_width, cfg.shader_width, 3},
                          cfg.shader_direct_rgb ? ad::Activation::kSigmoid
                                                : ad::Activation::kTwoSigmoid,
                          rng, "shader_lf.mlp");
  return s;
}

template <typename T>
struct AttentionResult {
  ad::Tensor<T> pooled;   // [P, dv]
  ad::Tensor<T> weights;  // [P, S], rows sum to 1
};

// Queries are encoded object-frame points; keys and values are
// [pe(d_obj), l_d] per (point, direction).  light [P*S, 3] is laid out
// point-major.
template <typename T>
AttentionResult<T> attention_pool(const LightFieldShader<T>& s,
                                  const std::vector<double>& p_obj,
                                  const std::vector<Eigen::Vector3d>& dirs_obj,
                                  const ad::Tensor<T>& light) {
  const int P = static_cast<int>(p_obj.size()) / 3;
  const int S = static_cast<int>(dirs_obj.size());
  LANE_CHECK(P >= 1, "attention_pool: need at least one query point");
  LANE_CHECK(S >= 1, "attention_pool: need at least one direction sample");
  LANE_CHECK(light.shape().size() == 2 && light.shape()[0] == P * S && light.shape()[1] == 3,
             "attention_pool: light must be [P*S, 3]");

  ad::Tensor<T> queries =
      ad::matmul(encode_batch<T>(p_obj, 3, s.cfg.pe_shader), s.w_query);  // [P, dk]

  std::vector<double> dir_rows;
  dir_rows.reserve(static_cast<size_t>(P) * S * 3);
  for (int i = 0; i < P; ++i)
    for (const auto& d : dirs_obj) {
      dir_rows.push_back(d.x());
      dir_rows.push_back(d.y());
      dir_rows.push_back(d.z());
    }
  ad::Tensor<T> keys_in =
      ad::concat_cols(encode_batch<T>(dir_rows, 3, s.cfg.pe_dir), light);  // [P*S, dk_in]
  ad::Tensor<T> keys = ad::matmul(keys_in, s.w_key);
  ad::Tensor<T> values = ad::matmul(keys_in, s.w_value);

  std::vector<int> tile(static_cast<size_t>(P) * S);
  for (int i = 0; i < P; ++i)
    for (int k = 0; k < S; ++k) tile[static_cast<size_t>(i) * S + k] = i;
  ad::Tensor<T> q_rep = ad::gather_rows(queries, tile);

  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(s.cfg.attn_key_dim)));
  ad::Tensor<T> scores =
      ad::reshape(ad::affine(ad::rowwise_dot(q_rep, keys), scale, T(0)), {P, S});

  AttentionResult<T> out;
  out.weights = ad::softmax_rows(scores);

  std::vector<int> offsets(P + 1);
  for (int i = 0; i <= P; ++i) offsets[i] = i * S;
  out.pooled = ad::segment_sum_rows(
      ad::scale_rows(values, ad::reshape(out.weights, {P * S})), offsets);
  return out;
}

// Diagnostic: softmax-weighted mean of the sampled directions, normalized;
// a near-zero resultant is flagged instead of normalized.
struct AttendedDirection {
  Eigen::Vector3d dir = Eigen::Vector3d::Zero();
  bool degenerate = false;
};

inline AttendedDirection attended_direction(const std::vector<double>& weights,
                                            const std::vector<Eigen::Vector3d>& dirs) {
  LANE_CHECK(weights.size() == dirs.size(), "attended_direction: size mismatch");
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < dirs.size(); ++i) acc += weights[i] * dirs[i];
  AttendedDirection out;
  if (acc.norm() < 1e-9) {
    out.degenerate = true;
    return out;
  }
  out.dir = acc.normalized();
  return out;
}

// Shading head: pooled lighting feature + object-frame point + instance
// codes (+ view direction when enabled).
template <typename T>
ad::Tensor<T> shade_light_field(const LightFieldShader<T>& s, const ad::Tensor<T>& pooled,
                                const std::vector<double>& p_obj,
                                const ad::Tensor<T>& eta_shape, const ad::Tensor<T>& eta_color,
                                const std::vector<double>* view_obj = nullptr) {
  const int P = static_cast<int>(p_obj.size()) / 3;
  ad::Tensor<T> input = ad::concat_cols(pooled, encode_batch<T>(p_obj, 3, s.cfg.pe_shader));
  input = ad::concat_cols(input, ad::repeat_row(eta_shape, P));
  input = ad::concat_cols(input, ad::repeat_row(eta_color, P));
  if (s.cfg.shader_view_dependent) {
    LANE_CHECK(view_obj != nullptr && static_cast<int>(view_obj->size()) == 3 * P,
               "shade_light_field: view directions required in view-dependent mode");
    input = ad::concat_cols(input, encode_batch<T>(*view_obj, 3, s.cfg.pe_shader));
  }
  return s.mlp.forward(input);
}

// ---- frozen copies ----
// Same values, requires_grad off: evaluation records no graph through them.
// Used to hold earlier training stages fixed while later ones train.

template <typename T>
ad::Tensor<T> freeze_tensor(const ad::Tensor<T>& t) {
  return ad::Tensor<T>::constant(t.shape(), t.data());
}

template <typename T>
ad::Linear<T> freeze(const ad::Linear<T>& l) {
  return {freeze_tensor(l.weight), freeze_tensor(l.bias)};
}

template <typename T>
ad::Mlp<T> freeze(const ad::Mlp<T>& m) {
  ad::Mlp<T> out;
  out.hidden = m.hidden;
  out.output = m.output;
  for (const auto& l : m.layers) out.layers.push_back(freeze(l));
  return out;
}

template <typename T>
WorldModel<T> freeze_world(const WorldModel<T>& m) {
  WorldModel<T> out;
  out.cfg = m.cfg;
  out.bounds = m.bounds;
  out.trunk = freeze(m.trunk);
  out.sigma_head = freeze(m.sigma_head);
  out.albedo_head = freeze(m.albedo_head);
  out.ws = freeze(m.ws);
  out.background = freeze_tensor(m.background);
  out.light_mlp = freeze(m.light_mlp);
  out.light_codes = m.light_codes.frozen_copy();
  return out;
}

template <typename T>
ObjectModel<T> freeze_object(const ObjectModel<T>& m) {
  ObjectModel<T> out;
  out.cfg = m.cfg;
  out.trunk = freeze(m.trunk);
  out.sigma_head = freeze(m.sigma_head);
  out.color_mlp = freeze(m.color_mlp);
  out.shape_codes = m.shape_codes.frozen_copy();
  out.color_codes = m.color_codes.frozen_copy();
  return out;
}

template <typename T>
LocalGlobalShader<T> freeze_shader(const LocalGlobalShader<T>& s) {
  LocalGlobalShader<T> out;
  out.cfg = s.cfg;
  out.mlp = freeze(s.mlp);
  out.tau = s.tau.frozen_copy();
  return out;
}

template <typename T>
LightFieldShader<T> freeze_shader(const LightFieldShader<T>& s) {
  LightFieldShader<T> out;
  out.cfg = s.cfg;
  out.w_query = freeze_tensor(s.w_query);
  out.w_key = freeze_tensor(s.w_key);
  out.w_value = freeze_tensor(s.w_value);
  out.mlp = freeze(s.mlp);
  return out;
}

}  // namespace lane
