#pragma once

#include <cstdint>
#include <string>

#include "lane/fields.hpp"
#include "lane/scenegen.hpp"

namespace lane {

// Dataset generation knobs (gen-data subcommand).
struct DatasetSpec {
  int num_scenes = 3;
  int frames_per_env = 30;   // per (scene, lighting); placements shared across lighting
  int carfree_frames = 4;    // trailing frames per env rendered without a car
  int image_size = 64;
  double eval_fraction = 0.2;
  bool with_depth = true;
  std::uint64_t seed = 1;
  SceneSpec scene;           // per-scene primitive counts etc.
};

// Training loop configuration; one struct serves every stage.
struct TrainingConfig {
  double lambda_p = 1.0;
  double lambda_mask = 0.5;
  double lambda_depth = 0.1;
  int batch_rays = 128;
  int steps = 3000;
  int world_samples = 48;
  int object_samples = 24;
  int secondary_rays = 24;
  double occupancy_threshold = 0.5;
  double lr = 5e-4;
  double lr_decay = 0.1;        // final lr factor, exponential schedule
  int c2f_window = 1500;        // steps to ramp PE frequencies from 2 to L
  std::uint64_t seed = 1;
  std::string precision = "f32";  // "f32" fast mode | "f64" verification mode
  int threads = 1;
  int checkpoint_every = 1000;
  int log_every = 200;
  int eval_every = 500;
  double target_psnr = 0.0;     // early stop for world training when > 0
  FieldConfig arch;

  void validate() const {
    LANE_CHECK(lambda_p >= 0 && lambda_mask >= 0 && lambda_depth >= 0,
               "config: loss weights must be nonnegative");
    LANE_CHECK(steps > 0, "config: steps must be positive");
    LANE_CHECK(batch_rays > 0, "config: batch_rays must be positive");
    LANE_CHECK(precision == "f32" || precision == "f64",
               "config: precision must be f32 or f64");
    LANE_CHECK(threads >= 1, "config: threads must be at least 1");
  }
};

// Coarse-to-fine schedule: number of active positional-encoding frequencies,
// ramping linearly from 2 to L over the window.
inline int coarse_to_fine(int step, int window, int num_frequencies) {
  if (num_frequencies <= 2 || window <= 0 || step >= window) return num_frequencies;
  const int active = 2 + static_cast<int>((num_frequencies - 2) *
                                          (static_cast<double>(step) / window));
  return std::min(num_frequencies, active);
}

inline double lr_at_step(const TrainingConfig& cfg, long step) {
  if (cfg.lr_decay >= 1.0) return cfg.lr;
  const double frac = std::min(1.0, static_cast<double>(step) / cfg.steps);
  return cfg.lr * std::pow(cfg.lr_decay, frac);
}

// JSON round-trip for config files (CLI --config) and checkpoint metadata.
std::string training_config_to_json(const TrainingConfig& cfg);
TrainingConfig training_config_from_json(const std::string& text);
std::string dataset_spec_to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const std::string& text);
std::string field_config_to_json(const FieldConfig& cfg);
FieldConfig field_config_from_json(const std::string& text);

// Applies "key=value" overrides (dotted keys for nested fields); unknown
// fields are a contract error naming the field.  The plural forms validate
// once after all assignments.
void apply_config_override(TrainingConfig& cfg, const std::string& assignment);
void apply_dataset_override(DatasetSpec& spec, const std::string& assignment);
void apply_config_overrides(TrainingConfig& cfg, const std::vector<std::string>& assignments);
void apply_dataset_overrides(DatasetSpec& spec, const std::vector<std::string>& assignments);

// FNV-1a over the canonical JSON; stamped into checkpoints.
std::string config_hash(const std::string& canonical_json);

}  // namespace lane
