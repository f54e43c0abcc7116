#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lane/image.hpp"
#include "lane/optim.hpp"
#include "lane/rendering.hpp"
#include "lane/scenegen.hpp"

namespace lane {

// ---- image codecs ----
// Binary PPM (P6, 8-bit) for color and masks; PFM (Pf, float32 little-endian)
// for depth.  Parse errors report the byte offset.

std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_pfm(const DepthMap& depth);
DepthMap decode_pfm(const std::vector<std::uint8_t>& bytes);

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);

Image mask_to_image(const Mask& mask);
Mask image_to_mask(const Image& img);

// ---- dataset manifest ----

struct SceneMeta {
  std::string id;
  std::uint64_t seed = 0;
  Eigen::Vector3d sky = Eigen::Vector3d::Zero();
  Eigen::AlignedBox3d bounds;
  SceneSpec spec;
};

struct InstanceMeta {
  std::string id;
  Eigen::Vector3d albedo;
  Eigen::Vector3d half_extents;
};

struct FrameObject {
  std::string instance;
  ObjectPose pose;
  std::string mask_path;
};

struct FrameRecord {
  std::string id;
  std::string scene;
  std::string lighting;
  std::string split;  // "train" or "eval"
  std::string image_path;
  std::string depth_path;  // optional, empty when absent
  Camera camera;
  std::vector<FrameObject> objects;
};

struct DatasetManifest {
  int format_version = 1;
  std::filesystem::path root;
  std::vector<SceneMeta> scenes;
  std::vector<LightingCondition> lighting;
  std::vector<InstanceMeta> instances;
  std::vector<FrameRecord> frames;

  const SceneMeta& scene(const std::string& id) const;
  const LightingCondition& condition(const std::string& id) const;
  const InstanceMeta& instance(const std::string& id) const;
  int lighting_index(const std::string& id) const;
};

void write_manifest(const DatasetManifest& manifest);

// Reads manifest.json and validates referential integrity: declared ids,
// existing files, and camera/image dimension agreement.
DatasetManifest read_dataset(const std::filesystem::path& dir);

Image load_frame_image(const DatasetManifest& m, const FrameRecord& f);
std::optional<DepthMap> load_frame_depth(const DatasetManifest& m, const FrameRecord& f);
Mask load_object_mask(const DatasetManifest& m, const FrameObject& obj);

// Placements file for the compose/render subcommands: frames of cameras and
// object poses, same pose schema as the manifest.
struct PlacementFrame {
  Camera camera;
  std::vector<std::pair<std::string, ObjectPose>> objects;  // (instance id, pose)
};

std::vector<PlacementFrame> read_placements(const std::filesystem::path& path);
void write_placements(const std::filesystem::path& path,
                      const std::vector<PlacementFrame>& frames);

// ---- checkpoints ----
// Layout: 8-byte magic "LANE0001", u64 little-endian index length, JSON
// index, raw little-endian blobs.

struct TensorBlob {
  std::string name;
  std::string dtype;  // "f32" | "f64"
  std::vector<int> shape;
  std::vector<std::uint8_t> bytes;
};

struct Checkpoint {
  long step = 0;
  std::string config_hash;
  std::string extra;  // model metadata (JSON text), e.g. architecture and id lists
  std::vector<TensorBlob> tensors;

  const TensorBlob* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else return "f64";
}

template <typename T>
TensorBlob blob_from_tensor(const ad::Tensor<T>& t) {
  TensorBlob b;
  b.name = t.name();
  b.dtype = dtype_name<T>();
  b.shape = t.shape();
  b.bytes.resize(t.data().size() * sizeof(T));
  std::memcpy(b.bytes.data(), t.data().data(), b.bytes.size());
  return b;
}

template <typename T>
void append_params(Checkpoint& ckpt, const ad::ParamSet<T>& params) {
  for (const auto& p : params) ckpt.tensors.push_back(blob_from_tensor(p));
}

// Loads blobs into an existing parameter set by name.  All-or-nothing: any
// missing name or shape mismatch throws before any parameter is touched;
// f32 <-> f64 conversion is applied when the stored dtype differs.
template <typename T>
void load_params(const Checkpoint& ckpt, ad::ParamSet<T>& params) {
  std::vector<std::vector<T>> staged(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const TensorBlob* b = ckpt.find(p.name());
    if (!b) LANE_FAIL("checkpoint: missing tensor '" + p.name() + "'");
    if (b->shape != p.shape())
      LANE_FAIL("checkpoint: shape mismatch for '" + p.name() + "': stored " +
                shape_str(b->shape) + ", model " + shape_str(p.shape()));
    staged[i].resize(p.data().size());
    if (b->dtype == dtype_name<T>()) {
      std::memcpy(staged[i].data(), b->bytes.data(), b->bytes.size());
    } else if (b->dtype == "f32") {
      const float* src = reinterpret_cast<const float*>(b->bytes.data());
      for (size_t j = 0; j < staged[i].size(); ++j) staged[i][j] = static_cast<T>(src[j]);
    } else if (b->dtype == "f64") {
      const double* src = reinterpret_cast<const double*>(b->bytes.data());
      for (size_t j = 0; j < staged[i].size(); ++j) staged[i][j] = static_cast<T>(src[j]);
    } else {
      LANE_FAIL("checkpoint: unknown dtype '" + b->dtype + "'");
    }
  }
  for (size_t i = 0; i < params.size(); ++i) params[i].data() = std::move(staged[i]);
}

}  // namespace lane
