#include "lane/dataio.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace lane {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- low-level file helpers ----

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) LANE_FAIL("cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) LANE_FAIL("short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) LANE_FAIL("cannot open: " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) LANE_FAIL("short read: " + path.string());
  return bytes;
}

// ---- PPM ----

namespace {

struct ByteCursor {
  const std::vector<std::uint8_t>& bytes;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    LANE_FAIL("parse error at byte " + std::to_string(pos) + ": " + what);
  }
  void skip_space() {
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {  // comment to end of line
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos;
      } else {
        break;
      }
    }
  }
  long read_int() {
    skip_space();
    if (pos >= bytes.size() || !isdigit(bytes[pos])) fail("expected integer");
    long v = 0;
    while (pos < bytes.size() && isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  }
  double read_double() {
    skip_space();
    const size_t start = pos;
    while (pos < bytes.size() && !isspace(bytes[pos])) ++pos;
    if (pos == start) fail("expected number");
    return std::stod(std::string(bytes.begin() + start, bytes.begin() + pos));
  }
};

std::uint8_t quantize(float v) {
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  LANE_CHECK(img.width > 0 && img.height > 0, "encode_ppm: empty image");
  std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.rgb.size());
  for (float v : img.rgb) out.push_back(quantize(v));
  return out;
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  ByteCursor cur{bytes};
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') cur.fail("not a P6 PPM");
  cur.pos = 2;
  const long w = cur.read_int();
  const long h = cur.read_int();
  const long maxval = cur.read_int();
  if (w <= 0 || h <= 0) cur.fail("bad dimensions");
  if (maxval != 255) cur.fail("unsupported maxval (expected 255)");
  ++cur.pos;  // single whitespace after maxval
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (bytes.size() - cur.pos < need) cur.fail("pixel data truncated");
  Image img(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < need; ++i)
    img.rgb[i] = static_cast<float>(bytes[cur.pos + i]) / 255.0f;
  return img;
}

// ---- PFM (grayscale, little-endian, bottom-to-top rows) ----

std::vector<std::uint8_t> encode_pfm(const DepthMap& depth) {
  LANE_CHECK(depth.width > 0 && depth.height > 0, "encode_pfm: empty depth map");
  std::string header =
      "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.resize(out.size() + depth.depth.size() * 4);
  std::uint8_t* dst = out.data() + header.size();
  for (int y = depth.height - 1; y >= 0; --y) {
    std::memcpy(dst, depth.depth.data() + static_cast<size_t>(y) * depth.width,
                static_cast<size_t>(depth.width) * 4);
    dst += static_cast<size_t>(depth.width) * 4;
  }
  return out;
}

DepthMap decode_pfm(const std::vector<std::uint8_t>& bytes) {
  ByteCursor cur{bytes};
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != 'f') cur.fail("not a grayscale PFM");
  cur.pos = 2;
  const long w = cur.read_int();
  const long h = cur.read_int();
  const double scale = cur.read_double();
  if (w <= 0 || h <= 0) cur.fail("bad dimensions");
  if (scale >= 0) cur.fail("big-endian PFM not supported");
  ++cur.pos;  // newline after scale
  const size_t need = static_cast<size_t>(w) * h * 4;
  if (bytes.size() - cur.pos < need) cur.fail("sample data truncated");
  DepthMap depth(static_cast<int>(w), static_cast<int>(h));
  for (long y = h - 1; y >= 0; --y) {
    std::memcpy(depth.depth.data() + static_cast<size_t>(y) * w, bytes.data() + cur.pos,
                static_cast<size_t>(w) * 4);
    cur.pos += static_cast<size_t>(w) * 4;
  }
  return depth;
}

void write_ppm(const fs::path& path, const Image& img) { write_file(path, encode_ppm(img)); }
Image read_ppm(const fs::path& path) { return decode_ppm(read_file(path)); }
void write_pfm(const fs::path& path, const DepthMap& depth) {
  write_file(path, encode_pfm(depth));
}
DepthMap read_pfm(const fs::path& path) { return decode_pfm(read_file(path)); }

Image mask_to_image(const Mask& mask) {
  Image img(mask.width, mask.height);
  for (size_t i = 0; i < mask.on.size(); ++i) {
    const float v = mask.on[i] ? 1.0f : 0.0f;
    img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = v;
  }
  return img;
}

Mask image_to_mask(const Image& img) {
  Mask mask(img.width, img.height);
  for (size_t i = 0; i < mask.on.size(); ++i) mask.on[i] = img.rgb[3 * i] > 0.5f ? 1 : 0;
  return mask;
}

// ---- manifest ----

namespace {

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const json& j) {
  LANE_CHECK(j.is_array() && j.size() == 3, "manifest: expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json camera_to_json(const Camera& c) {
  json j;
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) rot[r * 3 + k] = c.rotation(r, k);
  j["rotation"] = rot;
  j["translation"] = vec3_to_json(c.translation);
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  return j;
}

Camera camera_from_json(const json& j) {
  Camera c;
  const auto& rot = j.at("rotation");
  LANE_CHECK(rot.size() == 9, "manifest: camera rotation must have 9 entries");
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) c.rotation(r, k) = rot[r * 3 + k].get<double>();
  c.translation = vec3_from_json(j.at("translation"));
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.validate();
  return c;
}

json pose_to_json(const ObjectPose& p) {
  json j;
  j["quaternion"] = {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()};
  j["translation"] = vec3_to_json(p.translation);
  j["half_extents"] = vec3_to_json(p.half_extents);
  return j;
}

ObjectPose pose_from_json(const json& j) {
  ObjectPose p;
  const auto& q = j.at("quaternion");
  LANE_CHECK(q.size() == 4, "manifest: quaternion must have 4 entries (w,x,y,z)");
  p.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                  q[3].get<double>());
  p.translation = vec3_from_json(j.at("translation"));
  p.half_extents = vec3_from_json(j.at("half_extents"));
  p.validate();
  return p;
}

json spec_to_json(const SceneSpec& s) {
  return json{{"num_boxes", s.num_boxes},
              {"num_spheres", s.num_spheres},
              {"num_instances", s.num_instances},
              {"bounds_half", s.bounds_half},
              {"road_half_width", s.road_half_width},
              {"min_box_half", s.min_box_half},
              {"max_box_half", s.max_box_half},
              {"tall_occluder_height", s.tall_occluder_height}};
}

SceneSpec spec_from_json(const json& j) {
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

}  // namespace

const SceneMeta& DatasetManifest::scene(const std::string& id) const {
  for (const auto& s : scenes)
    if (s.id == id) return s;
  LANE_FAIL("manifest: unknown scene '" + id + "'");
}

const LightingCondition& DatasetManifest::condition(const std::string& id) const {
  for (const auto& l : lighting)
    if (l.id == id) return l;
  LANE_FAIL("manifest: unknown lighting condition '" + id + "'");
}

const InstanceMeta& DatasetManifest::instance(const std::string& id) const {
  for (const auto& i : instances)
    if (i.id == id) return i;
  LANE_FAIL("manifest: unknown instance '" + id + "'");
}

int DatasetManifest::lighting_index(const std::string& id) const {
  for (size_t i = 0; i < lighting.size(); ++i)
    if (lighting[i].id == id) return static_cast<int>(i);
  LANE_FAIL("manifest: unknown lighting condition '" + id + "'");
}

void write_manifest(const DatasetManifest& m) {
  json j;
  j["format_version"] = m.format_version;
  for (const auto& s : m.scenes) {
    json js;
    js["id"] = s.id;
    js["seed"] = s.seed;
    js["sky"] = vec3_to_json(s.sky);
    js["bounds"] = {{"min", vec3_to_json(s.bounds.min())},
                    {"max", vec3_to_json(s.bounds.max())}};
    js["spec"] = spec_to_json(s.spec);
    j["scenes"].push_back(js);
  }
  for (const auto& l : m.lighting)
    j["lighting"].push_back(json{{"id", l.id},
                                 {"azimuth_deg", l.azimuth_deg},
                                 {"elevation_deg", l.elevation_deg},
                                 {"sun_intensity", l.sun_intensity},
                                 {"ambient", l.ambient}});
  for (const auto& i : m.instances)
    j["instances"].push_back(json{{"id", i.id},
                                  {"albedo", vec3_to_json(i.albedo)},
                                  {"half_extents", vec3_to_json(i.half_extents)}});
  for (const auto& f : m.frames) {
    json jf;
    jf["id"] = f.id;
    jf["scene"] = f.scene;
    jf["lighting"] = f.lighting;
    jf["split"] = f.split;
    jf["image"] = f.image_path;
    if (!f.depth_path.empty()) jf["depth"] = f.depth_path;
    jf["camera"] = camera_to_json(f.camera);
    for (const auto& o : f.objects)
      jf["objects"].push_back(
          json{{"instance", o.instance}, {"mask", o.mask_path}, {"pose", pose_to_json(o.pose)}});
    if (!jf.contains("objects")) jf["objects"] = json::array();
    j["frames"].push_back(jf);
  }
  const std::string text = j.dump(1);
  write_file(m.root / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

DatasetManifest read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    LANE_FAIL("dataset: missing manifest " + manifest_path.string());
  json j;
  try {
    j = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    LANE_FAIL("dataset: malformed manifest: " + std::string(e.what()));
  }

  DatasetManifest m;
  m.root = dir;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != 1)
    LANE_FAIL("dataset: unsupported format version " +
              std::to_string(m.format_version));

  for (const auto& js : j.value("scenes", json::array())) {
    SceneMeta s;
    s.id = js.at("id").get<std::string>();
    s.seed = js.at("seed").get<std::uint64_t>();
    s.sky = vec3_from_json(js.at("sky"));
    s.bounds = Eigen::AlignedBox3d(vec3_from_json(js.at("bounds").at("min")),
                                   vec3_from_json(js.at("bounds").at("max")));
    s.spec = spec_from_json(js.value("spec", json::object()));
    m.scenes.push_back(s);
  }
  for (const auto& jl : j.value("lighting", json::array())) {
    LightingCondition l;
    l.id = jl.at("id").get<std::string>();
    l.azimuth_deg = jl.at("azimuth_deg").get<double>();
    l.elevation_deg = jl.at("elevation_deg").get<double>();
    l.sun_intensity = jl.at("sun_intensity").get<double>();
    l.ambient = jl.at("ambient").get<double>();
    l.validate();
    m.lighting.push_back(l);
  }
  for (const auto& ji : j.value("instances", json::array())) {
    InstanceMeta i;
    i.id = ji.at("id").get<std::string>();
    i.albedo = vec3_from_json(ji.at("albedo"));
    i.half_extents = vec3_from_json(ji.at("half_extents"));
    m.instances.push_back(i);
  }
  for (const auto& jf : j.value("frames", json::array())) {
    FrameRecord f;
    f.id = jf.at("id").get<std::string>();
    f.scene = jf.at("scene").get<std::string>();
    f.lighting = jf.at("lighting").get<std::string>();
    f.split = jf.value("split", "train");
    f.image_path = jf.at("image").get<std::string>();
    f.depth_path = jf.value("depth", "");
    f.camera = camera_from_json(jf.at("camera"));
    for (const auto& jo : jf.value("objects", json::array())) {
      FrameObject o;
      o.instance = jo.at("instance").get<std::string>();
      o.mask_path = jo.at("mask").get<std::string>();
      o.pose = pose_from_json(jo.at("pose"));
      f.objects.push_back(o);
    }
    m.frames.push_back(f);
  }

  // referential validation
  for (const auto& f : m.frames) {
    m.scene(f.scene);
    m.condition(f.lighting);
    LANE_CHECK(f.split == "train" || f.split == "eval",
               "dataset: frame '" + f.id + "' has unknown split '" + f.split + "'");
    const fs::path img = dir / f.image_path;
    if (!fs::exists(img))
      LANE_FAIL("dataset: frame '" + f.id + "' references missing image " + img.string());
    // dimensions must match the camera (header-only decode would do; images
    // are small, a full decode keeps it simple)
    Image probe = read_ppm(img);
    LANE_CHECK(probe.width == f.camera.width && probe.height == f.camera.height,
               "dataset: frame '" + f.id + "' image dimensions do not match camera");
    if (!f.depth_path.empty() && !fs::exists(dir / f.depth_path))
      LANE_FAIL("dataset: frame '" + f.id + "' references missing depth " +
                (dir / f.depth_path).string());
    for (const auto& o : f.objects) {
      m.instance(o.instance);
      if (!fs::exists(dir / o.mask_path))
        LANE_FAIL("dataset: frame '" + f.id + "' references missing mask " +
                  (dir / o.mask_path).string());
    }
  }
  return m;
}

Image load_frame_image(const DatasetManifest& m, const FrameRecord& f) {
  return read_ppm(m.root / f.image_path);
}

std::optional<DepthMap> load_frame_depth(const DatasetManifest& m, const FrameRecord& f) {
  if (f.depth_path.empty()) return std::nullopt;
  return read_pfm(m.root / f.depth_path);
}

Mask load_object_mask(const DatasetManifest& m, const FrameObject& obj) {
  return image_to_mask(read_ppm(m.root / obj.mask_path));
}

std::vector<PlacementFrame> read_placements(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ContractError("placements: malformed JSON in " + path.string() + ": " + e.what());
  }
  std::vector<PlacementFrame> out;
  for (const auto& jf : j.value("frames", json::array())) {
    PlacementFrame f;
    f.camera = camera_from_json(jf.at("camera"));
    for (const auto& jo : jf.value("objects", json::array()))
      f.objects.emplace_back(jo.at("instance").get<std::string>(),
                             pose_from_json(jo.at("pose")));
    out.push_back(std::move(f));
  }
  LANE_CHECK(!out.empty(), "placements: no frames in " + path.string());
  return out;
}

void write_placements(const fs::path& path, const std::vector<PlacementFrame>& frames) {
  json j;
  j["frames"] = json::array();
  for (const auto& f : frames) {
    json jf;
    jf["camera"] = camera_to_json(f.camera);
    jf["objects"] = json::array();
    for (const auto& [instance, pose] : f.objects)
      jf["objects"].push_back(json{{"instance", instance}, {"pose", pose_to_json(pose)}});
    j["frames"].push_back(jf);
  }
  const std::string text = j.dump(1);
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---- checkpoints ----

namespace {
constexpr char kMagic[9] = "LANE0001";

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& bytes, size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
  return v;
}
}  // namespace

const TensorBlob* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  json index;
  index["version"] = 1;
  index["step"] = ckpt.step;
  index["config_hash"] = ckpt.config_hash;
  index["extra"] = ckpt.extra;
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    index["tensors"].push_back(json{{"name", t.name},
                                    {"dtype", t.dtype},
                                    {"shape", t.shape},
                                    {"offset", offset},
                                    {"nbytes", t.bytes.size()}});
    offset += t.bytes.size();
  }
  if (!index.contains("tensors")) index["tensors"] = json::array();
  const std::string index_text = index.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u64(out, index_text.size());
  out.insert(out.end(), index_text.begin(), index_text.end());
  for (const auto& t : ckpt.tensors) out.insert(out.end(), t.bytes.begin(), t.bytes.end());
  write_file(path, out);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    LANE_FAIL("checkpoint: bad magic in " + path.string());
  const std::uint64_t index_len = get_u64(bytes, 8);
  if (16 + index_len > bytes.size())
    LANE_FAIL("checkpoint: truncated index in " + path.string());
  json index;
  try {
    index = json::parse(bytes.begin() + 16, bytes.begin() + 16 + index_len);
  } catch (const json::exception& e) {
    LANE_FAIL("checkpoint: malformed index: " + std::string(e.what()));
  }
  if (index.at("version").get<int>() != 1)
    LANE_FAIL("checkpoint: unsupported version in " + path.string());

  Checkpoint ckpt;
  ckpt.step = index.value("step", 0L);
  ckpt.config_hash = index.value("config_hash", "");
  ckpt.extra = index.value("extra", "");
  const size_t blob_base = 16 + index_len;
  for (const auto& jt : index.value("tensors", json::array())) {
    TensorBlob t;
    t.name = jt.at("name").get<std::string>();
    t.dtype = jt.at("dtype").get<std::string>();
    t.shape = jt.at("shape").get<std::vector<int>>();
    const std::uint64_t off = jt.at("offset").get<std::uint64_t>();
    const std::uint64_t nbytes = jt.at("nbytes").get<std::uint64_t>();
    if (blob_base + off + nbytes > bytes.size())
      LANE_FAIL("checkpoint: truncated blob for '" + t.name + "' in " + path.string());
    const size_t elem = t.dtype == "f32" ? 4 : t.dtype == "f64" ? 8 : 0;
    if (elem == 0) LANE_FAIL("checkpoint: unknown dtype '" + t.dtype + "'");
    if (static_cast<std::uint64_t>(numel_of(t.shape)) * elem != nbytes)
      LANE_FAIL("checkpoint: blob size does not match shape for '" + t.name + "'");
    t.bytes.assign(bytes.begin() + blob_base + off, bytes.begin() + blob_base + off + nbytes);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace lane
