#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <map>
#include <string>
#include <vector>

#include "lane/mlp.hpp"
#include "lane/ops.hpp"

namespace lane {

// sin/cos frequency encoding.  Output per input dim, frequency k in 0..L-1:
// [sin(2^k pi x), cos(2^k pi x)]; the raw input is prepended when
// include_input is set.  Inputs are expected pre-normalized to about [-1,1].
struct PosEncConfig {
  int num_frequencies = 10;
  bool include_input = true;

  int out_dim(int in_dim) const {
    return in_dim * (2 * num_frequencies + (include_input ? 1 : 0));
  }
};

// Encodes a batch of rows [m, d] into [m, out_dim(d)].  active_frequencies
// implements the coarse-to-fine schedule: frequencies >= the active count
// write zeros (all active when < 0).
inline void positional_encode_rows(const double* x, int m, int d, const PosEncConfig& cfg,
                                   double* out, int active_frequencies = -1) {
  const int L = cfg.num_frequencies;
  const int per_dim = 2 * L + (cfg.include_input ? 1 : 0);
  const int act = active_frequencies < 0 ? L : std::min(active_frequencies, L);
  for (int r = 0; r < m; ++r) {
    const double* row = x + static_cast<size_t>(r) * d;
    double* orow = out + static_cast<size_t>(r) * d * per_dim;
    int c = 0;
    if (cfg.include_input)
      for (int i = 0; i < d; ++i) orow[c++] = row[i];
    for (int k = 0; k < L; ++k) {
      const double scale = std::ldexp(kPi, k);  // 2^k * pi
      for (int i = 0; i < d; ++i) {
        if (k < act) {
          orow[c++] = std::sin(scale * row[i]);
          orow[c++] = std::cos(scale * row[i]);
        } else {
          orow[c++] = 0.0;
          orow[c++] = 0.0;
        }
      }
    }
  }
}

inline std::vector<double> positional_encode(const std::vector<double>& x,
                                             const PosEncConfig& cfg,
                                             int active_frequencies = -1) {
  const int d = static_cast<int>(x.size());
  std::vector<double> out(static_cast<size_t>(cfg.out_dim(d)));
  positional_encode_rows(x.data(), 1, d, cfg, out.data(), active_frequencies);
  return out;
}

// Tape-side constant encoding of a row batch (encodings of data inputs carry
// no gradient; latent codes are concatenated separately).
template <typename T>
ad::Tensor<T> encode_batch(const std::vector<double>& rows, int d, const PosEncConfig& cfg,
                           int active_frequencies = -1) {
  const int m = static_cast<int>(rows.size()) / d;
  std::vector<double> enc(static_cast<size_t>(m) * cfg.out_dim(d));
  positional_encode_rows(rows.data(), m, d, cfg, enc.data(), active_frequencies);
  std::vector<T> data(enc.size());
  for (size_t i = 0; i < enc.size(); ++i) data[i] = static_cast<T>(enc[i]);
  return ad::Tensor<T>::constant({m, cfg.out_dim(d)}, std::move(data));
}

// Plucker coordinates (d, o x d) of the oriented line through o with unit
// direction d; invariant to sliding o along d.
inline Eigen::Matrix<double, 6, 1> plucker(const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  LANE_CHECK(d.norm() > 1e-12, "plucker: direction must be nonzero");
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = d;
  out.tail<3>() = o.cross(d);
  return out;
}

// Learnable code table (instance/scene/lighting latents).
template <typename T>
class LatentTable {
 public:
  LatentTable() = default;
  LatentTable(int dim, std::string prefix) : dim_(dim), prefix_(std::move(prefix)) {}

  int dim() const { return dim_; }
  bool contains(const std::string& id) const { return codes_.count(id) > 0; }
  size_t size() const { return codes_.size(); }

  // Inserts a fresh code drawn from N(0, 0.1)-ish uniform init.
  ad::Tensor<T>& create(const std::string& id, Rng& rng) {
    LANE_CHECK(!contains(id), "latent table: duplicate id '" + id + "'");
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    std::vector<T> v(dim_);
    for (auto& x : v) x = static_cast<T>(dist(rng));
    auto [it, ok] = codes_.emplace(id, ad::Tensor<T>::param({dim_}, std::move(v), prefix_ + "." + id));
    return it->second;
  }

  const ad::Tensor<T>& at(const std::string& id) const {
    auto it = codes_.find(id);
    LANE_CHECK(it != codes_.end(), "latent table: unknown id '" + id + "'");
    return it->second;
  }
  ad::Tensor<T>& at(const std::string& id) {
    auto it = codes_.find(id);
    LANE_CHECK(it != codes_.end(), "latent table: unknown id '" + id + "'");
    return it->second;
  }

  // Inserts a prebuilt tensor (frozen copies, deserialization).
  void insert_raw(const std::string& id, ad::Tensor<T> t) {
    LANE_CHECK(!contains(id), "latent table: duplicate id '" + id + "'");
    LANE_CHECK(t.numel() == dim_, "latent table: dimension mismatch for '" + id + "'");
    codes_.emplace(id, std::move(t));
  }

  // Copy whose codes are constants (no gradients recorded).
  LatentTable frozen_copy() const {
    LatentTable out(dim_, prefix_);
    for (const auto& [id, code] : codes_)
      out.insert_raw(id, ad::Tensor<T>::constant(code.shape(), code.data()));
    return out;
  }

  // Deterministic (sorted) parameter order.
  void collect_params(ad::ParamSet<T>& out) const {
    for (const auto& [id, code] : codes_) out.add(code);
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> v;
    for (const auto& [id, _] : codes_) v.push_back(id);
    return v;
  }

 private:
  int dim_ = 0;
  std::string prefix_;
  std::map<std::string, ad::Tensor<T>> codes_;  // ordered for determinism
};

constexpr int kLightingLatentDim = 16;

// Physical lighting embedding from (azimuth, elevation) in degrees: a fixed
// trigonometric feature set, so repeated calls are bitwise identical.  The
// learned mode is a LatentTable lookup owned by the world model.
inline std::vector<double> embed_lighting_physical(double azimuth_deg, double elevation_deg) {
  const double az = deg2rad(azimuth_deg);
  const double el = deg2rad(elevation_deg);
  std::vector<double> base = {std::sin(az), std::cos(az), std::sin(el)};
  PosEncConfig cfg{.num_frequencies = 2, .include_input = true};  // 3*(2*2+1)=15
  std::vector<double> enc = positional_encode(base, cfg);
  enc.push_back(1.0);  // pad to kLightingLatentDim
  LANE_CHECK(static_cast<int>(enc.size()) == kLightingLatentDim,
             "physical lighting embedding width drifted");
  return enc;
}

}  // namespace lane
