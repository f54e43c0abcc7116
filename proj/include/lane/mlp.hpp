#pragma once

#include <string>
#include <vector>

#include "lane/ops.hpp"
#include "lane/optim.hpp"

namespace lane::ad {

enum class Activation { kNone, kRelu, kSigmoid, kSoftplus, kTwoSigmoid };

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation act) {
  switch (act) {
    case Activation::kNone:
      return x;
    case Activation::kRelu:
      return relu(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kSoftplus:
      return softplus(x);
    case Activation::kTwoSigmoid:
      // (0,2) range: lets a multiplicative head both darken and brighten.
      return affine(sigmoid(x), T(2), T(0));
  }
  LANE_FAIL("unknown activation");
}

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  int in_dim() const { return weight.shape()[0]; }
  int out_dim() const { return weight.shape()[1]; }
};

// He-style uniform fan-in init, seeded; biases start at zero.
template <typename T>
Linear<T> make_linear(int in, int out, Rng& rng, const std::string& name) {
  LANE_CHECK(in > 0 && out > 0, "make_linear: dimensions must be positive");
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> w(static_cast<size_t>(in) * out);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  std::vector<T> b(out, T(0));
  return {Tensor<T>::param({in, out}, std::move(w), name + ".W"),
          Tensor<T>::param({out}, std::move(b), name + ".b")};
}

// Plain fully connected stack: ReLU between layers, configurable output
// activation.  Input is batched row-wise: [m, in] -> [m, out].
template <typename T>
struct Mlp {
  std::vector<Linear<T>> layers;
  Activation hidden = Activation::kRelu;
  Activation output = Activation::kNone;

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }

  Tensor<T> forward(const Tensor<T>& x) const {
    LANE_CHECK(x.shape().size() == 2 && x.shape()[1] == in_dim(),
               "mlp: input width " + shape_str(x.shape()) + " does not match first layer (" +
                   std::to_string(in_dim()) + ")");
    Tensor<T> h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      h = add_row_bias(matmul(h, layers[i].weight), layers[i].bias);
      h = apply_activation(h, i + 1 < layers.size() ? hidden : output);
    }
    return h;
  }

  // Single-vector convenience: [in] -> [out].
  Tensor<T> forward_vec(const Tensor<T>& x) const {
    Tensor<T> row = reshape(x, {1, static_cast<int>(x.numel())});
    return reshape(forward(row), {out_dim()});
  }

  void collect_params(ParamSet<T>& out) const {
    for (const auto& l : layers) {
      out.add(l.weight);
      out.add(l.bias);
    }
  }
};

// widths = {in, h1, ..., out}; n layers = widths.size()-1.
template <typename T>
Mlp<T> make_mlp(const std::vector<int>& widths, Activation output, Rng& rng,
                const std::string& name) {
  LANE_CHECK(widths.size() >= 2, "make_mlp: need at least one layer");
  Mlp<T> mlp;
  mlp.output = output;
  for (size_t i = 0; i + 1 < widths.size(); ++i)
    mlp.layers.push_back(
        make_linear<T>(widths[i], widths[i + 1], rng, name + "." + std::to_string(i)));
  return mlp;
}

}  // namespace lane::ad
