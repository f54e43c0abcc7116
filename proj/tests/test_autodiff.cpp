#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lane/mlp.hpp"
#include "lane/ops.hpp"
#include "lane/optim.hpp"

using namespace lane;
using namespace lane::ad;

using DT = Tensor<double>;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("backward: analytic scalar cases") {
  // loss = x^2 at x=3 -> grad 6
  DT x = DT::param({1}, {3.0}, "x");
  DT loss = mul(x, x);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));

  // loss = sum(W x): dW = x broadcast per row
  DT w = DT::param({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, "W");
  DT xv = DT::constant({3, 1}, {1.0, 2.0, 3.0});
  DT s = sum(matmul(w, xv));
  backward(s);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) CHECK(w.grad()[r * 3 + c] == doctest::Approx(xv.data()[c]));
}

TEST_CASE("backward: deterministic bitwise") {
  Rng rng(7);
  DT w = DT::param({4, 4}, random_vec(16, rng), "W");
  DT x = DT::constant({1, 4}, random_vec(4, rng));
  auto run = [&]() {
    w.zero_grad();
    DT h = sigmoid(matmul(x, w));
    DT loss = mean(mul(h, h));
    backward(loss);
    return w.grad();
  };
  auto g1 = run();
  auto g2 = run();
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("backward rejects non-scalar loss") {
  DT x = DT::param({2}, {1.0, 2.0}, "x");
  DT y = mul(x, x);
  CHECK_THROWS_AS(backward(y), ContractError);
}

TEST_CASE("unreachable parameters keep empty grad") {
  DT a = DT::param({1}, {2.0}, "a");
  DT b = DT::param({1}, {5.0}, "b");
  DT loss = mul(a, a);
  backward(loss);
  CHECK(a.has_grad());
  CHECK_FALSE(b.has_grad());
}

TEST_CASE("grad_check: smooth scalar functions") {
  DT x = DT::param({1}, {3.0}, "x");
  double err = grad_check([&]() { return mul(x, x); }, x, 1e-5);
  CHECK(err < 1e-8);

  DT y = DT::param({1}, {0.7}, "y");
  err = grad_check([&]() { return sin_(y); }, y, 1e-5);
  CHECK(err < 1e-8);
}

// Every exported differentiable op, checked against central differences.
TEST_CASE("grad_check: op-by-op finite differences") {
  Rng rng(42);
  const double h = 1e-6;
  const double tol = 1e-7;

  auto check = [&](const char* name, DT& p, const std::function<DT()>& f) {
    INFO("op: " << name);
    CHECK(grad_check(f, p, h) < tol);
  };

  {
    DT a = DT::param({2, 3}, random_vec(6, rng), "a");
    DT b = DT::constant({2, 3}, random_vec(6, rng));
    check("add", a, [&] { return mean(mul(add(a, b), add(a, b))); });
    check("sub", a, [&] { return mean(mul(sub(a, b), sub(a, b))); });
    check("mul", a, [&] { return mean(mul(mul(a, b), a)); });
    check("affine", a, [&] { return mean(affine(a, 2.5, -0.75)); });
  }
  {
    DT a = DT::param({2, 2}, {0.7, 1.3, -0.4, 2.2}, "a");
    DT b = DT::constant({2, 2}, {1.5, 0.9, 2.1, 1.1});
    check("div", a, [&] { return mean(div(a, b)); });
  }
  {
    DT a = DT::param({6}, random_vec(6, rng), "a");
    check("sigmoid", a, [&] { return mean(sigmoid(a)); });
    check("softplus", a, [&] { return mean(softplus(a)); });
    check("exp", a, [&] { return mean(exp_(a)); });
    check("sin", a, [&] { return mean(sin_(a)); });
    check("cos", a, [&] { return mean(cos_(a)); });
  }
  {
    // relu / max_scalar away from their kinks
    DT a = DT::param({4}, {0.5, -0.7, 1.2, -2.0}, "a");
    check("relu", a, [&] { return mean(relu(a)); });
    check("max_scalar", a, [&] { return mean(max_scalar(a, 0.1)); });
  }
  {
    DT a = DT::param({3, 4}, random_vec(12, rng), "a");
    DT b = DT::param({4, 2}, random_vec(8, rng), "b");
    check("matmul lhs", a, [&] { return mean(mul(matmul(a, b), matmul(a, b))); });
    check("matmul rhs", b, [&] { return mean(mul(matmul(a, b), matmul(a, b))); });
  }
  {
    DT x = DT::param({3, 4}, random_vec(12, rng), "x");
    DT bias = DT::param({4}, random_vec(4, rng), "bias");
    check("add_row_bias x", x, [&] { return mean(mul(add_row_bias(x, bias), x)); });
    check("add_row_bias b", bias, [&] { return mean(mul(add_row_bias(x, bias), x)); });
  }
  {
    DT a = DT::param({3, 5}, random_vec(15, rng), "a");
    DT b = DT::param({3, 5}, random_vec(15, rng), "b");
    check("rowwise_dot", a, [&] { return mean(rowwise_dot(a, b)); });
    check("rowwise_dot b", b, [&] { return mean(mul(rowwise_dot(a, b), rowwise_dot(a, b))); });
  }
  {
    DT v = DT::param({3}, random_vec(3, rng), "v");
    DT m = DT::constant({4, 3}, random_vec(12, rng));
    check("repeat_row", v, [&] { return mean(mul(repeat_row(v, 4), m)); });
  }
  {
    DT x = DT::param({4, 3}, random_vec(12, rng), "x");
    DT s = DT::param({4}, random_vec(4, rng), "s");
    check("scale_rows x", x, [&] { return mean(scale_rows(x, s)); });
    check("scale_rows s", s, [&] { return mean(mul(scale_rows(x, s), x)); });
  }
  {
    DT x = DT::param({5, 2}, random_vec(10, rng), "x");
    std::vector<int> idx = {4, 0, 2, 0};
    check("gather_rows", x, [&] { return mean(mul(gather_rows(x, idx), gather_rows(x, idx))); });
  }
  {
    DT v = DT::param({2, 3}, random_vec(6, rng), "v");
    std::vector<int> idx = {3, 1};
    DT w = DT::constant({5, 3}, random_vec(15, rng));
    check("scatter_rows", v, [&] { return mean(mul(scatter_rows(5, idx, v, 1.0), w)); });
  }
  {
    DT a = DT::param({2, 2}, random_vec(4, rng), "a");
    DT b = DT::param({3, 2}, random_vec(6, rng), "b");
    DT m = DT::constant({5, 2}, random_vec(10, rng));
    check("concat_rows a", a, [&] { return mean(mul(concat_rows<double>({a, b}), m)); });
    check("concat_rows b", b, [&] { return mean(mul(concat_rows<double>({a, b}), m)); });
  }
  {
    DT a = DT::param({3, 2}, random_vec(6, rng), "a");
    DT b = DT::param({3, 4}, random_vec(12, rng), "b");
    DT m = DT::constant({3, 6}, random_vec(18, rng));
    check("concat_cols a", a, [&] { return mean(mul(concat_cols(a, b), m)); });
    check("concat_cols b", b, [&] { return mean(mul(concat_cols(a, b), m)); });
  }
  {
    DT x = DT::param({6}, random_vec(6, rng), "x");
    check("reshape", x, [&] { return mean(mul(reshape(x, {2, 3}), reshape(x, {2, 3}))); });
    check("sum", x, [&] { return sum(mul(x, x)); });
    check("mean", x, [&] { return mean(mul(x, x)); });
  }
  {
    DT x = DT::param({2, 4}, random_vec(8, rng), "x");
    DT m = DT::constant({2, 4}, random_vec(8, rng));
    check("softmax_rows", x, [&] { return mean(mul(softmax_rows(x), m)); });
  }
  {
    std::vector<int> offsets = {0, 3, 3, 7};
    DT x = DT::param({7}, random_vec(7, rng), "x");
    DT w = DT::constant({7}, random_vec(7, rng));
    check("segment_exclusive_cumsum", x,
          [&] { return mean(mul(segment_exclusive_cumsum(x, offsets), w)); });
    DT w3 = DT::constant({3}, random_vec(3, rng));
    check("segment_sum", x, [&] { return mean(mul(segment_sum(x, offsets), w3)); });
    DT xm = DT::param({7, 2}, random_vec(14, rng), "xm");
    DT wm = DT::constant({3, 2}, random_vec(6, rng));
    check("segment_sum_rows", xm, [&] { return mean(mul(segment_sum_rows(xm, offsets), wm)); });
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  DT x = DT::constant({4, 7}, random_vec(28, rng, -5, 5));
  DT y = softmax_rows(x);
  for (int i = 0; i < 4; ++i) {
    double s = 0;
    for (int j = 0; j < 7; ++j) {
      s += y.data()[i * 7 + j];
      CHECK(y.data()[i * 7 + j] >= 0.0);
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("segment_exclusive_cumsum values") {
  DT x = DT::constant({5}, {1, 2, 3, 4, 5});
  DT y = segment_exclusive_cumsum(x, {0, 3, 5});
  CHECK(y.data() == std::vector<double>{0, 1, 3, 0, 4});
}

TEST_CASE("mlp_eval: zero weights give bias (after output activation)") {
  Rng rng(1);
  Mlp<double> mlp = make_mlp<double>({3, 4, 2}, Activation::kSigmoid, rng, "m");
  for (auto& l : mlp.layers) std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
  mlp.layers[1].bias.data() = {0.5, -0.5};
  DT x = DT::constant({1, 3}, {0.3, -0.8, 2.0});
  DT y = mlp.forward(x);
  CHECK(y.data()[0] == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))));
  CHECK(y.data()[1] == doctest::Approx(1.0 / (1.0 + std::exp(0.5))));
}

TEST_CASE("mlp_eval: identity single layer") {
  Rng rng(1);
  Mlp<double> mlp = make_mlp<double>({2, 2}, Activation::kNone, rng, "m");
  mlp.layers[0].weight.data() = {1, 0, 0, 1};
  mlp.layers[0].bias.data() = {0, 0};
  DT y = mlp.forward_vec(DT::constant({2}, {2.0, -3.0}));
  CHECK(y.data()[0] == 2.0);
  CHECK(y.data()[1] == -3.0);
}

TEST_CASE("mlp_eval: two-layer net matches hand-unrolled matrix arithmetic") {
  Rng rng(99);
  Mlp<double> mlp = make_mlp<double>({3, 4, 2}, Activation::kNone, rng, "m");
  std::vector<double> x = {0.2, -0.4, 0.9};
  DT y = mlp.forward_vec(DT::constant({3}, x));

  // independent unroll
  std::vector<double> h(4, 0.0);
  for (int j = 0; j < 4; ++j) {
    double s = mlp.layers[0].bias.data()[j];
    for (int i = 0; i < 3; ++i) s += x[i] * mlp.layers[0].weight.data()[i * 4 + j];
    h[j] = std::max(0.0, s);
  }
  for (int j = 0; j < 2; ++j) {
    double s = mlp.layers[1].bias.data()[j];
    for (int i = 0; i < 4; ++i) s += h[i] * mlp.layers[1].weight.data()[i * 2 + j];
    CHECK(std::abs(y.data()[j] - s) < 1e-12);
  }
}

TEST_CASE("mlp_eval rejects wrong input width") {
  Rng rng(1);
  Mlp<double> mlp = make_mlp<double>({3, 2}, Activation::kNone, rng, "m");
  CHECK_THROWS_AS(mlp.forward(DT::constant({1, 4}, {1, 2, 3, 4})), ContractError);
}

TEST_CASE("mlp: full network gradient vs finite differences") {
  Rng rng(123);
  Mlp<double> mlp = make_mlp<double>({5, 16, 16, 3}, Activation::kSigmoid, rng, "m");
  DT x = DT::constant({4, 5}, random_vec(20, rng));
  ParamSet<double> params;
  mlp.collect_params(params);
  Rng coord_rng(5);
  double err = grad_check_params([&]() { return mean(mul(mlp.forward(x), mlp.forward(x))); },
                                 params, 1e-5, 6, coord_rng);
  CHECK(err < 1e-4);
}

TEST_CASE("adam: bias-corrected first step") {
  ParamSet<double> params;
  DT p = DT::param({3}, {1.0, 2.0, 3.0}, "p");
  params.add(p);
  Adam<double> opt(params, {.lr = 1e-3});
  p.grad() = {1.0, 1.0, 1.0};
  opt.step(params);
  for (int i = 0; i < 3; ++i) {
    double delta = p.data()[i] - (i + 1.0);
    CHECK(std::abs(delta + 1e-3) < 1e-6);
  }
}

TEST_CASE("adam: zero gradient is identity") {
  ParamSet<double> params;
  DT p = DT::param({2}, {0.25, -0.75}, "p");
  params.add(p);
  Adam<double> opt(params, {});
  p.grad() = {0.0, 0.0};
  opt.step(params);
  CHECK(p.data()[0] == 0.25);
  CHECK(p.data()[1] == -0.75);
}

TEST_CASE("adam: 10 steps on quadratic bowl match scalar oracle") {
  // oracle: an independent scalar Adam on f(u) = 0.5*(u-c)^2 per element
  struct ScalarAdam {
    double m = 0, v = 0;
    double step(double g, long t, double lr, double b1, double b2, double eps) {
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      double mhat = m / (1 - std::pow(b1, static_cast<double>(t)));
      double vhat = v / (1 - std::pow(b2, static_cast<double>(t)));
      return lr * mhat / (std::sqrt(vhat) + eps);
    }
  };

  const std::vector<double> target = {0.3, -1.2};
  ParamSet<double> params;
  DT p = DT::param({2}, {2.0, 1.0}, "p");
  params.add(p);
  AdamConfig cfg{.lr = 0.05};
  Adam<double> opt(params, cfg);

  std::vector<double> oracle = {2.0, 1.0};
  ScalarAdam sa0, sa1;
  for (long t = 1; t <= 10; ++t) {
    params.zero_grad();
    DT c = DT::constant({2}, target);
    DT d = sub(p, c);
    DT loss = affine(sum(mul(d, d)), 0.5, 0.0);
    backward(loss);
    opt.step(params);

    oracle[0] -= sa0.step(oracle[0] - target[0], t, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    oracle[1] -= sa1.step(oracle[1] - target[1], t, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  }
  CHECK(std::abs(p.data()[0] - oracle[0]) < 1e-10);
  CHECK(std::abs(p.data()[1] - oracle[1]) < 1e-10);
}

TEST_CASE("adam aborts on NaN gradient naming the parameter") {
  ParamSet<double> params;
  DT p = DT::param({1}, {1.0}, "weights.3");
  params.add(p);
  Adam<double> opt(params, {});
  p.grad() = {std::nan("")};
  try {
    opt.step(params);
    FAIL("expected abort");
  } catch (const RuntimeFailure& e) {
    CHECK(std::string(e.what()).find("weights.3") != std::string::npos);
  }
}

TEST_CASE("float mode forwards run and stay finite") {
  Rng rng(11);
  Mlp<float> mlp = make_mlp<float>({4, 8, 3}, Activation::kSigmoid, rng, "m");
  std::vector<float> xv(8);
  std::uniform_real_distribution<float> dist(-1, 1);
  for (auto& v : xv) v = dist(rng);
  auto y = mlp.forward(Tensor<float>::constant({2, 4}, xv));
  for (float v : y.data()) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}
