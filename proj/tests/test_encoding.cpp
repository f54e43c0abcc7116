#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lane/encoding.hpp"

using namespace lane;

TEST_CASE("positional_encode: zero input, L=2, no input passthrough") {
  PosEncConfig cfg{.num_frequencies = 2, .include_input = false};
  auto enc = positional_encode({0.0}, cfg);
  REQUIRE(enc.size() == 4);
  CHECK(enc[0] == 0.0);  // sin(0)
  CHECK(enc[1] == 1.0);  // cos(0)
  CHECK(enc[2] == 0.0);  // sin(0)
  CHECK(enc[3] == 1.0);  // cos(0)
}

TEST_CASE("positional_encode: x=0.5, L=1") {
  PosEncConfig cfg{.num_frequencies = 1, .include_input = false};
  auto enc = positional_encode({0.5}, cfg);
  REQUIRE(enc.size() == 2);
  CHECK(enc[0] == doctest::Approx(1.0).epsilon(1e-12));  // sin(pi/2)
  CHECK(std::abs(enc[1]) < 1e-12);                       // cos(pi/2)
}

TEST_CASE("positional_encode: matches direct trig evaluation") {
  PosEncConfig cfg{.num_frequencies = 4, .include_input = true};
  const double x = 0.3;
  auto enc = positional_encode({x}, cfg);
  REQUIRE(static_cast<int>(enc.size()) == cfg.out_dim(1));
  CHECK(enc[0] == x);
  for (int k = 0; k < 4; ++k) {
    const double f = std::pow(2.0, k) * kPi;
    CHECK(std::abs(enc[1 + 2 * k] - std::sin(f * x)) < 1e-12);
    CHECK(std::abs(enc[2 + 2 * k] - std::cos(f * x)) < 1e-12);
  }
}

TEST_CASE("positional_encode: output dimension formula (property)") {
  Rng rng(17);
  std::uniform_int_distribution<int> dims(1, 6), freqs(0, 12), coin(0, 1);
  std::uniform_real_distribution<double> val(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = dims(rng);
    PosEncConfig cfg{.num_frequencies = freqs(rng), .include_input = coin(rng) == 1};
    std::vector<double> x(d);
    for (auto& v : x) v = val(rng);
    auto enc = positional_encode(x, cfg);
    CHECK(static_cast<int>(enc.size()) == cfg.out_dim(d));
    // every component bounded (sin/cos in [-1,1]; inputs pre-normalized)
    for (double v : enc) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("positional_encode: coarse-to-fine masking zeroes high frequencies") {
  PosEncConfig cfg{.num_frequencies = 4, .include_input = true};
  auto enc = positional_encode({0.37}, cfg, 2);
  CHECK(enc[0] == 0.37);
  for (int k = 0; k < 2; ++k) CHECK(enc[1 + 2 * k] != 0.0);
  for (int k = 2; k < 4; ++k) {
    CHECK(enc[1 + 2 * k] == 0.0);
    CHECK(enc[2 + 2 * k] == 0.0);
  }
}

TEST_CASE("plucker: ray through origin") {
  auto p = plucker({0, 0, 0}, {0, 0, 1});
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.0);
  CHECK(p[2] == 1.0);
  CHECK(p[3] == 0.0);
  CHECK(p[4] == 0.0);
  CHECK(p[5] == 0.0);
}

TEST_CASE("plucker: hand-computed moment") {
  auto p = plucker({1, 0, 0}, {0, 0, 1});
  CHECK(p[2] == 1.0);
  CHECK(p[3] == 0.0);
  CHECK(p[4] == -1.0);
  CHECK(p[5] == 0.0);
}

TEST_CASE("plucker: sliding invariance (property)") {
  Rng rng(4);
  std::uniform_real_distribution<double> val(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Vector3d o(val(rng), val(rng), val(rng));
    Eigen::Vector3d d(val(rng), val(rng), val(rng));
    if (d.norm() < 1e-6) continue;
    d.normalize();
    const double t = val(rng);
    auto a = plucker(o, d);
    auto b = plucker(o + t * d, d);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("plucker rejects zero direction") {
  CHECK_THROWS_AS(plucker({1, 2, 3}, {0, 0, 0}), ContractError);
}

TEST_CASE("latent table: distinct ids give distinct codes, unknown id throws") {
  Rng rng(9);
  LatentTable<double> table(8, "code");
  auto& a = table.create("l0", rng);
  auto& b = table.create("l1", rng);
  CHECK(a.data() != b.data());
  CHECK_THROWS_AS(table.at("nope"), ContractError);
  CHECK_THROWS_AS(table.create("l0", rng), ContractError);
}

TEST_CASE("embed_lighting physical mode: deterministic, fixed width") {
  auto a = embed_lighting_physical(0.0, 90.0);
  auto b = embed_lighting_physical(0.0, 90.0);
  CHECK(a == b);
  CHECK(static_cast<int>(a.size()) == kLightingLatentDim);
  auto c = embed_lighting_physical(120.0, 35.0);
  CHECK(a != c);
}
