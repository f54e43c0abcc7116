#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lane/metrics.hpp"
#include "lane/common.hpp"

using namespace lane;

namespace {

Image constant_image(int w, int h, float v) {
  Image img(w, h);
  std::fill(img.rgb.begin(), img.rgb.end(), v);
  return img;
}

Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (auto& v : img.rgb) v = u(rng);
  return img;
}

}  // namespace

TEST_CASE("psnr: MSE 0.01 is 20 dB (up to float quantization of the input)") {
  Image ref = constant_image(8, 8, 0.0f);
  Image pred = constant_image(8, 8, 0.1f);
  CHECK(std::abs(psnr(pred, ref) - 20.0) < 1e-6);

  // with an exactly representable difference the formula is bit-exact
  Image pred2 = constant_image(8, 8, 0.25f);
  CHECK(psnr(pred2, ref) == 10.0 * std::log10(16.0));
}

TEST_CASE("psnr: identical images cap at 100 dB") {
  Rng rng(1);
  Image img = random_image(8, 8, rng);
  CHECK(psnr(img, img) == 100.0);
}

TEST_CASE("psnr: matches independent scalar recomputation") {
  Rng rng(2);
  Image a = random_image(9, 7, rng);
  Image b = random_image(9, 7, rng);
  double acc = 0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    acc += d * d;
  }
  const double expect = 10.0 * std::log10(1.0 / (acc / a.rgb.size()));
  CHECK(std::abs(psnr(a, b) - expect) < 1e-9);
  // symmetric
  CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("psnr: strictly decreasing in MSE") {
  Image ref = constant_image(8, 8, 0.4f);
  double prev = 1e9;
  for (float delta : {0.01f, 0.05f, 0.1f, 0.2f, 0.4f}) {
    const double p = psnr(constant_image(8, 8, 0.4f + delta), ref);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("psnr: masked evaluation and empty-mask error") {
  Image ref = constant_image(8, 8, 0.0f);
  Image pred = constant_image(8, 8, 0.0f);
  // damage outside the mask only
  pred.pixel(0, 0)[0] = 1.0f;
  Mask mask(8, 8);
  for (int x = 2; x < 8; ++x)
    for (int y = 2; y < 8; ++y) mask.at(x, y) = 1;
  CHECK(psnr(pred, ref, &mask) == 100.0);
  CHECK(psnr(pred, ref) < 100.0);

  Mask empty(8, 8);
  CHECK_THROWS_AS(psnr(pred, ref, &empty), ContractError);
}

TEST_CASE("psnr rejects shape mismatch") {
  Image a = constant_image(8, 8, 0.1f);
  Image b = constant_image(8, 9, 0.1f);
  CHECK_THROWS_AS(psnr(a, b), ContractError);
}

TEST_CASE("ssim: identical images give exactly 1, symmetric") {
  Rng rng(3);
  Image img = random_image(16, 16, rng);
  CHECK(ssim(img, img) == 1.0);
  Image other = random_image(16, 16, rng);
  CHECK(ssim(img, other) == doctest::Approx(ssim(other, img)).epsilon(1e-14));
}

TEST_CASE("ssim: structural inversion scores low") {
  // checkerboard with values away from mid-gray; negation inverts structure
  Image img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const float v = ((x / 2 + y / 2) % 2 == 0) ? 0.15f : 0.85f;
      float* px = img.pixel(x, y);
      px[0] = px[1] = px[2] = v;
    }
  Image neg = img;
  for (auto& v : neg.rgb) v = 1.0f - v;
  CHECK(ssim(img, neg) < 0.5);
}

TEST_CASE("ssim: constant images match the closed form") {
  const double c = 0.4;
  Image a = constant_image(12, 12, static_cast<float>(c));
  Image b = constant_image(12, 12, static_cast<float>(c) + 0.1f);
  const double mu_a = a.rgb[0];  // luma of a gray pixel equals its value
  const double mu_b = b.rgb[0];
  const double c1 = 0.01 * 0.01;
  // variances are zero: SSIM = (2 mu_a mu_b + C1) (C2) / ((mu_a^2+mu_b^2+C1) C2)
  const double expect = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
  CHECK(ssim(a, b) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("ssim rejects images smaller than the window") {
  Image a = constant_image(10, 12, 0.5f);
  Image b = constant_image(10, 12, 0.5f);
  CHECK_THROWS_AS(ssim(a, b), ContractError);
}
