#include "lane/metrics.hpp"

#include <cmath>
#include <vector>

#include "lane/common.hpp"

namespace lane {

namespace {

void check_pair(const Image& pred, const Image& ref) {
  LANE_CHECK(pred.width == ref.width && pred.height == ref.height,
             "image pair: shapes must match");
  LANE_CHECK(pred.width > 0 && pred.height > 0, "image pair: empty images");
}

std::vector<double> luma(const Image& img) {
  std::vector<double> y(static_cast<size_t>(img.width) * img.height);
  for (size_t i = 0; i < y.size(); ++i)
    y[i] = 0.299 * img.rgb[3 * i] + 0.587 * img.rgb[3 * i + 1] + 0.114 * img.rgb[3 * i + 2];
  return y;
}

}  // namespace

double mse(const Image& pred, const Image& ref, const Mask* mask) {
  check_pair(pred, ref);
  if (mask)
    LANE_CHECK(mask->width == pred.width && mask->height == pred.height,
               "image pair: mask shape must match");
  double acc = 0;
  std::int64_t count = 0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      if (mask && !mask->at(x, y)) continue;
      const float* a = pred.pixel(x, y);
      const float* b = ref.pixel(x, y);
      for (int k = 0; k < 3; ++k) {
        const double d = static_cast<double>(a[k]) - b[k];
        acc += d * d;
      }
      ++count;
    }
  }
  LANE_CHECK(count > 0, "image pair: evaluation mask is empty");
  return acc / (3.0 * static_cast<double>(count));
}

double psnr(const Image& pred, const Image& ref, const Mask* mask) {
  const double err = mse(pred, ref, mask);
  if (err <= 0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / err));
}

double ssim(const Image& pred, const Image& ref) {
  check_pair(pred, ref);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  LANE_CHECK(pred.width >= kWin && pred.height >= kWin,
             "ssim: images must be at least 11x11");

  double kernel[kWin];
  double ksum = 0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    kernel[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  const auto a = luma(pred);
  const auto b = luma(ref);
  const int w = pred.width, h = pred.height;

  double total = 0;
  std::int64_t windows = 0;
  for (int cy = 0; cy + kWin <= h; ++cy) {
    for (int cx = 0; cx + kWin <= w; ++cx) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int dy = 0; dy < kWin; ++dy) {
        for (int dx = 0; dx < kWin; ++dx) {
          const double wgt = kernel[dy] * kernel[dx];
          const double va = a[static_cast<size_t>(cy + dy) * w + cx + dx];
          const double vb = b[static_cast<size_t>(cy + dy) * w + cx + dx];
          mu_a += wgt * va;
          mu_b += wgt * vb;
          aa += wgt * va * va;
          bb += wgt * vb * vb;
          ab += wgt * va * vb;
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double s = ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
                       ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
      total += s;
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace lane
