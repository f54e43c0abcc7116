#pragma once

#include <optional>

#include "lane/image.hpp"

namespace lane {

// Peak signal-to-noise ratio in dB over [0,1] images: 10*log10(1/MSE), MSE
// taken over all channels of the (optionally masked) pixels.  Identical
// inputs are capped at 100 dB.
double psnr(const Image& pred, const Image& ref, const Mask* mask = nullptr);

// Mean local SSIM over the BT.601 luma channel with an 11x11 Gaussian
// window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.  Images must be at
// least 11x11.
double ssim(const Image& pred, const Image& ref);

double mse(const Image& pred, const Image& ref, const Mask* mask = nullptr);

}  // namespace lane
