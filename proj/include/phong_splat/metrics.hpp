#pragma once

#include "phong_splat/image.hpp"

namespace phong_splat {

inline constexpr double kPsnrIdentical = 99.0;

// 10 log10(1 / MSE) for a unit dynamic range; identical images give 99 dB.
double psnr(const Image& a, const Image& b);

double mse(const Image& a, const Image& b);

// Mean SSIM, 11x11 Gaussian window (sigma 1.5), C1 = 1e-4, C2 = 9e-4.
double ssim(const Image& a, const Image& b);

}  // namespace phong_splat
