#pragma once

#include "gsrec/image.hpp"

namespace gsrec {

/// 10 log10(1 / MSE) over [0,1] images; identical inputs report the 99 dB cap.
double psnr(const Image& a, const Image& b);

/// PSNR restricted to mask pixels (1-channel mask, nonzero = included).
double psnr_masked(const Image& a, const Image& b, const Image& mask);

/// Mean SSIM, Gaussian window, k1=0.01 / k2=0.03, dynamic range 1.
double ssim(const Image& a, const Image& b, int window = 11, double sigma = 1.5);

/// Variance of the 4-neighbor Laplacian of the luminance; a cheap
/// high-frequency energy proxy for the anti-aliasing checks.
double laplacian_variance(const Image& img);

/// Box-average downsample by an integer factor (dimensions must divide).
Image downsample_box(const Image& img, int factor);

}  // namespace gsrec
