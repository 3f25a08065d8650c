#pragma once

#include "gsrec/image.hpp"

namespace gsrec {

struct LossConfig {
    double lambda = 0.2;  // SSIM weight; L1 gets (1 - lambda)
    int ssim_window = 11;
    double ssim_sigma = 1.5;

    void validate() const {
        GSREC_CHECK_ARG(lambda >= 0.0 && lambda <= 1.0, "lambda out of [0,1]: ", lambda);
        GSREC_CHECK_ARG(ssim_window >= 3 && ssim_window % 2 == 1,
                        "ssim window must be odd and >= 3, got ", ssim_window);
        GSREC_CHECK_ARG(ssim_sigma > 0.0, "ssim sigma must be positive");
    }
};

struct LossResult {
    double value = 0.0;
    Image grad;  // dL/d(rendered), same shape as the inputs
};

/// (1-lambda) * mean|r-t| + lambda * (1 - SSIM(r,t)), with the exact gradient
/// for both terms. An optional mask restricts which pixels enter the means.
LossResult reconstruction_loss(const Image& rendered, const Image& target, const Image* mask,
                               const LossConfig& cfg);

/// Mean SSIM with a Gaussian window; local statistics renormalize at the
/// image border so constant images score exactly by the closed form.
double ssim_mean(const Image& a, const Image& b, int window, double sigma);

}  // namespace gsrec
