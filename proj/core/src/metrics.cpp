#include "gsrec/metrics.hpp"

#include <cmath>

#include "gsrec/loss.hpp"

namespace gsrec {

namespace {
constexpr double kPsnrCap = 99.0;
}

double psnr(const Image& a, const Image& b) {
    GSREC_CHECK_ARG(a.same_shape(b), "psnr inputs must share a shape");
    const double mse = mean_squared_diff(a, b);
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr_masked(const Image& a, const Image& b, const Image& mask) {
    GSREC_CHECK_ARG(a.same_shape(b), "psnr inputs must share a shape");
    GSREC_CHECK_ARG(mask.width() == a.width() && mask.height() == a.height() &&
                        mask.channels() == 1,
                    "mask shape mismatch");
    double acc = 0.0;
    double count = 0.0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (mask.at(x, y) <= 0.5) continue;
            for (int c = 0; c < a.channels(); ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                acc += d * d;
                count += 1.0;
            }
        }
    }
    if (count == 0.0) return kPsnrCap;
    const double mse = acc / count;
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b, int window, double sigma) {
    return ssim_mean(a, b, window, sigma);
}

double laplacian_variance(const Image& img) {
    const Image lum = luminance(img);
    const int w = lum.width(), h = lum.height();
    double sum = 0.0, sum2 = 0.0;
    double n = 0.0;
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const double v = 4.0 * lum.at(x, y) - lum.at(x - 1, y) - lum.at(x + 1, y) -
                             lum.at(x, y - 1) - lum.at(x, y + 1);
            sum += v;
            sum2 += v * v;
            n += 1.0;
        }
    }
    if (n == 0.0) return 0.0;
    const double mean = sum / n;
    return sum2 / n - mean * mean;
}

Image downsample_box(const Image& img, int factor) {
    GSREC_CHECK_ARG(factor >= 1, "downsample factor must be >= 1");
    GSREC_CHECK_ARG(img.width() % factor == 0 && img.height() % factor == 0,
                    "image dimensions must divide the downsample factor");
    Image out(img.width() / factor, img.height() / factor, img.channels());
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = acc * inv;
            }
        }
    }
    return out;
}

}  // namespace gsrec
