#include "gsrec/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gsrec {

double Image::sample_bilinear(double x, double y, int c) const {
    const double fx = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    const double fy = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double ax = fx - x0;
    const double ay = fy - y0;
    const double top = (1.0 - ax) * at(x0, y0, c) + ax * at(x1, y0, c);
    const double bot = (1.0 - ax) * at(x0, y1, c) + ax * at(x1, y1, c);
    return (1.0 - ay) * top + ay * bot;
}

Image Image::clamped01() const {
    Image out = *this;
    for (double& v : out.raw()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Image luminance(const Image& img) {
    if (img.channels() == 1) return img;
    GSREC_CHECK_ARG(img.channels() == 3, "luminance expects 1 or 3 channels, got ",
                    img.channels());
    Image out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                           0.114 * img.at(x, y, 2);
        }
    }
    return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
    GSREC_CHECK_ARG(a.same_shape(b), "image shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a.raw()[i] - b.raw()[i]);
    return a.size() ? acc / static_cast<double>(a.size()) : 0.0;
}

double mean_squared_diff(const Image& a, const Image& b) {
    GSREC_CHECK_ARG(a.same_shape(b), "image shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.raw()[i] - b.raw()[i];
        acc += d * d;
    }
    return a.size() ? acc / static_cast<double>(a.size()) : 0.0;
}

bool images_identical(const Image& a, const Image& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int r = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<double> kernel(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        kernel[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + r];
    }
    for (double& v : kernel) v /= sum;

    const int w = img.width(), h = img.height(), ch = img.channels();
    Image tmp = Image::zeros_like(img);
    Image out = Image::zeros_like(img);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += kernel[i + r] * img.at(std::clamp(x + i, 0, w - 1), y, c);
                tmp.at(x, y, c) = acc;
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += kernel[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
                out.at(x, y, c) = acc;
            }
    return out;
}

}  // namespace gsrec
