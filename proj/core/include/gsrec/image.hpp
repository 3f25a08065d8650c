#pragma once

#include <cstdint>
#include <vector>

#include "gsrec/common.hpp"

namespace gsrec {

/// Dense row-major image, interleaved channels, double precision.
/// Color images use 3 channels in [0,1]; masks and depth use 1 channel.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {
        GSREC_CHECK_ARG(width >= 0 && height >= 0 && channels >= 1,
                        "invalid image shape ", width, "x", height, "x", channels);
    }

    static Image zeros_like(const Image& other) {
        return Image(other.width_, other.height_, other.channels_, 0.0);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_ &&
               channels_ == other.channels_;
    }

    double& at(int x, int y, int c = 0) {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int x, int y, int c = 0) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    bool contains(int x, int y) const {
        return x >= 0 && x < width_ && y >= 0 && y < height_;
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    /// Bilinear sample of channel c at continuous pixel coordinates; edges clamp.
    double sample_bilinear(double x, double y, int c = 0) const;

    Image clamped01() const;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Per-pixel luminance (Rec.601 weights) of a 3-channel image; identity for 1-channel.
Image luminance(const Image& img);

/// Mean absolute difference over all pixels and channels.
double mean_abs_diff(const Image& a, const Image& b);

/// Mean squared difference over all pixels and channels.
double mean_squared_diff(const Image& a, const Image& b);

/// True if every value matches bit-for-bit and shapes agree.
bool images_identical(const Image& a, const Image& b);

/// Separable Gaussian blur with edge clamping; sigma <= 0 returns the input.
Image gaussian_blur(const Image& img, double sigma);

}  // namespace gsrec
