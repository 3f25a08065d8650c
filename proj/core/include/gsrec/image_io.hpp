#pragma once

#include <string>

#include "gsrec/image.hpp"

namespace gsrec {

/// Reads an 8/16-bit gray or RGB(A) PNG into [0,1]; alpha is dropped.
Image load_png(const std::string& path);

/// Writes a 1- or 3-channel image as an 8-bit PNG, clamping to [0,1].
void save_png(const Image& img, const std::string& path);

/// Writes a 1-channel image as a 16-bit gray PNG, clamping to [0,1].
void save_png_gray16(const Image& img, const std::string& path);

/// Binary masks as 1-bit gray PNGs; nonzero pixels are foreground.
void save_mask_png(const Image& mask, const std::string& path);
Image load_mask_png(const std::string& path);

/// Little-endian float32 raster with no header; shape comes from the caller
/// (typically a JSON sidecar).
void save_float_raw(const Image& img, const std::string& path);
Image load_float_raw(const std::string& path, int width, int height, int channels = 1);

}  // namespace gsrec
