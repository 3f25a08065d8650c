#include "gsrec/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace gsrec {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t quantize8(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

uint16_t quantize16(double v) {
    return static_cast<uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

}  // namespace

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    GSREC_CHECK_RUNTIME(fp != nullptr, "cannot open PNG for reading: ", path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    GSREC_CHECK_RUNTIME(png, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        GSREC_CHECK_RUNTIME(false, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        GSREC_CHECK_RUNTIME(false, "PNG decode error: ", path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // little-endian in memory

    png_read_update_info(png, info);
    const int out_channels = png_get_channels(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    GSREC_CHECK_RUNTIME(out_channels == 1 || out_channels == 3,
                        "unsupported PNG channel count ", out_channels, " in ", path);

    const size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<uint8_t> rows(row_bytes * height);
    std::vector<png_bytep> row_ptrs(height);
    for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = rows.data() + y * row_bytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(width), static_cast<int>(height), out_channels);
    const double scale = out_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (png_uint_32 y = 0; y < height; ++y) {
        const uint8_t* row = rows.data() + y * row_bytes;
        for (png_uint_32 x = 0; x < width; ++x) {
            for (int c = 0; c < out_channels; ++c) {
                double v;
                if (out_depth == 16) {
                    uint16_t raw;
                    std::memcpy(&raw, row + (x * out_channels + c) * 2, 2);
                    v = raw * scale;
                } else {
                    v = row[x * out_channels + c] * scale;
                }
                img.at(static_cast<int>(x), static_cast<int>(y), c) = v;
            }
        }
    }
    return img;
}

namespace {

void write_png_impl(const Image& img, const std::string& path, int bit_depth, bool mask) {
    GSREC_CHECK_ARG(img.channels() == 1 || img.channels() == 3,
                    "PNG writer expects 1 or 3 channels, got ", img.channels());
    GSREC_CHECK_ARG(img.width() > 0 && img.height() > 0, "cannot write empty image");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    GSREC_CHECK_RUNTIME(fp != nullptr, "cannot open PNG for writing: ", path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    GSREC_CHECK_RUNTIME(png, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        GSREC_CHECK_RUNTIME(false, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        GSREC_CHECK_RUNTIME(false, "PNG encode error: ", path);
    }

    png_init_io(png, fp.get());
    const int color_type = img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, img.width(), img.height(), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const int w = img.width();
    const int h = img.height();
    const int ch = img.channels();
    if (bit_depth == 1) {
        const size_t row_bytes = (static_cast<size_t>(w) + 7) / 8;
        std::vector<uint8_t> row(row_bytes);
        for (int y = 0; y < h; ++y) {
            std::fill(row.begin(), row.end(), 0);
            for (int x = 0; x < w; ++x) {
                if (img.at(x, y) > 0.5) row[x / 8] |= static_cast<uint8_t>(0x80 >> (x % 8));
            }
            png_write_row(png, row.data());
        }
    } else if (bit_depth == 16) {
        png_set_swap(png);
        std::vector<uint16_t> row(static_cast<size_t>(w) * ch);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < ch; ++c) row[x * ch + c] = quantize16(img.at(x, y, c));
            png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
        }
    } else {
        std::vector<uint8_t> row(static_cast<size_t>(w) * ch);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < ch; ++c)
                    row[x * ch + c] = mask ? (img.at(x, y, c) > 0.5 ? 255 : 0)
                                           : quantize8(img.at(x, y, c));
            png_write_row(png, row.data());
        }
    }

    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void save_png(const Image& img, const std::string& path) { write_png_impl(img, path, 8, false); }

void save_png_gray16(const Image& img, const std::string& path) {
    GSREC_CHECK_ARG(img.channels() == 1, "16-bit PNG writer expects 1 channel");
    write_png_impl(img, path, 16, false);
}

void save_mask_png(const Image& mask, const std::string& path) {
    GSREC_CHECK_ARG(mask.channels() == 1, "mask writer expects 1 channel");
    write_png_impl(mask, path, 1, true);
}

Image load_mask_png(const std::string& path) {
    Image img = load_png(path);
    GSREC_CHECK_RUNTIME(img.channels() == 1, "mask PNG must be grayscale: ", path);
    for (double& v : img.raw()) v = v > 0.5 ? 1.0 : 0.0;
    return img;
}

void save_float_raw(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    GSREC_CHECK_RUNTIME(out.good(), "cannot open raw for writing: ", path);
    std::vector<float> buf(img.size());
    for (size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<float>(img.raw()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    GSREC_CHECK_RUNTIME(out.good(), "short write to ", path);
}

Image load_float_raw(const std::string& path, int width, int height, int channels) {
    std::ifstream in(path, std::ios::binary);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open raw for reading: ", path);
    Image img(width, height, channels);
    std::vector<float> buf(img.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    GSREC_CHECK_RUNTIME(in.gcount() == static_cast<std::streamsize>(buf.size() * sizeof(float)),
                        "raw file too short: ", path);
    for (size_t i = 0; i < img.size(); ++i) img.raw()[i] = buf[i];
    return img;
}

}  // namespace gsrec
