#include "gcl/synth/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace gcl::synth {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t to_byte(double v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

void write_png(const std::string& path, int H, int W, int channels,
               const std::vector<uint8_t>& interleaved) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng write error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(H));
    for (int y = 0; y < H; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(interleaved.data() + static_cast<size_t>(y) * W * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Decodes any PNG to 8-bit RGB rows.
void read_png(const std::string& path, int& H, int& W, std::vector<uint8_t>& rgb) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open for reading: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("not a readable PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    H = static_cast<int>(png_get_image_height(png, info));
    W = static_cast<int>(png_get_image_width(png, info));
    rgb.assign(static_cast<size_t>(H) * W * 3, 0);
    std::vector<png_bytep> rows(static_cast<size_t>(H));
    for (int y = 0; y < H; ++y)
        rows[static_cast<size_t>(y)] = rgb.data() + static_cast<size_t>(y) * W * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png_rgb(const std::string& path, const Tensor& img) {
    if (img.dim() != 3 || img.shape(0) != 3) throw std::runtime_error("write_png_rgb expects [3,H,W]");
    const int H = img.shape(1), W = img.shape(2);
    const int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<uint8_t> bytes(static_cast<size_t>(hw) * 3);
    for (int64_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c) bytes[static_cast<size_t>(p * 3 + c)] = to_byte(img[c * hw + p]);
    write_png(path, H, W, 3, bytes);
}

void write_png_gray(const std::string& path, const Tensor& img) {
    int H, W;
    if (img.dim() == 3 && img.shape(0) == 1) {
        H = img.shape(1);
        W = img.shape(2);
    } else if (img.dim() == 2) {
        H = img.shape(0);
        W = img.shape(1);
    } else {
        throw std::runtime_error("write_png_gray expects [1,H,W] or [H,W]");
    }
    const int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<uint8_t> bytes(static_cast<size_t>(hw));
    for (int64_t p = 0; p < hw; ++p) bytes[static_cast<size_t>(p)] = to_byte(img[p]);
    write_png(path, H, W, 1, bytes);
}

Tensor read_png_rgb(const std::string& path) {
    int H, W;
    std::vector<uint8_t> rgb;
    read_png(path, H, W, rgb);
    Tensor img({3, H, W});
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int64_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c) img[c * hw + p] = rgb[static_cast<size_t>(p * 3 + c)] / 255.0;
    return img;
}

Tensor read_png_gray(const std::string& path) {
    int H, W;
    std::vector<uint8_t> rgb;
    read_png(path, H, W, rgb);
    Tensor img({1, H, W});
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int64_t p = 0; p < hw; ++p) {
        const double r = rgb[static_cast<size_t>(p * 3)] / 255.0;
        const double g = rgb[static_cast<size_t>(p * 3 + 1)] / 255.0;
        const double b = rgb[static_cast<size_t>(p * 3 + 2)] / 255.0;
        img[p] = (r + g + b) / 3.0;
    }
    return img;
}

}  // namespace gcl::synth
