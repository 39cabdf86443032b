#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gazelab::raster {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, one byte per pixel
};

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, RGB triplets

    void put(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
};

/// Decode an 8-bit grayscale raster: binary PGM (P5, maxval <= 255) or PNG.
/// Throws ValidationError on unknown magic, truncation or unsupported depth.
GrayImage decode_gray8(std::string_view bytes);

std::string encode_pgm8(const GrayImage& image);

/// Binary PGM with maxval 65535 (big-endian samples).
std::string encode_pgm16(int width, int height, std::span<const std::uint16_t> samples);

std::string encode_png(const GrayImage& image);
std::string encode_png(const RgbImage& image);

}  // namespace gazelab::raster
