#include "gazelab/raster.hpp"

#include <png.h>

#include <cctype>
#include <charconv>
#include <cstring>

#include "gazelab/error.hpp"

namespace gazelab::raster {
namespace {

constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool starts_with_png(std::string_view bytes) {
    return bytes.size() >= sizeof kPngMagic &&
           std::memcmp(bytes.data(), kPngMagic, sizeof kPngMagic) == 0;
}

// Reads one whitespace-delimited header integer, skipping '#' comments.
long read_pgm_field(std::string_view bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    long value = 0;
    const auto* first = bytes.data() + pos;
    const auto* last = bytes.data() + bytes.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) throw ValidationError("pgm: malformed header");
    pos += static_cast<std::size_t>(ptr - first);
    return value;
}

GrayImage decode_pgm(std::string_view bytes) {
    std::size_t pos = 2;
    const long width = read_pgm_field(bytes, pos);
    const long height = read_pgm_field(bytes, pos);
    const long maxval = read_pgm_field(bytes, pos);
    if (width <= 0 || height <= 0) throw ValidationError("pgm: non-positive dimensions");
    if (maxval > 255) throw ValidationError("pgm: unsupported depth (maxval " + std::to_string(maxval) + ", expected <= 255)");
    if (maxval <= 0) throw ValidationError("pgm: invalid maxval");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw ValidationError("pgm: truncated header");
    ++pos;  // single whitespace before raster

    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - pos < n)
        throw ValidationError("pgm: truncated payload (expected " + std::to_string(n) + " bytes, got " +
                              std::to_string(bytes.size() - pos) + ")");
    GrayImage img{static_cast<int>(width), static_cast<int>(height), {}};
    img.pixels.assign(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos),
                      reinterpret_cast<const std::uint8_t*>(bytes.data() + pos + n));
    return img;
}

GrayImage decode_png(std::string_view bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw ValidationError("png: " + msg);
    }
    if (image.format != PNG_FORMAT_GRAY) {
        png_image_free(&image);
        throw ValidationError("png: unsupported depth or colour type (expected 8-bit grayscale)");
    }
    GrayImage img{static_cast<int>(image.width), static_cast<int>(image.height), {}};
    img.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw ValidationError("png: truncated or corrupt payload: " + msg);
    }
    return img;
}

std::string encode_png_raw(int width, int height, std::uint32_t format, const void* pixels) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr))
        throw ValidationError(std::string("png encode: ") + image.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr))
        throw ValidationError(std::string("png encode: ") + image.message);
    out.resize(size);
    return out;
}

}  // namespace

GrayImage decode_gray8(std::string_view bytes) {
    if (starts_with_png(bytes)) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
    throw ValidationError("mask: unsupported format magic (expected binary PGM 'P5' or PNG)");
}

std::string encode_pgm8(const GrayImage& image) {
    std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    return out;
}

std::string encode_pgm16(int width, int height, std::span<const std::uint16_t> samples) {
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    out.reserve(out.size() + samples.size() * 2);
    for (auto s : samples) {
        out.push_back(static_cast<char>(s >> 8));
        out.push_back(static_cast<char>(s & 0xff));
    }
    return out;
}

std::string encode_png(const GrayImage& image) {
    return encode_png_raw(image.width, image.height, PNG_FORMAT_GRAY, image.pixels.data());
}

std::string encode_png(const RgbImage& image) {
    return encode_png_raw(image.width, image.height, PNG_FORMAT_RGB, image.pixels.data());
}

}  // namespace gazelab::raster
