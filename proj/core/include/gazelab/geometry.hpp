#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gazelab {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Disc in image pixels, used for nodule ground truth and areas of interest.
struct Disc {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;

    bool contains(Point p, double slack = 0.0) const noexcept {
        const double dx = p.x - cx;
        const double dy = p.y - cy;
        const double r = radius + slack;
        return dx * dx + dy * dy <= r * r;
    }

    friend bool operator==(const Disc&, const Disc&) = default;
};

/// Row-major binary raster. `true` marks a lung pixel when used as a mask.
class Bitmap {
public:
    Bitmap() = default;
    Bitmap(int width, int height, bool fill = false)
        : width_(width), height_(height),
          bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return bits_.empty(); }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto b : bits_) n += b;
        return n;
    }

    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    friend bool operator==(const Bitmap&, const Bitmap&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Centre of pixel (px, py) lies within `radius` of `p` (inclusive).
inline bool pixel_within(int px, int py, Point p, double radius) noexcept {
    const double dx = (px + 0.5) - p.x;
    const double dy = (py + 0.5) - p.y;
    return dx * dx + dy * dy <= radius * radius;
}

}  // namespace gazelab
