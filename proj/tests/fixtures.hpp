#pragma once

// Small builders shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gazelab/geometry.hpp"
#include "gazelab/ingest.hpp"
#include "gazelab/preprocess.hpp"

namespace fixtures {

inline gazelab::GazeTrajectory trajectory(const std::vector<gazelab::Point>& pts, int width = 100, int height = 100,
                                          std::int64_t dt_ms = 33, std::string id = "c") {
    gazelab::GazeTrajectory t;
    t.case_id = std::move(id);
    t.width = width;
    t.height = height;
    t.display_start_ms = 0;
    std::int64_t ts = 0;
    for (const auto& p : pts) {
        t.samples.push_back({ts, p.x, p.y});
        ts += dt_ms;
    }
    t.display_end_ms = ts + dt_ms;
    return t;
}

inline gazelab::Bitmap disc_mask(int w, int h, double cx, double cy, double r) {
    gazelab::Bitmap m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) <= r) m.set(x, y);
    return m;
}

inline gazelab::CaseDefinition make_case(std::string id, gazelab::CaseClass cls, int w = 64, int h = 64) {
    gazelab::CaseDefinition c;
    c.case_id = std::move(id);
    c.case_class = cls;
    c.width = w;
    c.height = h;
    c.lung_mask = gazelab::Bitmap(w, h, true);
    if (cls == gazelab::CaseClass::nodule) {
        c.subtlety = 3;
        c.nodule = gazelab::Disc{w / 2.0, h / 2.0, 4.0};
    }
    c.mask_path = "masks/" + c.case_id + ".pgm";
    return c;
}

// Binary PGM from raw 8-bit pixels.
inline std::string pgm(int w, int h, const std::vector<std::uint8_t>& px, int maxval = 255) {
    std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
    s.append(px.begin(), px.end());
    return s;
}

// Minimum accumulated Euclidean cost over every monotone alignment path,
// enumerated explicitly. Exponential; only for short sequences.
inline double dtw_bruteforce(const std::vector<gazelab::Point>& a, const std::vector<gazelab::Point>& b) {
    double best = INFINITY;
    const auto walk = [&](auto&& self, std::size_t i, std::size_t j, double acc) -> void {
        acc += std::hypot(a[i].x - b[j].x, a[i].y - b[j].y);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size()) self(self, i + 1, j, acc);
        if (j + 1 < b.size()) self(self, i, j + 1, acc);
        if (i + 1 < a.size() && j + 1 < b.size()) self(self, i + 1, j + 1, acc);
    };
    walk(walk, 0, 0, 0.0);
    return best;
}

// Lung pixels whose centre lies within r of any point, by exhaustive scan.
inline std::size_t coverage_bruteforce(const gazelab::Bitmap& mask, const std::vector<gazelab::Point>& pts, double r) {
    std::size_t n = 0;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.at(x, y)) continue;
            for (const auto& p : pts)
                if (std::hypot(x + 0.5 - p.x, y + 0.5 - p.y) <= r) {
                    ++n;
                    break;
                }
        }
    return n;
}

}  // namespace fixtures
