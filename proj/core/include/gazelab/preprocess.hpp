#pragma once

// Splits a session recording into per-case trajectories in image pixels and
// classifies gaze-absence gaps as blinks or interruptions.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gazelab/ingest.hpp"

namespace gazelab {

/// Gaps strictly longer than this are interruptions; shorter or equal are blinks.
inline constexpr std::int64_t kInterruptionThresholdMs = 500;

struct TimedPoint {
    std::int64_t t_ms = 0;
    double x = 0.0;
    double y = 0.0;

    Point point() const noexcept { return {x, y}; }
    friend bool operator==(const TimedPoint&, const TimedPoint&) = default;
};

struct GazeTrajectory {
    std::string case_id;
    int width = 0;   // image pixels
    int height = 0;
    std::int64_t display_start_ms = 0;
    std::int64_t display_end_ms = 0;
    std::vector<TimedPoint> samples;  // valid, on-image, strictly increasing t

    std::int64_t duration_ms() const noexcept { return display_end_ms - display_start_ms; }
};

enum class GapKind { blink, interruption };

struct GapEvent {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    GapKind kind = GapKind::blink;

    std::int64_t duration_ms() const noexcept { return end_ms - start_ms; }
    friend bool operator==(const GapEvent&, const GapEvent&) = default;
};

GapKind classify_gap(std::int64_t duration_ms);

/// Image -> screen: screen = scale * image + offset.
struct Viewport {
    double scale = 1.0;
    double offset_x = 0.0;
    double offset_y = 0.0;

    Point to_screen(Point image) const noexcept { return {scale * image.x + offset_x, scale * image.y + offset_y}; }
    Point to_image(Point screen) const noexcept {
        return {(screen.x - offset_x) / scale, (screen.y - offset_y) / scale};
    }
};

using ViewportMap = std::map<std::string, Viewport>;

// Viewport CSV: case_id,scale,offset_x,offset_y
ViewportMap parse_viewports(std::istream& in);
void write_viewports(std::ostream& out, const ViewportMap& viewports);

struct CaseTrace {
    GazeTrajectory trajectory;
    std::vector<GapEvent> gaps;
};

/// One trace per recording segment, in segment order. Samples that are
/// invalid or map outside [0,width)x[0,height) contribute gap time; runs of
/// such time coalesce into one GapEvent.
std::vector<CaseTrace> segment_by_case(const GazeRecording& recording, const ViewportMap& viewports,
                                       const std::vector<CaseDefinition>& cases);

}  // namespace gazelab
