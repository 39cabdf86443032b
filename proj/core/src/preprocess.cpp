#include "gazelab/preprocess.hpp"

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "csv.hpp"
#include "gazelab/error.hpp"

namespace gazelab {

GapKind classify_gap(std::int64_t duration_ms) {
    return duration_ms > kInterruptionThresholdMs ? GapKind::interruption : GapKind::blink;
}

namespace {
constexpr std::string_view kViewportHeader = "case_id,scale,offset_x,offset_y";
}

ViewportMap parse_viewports(std::istream& in) {
    csv::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw ParseError(1, "missing header (expected '" + std::string(kViewportHeader) + "')");
    csv::expect_header(line, kViewportHeader, reader.line_no());

    ViewportMap out;
    while (reader.next(line)) {
        const auto ln = reader.line_no();
        const auto f = csv::split(line);
        if (f.size() != 4) throw ParseError(ln, "expected 4 fields, got " + std::to_string(f.size()));
        const std::string id(csv::trim(f[0]));
        Viewport v{csv::to_double(f[1], ln, "scale"), csv::to_double(f[2], ln, "offset_x"),
                   csv::to_double(f[3], ln, "offset_y")};
        if (!(v.scale > 0.0)) throw ParseError(ln, "scale must be positive");
        if (!out.emplace(id, v).second) throw ParseError(ln, "duplicate viewport for case '" + id + "'");
    }
    return out;
}

void write_viewports(std::ostream& out, const ViewportMap& viewports) {
    out << kViewportHeader << '\n';
    for (const auto& [id, v] : viewports)
        out << id << ',' << format_double(v.scale) << ',' << format_double(v.offset_x) << ','
            << format_double(v.offset_y) << '\n';
}

std::vector<CaseTrace> segment_by_case(const GazeRecording& recording, const ViewportMap& viewports,
                                       const std::vector<CaseDefinition>& cases) {
    std::unordered_map<std::string, const CaseDefinition*> by_id;
    for (const auto& c : cases) by_id.emplace(c.case_id, &c);

    std::vector<CaseTrace> out;
    out.reserve(recording.segments.size());

    const auto& samples = recording.samples;
    auto it = samples.begin();
    for (const auto& seg : recording.segments) {
        const auto c = by_id.find(seg.case_id);
        if (c == by_id.end()) throw ValidationError("segment references unknown case '" + seg.case_id + "'");
        const auto vp = viewports.find(seg.case_id);
        if (vp == viewports.end()) throw ValidationError("no viewport for case '" + seg.case_id + "'");
        const auto& def = *c->second;

        CaseTrace trace;
        auto& traj = trace.trajectory;
        traj.case_id = seg.case_id;
        traj.width = def.width;
        traj.height = def.height;
        traj.display_start_ms = seg.display_start_ms;
        traj.display_end_ms = seg.display_end_ms;

        it = std::lower_bound(it, samples.end(), seg.display_start_ms,
                              [](const GazeSample& s, std::int64_t t) { return s.timestamp_ms < t; });

        bool gap_open = false;
        std::int64_t gap_start = 0;
        bool any_sample = false;
        const auto open_gap = [&](std::int64_t t) {
            gap_open = true;
            gap_start = t;
        };
        const auto close_gap = [&](std::int64_t end) {
            if (gap_open && end > gap_start) trace.gaps.push_back({gap_start, end, classify_gap(end - gap_start)});
            gap_open = false;
        };

        for (; it != samples.end() && it->timestamp_ms < seg.display_end_ms; ++it) {
            bool on_image = false;
            Point p{};
            if (it->valid) {
                p = vp->second.to_image({it->x, it->y});
                on_image = p.x >= 0.0 && p.x < def.width && p.y >= 0.0 && p.y < def.height;
            }
            if (!any_sample && !on_image) open_gap(seg.display_start_ms);  // display opens off-scan
            any_sample = true;
            if (on_image) {
                close_gap(it->timestamp_ms);
                traj.samples.push_back({it->timestamp_ms, p.x, p.y});
            } else if (!gap_open) {
                open_gap(it->timestamp_ms);
            }
        }
        if (!any_sample) open_gap(seg.display_start_ms);
        close_gap(seg.display_end_ms);
        out.push_back(std::move(trace));
    }
    return out;
}

}  // namespace gazelab
