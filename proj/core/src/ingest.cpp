#include "gazelab/ingest.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "gazelab/error.hpp"
#include "gazelab/raster.hpp"

namespace gazelab {

using nlohmann::json;

std::string_view to_string(CaseClass c) noexcept {
    switch (c) {
        case CaseClass::nodule: return "nodule";
        case CaseClass::normal: return "normal";
        case CaseClass::distractor: return "distractor";
    }
    return "normal";
}

std::optional<CaseClass> case_class_from_string(std::string_view s) noexcept {
    if (s == "nodule") return CaseClass::nodule;
    if (s == "normal") return CaseClass::normal;
    if (s == "distractor") return CaseClass::distractor;
    return std::nullopt;
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

// ---- gaze log --------------------------------------------------------------

namespace {

constexpr std::string_view kGazeHeader = "t_ms,lx,ly,lvalid,rx,ry,rvalid";
constexpr std::size_t kGazeColumns = 7;

bool parse_flag(std::string_view field, std::size_t line, std::string_view name) {
    field = csv::trim(field);
    if (field == "0") return false;
    if (field == "1") return true;
    throw ParseError(line, "field '" + std::string(name) + "': expected 0 or 1, got '" + std::string(field) + "'");
}

}  // namespace

GazeRecording parse_gaze_log(std::istream& in, std::string subject_id, int session_index) {
    GazeRecording rec;
    rec.subject_id = std::move(subject_id);
    rec.session_index = session_index;

    csv::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw ParseError(1, "missing header (expected '" + std::string(kGazeHeader) + "')");

    const auto header = csv::split(line);
    if (header.size() < kGazeColumns) csv::expect_header(line, kGazeHeader, reader.line_no());
    {
        std::string first;
        for (std::size_t i = 0; i < kGazeColumns; ++i) {
            if (i) first += ',';
            first += csv::trim(header[i]);
        }
        csv::expect_header(first, kGazeHeader, reader.line_no());
    }
    for (std::size_t i = kGazeColumns; i < header.size(); ++i) {
        const auto name = csv::trim(header[i]);
        if (name.empty()) throw ParseError(reader.line_no(), "empty extra column name");
        rec.extra_columns.emplace_back(name);
    }
    const std::size_t ncols = header.size();

    std::int64_t prev_t = -1;
    while (reader.next(line)) {
        const auto ln = reader.line_no();
        const auto f = csv::split(line);
        if (f.size() != ncols)
            throw ParseError(ln, "expected " + std::to_string(ncols) + " fields, got " + std::to_string(f.size()));

        const auto t = csv::to_int(f[0], ln, "t_ms");
        if (t < 0) throw ParseError(ln, "negative timestamp");
        if (t <= prev_t)
            throw ParseError(ln, "non-monotone timestamp " + std::to_string(t) + " after " + std::to_string(prev_t));
        prev_t = t;

        const bool lv = parse_flag(f[3], ln, "lvalid");
        const bool rv = parse_flag(f[6], ln, "rvalid");
        GazeSample s{t, 0.0, 0.0, lv || rv};
        if (lv || rv) {
            const auto read_eye = [&](std::size_t ix, std::size_t iy, const char* nx, const char* ny) {
                const Point p{csv::to_double(f[ix], ln, nx), csv::to_double(f[iy], ln, ny)};
                if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ParseError(ln, "non-finite gaze coordinate");
                return p;
            };
            if (lv && rv) {
                const Point l = read_eye(1, 2, "lx", "ly");
                const Point r = read_eye(4, 5, "rx", "ry");
                s.x = 0.5 * (l.x + r.x);
                s.y = 0.5 * (l.y + r.y);
            } else if (lv) {
                const Point l = read_eye(1, 2, "lx", "ly");
                s.x = l.x;
                s.y = l.y;
            } else {
                const Point r = read_eye(4, 5, "rx", "ry");
                s.x = r.x;
                s.y = r.y;
            }
        }
        rec.samples.push_back(s);
        if (!rec.extra_columns.empty()) {
            std::vector<std::string> row;
            row.reserve(ncols - kGazeColumns);
            for (std::size_t i = kGazeColumns; i < ncols; ++i) row.emplace_back(csv::trim(f[i]));
            rec.extras.push_back(std::move(row));
        }
    }
    return rec;
}

void write_gaze_log(std::ostream& out, const GazeRecording& rec) {
    out << kGazeHeader;
    for (const auto& c : rec.extra_columns) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        const auto& s = rec.samples[i];
        out << s.timestamp_ms << ',';
        if (s.valid) {
            const auto x = format_double(s.x);
            const auto y = format_double(s.y);
            out << x << ',' << y << ",1," << x << ',' << y << ",1";
        } else {
            out << "0,0,0,0,0,0";
        }
        if (!rec.extra_columns.empty()) {
            for (const auto& e : rec.extras.at(i)) out << ',' << e;
        }
        out << '\n';
    }
}

// ---- segments --------------------------------------------------------------

namespace {
constexpr std::string_view kSegmentHeader = "case_id,start_ms,end_ms";
}

std::vector<Segment> parse_segments(std::istream& in) {
    csv::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw ParseError(1, "missing header (expected '" + std::string(kSegmentHeader) + "')");
    csv::expect_header(line, kSegmentHeader, reader.line_no());

    std::vector<Segment> out;
    while (reader.next(line)) {
        const auto ln = reader.line_no();
        const auto f = csv::split(line);
        if (f.size() != 3) throw ParseError(ln, "expected 3 fields, got " + std::to_string(f.size()));
        Segment s{std::string(csv::trim(f[0])), csv::to_int(f[1], ln, "start_ms"), csv::to_int(f[2], ln, "end_ms")};
        if (s.case_id.empty()) throw ParseError(ln, "empty case_id");
        if (s.display_end_ms <= s.display_start_ms) throw ParseError(ln, "segment end_ms must exceed start_ms");
        if (!out.empty() && s.display_start_ms < out.back().display_end_ms)
            throw ParseError(ln, "segment overlaps or precedes the previous segment");
        out.push_back(std::move(s));
    }
    return out;
}

void write_segments(std::ostream& out, const std::vector<Segment>& segments) {
    out << kSegmentHeader << '\n';
    for (const auto& s : segments) out << s.case_id << ',' << s.display_start_ms << ',' << s.display_end_ms << '\n';
}

void attach_segments(GazeRecording& rec, std::vector<Segment> segments) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].display_end_ms <= segments[i].display_start_ms)
            throw ValidationError("segment '" + segments[i].case_id + "' has end <= start");
        if (i > 0 && segments[i].display_start_ms < segments[i - 1].display_end_ms)
            throw ValidationError("segment '" + segments[i].case_id + "' overlaps its predecessor");
    }
    rec.segments = std::move(segments);
}

// ---- masks -----------------------------------------------------------------

Bitmap parse_mask(std::string_view bytes) {
    const auto img = raster::decode_gray8(bytes);
    Bitmap bm(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.pixels[static_cast<std::size_t>(y) * img.width + x] > 0) bm.set(x, y);
    return bm;
}

Bitmap parse_mask(std::istream& in) {
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_mask(std::string_view(bytes));
}

std::string write_mask(const Bitmap& mask) {
    raster::GrayImage img{mask.width(), mask.height(), {}};
    img.pixels.reserve(mask.bits().size());
    for (auto b : mask.bits()) img.pixels.push_back(b ? 255 : 0);
    return raster::encode_pgm8(img);
}

MaskLoader file_mask_loader(std::string base_dir) {
    return [base = std::move(base_dir)](const std::string& mask_path) {
        std::filesystem::path p(mask_path);
        if (p.is_relative() && !base.empty()) p = std::filesystem::path(base) / p;
        std::ifstream f(p, std::ios::binary);
        if (!f) throw IoError("cannot open mask file '" + p.string() + "'");
        try {
            return parse_mask(f);
        } catch (const ValidationError& e) {
            throw ValidationError(p.string() + ": " + e.what());
        }
    };
}

// ---- manifest --------------------------------------------------------------

void validate_case(const CaseDefinition& c) {
    const std::string who = "case '" + c.case_id + "': ";
    if (c.case_id.empty()) throw ValidationError("case with empty case_id");
    if (c.width <= 0 || c.height <= 0) throw ValidationError(who + "non-positive image dimensions");
    if (c.case_class == CaseClass::nodule && !c.nodule) throw ValidationError(who + "nodule case missing disc");
    if (c.case_class != CaseClass::nodule && c.nodule)
        throw ValidationError(who + std::string(to_string(c.case_class)) + " case must not carry a nodule disc");
    if (c.nodule && !(c.nodule->radius > 0.0)) throw ValidationError(who + "nodule radius must be positive");
    if (c.subtlety && (*c.subtlety < 1 || *c.subtlety > 5)) throw ValidationError(who + "subtlety outside 1..5");
    if (c.lung_mask.width() != c.width || c.lung_mask.height() != c.height)
        throw ValidationError(who + "mask dimension mismatch (mask " + std::to_string(c.lung_mask.width()) + "x" +
                              std::to_string(c.lung_mask.height()) + ", declared " + std::to_string(c.width) + "x" +
                              std::to_string(c.height) + ")");
    if (c.lung_mask.count() == 0) throw ValidationError(who + "lung mask has no lung pixels");
}

std::vector<CaseDefinition> parse_case_manifest(std::istream& in, const MaskLoader& load_mask) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("manifest: invalid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw ValidationError("manifest: top level must be an array");

    std::vector<CaseDefinition> cases;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& o = doc[i];
        const std::string where = "manifest entry " + std::to_string(i) + ": ";
        if (!o.is_object()) throw ValidationError(where + "expected object");
        try {
            CaseDefinition c;
            c.case_id = o.at("case_id").get<std::string>();
            const auto cls = o.at("class").get<std::string>();
            const auto parsed = case_class_from_string(cls);
            if (!parsed) throw ValidationError("unknown class '" + cls + "'");
            c.case_class = *parsed;
            if (o.contains("subtlety") && !o["subtlety"].is_null()) c.subtlety = o["subtlety"].get<int>();
            c.width = o.at("width").get<int>();
            c.height = o.at("height").get<int>();
            c.mask_path = o.at("mask_path").get<std::string>();
            if (o.contains("finding") && !o["finding"].is_null()) c.finding = o["finding"].get<std::string>();
            if (o.contains("nodule") && !o["nodule"].is_null()) {
                const auto& n = o["nodule"];
                c.nodule = Disc{n.at("cx").get<double>(), n.at("cy").get<double>(), n.at("r").get<double>()};
            }
            if (!seen.insert(c.case_id).second) throw ValidationError("duplicate case_id '" + c.case_id + "'");
            // Cheap invariants first so a bad entry fails before any mask I/O.
            if (c.case_class == CaseClass::nodule && !c.nodule)
                throw ValidationError("case '" + c.case_id + "': nodule case missing disc");
            if (c.case_class != CaseClass::nodule && c.nodule)
                throw ValidationError("case '" + c.case_id + "': " + cls + " case must not carry a nodule disc");
            c.lung_mask = load_mask(c.mask_path);
            validate_case(c);
            cases.push_back(std::move(c));
        } catch (const json::exception& e) {
            throw ValidationError(where + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
    }
    return cases;
}

std::string write_case_manifest(const std::vector<CaseDefinition>& cases) {
    json doc = json::array();
    for (const auto& c : cases) {
        json o = json::object();
        o["case_id"] = c.case_id;
        o["class"] = std::string(to_string(c.case_class));
        if (c.subtlety) o["subtlety"] = *c.subtlety;
        o["width"] = c.width;
        o["height"] = c.height;
        o["mask_path"] = c.mask_path;
        if (!c.finding.empty()) o["finding"] = c.finding;
        if (c.nodule) o["nodule"] = {{"cx", c.nodule->cx}, {"cy", c.nodule->cy}, {"r", c.nodule->radius}};
        doc.push_back(std::move(o));
    }
    return doc.dump(2) + "\n";
}

// ---- annotations -----------------------------------------------------------

namespace {
constexpr std::string_view kAnnotationHeader = "case_id,x,y,mark_timestamp_ms";
}

AnnotationSet parse_annotations(std::istream& in, const std::map<std::string, CaseBounds>& bounds) {
    csv::LineReader reader(in);
    std::string line;
    AnnotationSet out;
    if (!reader.next(line)) return out;  // an empty file is an empty set
    csv::expect_header(line, kAnnotationHeader, reader.line_no());

    while (reader.next(line)) {
        const auto ln = reader.line_no();
        const auto f = csv::split(line);
        if (f.size() != 4) throw ParseError(ln, "expected 4 fields, got " + std::to_string(f.size()));
        const std::string id(csv::trim(f[0]));
        const auto it = bounds.find(id);
        if (it == bounds.end()) throw ParseError(ln, "unknown case_id '" + id + "'");
        Mark m{{csv::to_double(f[1], ln, "x"), csv::to_double(f[2], ln, "y")}, csv::to_int(f[3], ln, "mark_timestamp_ms")};
        const auto& b = it->second;
        if (!(m.point.x >= 0.0 && m.point.x < b.width && m.point.y >= 0.0 && m.point.y < b.height))
            throw ParseError(ln, "mark (" + format_double(m.point.x) + ", " + format_double(m.point.y) +
                                     ") outside image bounds of case '" + id + "'");
        out[id].push_back(m);
    }
    return out;
}

AnnotationSet parse_annotations(std::istream& in, const std::vector<CaseDefinition>& cases) {
    std::map<std::string, CaseBounds> bounds;
    for (const auto& c : cases) bounds[c.case_id] = {c.width, c.height};
    return parse_annotations(in, bounds);
}

void write_annotations(std::ostream& out, const AnnotationSet& marks) {
    out << kAnnotationHeader << '\n';
    for (const auto& [id, list] : marks)
        for (const auto& m : list)
            out << id << ',' << format_double(m.point.x) << ',' << format_double(m.point.y) << ',' << m.timestamp_ms
                << '\n';
}

}  // namespace gazelab
