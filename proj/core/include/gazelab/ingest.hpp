#pragma once

// Parsers for gaze logs, display segments, case manifests, lung masks and
// annotation logs. All parsers are pure functions over their input stream.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gazelab/geometry.hpp"

namespace gazelab {

struct GazeSample {
    std::int64_t timestamp_ms = 0;
    double x = 0.0;
    double y = 0.0;
    bool valid = false;

    // Invalid samples compare equal regardless of their coordinates.
    friend bool operator==(const GazeSample& a, const GazeSample& b) {
        return a.timestamp_ms == b.timestamp_ms && a.valid == b.valid &&
               (!a.valid || (a.x == b.x && a.y == b.y));
    }
};

struct Segment {
    std::string case_id;
    std::int64_t display_start_ms = 0;
    std::int64_t display_end_ms = 0;

    std::int64_t duration_ms() const noexcept { return display_end_ms - display_start_ms; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct GazeRecording {
    std::string subject_id;
    int session_index = 1;
    std::vector<Segment> segments;
    std::vector<GazeSample> samples;
    // Columns after the seven gaze columns (pupil, head pose, ...), carried verbatim.
    std::vector<std::string> extra_columns;
    std::vector<std::vector<std::string>> extras;  // one row per sample when extra_columns is non-empty

    friend bool operator==(const GazeRecording&, const GazeRecording&) = default;
};

enum class CaseClass { nodule, normal, distractor };

std::string_view to_string(CaseClass c) noexcept;
std::optional<CaseClass> case_class_from_string(std::string_view s) noexcept;

struct CaseDefinition {
    std::string case_id;
    CaseClass case_class = CaseClass::normal;
    std::optional<int> subtlety;  // 1..5
    int width = 0;
    int height = 0;
    Bitmap lung_mask;
    std::optional<Disc> nodule;
    std::string finding;  // distractor finding (pneumothorax, cardiomegaly, consolidation); may be empty
    std::string mask_path;

    bool positive() const noexcept { return case_class == CaseClass::nodule; }
};

/// Throws ValidationError if the case breaks a class/disc/mask invariant.
void validate_case(const CaseDefinition& c);

struct Mark {
    Point point;
    std::int64_t timestamp_ms = 0;
    friend bool operator==(const Mark&, const Mark&) = default;
};

/// Marks per case id, in file order.
using AnnotationSet = std::map<std::string, std::vector<Mark>>;

/// Image-pixel bounds per case, used when validating annotations.
struct CaseBounds {
    int width = 0;
    int height = 0;
};

// Gaze CSV: t_ms,lx,ly,lvalid,rx,ry,rvalid[,extra...]
GazeRecording parse_gaze_log(std::istream& in, std::string subject_id = {}, int session_index = 1);
void write_gaze_log(std::ostream& out, const GazeRecording& rec);

// Segment CSV: case_id,start_ms,end_ms
std::vector<Segment> parse_segments(std::istream& in);
void write_segments(std::ostream& out, const std::vector<Segment>& segments);

/// Checks segment ordering/disjointness and attaches them to `rec`.
void attach_segments(GazeRecording& rec, std::vector<Segment> segments);

/// Decode a lung mask; pixel > 0 marks lung.
Bitmap parse_mask(std::string_view bytes);
Bitmap parse_mask(std::istream& in);

/// Binary PGM with lung pixels at 255.
std::string write_mask(const Bitmap& mask);

/// Resolves a manifest `mask_path` to a bitmap.
using MaskLoader = std::function<Bitmap(const std::string& mask_path)>;

/// Loader that reads mask files relative to `base_dir`.
MaskLoader file_mask_loader(std::string base_dir);

// Manifest JSON: [{case_id, class, subtlety?, width, height, mask_path, nodule?: {cx, cy, r}, finding?}]
std::vector<CaseDefinition> parse_case_manifest(std::istream& in, const MaskLoader& load_mask);
std::string write_case_manifest(const std::vector<CaseDefinition>& cases);

// Annotation CSV: case_id,x,y,mark_timestamp_ms
AnnotationSet parse_annotations(std::istream& in, const std::map<std::string, CaseBounds>& bounds);
AnnotationSet parse_annotations(std::istream& in, const std::vector<CaseDefinition>& cases);
void write_annotations(std::ostream& out, const AnnotationSet& marks);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace gazelab
