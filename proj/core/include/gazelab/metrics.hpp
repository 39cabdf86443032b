#pragma once

// Session performance metrics: detection sensitivity, lung coverage, DTW
// search-pattern heterogeneity, interruptions, review time, and the summed
// binarized gaze heatmap.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gazelab/ingest.hpp"
#include "gazelab/preprocess.hpp"

namespace gazelab {

// ---- detection -------------------------------------------------------------

enum class Truth { positive, negative };
enum class Call { hit, miss, not_applicable };

std::string_view to_string(Truth t) noexcept;
std::string_view to_string(Call c) noexcept;

struct DetectionOutcome {
    std::string case_id;
    Truth truth = Truth::negative;
    Call call = Call::not_applicable;
    std::optional<Point> matched_mark;
    std::optional<Disc> nodule;  // ground truth, positives only
    int image_width = 0;
    int image_height = 0;
};

struct DetectionSummary {
    std::vector<DetectionOutcome> outcomes;  // in case-list order
    std::size_t hits = 0;
    std::size_t positives = 0;
    double sensitivity = 0.0;
};

/// A nodule case is a hit iff some mark lies within r + hit_slack_px of the
/// disc centre (inclusive). Throws if an annotation names an unknown case or
/// the case list has no positives.
DetectionSummary detection_outcomes(const AnnotationSet& annotations, const std::vector<CaseDefinition>& cases,
                                    double hit_slack_px = 0.0);

// ---- coverage --------------------------------------------------------------

/// Lung pixels whose centre lies within `radius` of at least one sample.
std::size_t covered_lung_pixels(const GazeTrajectory& trajectory, const Bitmap& mask, double radius);

struct CoverageResult {
    std::uint64_t covered = 0;
    std::uint64_t total = 0;
    double fraction = 0.0;
    std::vector<double> per_scan;  // single-scan fractions, trajectory order
};

/// Default foveal radius: 5% of the image width.
double default_foveal_radius(int image_width) noexcept;

/// Cumulative coverage over scans. `foveal_radius_px` unset means the
/// per-case default.
CoverageResult coverage(std::span<const GazeTrajectory> trajectories, const std::vector<CaseDefinition>& cases,
                        std::optional<double> foveal_radius_px = std::nullopt);

// ---- heterogeneity ---------------------------------------------------------

/// Classic DTW: Euclidean local cost, steps (1,0),(0,1),(1,1) with unit
/// weight, no window, no normalization. Throws on empty input.
double dtw_distance(std::span<const Point> a, std::span<const Point> b);

/// DTW over trajectory positions scaled by image width/height.
double dtw_distance(const GazeTrajectory& a, const GazeTrajectory& b);

std::vector<Point> normalized_positions(const GazeTrajectory& t);

struct HeterogeneityResult {
    std::size_t n = 0;
    std::vector<double> matrix;  // n*n, row-major, symmetric, zero diagonal
    std::vector<std::string> case_ids;
    double mean = 0.0;
    double std = 0.0;  // population std over the n(n-1)/2 upper-triangle entries

    double at(std::size_t i, std::size_t j) const { return matrix[i * n + j]; }
    std::vector<double> upper_triangle() const;
};

HeterogeneityResult heterogeneity(std::span<const GazeTrajectory> normals, unsigned jobs = 1);

// ---- interruptions & time --------------------------------------------------

std::size_t count_interruptions(std::span<const GapEvent> gaps) noexcept;

struct ReviewTimes {
    std::vector<double> per_case_s;
    double mean_s = 0.0;
};

ReviewTimes review_times(std::span<const GazeTrajectory> trajectories);

// ---- heatmap ---------------------------------------------------------------

struct HeatmapConfig {
    double cell_size_px = 1.0;
    double radial_radius_px = 0.0;
    double binarize_threshold = 0.0;
    // Target image size every trajectory is rescaled to; unset means all
    // trajectories must already share dimensions.
    std::optional<std::pair<int, int>> normalize_to;
};

/// Grid of at most 256 cells on the long side, radius = foveal radius,
/// threshold 0.
HeatmapConfig default_heatmap_config(int width, int height, double foveal_radius_px);

struct HeatmapGrid {
    int grid_width = 0;
    int grid_height = 0;
    int image_width = 0;
    int image_height = 0;
    int n_scans = 0;
    std::vector<std::uint32_t> cells;  // row-major
    HeatmapConfig config;

    std::uint32_t at(int gx, int gy) const { return cells[static_cast<std::size_t>(gy) * grid_width + gx]; }
    std::uint32_t max_value() const noexcept;
};

/// Per scan: bin samples, convolve with a flat disc, binarize (> threshold),
/// then sum the binary layers.
HeatmapGrid build_heatmap(std::span<const GazeTrajectory> trajectories, const HeatmapConfig& config);

// ---- session bundle --------------------------------------------------------

struct MetricParams {
    std::optional<double> foveal_radius_px;  // unset: 5% of each image width
    double hit_slack_px = 0.0;
    std::optional<HeatmapConfig> heatmap;    // unset: default_heatmap_config
    unsigned jobs = 1;
};

struct CaseDetail {
    std::string case_id;
    CaseClass case_class = CaseClass::normal;
    double review_time_s = 0.0;
    double coverage = 0.0;
    std::size_t samples = 0;
    std::size_t blinks = 0;
    std::size_t interruptions = 0;
    Call call = Call::not_applicable;
    std::vector<GapEvent> gaps;
    std::int64_t display_start_ms = 0;
};

struct MetricsBundle {
    std::string subject_id;
    int session_index = 1;
    double sensitivity = 0.0;
    std::size_t hits = 0;
    std::size_t positives = 0;
    double coverage = 0.0;
    double heterogeneity_mean = 0.0;
    double heterogeneity_std = 0.0;
    HeterogeneityResult heterogeneity;
    std::size_t interruptions = 0;
    double mean_review_time_s = 0.0;
    double foveal_radius_px = 0.0;  // 0 when per-case default was used
    double hit_slack_px = 0.0;
    std::vector<CaseDetail> cases;
    HeatmapGrid heatmap;
};

struct SessionOutcomes {
    std::string subject_id;
    int session_index = 1;
    std::vector<DetectionOutcome> outcomes;
};

struct SessionInputs {
    const GazeRecording* recording = nullptr;
    const ViewportMap* viewports = nullptr;
    const std::vector<CaseDefinition>* cases = nullptr;
    const AnnotationSet* annotations = nullptr;  // required; null is an error
    MetricParams params;
};

struct SessionAnalysis {
    MetricsBundle bundle;
    SessionOutcomes outcomes;
    std::vector<CaseTrace> traces;
};

/// Runs segmentation and every metric for one subject-session. Cases are
/// those referenced by the recording's segments.
SessionAnalysis session_metrics(const SessionInputs& inputs);

}  // namespace gazelab
