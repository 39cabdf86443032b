#pragma once

// Dispersion-threshold (I-DT) fixation detection and the consensus
// expertise features computed from fixations.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gazelab/geometry.hpp"
#include "gazelab/ingest.hpp"
#include "gazelab/preprocess.hpp"

namespace gazelab {

struct Fixation {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    Point centroid;
    std::size_t first_sample = 0;  // index range [first_sample, last_sample] into the trajectory
    std::size_t last_sample = 0;

    std::int64_t duration_ms() const noexcept { return end_ms - start_ms; }
};

struct FixationParams {
    double dispersion_threshold_px = 0.0;  // max pairwise distance inside a fixation
    std::int64_t min_duration_ms = 100;
};

/// Defaults: dispersion 1.5% of image width, 100 ms minimum.
FixationParams default_fixation_params(int image_width) noexcept;

/// Grows the I-DT window that starts at sample `start`. Returns the index of
/// the last sample of the fixation, or nullopt if no window of at least
/// `min_duration_ms` starting there stays within the threshold.
std::optional<std::size_t> grow_fixation_window(const GazeTrajectory& t, std::size_t start,
                                                const FixationParams& params);

/// Ordered, disjoint fixations.
std::vector<Fixation> detect_fixations(const GazeTrajectory& t, const FixationParams& params);

struct ConsensusFeatures {
    double total_time_s = 0.0;
    std::optional<double> time_to_first_aoi_fixation_s;   // absent if AOI never fixated or no AOI
    std::optional<double> mean_aoi_fixation_duration_s;   // absent without an AOI; 0 if none landed in it
    std::optional<double> dwell_time_ratio;               // AOI fixation time / total fixation time
    std::size_t total_fixations = 0;
    std::optional<std::size_t> aoi_fixations;
    double mean_saccade_length_px = 0.0;                  // 0 with fewer than two fixations
    double image_coverage = 0.0;
};

/// `aoi` is the ground-truth disc already dilated by any hit slack; pass
/// nullopt for cases without an abnormality.
ConsensusFeatures consensus_features(const std::vector<Fixation>& fixations, const GazeTrajectory& t,
                                     const std::optional<Disc>& aoi, const CaseDefinition& c,
                                     double foveal_radius_px);

}  // namespace gazelab
