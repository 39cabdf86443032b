#include "gazelab/fixations.hpp"

#include <cmath>

#include "gazelab/error.hpp"
#include "gazelab/metrics.hpp"

namespace gazelab {

FixationParams default_fixation_params(int image_width) noexcept {
    return {0.015 * image_width, 100};
}

namespace {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Max distance from `p` to any sample in [first, last].
double reach(const GazeTrajectory& t, std::size_t first, std::size_t last, Point p) {
    double d = 0.0;
    for (std::size_t k = first; k <= last; ++k) d = std::max(d, distance(t.samples[k].point(), p));
    return d;
}

}  // namespace

std::optional<std::size_t> grow_fixation_window(const GazeTrajectory& t, std::size_t start,
                                                const FixationParams& params) {
    const auto& s = t.samples;
    const double thr = params.dispersion_threshold_px;
    if (start >= s.size()) return std::nullopt;

    // Initial window: the fewest samples spanning min_duration, checked
    // incrementally so the dispersion test is the pairwise diameter.
    std::size_t end = start;
    while (s[end].t_ms - s[start].t_ms < params.min_duration_ms) {
        if (end + 1 >= s.size()) return std::nullopt;
        ++end;
        if (reach(t, start, end - 1, s[end].point()) > thr) return std::nullopt;
    }
    while (end + 1 < s.size() && reach(t, start, end, s[end + 1].point()) <= thr) ++end;
    return end;
}

std::vector<Fixation> detect_fixations(const GazeTrajectory& t, const FixationParams& params) {
    if (!(params.dispersion_threshold_px > 0.0) || params.min_duration_ms <= 0)
        throw ValidationError("fixation thresholds must be positive");
    std::vector<Fixation> out;
    std::size_t i = 0;
    while (i < t.samples.size()) {
        const auto end = grow_fixation_window(t, i, params);
        if (!end) {
            ++i;
            continue;
        }
        Fixation f;
        f.first_sample = i;
        f.last_sample = *end;
        f.start_ms = t.samples[i].t_ms;
        f.end_ms = t.samples[*end].t_ms;
        double sx = 0.0, sy = 0.0;
        for (std::size_t k = i; k <= *end; ++k) {
            sx += t.samples[k].x;
            sy += t.samples[k].y;
        }
        const double n = static_cast<double>(*end - i + 1);
        f.centroid = {sx / n, sy / n};
        out.push_back(f);
        i = *end + 1;
    }
    return out;
}

ConsensusFeatures consensus_features(const std::vector<Fixation>& fixations, const GazeTrajectory& t,
                                     const std::optional<Disc>& aoi, const CaseDefinition& c,
                                     double foveal_radius_px) {
    ConsensusFeatures f;
    f.total_time_s = static_cast<double>(t.duration_ms()) / 1000.0;
    f.total_fixations = fixations.size();

    std::int64_t total_dur = 0;
    for (const auto& x : fixations) total_dur += x.duration_ms();

    if (aoi) {
        std::size_t n_aoi = 0;
        std::int64_t aoi_dur = 0;
        for (const auto& x : fixations) {
            if (!aoi->contains(x.centroid)) continue;
            if (!f.time_to_first_aoi_fixation_s)
                f.time_to_first_aoi_fixation_s = static_cast<double>(x.start_ms - t.display_start_ms) / 1000.0;
            ++n_aoi;
            aoi_dur += x.duration_ms();
        }
        f.aoi_fixations = n_aoi;
        f.mean_aoi_fixation_duration_s = n_aoi ? static_cast<double>(aoi_dur) / 1000.0 / static_cast<double>(n_aoi) : 0.0;
        f.dwell_time_ratio = total_dur > 0 ? static_cast<double>(aoi_dur) / static_cast<double>(total_dur) : 0.0;
    }

    if (fixations.size() >= 2) {
        double sum = 0.0;
        for (std::size_t k = 1; k < fixations.size(); ++k)
            sum += distance(fixations[k - 1].centroid, fixations[k].centroid);
        f.mean_saccade_length_px = sum / static_cast<double>(fixations.size() - 1);
    }

    const auto covered = covered_lung_pixels(t, c.lung_mask, foveal_radius_px);
    const auto total = c.lung_mask.count();
    f.image_coverage = total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
    return f;
}

}  // namespace gazelab
