#pragma once

// JSON documents for metric bundles, heatmaps and consensus features.

#include <string>
#include <string_view>
#include <vector>

#include "gazelab/fixations.hpp"
#include "gazelab/metrics.hpp"

namespace gazelab {

struct MetricsDocument {
    MetricsBundle bundle;
    SessionOutcomes outcomes;
};

/// Self-contained metrics document (bundle plus per-case detection outcomes).
std::string metrics_to_json(const MetricsBundle& bundle, const SessionOutcomes& outcomes);

/// Inverse of metrics_to_json. Throws ValidationError on malformed input.
MetricsDocument metrics_from_json(std::string_view text);

std::string heatmap_to_json(const HeatmapGrid& grid);

struct FeatureRow {
    std::string subject_id;
    int session_index = 1;
    std::string case_id;
    ConsensusFeatures features;
};

std::string features_to_json(const std::vector<FeatureRow>& rows);

}  // namespace gazelab
