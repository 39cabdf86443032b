#pragma once

// Per-subject feedback reports (six metric panels plus the cancer summary
// heatmap) and per-session change tables against the baseline session.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazelab/metrics.hpp"
#include "gazelab/trial.hpp"

namespace gazelab {

struct GaussianSummary {
    double mean = 0.0;
    double sd = 0.0;  // population SD
    std::size_t n = 0;
};

/// Reference distributions keyed by metric name ("sensitivity", "coverage",
/// "heterogeneity", "interruptions", "review_time").
struct CohortReference {
    std::map<std::string, GaussianSummary> peer;    // residents
    std::map<std::string, GaussianSummary> expert;  // faculty
};

const std::vector<std::string>& reference_metric_names();

GaussianSummary gaussian_summary(std::span<const double> values);

/// Throws ValidationError when a bundle's subject has no role or either role
/// stratum is empty.
CohortReference build_cohort_reference(std::span<const MetricsBundle> bundles,
                                       const std::map<std::string, Role>& roles);

struct RenderedReport {
    std::string subject_id;
    int session_index = 1;
    std::string html;
    std::string markdown;
    std::string json;
    std::string heatmap_png;
    std::string dtw_png;
};

/// Pure rendering: identical inputs give byte-identical output.
RenderedReport render_report(const MetricsBundle& bundle, const CohortReference& ref, const SessionOutcomes& outcomes);

/// Writes <root>/<subject>/<session>/{report.html, report.md, report.json, heatmap.png, dtw.png}.
std::filesystem::path write_report(const RenderedReport& report, const std::filesystem::path& root);

enum class Direction { increase, decrease };

struct ChangeRow {
    std::string metric;
    Direction better = Direction::increase;
    double baseline = 0.0;
    std::array<double, 3> values{};                  // sessions 2..4
    std::array<std::optional<double>, 3> percent{};  // relative to baseline; absent when baseline is 0 and value differs
    std::string result;                              // Improved / No change / Declined (final session)
};

struct ChangeTable {
    std::string subject_id;
    std::vector<ChangeRow> rows;
};

/// Requires exactly four bundles of one subject covering sessions 1..4.
ChangeTable change_table(std::span<const MetricsBundle> bundles);

std::string change_table_csv(const ChangeTable& table);
std::string change_table_markdown(const ChangeTable& table);

}  // namespace gazelab
