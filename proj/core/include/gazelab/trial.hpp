#pragma once

// Trial protocol machinery: block randomization, per-session case sets, and
// a synthetic cohort simulator whose output feeds the regular pipeline.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazelab/ingest.hpp"
#include "gazelab/metrics.hpp"
#include "gazelab/preprocess.hpp"
#include "gazelab/stats.hpp"

namespace gazelab {

enum class Role { faculty, resident };

std::string_view to_string(Role r) noexcept;
std::optional<Role> role_from_string(std::string_view s) noexcept;

struct Enrollee {
    std::string subject_id;
    Role role = Role::resident;
};

struct EnrollmentPlan {
    std::vector<Enrollee> subjects;
    std::map<std::string, Group> assignment;
    std::uint64_t seed = 0;
};

/// Independent fair coin per subject, drawn from a separate stream per role
/// block. Deterministic for a given seed and subject order.
EnrollmentPlan block_randomize(const std::vector<Enrollee>& subjects, std::uint64_t seed);

inline constexpr int kSessions = 4;
inline constexpr int kNodulesPerSubtlety = 6;
inline constexpr std::array<int, 3> kSessionSubtleties = {2, 3, 4};
inline constexpr int kNormalsPerSession = 9;
inline constexpr int kDistractorsPerFinding = 2;
inline constexpr std::array<const char*, 3> kDistractorFindings = {"pneumothorax", "cardiomegaly", "consolidation"};
inline constexpr int kCasesPerSession = 33;
inline constexpr int kPositivesPerSession = 18;

struct SessionCaseSet {
    int session_index = 1;
    std::vector<std::string> case_ids;  // display order, same for every subject

    friend bool operator==(const SessionCaseSet&, const SessionCaseSet&) = default;
};

/// Four disjoint 33-case sets sampled without replacement. Throws
/// ValidationError naming the first stratum the pool cannot fill.
std::array<SessionCaseSet, kSessions> build_casesets(const std::vector<CaseDefinition>& pool, std::uint64_t seed);

struct PoolSpec {
    int image_size = 256;
    int nodules_per_subtlety = kNodulesPerSubtlety * kSessions;
    int normals = kNormalsPerSession * kSessions;
    int distractors_per_finding = kDistractorsPerFinding * kSessions;
};

/// Procedural cases: two elliptical lung fields per image, nodule discs inside
/// the lungs. Masks are stored under `masks/<case_id>.pgm`.
std::vector<CaseDefinition> generate_case_pool(const PoolSpec& spec, std::uint64_t seed);

struct SubjectProfile {
    double base_sensitivity = 0.5;
    double learning_rate = 0.0;        // detection probability gained per session
    double scan_speed_s = 30.0;        // mean display time per case
    double coverage_propensity = 0.8;  // target fraction of the lung field visited
    double interruption_rate = 0.0;    // interruptions per minute of display
    double blink_rate = 12.0;          // blinks per minute
    std::uint64_t seed = 0;
};

/// min(1, base + learning * (session - 1)), clamped to [0, 1].
double detection_probability(const SubjectProfile& profile, int session_index);

struct SimulatedSession {
    GazeRecording recording;   // screen coordinates, 30 Hz
    AnnotationSet annotations;
    ViewportMap viewports;
};

/// Synthetic 30 Hz recording for one session: dwell-and-jump scan paths over
/// the lung field, exponential blink/interruption arrivals, and a mark inside
/// the nodule disc for each detected nodule.
SimulatedSession simulate_session(const SubjectProfile& profile, const SessionCaseSet& caseset,
                                  const std::vector<CaseDefinition>& cases, std::uint64_t seed,
                                  const std::string& subject_id = "S");

/// Per-nodule detection draws for a session, in case-set order. Shared by
/// simulate_session and simulate_detection_panel.
std::vector<bool> draw_detections(const SubjectProfile& profile, int session_index, std::size_t positives,
                                  std::uint64_t session_seed);

struct GroupProfile {
    double base_sensitivity = 0.5;
    double learning_rate = 0.0;
    double scan_speed_s = 30.0;
    double coverage_propensity = 0.8;
    double interruption_rate = 0.0;
};

struct TrialConfig {
    GroupProfile intervention;
    GroupProfile control;
    GroupProfile faculty;
    int subjects_per_group = 5;
    int faculty_count = 3;
    double subject_sd = 0.0;  // between-subject SD of base sensitivity
    std::uint64_t seed = 1;
    PoolSpec pool;
    MetricParams metrics;
};

/// Defaults sized to the reported cohort: 5 residents per arm, 4 sessions.
TrialConfig default_trial_config();

TrialConfig trial_config_from_json(const std::string& text);
std::string trial_config_to_json(const TrialConfig& config);

struct PlannedSubject {
    Enrollee enrollee;
    std::optional<Group> group;  // residents in the analysed panel only
    SubjectProfile profile;
};

/// Enrollment and per-subject profiles, derived deterministically from the
/// config seed. Residents are randomized until each arm has
/// subjects_per_group members; later enrollees are not analysed.
std::vector<PlannedSubject> plan_subjects(const TrialConfig& config);

struct SubjectSessionRun {
    std::string subject_id;
    Role role = Role::resident;
    std::optional<Group> group;
    int session_index = 1;
    SimulatedSession data;
    SessionAnalysis analysis;
};

struct TrialResult {
    TrialConfig config;
    EnrollmentPlan plan;
    std::vector<CaseDefinition> pool;
    std::array<SessionCaseSet, kSessions> casesets;
    std::vector<PlannedSubject> subjects;
    std::vector<SubjectSessionRun> runs;  // subject-major, session-minor
    TrialPanel panel;                     // residents only
};

/// Panel metric names, in column order.
inline const std::vector<std::string>& panel_metric_names() {
    static const std::vector<std::string> names = {"Accuracy", "Coverage", "Heterogeneity", "Interruptions", "Time"};
    return names;
}

/// Full pipeline: simulate, serialize to the ingest formats, parse back,
/// segment, and compute every session's metrics.
TrialResult simulate_trial(const TrialConfig& config, unsigned jobs = 1);

/// Sensitivity-only panel using the same detection draws simulate_trial
/// would make, without gaze synthesis.
TrialPanel simulate_detection_panel(const TrialConfig& config);

/// Noise-free sensitivity panel: each cell is the configured detection probability.
TrialPanel expected_detection_panel(const TrialConfig& config);

}  // namespace gazelab
