#pragma once

// Split-plot (mixed-design) ANOVA with one between-subjects factor (group)
// and one within-subjects factor (session), group improvement summaries and
// two-sample t-test sample-size calculation.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gazelab {

enum class Group { intervention, control };

std::string_view to_string(Group g) noexcept;
std::optional<Group> group_from_string(std::string_view s) noexcept;

struct PanelRow {
    std::string subject_id;
    Group group = Group::control;
    int session_index = 1;
    std::vector<double> values;  // one per TrialPanel::metrics entry
};

struct TrialPanel {
    std::vector<std::string> metrics;
    std::vector<PanelRow> rows;

    /// Throws ValidationError for an unknown metric name.
    std::size_t metric_index(std::string_view name) const;
};

// Panel CSV: subject_id,group,session,<metric>...
TrialPanel parse_panel_csv(std::istream& in);
void write_panel_csv(std::ostream& out, const TrialPanel& panel);

struct EffectRow {
    std::string source;  // Group, Session, Interaction
    double ss = 0.0;
    double ss_error_term = 0.0;  // SS of the denominator term for this effect
    int df1 = 0;
    int df2 = 0;
    double f = 0.0;
    double p = 1.0;
    double partial_eta_squared = 0.0;
};

struct AnovaTable {
    std::string metric;
    EffectRow group;
    EffectRow session;
    EffectRow interaction;

    double ss_total = 0.0;
    double ss_group = 0.0;
    double ss_subjects_within_group = 0.0;
    double ss_session = 0.0;
    double ss_interaction = 0.0;
    double ss_error = 0.0;
};

/// Upper tail of the F(df1, df2) distribution, via the regularized
/// incomplete beta function.
double f_survival(double f, double df1, double df2);

/// Classical split-plot decomposition; F_group is tested against subjects
/// within group, session and interaction against the within-subject error.
/// No sphericity correction. Requires equal subjects per group (>= 2), the
/// same >= 2 sessions for every subject, and non-zero error variance.
AnovaTable mixed_anova(const TrialPanel& panel, std::size_t metric);
AnovaTable mixed_anova(const TrialPanel& panel, std::string_view metric);

/// CSV columns: Variable,Source,DF1,DF2,F,p-value,eta-squared
void write_anova_csv(std::ostream& out, std::span<const AnovaTable> tables);

struct GroupImprovement {
    Group group = Group::control;
    double baseline = 0.0;         // first-session group mean
    double final_mean = 0.0;       // last-session group mean
    double absolute_change = 0.0;  // final - baseline
    std::optional<double> relative_change;  // absolute / baseline; absent when baseline is 0
};

/// One entry per group present in the panel, intervention first.
std::vector<GroupImprovement> improvement_summary(const TrialPanel& panel, std::size_t metric);
std::vector<GroupImprovement> improvement_summary(const TrialPanel& panel, std::string_view metric);

/// Power of a two-sided two-sample t test with n per group and standardized
/// effect d (noncentral t).
double two_sample_t_power(int n_per_group, double effect_size, double alpha);

/// Smallest n per group (>= 2) reaching `power` for effect delta/sd.
int power_sample_size(double delta, double sd, double alpha, double power);

/// Panel of independent N(0,1) draws: no group, session or subject effect.
TrialPanel gaussian_null_panel(int subjects_per_group, int sessions, std::uint64_t seed);

}  // namespace gazelab
