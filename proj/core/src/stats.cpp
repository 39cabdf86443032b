#include "gazelab/stats.hpp"

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "csv.hpp"
#include "gazelab/error.hpp"
#include "gazelab/ingest.hpp"
#include "gazelab/rng.hpp"

namespace gazelab {

std::string_view to_string(Group g) noexcept { return g == Group::intervention ? "intervention" : "control"; }

std::optional<Group> group_from_string(std::string_view s) noexcept {
    if (s == "intervention") return Group::intervention;
    if (s == "control") return Group::control;
    return std::nullopt;
}

std::size_t TrialPanel::metric_index(std::string_view name) const {
    const auto it = std::find(metrics.begin(), metrics.end(), name);
    if (it == metrics.end()) throw ValidationError("panel has no metric '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - metrics.begin());
}

TrialPanel parse_panel_csv(std::istream& in) {
    csv::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw ParseError(1, "missing header (expected 'subject_id,group,session,<metric>...')");
    const auto header = csv::split(line);
    if (header.size() < 4 || csv::trim(header[0]) != "subject_id" || csv::trim(header[1]) != "group" ||
        csv::trim(header[2]) != "session")
        throw ParseError(reader.line_no(), "unknown header '" + line + "' (expected 'subject_id,group,session,<metric>...')");

    TrialPanel panel;
    for (std::size_t i = 3; i < header.size(); ++i) panel.metrics.emplace_back(csv::trim(header[i]));
    while (reader.next(line)) {
        const auto ln = reader.line_no();
        const auto f = csv::split(line);
        if (f.size() != header.size())
            throw ParseError(ln, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        PanelRow row;
        row.subject_id = std::string(csv::trim(f[0]));
        const auto g = group_from_string(csv::trim(f[1]));
        if (!g) throw ParseError(ln, "group must be 'intervention' or 'control'");
        row.group = *g;
        row.session_index = static_cast<int>(csv::to_int(f[2], ln, "session"));
        for (std::size_t i = 3; i < f.size(); ++i) row.values.push_back(csv::to_double(f[i], ln, header[i]));
        panel.rows.push_back(std::move(row));
    }
    return panel;
}

void write_panel_csv(std::ostream& out, const TrialPanel& panel) {
    out << "subject_id,group,session";
    for (const auto& m : panel.metrics) out << ',' << m;
    out << '\n';
    for (const auto& r : panel.rows) {
        out << r.subject_id << ',' << to_string(r.group) << ',' << r.session_index;
        for (double v : r.values) out << ',' << format_double(v);
        out << '\n';
    }
}

double f_survival(double f, double df1, double df2) {
    if (!(df1 > 0.0) || !(df2 > 0.0)) throw ValidationError("F distribution needs positive degrees of freedom");
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    // P(F > f) = I_{df2/(df2 + df1 f)}(df2/2, df1/2)
    const double x = df2 / (df2 + df1 * f);
    return boost::math::ibeta(df2 / 2.0, df1 / 2.0, x);
}

namespace {

// Validated balanced layout: cube[g][i][s].
struct Layout {
    std::vector<Group> groups;
    std::vector<int> sessions;
    std::vector<std::vector<std::vector<double>>> cube;
    std::size_t n = 0;  // subjects per group
};

Layout layout_panel(const TrialPanel& panel, std::size_t metric) {
    if (metric >= panel.metrics.size()) throw ValidationError("metric index out of range");

    struct Subject {
        Group group;
        std::map<int, double> by_session;
        std::size_t order;
    };
    std::map<std::string, Subject> subjects;
    for (const auto& r : panel.rows) {
        if (r.values.size() != panel.metrics.size())
            throw ValidationError("panel row for '" + r.subject_id + "' has wrong value count");
        auto [it, inserted] = subjects.try_emplace(r.subject_id, Subject{r.group, {}, subjects.size()});
        if (!inserted && it->second.group != r.group)
            throw ValidationError("unbalanced panel: subject '" + r.subject_id + "' appears in both groups");
        if (!it->second.by_session.emplace(r.session_index, r.values[metric]).second)
            throw ValidationError("unbalanced panel: subject '" + r.subject_id + "' has session " +
                                  std::to_string(r.session_index) + " more than once");
    }
    if (subjects.empty()) throw ValidationError("empty panel");

    Layout lay;
    std::set<int> sess;
    for (const auto& [id, s] : subjects)
        for (const auto& [k, v] : s.by_session) sess.insert(k);
    lay.sessions.assign(sess.begin(), sess.end());

    // Subjects in first-appearance order within each group.
    std::vector<std::pair<std::size_t, const Subject*>> ordered;
    for (const auto& [id, s] : subjects) ordered.emplace_back(s.order, &s);
    std::sort(ordered.begin(), ordered.end(), [](auto& a, auto& b) { return a.first < b.first; });

    for (Group g : {Group::intervention, Group::control}) {
        std::vector<std::vector<double>> members;
        for (const auto& [ord, s] : ordered) {
            if (s->group != g) continue;
            if (s->by_session.size() != lay.sessions.size())
                throw ValidationError("unbalanced panel: a subject is missing sessions");
            std::vector<double> ys;
            for (const auto& [k, v] : s->by_session) ys.push_back(v);
            members.push_back(std::move(ys));
        }
        if (members.empty()) continue;
        lay.groups.push_back(g);
        lay.cube.push_back(std::move(members));
    }
    if (lay.groups.size() < 2) throw ValidationError("mixed ANOVA needs both groups present");
    lay.n = lay.cube.front().size();
    for (const auto& g : lay.cube)
        if (g.size() != lay.n) throw ValidationError("unbalanced panel: groups have different numbers of subjects");
    if (lay.n < 2) throw ValidationError("mixed ANOVA needs at least 2 subjects per group");
    if (lay.sessions.size() < 2) throw ValidationError("mixed ANOVA needs at least 2 sessions");
    return lay;
}

EffectRow make_effect(std::string source, double ss, int df1, double ss_err, int df2) {
    EffectRow e;
    e.source = std::move(source);
    e.ss = ss;
    e.ss_error_term = ss_err;
    e.df1 = df1;
    e.df2 = df2;
    e.f = (ss / df1) / (ss_err / df2);
    e.p = std::max(f_survival(e.f, df1, df2), std::numeric_limits<double>::min());
    e.partial_eta_squared = ss / (ss + ss_err);
    return e;
}

}  // namespace

AnovaTable mixed_anova(const TrialPanel& panel, std::size_t metric) {
    const auto lay = layout_panel(panel, metric);
    const std::size_t g = lay.groups.size();
    const std::size_t n = lay.n;
    const std::size_t s = lay.sessions.size();
    const auto& y = lay.cube;

    double grand = 0.0;
    std::vector<double> m_group(g, 0.0), m_session(s, 0.0);
    std::vector<std::vector<double>> m_subject(g, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> m_cell(g, std::vector<double>(s, 0.0));
    for (std::size_t a = 0; a < g; ++a)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < s; ++k) {
                const double v = y[a][i][k];
                grand += v;
                m_group[a] += v;
                m_session[k] += v;
                m_subject[a][i] += v;
                m_cell[a][k] += v;
            }
    grand /= static_cast<double>(g * n * s);
    for (auto& v : m_group) v /= static_cast<double>(n * s);
    for (auto& v : m_session) v /= static_cast<double>(g * n);
    for (auto& row : m_subject)
        for (auto& v : row) v /= static_cast<double>(s);
    for (auto& row : m_cell)
        for (auto& v : row) v /= static_cast<double>(n);

    AnovaTable t;
    t.metric = panel.metrics[metric];
    for (std::size_t a = 0; a < g; ++a) {
        t.ss_group += static_cast<double>(n * s) * (m_group[a] - grand) * (m_group[a] - grand);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = m_subject[a][i] - m_group[a];
            t.ss_subjects_within_group += static_cast<double>(s) * d * d;
            for (std::size_t k = 0; k < s; ++k) {
                const double v = y[a][i][k];
                t.ss_total += (v - grand) * (v - grand);
                const double e = v - m_subject[a][i] - m_cell[a][k] + m_group[a];
                t.ss_error += e * e;
            }
        }
        for (std::size_t k = 0; k < s; ++k) {
            const double d = m_cell[a][k] - m_group[a] - m_session[k] + grand;
            t.ss_interaction += static_cast<double>(n) * d * d;
        }
    }
    for (std::size_t k = 0; k < s; ++k)
        t.ss_session += static_cast<double>(g * n) * (m_session[k] - grand) * (m_session[k] - grand);

    const double tiny = 1e-12 * t.ss_total;
    if (t.ss_total <= 0.0 || t.ss_error <= tiny || t.ss_subjects_within_group <= tiny)
        throw ValidationError("degenerate variance in metric '" + t.metric +
                              "': an error term is zero, F is undefined");

    const int df_group = static_cast<int>(g - 1);
    const int df_subj = static_cast<int>(g * (n - 1));
    const int df_session = static_cast<int>(s - 1);
    const int df_inter = df_group * df_session;
    const int df_err = df_subj * df_session;

    t.group = make_effect("Group", t.ss_group, df_group, t.ss_subjects_within_group, df_subj);
    t.session = make_effect("Session", t.ss_session, df_session, t.ss_error, df_err);
    t.interaction = make_effect("Interaction", t.ss_interaction, df_inter, t.ss_error, df_err);
    return t;
}

AnovaTable mixed_anova(const TrialPanel& panel, std::string_view metric) {
    return mixed_anova(panel, panel.metric_index(metric));
}

void write_anova_csv(std::ostream& out, std::span<const AnovaTable> tables) {
    const auto p_text = [](double p) { return p >= 1e-4 ? fmt::format("{:.4f}", p) : fmt::format("{:.2e}", p); };
    out << "Variable,Source,DF1,DF2,F,p-value,eta-squared\n";
    for (const auto& t : tables) {
        for (const EffectRow* e : {&t.group, &t.session, &t.interaction}) {
            out << t.metric << ',' << e->source << ',' << e->df1 << ',' << e->df2 << ',' << fmt::format("{:.3f}", e->f)
                << ',' << p_text(e->p) << ',' << fmt::format("{:.3f}", e->partial_eta_squared) << '\n';
        }
    }
}

std::vector<GroupImprovement> improvement_summary(const TrialPanel& panel, std::size_t metric) {
    const auto lay = layout_panel(panel, metric);
    std::vector<GroupImprovement> out;
    for (std::size_t a = 0; a < lay.groups.size(); ++a) {
        double first = 0.0, last = 0.0;
        for (const auto& subj : lay.cube[a]) {
            first += subj.front();
            last += subj.back();
        }
        GroupImprovement gi;
        gi.group = lay.groups[a];
        gi.baseline = first / static_cast<double>(lay.n);
        gi.final_mean = last / static_cast<double>(lay.n);
        gi.absolute_change = gi.final_mean - gi.baseline;
        if (gi.baseline != 0.0) gi.relative_change = gi.absolute_change / gi.baseline;
        out.push_back(gi);
    }
    return out;
}

std::vector<GroupImprovement> improvement_summary(const TrialPanel& panel, std::string_view metric) {
    return improvement_summary(panel, panel.metric_index(metric));
}

double two_sample_t_power(int n_per_group, double effect_size, double alpha) {
    if (n_per_group < 2) throw ValidationError("power: n per group must be >= 2");
    const double df = 2.0 * n_per_group - 2.0;
    const double crit = boost::math::quantile(boost::math::students_t(df), 1.0 - alpha / 2.0);
    const double ncp = effect_size * std::sqrt(n_per_group / 2.0);
    const boost::math::non_central_t dist(df, ncp);
    return boost::math::cdf(boost::math::complement(dist, crit)) + boost::math::cdf(dist, -crit);
}

int power_sample_size(double delta, double sd, double alpha, double power) {
    if (!(delta > 0.0)) throw ValidationError("power: delta must be positive");
    if (!(sd > 0.0)) throw ValidationError("power: sd must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("power: alpha must lie in (0,1)");
    if (!(power > 0.0 && power < 1.0)) throw ValidationError("power: power must lie in (0,1)");

    const double d = delta / sd;
    const boost::math::normal z;
    const double za = boost::math::quantile(z, 1.0 - alpha / 2.0);
    const double zb = boost::math::quantile(z, power);
    const double approx = 2.0 * std::pow((za + zb) / d, 2.0);
    if (!(approx < 1e8)) throw ValidationError("power: required sample size is unreasonably large");

    int n = std::max(2, static_cast<int>(std::ceil(approx)));
    while (n > 2 && two_sample_t_power(n - 1, d, alpha) >= power) --n;
    while (two_sample_t_power(n, d, alpha) < power) ++n;
    return n;
}

TrialPanel gaussian_null_panel(int subjects_per_group, int sessions, std::uint64_t seed) {
    rng::Stream rs(seed);
    TrialPanel p;
    p.metrics = {"Value"};
    for (Group g : {Group::intervention, Group::control})
        for (int i = 0; i < subjects_per_group; ++i)
            for (int k = 1; k <= sessions; ++k)
                p.rows.push_back({std::string(to_string(g)) + "-" + std::to_string(i), g, k, {rs.normal()}});
    return p;
}

}  // namespace gazelab
