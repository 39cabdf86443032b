#include "gazelab/trial.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include <json.hpp>

#include "gazelab/error.hpp"
#include "gazelab/rng.hpp"
#include "parallel.hpp"

namespace gazelab {

using nlohmann::json;

std::string_view to_string(Role r) noexcept { return r == Role::faculty ? "faculty" : "resident"; }

std::optional<Role> role_from_string(std::string_view s) noexcept {
    if (s == "faculty") return Role::faculty;
    if (s == "resident") return Role::resident;
    return std::nullopt;
}

// ---- randomization ---------------------------------------------------------

EnrollmentPlan block_randomize(const std::vector<Enrollee>& subjects, std::uint64_t seed) {
    EnrollmentPlan plan;
    plan.subjects = subjects;
    plan.seed = seed;
    rng::Stream faculty(rng::derive_seed(seed, {0}));
    rng::Stream residents(rng::derive_seed(seed, {1}));
    for (const auto& s : subjects) {
        auto& block = s.role == Role::faculty ? faculty : residents;
        const Group g = block.bernoulli(0.5) ? Group::intervention : Group::control;
        if (!plan.assignment.emplace(s.subject_id, g).second)
            throw ValidationError("duplicate subject id '" + s.subject_id + "'");
    }
    return plan;
}

// ---- case sets -------------------------------------------------------------

std::array<SessionCaseSet, kSessions> build_casesets(const std::vector<CaseDefinition>& pool, std::uint64_t seed) {
    struct Stratum {
        std::string name;
        int per_session;
        std::vector<std::string> ids;
    };
    std::vector<Stratum> strata;
    for (int s : kSessionSubtleties) strata.push_back({"subtlety-" + std::to_string(s) + " nodules", kNodulesPerSubtlety, {}});
    strata.push_back({"normal cases", kNormalsPerSession, {}});
    for (const char* f : kDistractorFindings) strata.push_back({std::string(f) + " distractors", kDistractorsPerFinding, {}});

    std::vector<const CaseDefinition*> sorted;
    for (const auto& c : pool) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->case_id < b->case_id; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i]->case_id == sorted[i - 1]->case_id)
            throw ValidationError("duplicate case_id '" + sorted[i]->case_id + "' in pool");

    for (const auto* c : sorted) {
        switch (c->case_class) {
            case CaseClass::nodule:
                for (std::size_t k = 0; k < kSessionSubtleties.size(); ++k)
                    if (c->subtlety == kSessionSubtleties[k]) strata[k].ids.push_back(c->case_id);
                break;
            case CaseClass::normal: strata[3].ids.push_back(c->case_id); break;
            case CaseClass::distractor:
                for (std::size_t k = 0; k < kDistractorFindings.size(); ++k)
                    if (c->finding == kDistractorFindings[k]) strata[4 + k].ids.push_back(c->case_id);
                break;
        }
    }

    for (const auto& s : strata) {
        const auto need = static_cast<std::size_t>(s.per_session * kSessions);
        if (s.ids.size() < need)
            throw ValidationError("insufficient case pool: " + s.name + " need " + std::to_string(need) + ", have " +
                                  std::to_string(s.ids.size()));
    }

    std::array<SessionCaseSet, kSessions> sets;
    for (std::size_t k = 0; k < strata.size(); ++k) {
        rng::Stream rs(rng::derive_seed(seed, {k}));
        rs.shuffle(strata[k].ids.begin(), strata[k].ids.end());
    }
    for (int session = 0; session < kSessions; ++session) {
        auto& set = sets[session];
        set.session_index = session + 1;
        for (const auto& s : strata) {
            const auto first = s.ids.begin() + session * s.per_session;
            set.case_ids.insert(set.case_ids.end(), first, first + s.per_session);
        }
        rng::Stream order(rng::derive_seed(seed, {100 + static_cast<std::uint64_t>(session)}));
        order.shuffle(set.case_ids.begin(), set.case_ids.end());
    }
    return sets;
}

// ---- synthetic pool --------------------------------------------------------

std::vector<CaseDefinition> generate_case_pool(const PoolSpec& spec, std::uint64_t seed) {
    if (spec.image_size < 32) throw ValidationError("pool image_size must be at least 32");
    const int S = spec.image_size;

    std::vector<CaseDefinition> pool;
    auto make_case = [&](std::string id, CaseClass cls, std::optional<int> subtlety, std::string finding) {
        rng::Stream rs(rng::derive_seed(seed, {pool.size()}));
        CaseDefinition c;
        c.case_id = std::move(id);
        c.case_class = cls;
        c.subtlety = subtlety;
        c.finding = std::move(finding);
        c.width = S;
        c.height = S;
        c.mask_path = "masks/" + c.case_id + ".pgm";
        c.lung_mask = Bitmap(S, S);

        struct Ellipse {
            double cx, cy, ax, ay;
        };
        const auto jitter = [&](double v) { return v * rs.uniform(0.92, 1.08); };
        const Ellipse lungs[2] = {{jitter(0.30 * S), jitter(0.50 * S), jitter(0.14 * S), jitter(0.30 * S)},
                                  {jitter(0.70 * S), jitter(0.50 * S), jitter(0.14 * S), jitter(0.30 * S)}};
        std::vector<std::pair<int, int>> lung_pixels;
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x)
                for (const auto& e : lungs) {
                    const double dx = (x + 0.5 - e.cx) / e.ax;
                    const double dy = (y + 0.5 - e.cy) / e.ay;
                    if (dx * dx + dy * dy <= 1.0) {
                        c.lung_mask.set(x, y);
                        lung_pixels.emplace_back(x, y);
                        break;
                    }
                }
        if (cls == CaseClass::nodule) {
            const auto [px, py] = lung_pixels[static_cast<std::size_t>(rs.uniform_int(0, static_cast<std::int64_t>(lung_pixels.size()) - 1))];
            c.nodule = Disc{px + 0.5, py + 0.5, rs.uniform(0.015 * S, 0.04 * S)};
        }
        pool.push_back(std::move(c));
    };

    for (int s : kSessionSubtleties)
        for (int i = 0; i < spec.nodules_per_subtlety; ++i)
            make_case(fmt::format("nod-s{}-{:03}", s, i), CaseClass::nodule, s, {});
    for (int i = 0; i < spec.normals; ++i) make_case(fmt::format("nrm-{:03}", i), CaseClass::normal, std::nullopt, {});
    for (const char* f : kDistractorFindings)
        for (int i = 0; i < spec.distractors_per_finding; ++i)
            make_case(fmt::format("dis-{}-{:03}", f, i), CaseClass::distractor, std::nullopt, f);
    return pool;
}

// ---- session simulation ----------------------------------------------------

double detection_probability(const SubjectProfile& profile, int session_index) {
    const double p = profile.base_sensitivity + profile.learning_rate * (session_index - 1);
    return std::clamp(p, 0.0, 1.0);
}

std::vector<bool> draw_detections(const SubjectProfile& profile, int session_index, std::size_t positives,
                                  std::uint64_t session_seed) {
    rng::Stream rs(rng::derive_seed(session_seed, {0xD37EC7}));
    const double p = detection_probability(profile, session_index);
    std::vector<bool> out(positives);
    for (std::size_t i = 0; i < positives; ++i) out[i] = rs.bernoulli(p);
    return out;
}

namespace {

constexpr int kScreenWidth = 1920;
constexpr int kScreenHeight = 1080;
constexpr std::int64_t kCalibrationMs = 2000;

Viewport fit_viewport(int w, int h) {
    // Power-of-two scale keeps image<->screen mapping exact in binary floating point.
    double scale = 1.0;
    while (scale * 2 * std::max(w, h) <= 1024) scale *= 2;
    while (scale * std::max(w, h) > 1024) scale /= 2;
    return {scale, std::floor((kScreenWidth - scale * w) / 2), std::floor((kScreenHeight - scale * h) / 2)};
}

struct GapPlan {
    std::int64_t start, end;
    bool interruption;
    bool look_away;  // valid gaze off the image rather than tracker loss
};

std::vector<GapPlan> plan_gaps(const SubjectProfile& p, std::int64_t seg_start, std::int64_t seg_end, rng::Stream& rs) {
    std::vector<GapPlan> out;
    const double blink_rate = p.blink_rate / 60000.0;
    const double int_rate = p.interruption_rate / 60000.0;
    double cursor = static_cast<double>(seg_start) + 300.0;
    while (true) {
        const double tb = blink_rate > 0 ? cursor + rs.exponential(blink_rate) : INFINITY;
        const double ti = int_rate > 0 ? cursor + rs.exponential(int_rate) : INFINITY;
        const bool interruption = ti < tb;
        const double start = std::min(tb, ti);
        if (!std::isfinite(start)) break;
        const double len = interruption ? rs.uniform(700.0, 3000.0) : rs.uniform(100.0, 300.0);
        const auto s = static_cast<std::int64_t>(start);
        const auto e = static_cast<std::int64_t>(start + len);
        if (e > seg_end - 150) break;
        out.push_back({s, e, interruption, interruption && rs.bernoulli(0.5)});
        cursor = static_cast<double>(e) + 200.0;
    }
    return out;
}

struct LungCells {
    std::vector<std::vector<std::pair<int, int>>> cells;  // lung pixels per occupied cell, serpentine order
    std::vector<std::pair<int, int>> all;
    std::vector<Point> centres;  // lung pixel nearest each cell's lung centroid
};

LungCells lung_cells(const CaseDefinition& c) {
    // Cells small enough that one dwell at the centre covers the whole cell.
    const int cell = std::max(4, static_cast<int>(std::lround(1.4 * default_foveal_radius(c.width))));
    const int gw = (c.width + cell - 1) / cell;
    const int gh = (c.height + cell - 1) / cell;
    LungCells out;
    for (int gy = 0; gy < gh; ++gy)
        for (int k = 0; k < gw; ++k) {
            const int gx = (gy % 2 == 0) ? k : gw - 1 - k;
            std::vector<std::pair<int, int>> px;
            for (int y = gy * cell; y < std::min(c.height, (gy + 1) * cell); ++y)
                for (int x = gx * cell; x < std::min(c.width, (gx + 1) * cell); ++x)
                    if (c.lung_mask.at(x, y)) px.emplace_back(x, y);
            if (!px.empty()) out.cells.push_back(std::move(px));
        }
    for (const auto& v : out.cells) {
        out.all.insert(out.all.end(), v.begin(), v.end());
        double mx = 0, my = 0;
        for (const auto& [x, y] : v) {
            mx += x + 0.5;
            my += y + 0.5;
        }
        mx /= static_cast<double>(v.size());
        my /= static_cast<double>(v.size());
        const auto nearest = *std::min_element(v.begin(), v.end(), [&](const auto& a, const auto& b) {
            return std::hypot(a.first + 0.5 - mx, a.second + 0.5 - my) < std::hypot(b.first + 0.5 - mx, b.second + 0.5 - my);
        });
        out.centres.push_back({nearest.first + 0.5, nearest.second + 0.5});
    }
    return out;
}

Point random_pixel(const std::vector<std::pair<int, int>>& px, rng::Stream& rs) {
    const auto [x, y] = px[static_cast<std::size_t>(rs.uniform_int(0, static_cast<std::int64_t>(px.size()) - 1))];
    return {x + rs.uniform(0.2, 0.8), y + rs.uniform(0.2, 0.8)};
}

}  // namespace

SimulatedSession simulate_session(const SubjectProfile& profile, const SessionCaseSet& caseset,
                                  const std::vector<CaseDefinition>& cases, std::uint64_t seed,
                                  const std::string& subject_id) {
    std::unordered_map<std::string, const CaseDefinition*> by_id;
    for (const auto& c : cases) by_id.emplace(c.case_id, &c);

    std::size_t positives = 0;
    for (const auto& id : caseset.case_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("case set references unknown case '" + id + "'");
        positives += it->second->positive();
    }
    const auto detections = draw_detections(profile, caseset.session_index, positives, seed);

    SimulatedSession out;
    out.recording.subject_id = subject_id;
    out.recording.session_index = caseset.session_index;

    rng::Stream timing(rng::derive_seed(seed, {1}));
    std::int64_t t = kCalibrationMs;
    std::size_t positive_index = 0;
    for (std::size_t ci = 0; ci < caseset.case_ids.size(); ++ci) {
        const auto& c = *by_id.at(caseset.case_ids[ci]);
        rng::Stream rs(rng::derive_seed(seed, {2, ci}));
        const Viewport vp = fit_viewport(c.width, c.height);
        out.viewports[c.case_id] = vp;

        const double secs = std::max(2.0, profile.scan_speed_s * std::exp(timing.normal(0.0, 0.2) - 0.02));
        const auto seg_start = t;
        const auto seg_end = t + static_cast<std::int64_t>(std::llround(secs * 1000.0));
        out.recording.segments.push_back({c.case_id, seg_start, seg_end});

        const bool detected = c.positive() && detections[positive_index++];
        const bool fixate_nodule = c.positive() && (detected || rs.bernoulli(0.5));
        const double nodule_at = seg_start + rs.uniform(0.1, 0.7) * static_cast<double>(seg_end - seg_start);
        bool nodule_done = !fixate_nodule;

        const auto gaps = plan_gaps(profile, seg_start, seg_end, rs);
        const auto lung = lung_cells(c);

        // Visit a contiguous, propensity-sized run of lung cells in serpentine order.
        const std::size_t n_cells = lung.cells.size();
        const auto target = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::lround(std::clamp(profile.coverage_propensity, 0.0, 1.0) * n_cells)), 1, n_cells);
        const auto first = static_cast<std::size_t>(rs.uniform_int(0, static_cast<std::int64_t>(n_cells) - 1));
        std::vector<std::size_t> order(target);
        for (std::size_t k = 0; k < target; ++k) order[k] = (first + k) % n_cells;

        std::size_t next_cell = 0;
        Point dwell{};
        double dwell_end = -1.0;
        std::size_t gap_ix = 0;
        double look_away_y = 0.0;
        for (std::int64_t k = 0;; ++k) {
            const std::int64_t ts = seg_start + (k * 1000 + 15) / 30;
            if (ts >= seg_end) break;
            while (gap_ix < gaps.size() && gaps[gap_ix].end <= ts) ++gap_ix;
            const bool in_gap = gap_ix < gaps.size() && gaps[gap_ix].start <= ts;

            if (static_cast<double>(ts) >= dwell_end) {
                if (!nodule_done && static_cast<double>(ts) >= nodule_at) {
                    dwell = {c.nodule->cx, c.nodule->cy};
                    dwell_end = static_cast<double>(ts) + rs.uniform(300.0, 700.0);
                    nodule_done = true;
                } else {
                    dwell = lung.centres[order[next_cell]];
                    next_cell = (next_cell + 1) % order.size();
                    dwell_end = static_cast<double>(ts) + rs.uniform(150.0, 600.0);
                }
            }

            GazeSample s{ts, 0.0, 0.0, false};
            if (in_gap) {
                if (gaps[gap_ix].look_away) {
                    if (look_away_y == 0.0) look_away_y = rs.uniform(100.0, kScreenHeight - 100.0);
                    s.valid = true;
                    s.x = std::max(1.0, vp.offset_x - rs.uniform(40.0, 120.0));
                    s.y = look_away_y;
                }
            } else {
                look_away_y = 0.0;
                Point p{dwell.x + rs.normal(0.0, 0.4), dwell.y + rs.normal(0.0, 0.4)};
                p.x = std::clamp(p.x, 0.0, std::nextafter(static_cast<double>(c.width), 0.0));
                p.y = std::clamp(p.y, 0.0, std::nextafter(static_cast<double>(c.height), 0.0));
                const Point q = vp.to_screen(p);
                s = {ts, q.x, q.y, true};
            }
            out.recording.samples.push_back(s);
        }

        // Labeling phase marks.
        const std::int64_t mark_t = seg_end + 300;
        if (c.positive()) {
            const Disc& d = *c.nodule;
            if (detected) {
                const double r = rs.uniform(0.0, 0.5 * d.radius);
                const double a = rs.uniform(0.0, 2.0 * 3.141592653589793);
                Point m{d.cx + r * std::cos(a), d.cy + r * std::sin(a)};
                m.x = std::clamp(m.x, 0.0, c.width - 1.0);
                m.y = std::clamp(m.y, 0.0, c.height - 1.0);
                out.annotations[c.case_id].push_back({m, mark_t});
            } else if (rs.bernoulli(0.3)) {
                const double margin = d.radius + 0.1 * c.width;
                for (int attempt = 0; attempt < 64; ++attempt) {
                    const Point m = random_pixel(lung.all, rs);
                    if (std::hypot(m.x - d.cx, m.y - d.cy) > margin) {
                        out.annotations[c.case_id].push_back({m, mark_t});
                        break;
                    }
                }
            }
        } else {
            const double p_mark = c.case_class == CaseClass::distractor ? 0.7 : 0.05;
            if (rs.bernoulli(p_mark)) out.annotations[c.case_id].push_back({random_pixel(lung.all, rs), mark_t});
        }

        t = seg_end + static_cast<std::int64_t>(timing.uniform(1500.0, 4000.0));
    }
    return out;
}

// ---- trial config ----------------------------------------------------------

TrialConfig default_trial_config() {
    TrialConfig c;
    c.intervention = {31.0 / 90.0, (35.0 / 90.0) / 3.0, 54.41, 0.76, 0.23};
    c.control = {30.0 / 90.0, (5.0 / 90.0) / 3.0, 57.36, 0.82, 0.025};
    c.faculty = {0.75, 0.0, 35.0, 0.85, 0.05};
    c.subjects_per_group = 5;
    c.faculty_count = 3;
    c.subject_sd = 0.0;
    c.seed = 1;
    return c;
}

namespace {

void check_profile(const GroupProfile& g, const std::string& name) {
    const auto bad = [&](const std::string& what) { throw ValidationError("trial config: " + name + "." + what); };
    if (!(g.base_sensitivity >= 0.0 && g.base_sensitivity <= 1.0)) bad("base_sensitivity must lie in [0,1]");
    if (!(g.learning_rate >= -1.0 && g.learning_rate <= 1.0)) bad("learning_rate must lie in [-1,1]");
    if (!(g.scan_speed_s > 0.0 && g.scan_speed_s < 3600.0)) bad("scan_speed_s must lie in (0,3600)");
    if (!(g.coverage_propensity >= 0.0 && g.coverage_propensity <= 1.0)) bad("coverage_propensity must lie in [0,1]");
    if (!(g.interruption_rate >= 0.0 && g.interruption_rate < 60.0)) bad("interruption_rate must lie in [0,60)");
}

GroupProfile profile_from_json(const json& j, GroupProfile g) {
    g.base_sensitivity = j.value("base_sensitivity", g.base_sensitivity);
    g.learning_rate = j.value("learning_rate", g.learning_rate);
    g.scan_speed_s = j.value("scan_speed_s", g.scan_speed_s);
    g.coverage_propensity = j.value("coverage_propensity", g.coverage_propensity);
    g.interruption_rate = j.value("interruption_rate", g.interruption_rate);
    return g;
}

json profile_to_json(const GroupProfile& g) {
    return {{"base_sensitivity", g.base_sensitivity},
            {"learning_rate", g.learning_rate},
            {"scan_speed_s", g.scan_speed_s},
            {"coverage_propensity", g.coverage_propensity},
            {"interruption_rate", g.interruption_rate}};
}

}  // namespace

TrialConfig trial_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("trial config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("trial config: expected a JSON object");
    TrialConfig c = default_trial_config();
    try {
        if (j.contains("groups")) {
            const auto& g = j.at("groups");
            if (g.contains("intervention")) c.intervention = profile_from_json(g["intervention"], c.intervention);
            if (g.contains("control")) c.control = profile_from_json(g["control"], c.control);
            if (g.contains("faculty")) c.faculty = profile_from_json(g["faculty"], c.faculty);
        }
        c.subjects_per_group = j.value("subjects_per_group", c.subjects_per_group);
        c.faculty_count = j.value("faculty", c.faculty_count);
        c.subject_sd = j.value("subject_sd", c.subject_sd);
        c.seed = j.value("seed", c.seed);
        c.pool.image_size = j.value("image_size", c.pool.image_size);
        if (j.contains("metrics")) {
            const auto& m = j["metrics"];
            if (m.contains("foveal_radius_px") && !m["foveal_radius_px"].is_null())
                c.metrics.foveal_radius_px = m["foveal_radius_px"].get<double>();
            c.metrics.hit_slack_px = m.value("hit_slack_px", c.metrics.hit_slack_px);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("trial config: ") + e.what());
    }
    check_profile(c.intervention, "intervention");
    check_profile(c.control, "control");
    check_profile(c.faculty, "faculty");
    if (c.subjects_per_group < 1 || c.subjects_per_group > 1000)
        throw ValidationError("trial config: subjects_per_group must lie in [1,1000]");
    if (c.faculty_count < 0 || c.faculty_count > 100) throw ValidationError("trial config: faculty must lie in [0,100]");
    if (!(c.subject_sd >= 0.0 && c.subject_sd <= 1.0)) throw ValidationError("trial config: subject_sd must lie in [0,1]");
    if (c.pool.image_size < 32 || c.pool.image_size > 4096)
        throw ValidationError("trial config: image_size must lie in [32,4096]");
    if (c.metrics.foveal_radius_px && !(*c.metrics.foveal_radius_px > 0.0))
        throw ValidationError("trial config: metrics.foveal_radius_px must be positive");
    if (!(c.metrics.hit_slack_px >= 0.0)) throw ValidationError("trial config: metrics.hit_slack_px must be >= 0");
    return c;
}

std::string trial_config_to_json(const TrialConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["subjects_per_group"] = c.subjects_per_group;
    j["faculty"] = c.faculty_count;
    j["subject_sd"] = c.subject_sd;
    j["image_size"] = c.pool.image_size;
    j["groups"] = {{"intervention", profile_to_json(c.intervention)},
                   {"control", profile_to_json(c.control)},
                   {"faculty", profile_to_json(c.faculty)}};
    j["metrics"] = {{"foveal_radius_px", c.metrics.foveal_radius_px ? json(*c.metrics.foveal_radius_px) : json(nullptr)},
                    {"hit_slack_px", c.metrics.hit_slack_px}};
    return j.dump(2) + "\n";
}

// ---- trial -----------------------------------------------------------------

namespace {

std::string subject_name(char prefix, std::size_t i) {
    return fmt::format("{}{:02}", prefix, i + 1);
}

SubjectProfile make_profile(const GroupProfile& g, double subject_sd, std::uint64_t seed) {
    rng::Stream rs(rng::derive_seed(seed, {7}));
    SubjectProfile p;
    p.seed = seed;
    const double jitter = subject_sd > 0.0 ? rs.normal(0.0, subject_sd) : 0.0;
    p.base_sensitivity = std::clamp(g.base_sensitivity + jitter, 0.0, 1.0);
    p.learning_rate = g.learning_rate;
    p.scan_speed_s = g.scan_speed_s * std::exp(rs.normal(0.0, 0.15));
    p.coverage_propensity = std::clamp(g.coverage_propensity + rs.normal(0.0, 0.04), 0.05, 1.0);
    p.interruption_rate = g.interruption_rate * std::exp(rs.normal(0.0, 0.3));
    return p;
}

std::uint64_t session_seed(const SubjectProfile& p, int session) {
    return rng::derive_seed(p.seed, {static_cast<std::uint64_t>(session)});
}

}  // namespace

std::vector<PlannedSubject> plan_subjects(const TrialConfig& config) {
    const auto n = static_cast<std::size_t>(config.subjects_per_group);
    const std::uint64_t enroll_seed = rng::derive_seed(config.seed, {3});

    // Randomizing a longer candidate list never changes earlier assignments,
    // so the list grows until both arms are full.
    std::size_t candidates = 2 * n;
    EnrollmentPlan plan;
    std::vector<Enrollee> people;
    while (true) {
        people.clear();
        for (std::size_t i = 0; i < static_cast<std::size_t>(config.faculty_count); ++i)
            people.push_back({subject_name('F', i), Role::faculty});
        for (std::size_t i = 0; i < candidates; ++i) people.push_back({subject_name('R', i), Role::resident});
        plan = block_randomize(people, enroll_seed);
        std::size_t ni = 0, nc = 0;
        for (const auto& e : people)
            if (e.role == Role::resident) (plan.assignment.at(e.subject_id) == Group::intervention ? ni : nc)++;
        if (ni >= n && nc >= n) break;
        candidates *= 2;
    }

    std::vector<PlannedSubject> out;
    std::size_t ni = 0, nc = 0, index = 0;
    for (const auto& e : people) {
        const std::uint64_t seed = rng::derive_seed(config.seed, {4, index++});
        if (e.role == Role::faculty) {
            out.push_back({e, std::nullopt, make_profile(config.faculty, 0.0, seed)});
            continue;
        }
        const Group g = plan.assignment.at(e.subject_id);
        auto& count = g == Group::intervention ? ni : nc;
        if (count >= n) continue;
        ++count;
        const auto& gp = g == Group::intervention ? config.intervention : config.control;
        out.push_back({e, g, make_profile(gp, config.subject_sd, seed)});
    }
    return out;
}

TrialResult simulate_trial(const TrialConfig& config, unsigned jobs) {
    TrialResult res;
    res.config = config;
    res.pool = generate_case_pool(config.pool, rng::derive_seed(config.seed, {1}));
    res.casesets = build_casesets(res.pool, rng::derive_seed(config.seed, {2}));
    res.subjects = plan_subjects(config);

    // The pipeline consumes the simulator through the on-disk formats.
    std::map<std::string, std::string> mask_bytes;
    for (const auto& c : res.pool) mask_bytes[c.mask_path] = write_mask(c.lung_mask);
    std::istringstream manifest(write_case_manifest(res.pool));
    const auto cases = parse_case_manifest(manifest, [&](const std::string& path) {
        return parse_mask(std::string_view(mask_bytes.at(path)));
    });

    std::vector<Enrollee> all;
    for (const auto& s : res.subjects) all.push_back(s.enrollee);
    res.plan.subjects = all;
    res.plan.seed = rng::derive_seed(config.seed, {3});
    for (const auto& s : res.subjects)
        if (s.group) res.plan.assignment[s.enrollee.subject_id] = *s.group;

    res.runs.resize(res.subjects.size() * kSessions);
    detail::parallel_for(res.runs.size(), jobs, [&](std::size_t k) {
        const auto& subj = res.subjects[k / kSessions];
        const auto& set = res.casesets[k % kSessions];
        auto& run = res.runs[k];
        run.subject_id = subj.enrollee.subject_id;
        run.role = subj.enrollee.role;
        run.group = subj.group;
        run.session_index = set.session_index;
        run.data = simulate_session(subj.profile, set, cases, session_seed(subj.profile, set.session_index),
                                    run.subject_id);

        std::stringstream gaze, segs, marks, vps;
        write_gaze_log(gaze, run.data.recording);
        write_segments(segs, run.data.recording.segments);
        write_annotations(marks, run.data.annotations);
        write_viewports(vps, run.data.viewports);

        auto rec = parse_gaze_log(gaze, run.subject_id, run.session_index);
        attach_segments(rec, parse_segments(segs));
        const auto ann = parse_annotations(marks, cases);
        const auto viewports = parse_viewports(vps);

        SessionInputs in;
        in.recording = &rec;
        in.viewports = &viewports;
        in.cases = &cases;
        in.annotations = &ann;
        in.params = config.metrics;
        in.params.jobs = 1;
        run.analysis = session_metrics(in);
    });

    res.panel.metrics = panel_metric_names();
    for (const auto& run : res.runs) {
        if (!run.group) continue;
        const auto& b = run.analysis.bundle;
        res.panel.rows.push_back({run.subject_id, *run.group, run.session_index,
                                  {b.sensitivity, b.coverage, b.heterogeneity_mean,
                                   static_cast<double>(b.interruptions), b.mean_review_time_s}});
    }
    return res;
}

TrialPanel simulate_detection_panel(const TrialConfig& config) {
    TrialPanel panel;
    panel.metrics = {"Accuracy"};
    for (const auto& s : plan_subjects(config)) {
        if (!s.group) continue;
        for (int k = 1; k <= kSessions; ++k) {
            const auto hits = draw_detections(s.profile, k, kPositivesPerSession, session_seed(s.profile, k));
            const auto n = std::count(hits.begin(), hits.end(), true);
            panel.rows.push_back({s.enrollee.subject_id, *s.group, k,
                                  {static_cast<double>(n) / static_cast<double>(kPositivesPerSession)}});
        }
    }
    return panel;
}

TrialPanel expected_detection_panel(const TrialConfig& config) {
    TrialPanel panel;
    panel.metrics = {"Accuracy"};
    for (const auto& s : plan_subjects(config)) {
        if (!s.group) continue;
        for (int k = 1; k <= kSessions; ++k)
            panel.rows.push_back({s.enrollee.subject_id, *s.group, k, {detection_probability(s.profile, k)}});
    }
    return panel;
}

}  // namespace gazelab
