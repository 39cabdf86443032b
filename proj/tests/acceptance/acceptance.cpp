// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/core.h>

#include "fixtures.hpp"
#include "gazelab/metrics.hpp"
#include "gazelab/preprocess.hpp"
#include "gazelab/rng.hpp"
#include "gazelab/stats.hpp"
#include "gazelab/trial.hpp"

#ifdef GAZELAB_HAVE_CLI
#include "cli.hpp"
#endif

using namespace gazelab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Point> random_path(rng::Stream& rs, std::size_t n) {
    std::vector<Point> p(n);
    for (auto& q : p) q = {rs.uniform(-50.0, 50.0), rs.uniform(-50.0, 50.0)};
    return p;
}

Verdict dtw_oracle() {
    const auto t0 = Clock::now();
    rng::Stream rs(rng::derive_seed(1, {}));
    double worst = 0.0;
    for (int k = 0; k < 500; ++k) {
        const auto a = random_path(rs, static_cast<std::size_t>(rs.uniform_int(1, 6)));
        const auto b = random_path(rs, static_cast<std::size_t>(rs.uniform_int(1, 6)));
        const double want = fixtures::dtw_bruteforce(a, b);
        const double got = dtw_distance(a, b);
        worst = std::max(worst, std::abs(got - want) / std::max(want, 1e-300));
    }
    int asym = 0, self = 0;
    for (int k = 0; k < 10000; ++k) {
        const auto a = random_path(rs, static_cast<std::size_t>(rs.uniform_int(1, 30)));
        const auto b = random_path(rs, static_cast<std::size_t>(rs.uniform_int(1, 30)));
        asym += dtw_distance(a, b) != dtw_distance(b, a);
        self += dtw_distance(a, a) != 0.0;
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && asym == 0 && self == 0 && secs < 10.0,
            fmt::format("max rel err {:.3g} over 500 pairs; asymmetric {}, nonzero self {} of 10000; {:.2f} s", worst,
                        asym, self, secs)};
}

Verdict anova_df() {
    const auto panel = gaussian_null_panel(5, 4, 11);
    const auto t = mixed_anova(panel, 0);

    double grand = 0.0;
    for (const auto& r : panel.rows) grand += r.values[0];
    grand /= static_cast<double>(panel.rows.size());
    double ss_total = 0.0;
    for (const auto& r : panel.rows) ss_total += (r.values[0] - grand) * (r.values[0] - grand);

    const double parts = t.ss_group + t.ss_subjects_within_group + t.ss_session + t.ss_interaction + t.ss_error;
    const double additivity = std::abs(parts - ss_total) / ss_total;
    const bool df_ok = t.group.df1 == 1 && t.group.df2 == 8 && t.session.df1 == 3 && t.session.df2 == 24 &&
                       t.interaction.df1 == 3 && t.interaction.df2 == 24;
    bool eta_ok = true;
    for (const auto* e : {&t.group, &t.session, &t.interaction})
        eta_ok = eta_ok && e->partial_eta_squared == e->ss / (e->ss + e->ss_error_term);
    eta_ok = eta_ok && t.group.ss_error_term == t.ss_subjects_within_group && t.session.ss_error_term == t.ss_error &&
             t.interaction.ss_error_term == t.ss_error;
    return {df_ok && additivity <= 1e-9 && eta_ok,
            fmt::format("df ({},{}) ({},{}) ({},{}); SS additivity rel err {:.3g}; eta-squared exact: {}", t.group.df1,
                        t.group.df2, t.session.df1, t.session.df2, t.interaction.df1, t.interaction.df2, additivity,
                        eta_ok ? "yes" : "no")};
}

Verdict anova_calibration() {
    const int runs = 10000;
    int rejected = 0;
    for (int k = 0; k < runs; ++k)
        rejected += mixed_anova(gaussian_null_panel(5, 4, rng::derive_seed(3, {static_cast<std::uint64_t>(k)})), 0)
                        .group.p < 0.05;
    const double rate = static_cast<double>(rejected) / runs;
    return {std::abs(rate - 0.05) <= 0.01, fmt::format("group rejection rate {:.4f} over {} null panels", rate, runs)};
}

Verdict effect_size() {
    auto config = default_trial_config();
    int significant = 0;
    for (int k = 1; k <= 200; ++k) {
        config.seed = static_cast<std::uint64_t>(k);
        significant += mixed_anova(simulate_detection_panel(config), "Accuracy").group.p < 0.05;
    }
    const auto sum = improvement_summary(expected_detection_panel(default_trial_config()), "Accuracy");
    const double abs_pct = 100.0 * sum[0].absolute_change;
    const double rel_pct = sum[0].relative_change ? 100.0 * *sum[0].relative_change : NAN;
    const double ctl_pct = 100.0 * sum[1].absolute_change;
    const bool fig_ok = sum[0].group == Group::intervention && fmt::format("{:.2f}", abs_pct) == "38.89" &&
                        fmt::format("{:.1f}", rel_pct) == "112.9" && fmt::format("{:.2f}", ctl_pct) == "5.56";
    return {significant >= 160 && fig_ok,
            fmt::format("group p<0.05 in {}/200 runs; intervention +{:.2f}% absolute, +{:.1f}% relative; control "
                        "+{:.2f}%",
                        significant, abs_pct, rel_pct, ctl_pct)};
}

Verdict interruption_rule() {
    const std::vector<std::int64_t> durations{400, 499, 500, 501, 600, 900};
    const std::vector<GapKind> want{GapKind::blink,        GapKind::blink,        GapKind::blink,
                                    GapKind::interruption, GapKind::interruption, GapKind::interruption};
    // 1 ms sampling so every gap spans exactly its duration; 1 s of valid gaze between gaps.
    GazeRecording rec;
    std::vector<std::pair<std::int64_t, std::int64_t>> holes;
    std::int64_t t = 1000;
    for (auto d : durations) {
        holes.emplace_back(t, t + d);
        t += d + 1000;
    }
    rec.segments = {{"a", 0, t}};
    for (std::int64_t s = 0; s < t; ++s) {
        const bool off = std::any_of(holes.begin(), holes.end(), [&](auto h) { return s >= h.first && s < h.second; });
        rec.samples.push_back({s, 50.0, 50.0, !off});
    }
    const std::vector<CaseDefinition> cases{fixtures::make_case("a", CaseClass::normal, 100, 100)};
    const auto traces = segment_by_case(rec, {{"a", Viewport{}}}, cases);

    bool ok = traces.size() == 1 && traces[0].gaps.size() == durations.size();
    std::string kinds;
    if (ok)
        for (std::size_t i = 0; i < durations.size(); ++i) {
            const auto& g = traces[0].gaps[i];
            ok = ok && g.duration_ms() == durations[i] && g.kind == want[i] && classify_gap(durations[i]) == want[i];
            kinds += g.kind == GapKind::blink ? "B" : "I";
        }
    const auto n = ok ? count_interruptions(traces[0].gaps) : 0;
    return {ok && n == 3, fmt::format("kinds {} (B=blink, I=interruption), {} interruptions", kinds, n)};
}

Verdict coverage_oracle() {
    auto c = fixtures::make_case("a", CaseClass::normal, 64, 64);
    c.lung_mask = fixtures::disc_mask(64, 64, 30.0, 34.0, 25.0);
    const double total = static_cast<double>(c.lung_mask.count());

    const auto empty = coverage(std::vector{fixtures::trajectory({}, 64, 64, 33, "a")}, {c}, 5.0);

    std::vector<Point> grid;
    for (int y = 0; y < 64; y += 4)
        for (int x = 0; x < 64; x += 4) grid.push_back({x + 2.0, y + 2.0});
    const auto full = coverage(std::vector{fixtures::trajectory(grid, 64, 64, 33, "a")}, {c}, 3.0);

    rng::Stream rs(rng::derive_seed(6, {}));
    int mismatches = 0;
    for (int k = 0; k < 200; ++k) {
        const Point p{rs.uniform(0.0, 64.0), rs.uniform(0.0, 64.0)};
        const double r = rs.uniform(0.5, 20.0);
        const auto got = covered_lung_pixels(fixtures::trajectory({p}, 64, 64), c.lung_mask, r);
        const auto want = fixtures::coverage_bruteforce(c.lung_mask, {p}, r);
        const auto frac = coverage(std::vector{fixtures::trajectory({p}, 64, 64, 33, "a")}, {c}, r).fraction;
        mismatches += got != want || frac != static_cast<double>(want) / total;
    }
    return {empty.fraction == 0.0 && full.fraction == 1.0 && mismatches == 0,
            fmt::format("empty {}, grid {}, brute-force mismatches {} of 200", empty.fraction, full.fraction,
                        mismatches)};
}

Verdict heatmap_properties() {
    rng::Stream rs(rng::derive_seed(7, {}));
    int range_bad = 0, perm_bad = 0;
    for (int k = 0; k < 100; ++k) {
        const int w = static_cast<int>(rs.uniform_int(16, 80)), h = static_cast<int>(rs.uniform_int(16, 80));
        std::vector<GazeTrajectory> scans;
        const auto n = rs.uniform_int(1, 8);
        for (std::int64_t s = 0; s < n; ++s) {
            std::vector<Point> p(static_cast<std::size_t>(rs.uniform_int(0, 25)));
            for (auto& q : p) q = {rs.uniform(0.0, w), rs.uniform(0.0, h)};
            scans.push_back(fixtures::trajectory(p, w, h));
        }
        const HeatmapConfig cfg{static_cast<double>(rs.uniform_int(1, 4)), rs.uniform(0.0, 12.0), 0.0, std::nullopt};
        const auto a = build_heatmap(scans, cfg);
        for (auto v : a.cells) range_bad += v > static_cast<std::uint32_t>(a.n_scans);
        rs.shuffle(scans.begin(), scans.end());
        perm_bad += build_heatmap(scans, cfg).cells != a.cells;
    }

    int disc_bad = 0;
    for (int k = 0; k < 100; ++k) {
        const double cell = static_cast<double>(rs.uniform_int(1, 4));
        const double r = rs.uniform(0.0, 15.0);
        const Point p{rs.uniform(0, 60), rs.uniform(0, 50)};
        const auto h = build_heatmap(std::vector{fixtures::trajectory({p}, 60, 50)}, {cell, r, 0.0, std::nullopt});
        const int sx = static_cast<int>(p.x / cell), sy = static_cast<int>(p.y / cell);
        for (int y = 0; y < h.grid_height; ++y)
            for (int x = 0; x < h.grid_width; ++x) {
                const double dx = (x - sx) * cell, dy = (y - sy) * cell;
                disc_bad += h.at(x, y) != (dx * dx + dy * dy <= r * r ? 1u : 0u);
            }
    }
    return {range_bad == 0 && perm_bad == 0 && disc_bad == 0,
            fmt::format("out-of-range cells {}, order-dependent inputs {} of 100, disc oracle mismatches {}",
                        range_bad, perm_bad, disc_bad)};
}

// Fraction of replicates where a two-sided pooled t test rejects at alpha.
double monte_carlo_power(int n, double d, double alpha, int replicates, std::uint64_t seed) {
    const boost::math::students_t dist(2.0 * n - 2.0);
    const double crit = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
    rng::Stream rs(seed);
    int hits = 0;
    for (int k = 0; k < replicates; ++k) {
        double s1 = 0, q1 = 0, s2 = 0, q2 = 0;
        for (int i = 0; i < n; ++i) {
            const double x = rs.normal(d), y = rs.normal();
            s1 += x;
            q1 += x * x;
            s2 += y;
            q2 += y * y;
        }
        const double m1 = s1 / n, m2 = s2 / n;
        const double pooled = ((q1 - n * m1 * m1) + (q2 - n * m2 * m2)) / (2.0 * n - 2.0);
        const double t = (m1 - m2) / std::sqrt(pooled * 2.0 / n);
        hits += std::abs(t) > crit;
    }
    return static_cast<double>(hits) / replicates;
}

Verdict power_analysis() {
    const int n = power_sample_size(1.0, 1.0, 0.05, 0.8);
    int mc_n = 0;
    double mc_power = 0.0;
    for (int m = 2; m <= 60 && mc_n == 0; ++m) {
        mc_power = monte_carlo_power(m, 1.0, 0.05, 100000, rng::derive_seed(8, {static_cast<std::uint64_t>(m)}));
        if (mc_power >= 0.8) mc_n = m;
    }
    return {n == 17 && mc_n != 0 && std::abs(mc_n - n) <= 1,
            fmt::format("n={}; Monte-Carlo n={} (power {:.4f} over 1e5 replicates)", n, mc_n, mc_power)};
}

#ifdef GAZELAB_HAVE_CLI
std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream f(e.path(), std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        files[fs::relative(e.path(), root).generic_string()] = s.str();
    }
    return files;
}
#endif

Verdict determinism() {
#ifdef GAZELAB_HAVE_CLI
    const auto base = fs::temp_directory_path() / "gazelab_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);
    auto config = default_trial_config();
    config.pool.image_size = 64;
    for (auto* g : {&config.intervention, &config.control, &config.faculty}) g->scan_speed_s = 2.5;
    {
        std::ofstream(base / "config.json") << trial_config_to_json(config);
    }
    const auto t0 = Clock::now();
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* run : {"a", "b"}) {
        std::ostringstream out, err;
        const int code = cli::run({"simulate", "--config", (base / "config.json").string(), "--seed", "42", "--out",
                                   (base / run).string()},
                                  out, err);
        if (code != 0) return {false, fmt::format("simulate exited {}: {}", code, err.str())};
        trees.push_back(tree(base / run));
    }
    const double secs = seconds_since(t0);
    std::size_t metrics = 0, anova = 0, reports = 0;
    for (const auto& [name, bytes] : trees[0]) {
        metrics += name.ends_with("metrics.json");
        anova += name == "anova.csv";
        reports += name.ends_with("report.html");
    }
    const bool same = trees[0] == trees[1];
    fs::remove_all(base);
    return {same && metrics > 0 && anova == 1 && reports > 0,
            fmt::format("{} files identical across runs: {} ({} metrics.json, {} reports); {:.1f} s for two runs",
                        trees[0].size(), same ? "yes" : "no", metrics, reports, secs)};
#else
    return {false, "command-line tool not built"};
#endif
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"DTW oracle equivalence", dtw_oracle},
        {"ANOVA degrees of freedom", anova_df},
        {"ANOVA calibration", anova_calibration},
        {"effect-size reproduction", effect_size},
        {"interruption rule", interruption_rule},
        {"coverage bounds and oracle", coverage_oracle},
        {"heatmap properties", heatmap_properties},
        {"power", power_analysis},
        {"end-to-end determinism", determinism},
    };
    const auto t0 = Clock::now();
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, fmt::format("exception: {}", e.what())};
        }
        failed += !v.pass;
        std::cout << fmt::format("criterion {}: {} {}: {}", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                                 v.detail)
                  << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed in {:.1f} s", criteria.size() - failed, criteria.size(),
                             seconds_since(t0))
              << std::endl;
    return failed == 0 ? 0 : 1;
}
