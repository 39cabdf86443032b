#include <doctest.h>

#include <numeric>

#include "fixtures.hpp"
#include "gazelab/error.hpp"
#include "gazelab/metrics.hpp"
#include "gazelab/rng.hpp"

using namespace gazelab;
using doctest::Approx;

namespace {

std::vector<CaseDefinition> nodule_cases(int n) {
    std::vector<CaseDefinition> cases;
    for (int i = 0; i < n; ++i) cases.push_back(fixtures::make_case("n" + std::to_string(i), CaseClass::nodule));
    return cases;
}

std::vector<Point> random_points(rng::Stream& rs, std::size_t n) {
    std::vector<Point> v(n);
    for (auto& p : v) p = {rs.uniform(), rs.uniform()};
    return v;
}

// Three cases over [0,1000), [1000,2000), [2000,3000) on a 64x64 image.
struct CraftedSession {
    std::vector<CaseDefinition> cases{fixtures::make_case("nod", CaseClass::nodule),
                                      fixtures::make_case("nrm1", CaseClass::normal),
                                      fixtures::make_case("nrm2", CaseClass::normal)};
    GazeRecording rec;
    ViewportMap vps{{"nod", {}}, {"nrm1", {}}, {"nrm2", {}}};
    AnnotationSet marks{{"nod", {{{33.0, 31.0}, 1200}}}};

    CraftedSession() {
        rec.subject_id = "S";
        rec.segments = {{"nod", 0, 1000}, {"nrm1", 1000, 2000}, {"nrm2", 2000, 3000}};
        for (std::int64_t t = 0; t < 3000; t += 20) {
            const bool blink = t >= 1200 && t < 1400;
            const bool away = t >= 2200 && t < 2900;
            const double x = 5.0 + static_cast<double>(t % 1000) / 20.0;
            rec.samples.push_back({t, away ? -50.0 : x, 20.0 + (t / 1000) * 10.0, !blink});
        }
    }
};

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("seven hits of eighteen nodules") {
        const auto cases = nodule_cases(18);
        AnnotationSet marks;
        for (int i = 0; i < 7; ++i) marks["n" + std::to_string(i)] = {{{32.0, 32.0}, 0}};
        marks["n10"] = {{{2.0, 2.0}, 0}};
        const auto d = detection_outcomes(marks, cases);
        CHECK(d.hits == 7);
        CHECK(d.positives == 18);
        CHECK(d.sensitivity == Approx(7.0 / 18.0));
        CHECK(d.outcomes[10].call == Call::miss);
        CHECK(d.outcomes[3].call == Call::hit);
        REQUIRE(d.outcomes[3].matched_mark);
    }

    TEST_CASE("no marks means every nodule is missed") {
        auto cases = nodule_cases(3);
        cases.push_back(fixtures::make_case("z", CaseClass::normal));
        const auto d = detection_outcomes({}, cases);
        CHECK(d.sensitivity == 0.0);
        for (int i = 0; i < 3; ++i) CHECK(d.outcomes[i].call == Call::miss);
        CHECK(d.outcomes[3].call == Call::not_applicable);
    }

    TEST_CASE("disc boundary is inclusive and slack widens it") {
        const auto cases = nodule_cases(1);  // disc (32,32) r=4
        CHECK(detection_outcomes({{"n0", {{{36.0, 32.0}, 0}}}}, cases).hits == 1);
        CHECK(detection_outcomes({{"n0", {{{36.5, 32.0}, 0}}}}, cases).hits == 0);
        CHECK(detection_outcomes({{"n0", {{{36.5, 32.0}, 0}}}}, cases, 0.5).hits == 1);
    }

    TEST_CASE("detection errors") {
        CHECK_THROWS_AS(detection_outcomes({{"nope", {{{1, 1}, 0}}}}, nodule_cases(1)), ValidationError);
        CHECK_THROWS_AS(detection_outcomes({}, {fixtures::make_case("z", CaseClass::normal)}), ValidationError);
    }

    TEST_CASE("coverage of empty gaze is zero") {
        const auto c = fixtures::make_case("a", CaseClass::normal);
        const std::vector<GazeTrajectory> t{fixtures::trajectory({}, 64, 64, 33, "a")};
        const auto r = coverage(t, {c}, 5.0);
        CHECK(r.covered == 0);
        CHECK(r.fraction == 0.0);
    }

    TEST_CASE("coverage of a fine grid is one") {
        auto c = fixtures::make_case("a", CaseClass::normal);
        c.lung_mask = fixtures::disc_mask(64, 64, 30, 34, 20);
        std::vector<Point> grid;
        for (double y = 0.5; y < 64; y += 3)
            for (double x = 0.5; x < 64; x += 3) grid.push_back({x, y});
        const std::vector<GazeTrajectory> t{fixtures::trajectory(grid, 64, 64, 10, "a")};
        const auto r = coverage(t, {c}, 4.0);
        CHECK(r.fraction == 1.0);
        CHECK(r.covered == c.lung_mask.count());
    }

    TEST_CASE("single sample at the mask centroid matches the pixel oracle") {
        auto c = fixtures::make_case("a", CaseClass::normal);
        c.lung_mask = fixtures::disc_mask(64, 64, 24, 40, 17);
        double mx = 0, my = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (c.lung_mask.at(x, y)) {
                    mx += x + 0.5;
                    my += y + 0.5;
                }
        const double n = static_cast<double>(c.lung_mask.count());
        const Point centroid{mx / n, my / n};
        const auto t = fixtures::trajectory({centroid}, 64, 64, 10, "a");
        const auto expected = fixtures::coverage_bruteforce(c.lung_mask, {centroid}, 10.0);
        CHECK(covered_lung_pixels(t, c.lung_mask, 10.0) == expected);
        CHECK(coverage(std::vector{t}, {c}, 10.0).fraction == Approx(static_cast<double>(expected) / n));
    }

    TEST_CASE("coverage is cumulative over scans") {
        auto a = fixtures::make_case("a", CaseClass::normal);
        auto b = fixtures::make_case("b", CaseClass::normal, 32, 32);
        const std::vector<GazeTrajectory> t{fixtures::trajectory({{10, 10}}, 64, 64, 10, "a"),
                                            fixtures::trajectory({{16, 16}, {5, 5}}, 32, 32, 10, "b")};
        const auto r = coverage(t, {a, b});  // default radius: 5% of width
        const auto ca = fixtures::coverage_bruteforce(a.lung_mask, {{10, 10}}, 3.2);
        const auto cb = fixtures::coverage_bruteforce(b.lung_mask, {{16, 16}, {5, 5}}, 1.6);
        CHECK(r.covered == ca + cb);
        CHECK(r.total == 64 * 64 + 32 * 32);
        REQUIRE(r.per_scan.size() == 2);
        CHECK(r.per_scan[1] == Approx(static_cast<double>(cb) / (32 * 32)));
    }

    TEST_CASE("DTW worked examples") {
        const std::vector<Point> a{{0, 0}};
        const std::vector<Point> b{{0.6, 0.8}};
        CHECK(dtw_distance(a, b) == Approx(1.0).epsilon(1e-15));
        const std::vector<Point> c{{0, 0}, {0.2, 0}};
        const std::vector<Point> d{{0.1, 0}};
        CHECK(dtw_distance(c, d) == Approx(0.2).epsilon(1e-15));
        CHECK(fixtures::dtw_bruteforce(c, d) == Approx(0.2).epsilon(1e-15));
        CHECK(dtw_distance(c, c) == 0.0);
        CHECK_THROWS_AS(dtw_distance(std::vector<Point>{}, d), ValidationError);
    }

    TEST_CASE("DTW agrees with exhaustive alignment on random short sequences") {
        rng::Stream rs(11);
        for (int k = 0; k < 50; ++k) {
            const auto a = random_points(rs, static_cast<std::size_t>(rs.uniform_int(1, 5)));
            const auto b = random_points(rs, static_cast<std::size_t>(rs.uniform_int(1, 5)));
            CHECK(dtw_distance(a, b) == Approx(fixtures::dtw_bruteforce(a, b)).epsilon(1e-12));
            CHECK(dtw_distance(a, b) == dtw_distance(b, a));
        }
    }

    TEST_CASE("trajectory DTW normalizes by image size") {
        const auto a = fixtures::trajectory({{0, 0}}, 200, 100);
        const auto b = fixtures::trajectory({{120, 80}}, 200, 100);
        CHECK(dtw_distance(a, b) == Approx(1.0));
    }

    TEST_CASE("heterogeneity of identical trajectories is zero") {
        const auto t = fixtures::trajectory({{1, 2}, {3, 4}, {5, 6}});
        const std::vector<GazeTrajectory> v{t, t};
        const auto h = heterogeneity(v);
        CHECK(h.n == 2);
        CHECK(h.matrix == std::vector<double>{0, 0, 0, 0});
        CHECK(h.mean == 0.0);
        CHECK(h.std == 0.0);
    }

    TEST_CASE("nine trajectories give a symmetric zero-diagonal matrix") {
        rng::Stream rs(5);
        std::vector<GazeTrajectory> v;
        for (int i = 0; i < 9; ++i) {
            std::vector<Point> p;
            for (int k = 0; k < 20 + i; ++k) p.push_back({rs.uniform(0, 100), rs.uniform(0, 100)});
            v.push_back(fixtures::trajectory(p, 100, 100, 33, "c" + std::to_string(i)));
        }
        const auto h = heterogeneity(v, 3);
        REQUIRE(h.n == 9);
        REQUIRE(h.matrix.size() == 81);
        for (std::size_t i = 0; i < 9; ++i) {
            CHECK(h.at(i, i) == 0.0);
            for (std::size_t j = 0; j < 9; ++j) CHECK(h.at(i, j) == h.at(j, i));
        }
        CHECK(h.upper_triangle().size() == 36);
        CHECK(h.case_ids[4] == "c4");
        CHECK(heterogeneity(v, 1).matrix == h.matrix);
    }

    TEST_CASE("three trajectories: mean and population std of the pairwise distances") {
        const auto a = fixtures::trajectory({{0, 0}, {10, 0}});
        const auto b = fixtures::trajectory({{0, 50}});
        const auto c = fixtures::trajectory({{100, 100}, {50, 50}, {0, 0}});
        const double ab = dtw_distance(a, b), ac = dtw_distance(a, c), bc = dtw_distance(b, c);
        const auto h = heterogeneity(std::vector{a, b, c});
        const double mean = (ab + ac + bc) / 3.0;
        CHECK(h.mean == Approx(mean));
        const double var = ((ab - mean) * (ab - mean) + (ac - mean) * (ac - mean) + (bc - mean) * (bc - mean)) / 3.0;
        CHECK(h.std == Approx(std::sqrt(var)));
        CHECK_THROWS_AS(heterogeneity(std::vector{a}), ValidationError);
    }

    TEST_CASE("interruption counts") {
        CHECK(count_interruptions({}) == 0);
        const std::vector<GapEvent> mixed{{0, 600, classify_gap(600)}, {1000, 1400, classify_gap(400)}};
        CHECK(count_interruptions(mixed) == 1);
        const std::vector<GapEvent> two{{0, 700, classify_gap(700)}, {1000, 1900, classify_gap(900)}};
        CHECK(count_interruptions(two) == 2);
    }

    TEST_CASE("review time") {
        auto t = fixtures::trajectory({});
        t.display_start_ms = 1000;
        t.display_end_ms = 1000 + 54410;
        CHECK(review_times(std::vector{t}).mean_s == Approx(54.41));
        auto a = t, b = t;
        a.display_end_ms = a.display_start_ms + 10000;
        b.display_end_ms = b.display_start_ms + 20000;
        const auto r = review_times(std::vector{a, b});
        CHECK(r.mean_s == Approx(15.0));
        CHECK(r.per_case_s == std::vector<double>{10.0, 20.0});
        CHECK_THROWS_AS(review_times(std::vector<GazeTrajectory>{}), ValidationError);
    }

    TEST_CASE("heatmap without samples is all zero") {
        const std::vector<GazeTrajectory> v(3, fixtures::trajectory({}, 40, 30));
        const auto h = build_heatmap(v, {2.0, 5.0, 0.0, std::nullopt});
        CHECK(h.grid_width == 20);
        CHECK(h.grid_height == 15);
        CHECK(h.n_scans == 3);
        CHECK(h.max_value() == 0);
    }

    TEST_CASE("N scans at one point give a disc of value N") {
        const std::vector<GazeTrajectory> v(4, fixtures::trajectory({{20.5, 20.5}}, 40, 40));
        const auto h = build_heatmap(v, {1.0, 3.0, 0.0, std::nullopt});
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x) {
                const bool inside = (x - 20) * (x - 20) + (y - 20) * (y - 20) <= 9;
                CHECK(h.at(x, y) == (inside ? 4u : 0u));
            }
    }

    TEST_CASE("single-sample heatmap matches the per-cell distance oracle") {
        rng::Stream rs(3);
        for (int k = 0; k < 20; ++k) {
            const double cell = static_cast<double>(rs.uniform_int(1, 4));
            const double r = rs.uniform(0.0, 15.0);
            const Point p{rs.uniform(0, 60), rs.uniform(0, 50)};
            const auto h = build_heatmap(std::vector{fixtures::trajectory({p}, 60, 50)}, {cell, r, 0.0, std::nullopt});
            const int sx = static_cast<int>(p.x / cell), sy = static_cast<int>(p.y / cell);
            for (int y = 0; y < h.grid_height; ++y)
                for (int x = 0; x < h.grid_width; ++x) {
                    const double dx = (x - sx) * cell, dy = (y - sy) * cell;
                    CHECK(h.at(x, y) == (dx * dx + dy * dy <= r * r ? 1u : 0u));
                }
        }
    }

    TEST_CASE("heatmap dimension handling") {
        const std::vector<GazeTrajectory> v{fixtures::trajectory({{1, 1}}, 40, 40), fixtures::trajectory({{1, 1}}, 80, 80)};
        CHECK_THROWS_AS(build_heatmap(v, {1.0, 1.0, 0.0, std::nullopt}), ValidationError);
        const auto h = build_heatmap(v, {1.0, 0.0, 0.0, std::pair{40, 40}});
        CHECK(h.at(1, 1) == 1);
        CHECK(h.at(0, 0) == 1);
        const auto d = default_heatmap_config(1024, 600, 51.2);
        CHECK(d.cell_size_px == 4.0);
        CHECK(d.radial_radius_px == 51.2);
    }

    TEST_CASE("session bundle equals the individually computed metrics") {
        const CraftedSession s;
        const auto a = session_metrics({&s.rec, &s.vps, &s.cases, &s.marks, {}});
        const auto& b = a.bundle;

        const auto traces = segment_by_case(s.rec, s.vps, s.cases);
        std::vector<GazeTrajectory> trajs;
        for (const auto& t : traces) trajs.push_back(t.trajectory);
        CHECK(b.sensitivity == detection_outcomes(s.marks, s.cases).sensitivity);
        CHECK(b.sensitivity == 1.0);
        CHECK(b.coverage == coverage(trajs, s.cases).fraction);
        const auto h = heterogeneity(std::vector{trajs[1], trajs[2]});
        CHECK(b.heterogeneity_mean == h.mean);
        CHECK(b.heterogeneity.case_ids == std::vector<std::string>{"nrm1", "nrm2"});
        CHECK(b.interruptions == 1);
        CHECK(b.cases[1].blinks == 1);
        CHECK(b.cases[2].interruptions == 1);
        CHECK(b.mean_review_time_s == Approx(1.0));
        CHECK(b.heatmap.n_scans == 3);
        CHECK(b.heatmap.max_value() <= 3);
        CHECK(a.outcomes.outcomes.size() == 3);
    }

    TEST_CASE("session without annotations is an error") {
        const CraftedSession s;
        CHECK_THROWS_AS(session_metrics({&s.rec, &s.vps, &s.cases, nullptr, {}}), ValidationError);
    }

    TEST_CASE("five subjects' bundles average to the group-scale sensitivity") {
        // 6+6+6+6+7 = 31 hits over 90 nodule presentations.
        double sum = 0.0;
        for (int hits : {6, 6, 6, 6, 7}) {
            const auto cases = nodule_cases(18);
            AnnotationSet marks;
            for (int i = 0; i < hits; ++i) marks["n" + std::to_string(i)] = {{{32.0, 32.0}, 0}};
            sum += detection_outcomes(marks, cases).sensitivity;
        }
        CHECK(std::abs(100.0 * sum / 5.0 - 34.44) <= 0.005);  // reported to two decimals
    }
}
