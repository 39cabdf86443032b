#include <doctest.h>

#ifdef GAZELAB_HAVE_CLI

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "gazelab/serialize.hpp"
#include "gazelab/stats.hpp"
#include "gazelab/trial.hpp"

using namespace gazelab;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void put(const fs::path& p, const std::string& bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << bytes;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Scratch directory holding one simulated session in the on-disk formats.
struct Workspace {
    fs::path root;
    std::vector<CaseDefinition> pool;
    SimulatedSession session;

    explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / name) {
        fs::remove_all(root);
        PoolSpec spec;
        spec.image_size = 64;
        pool = generate_case_pool(spec, 4);
        const auto sets = build_casesets(pool, 4);
        SubjectProfile p;
        p.base_sensitivity = 0.5;
        p.scan_speed_s = 3.0;
        p.interruption_rate = 2.0;
        session = simulate_session(p, sets[0], pool, 12, "R1");

        put(root / "manifest.json", write_case_manifest(pool));
        for (const auto& c : pool) put(root / c.mask_path, write_mask(c.lung_mask));
        std::ostringstream gaze, seg, ann, vp;
        write_gaze_log(gaze, session.recording);
        write_segments(seg, session.recording.segments);
        write_annotations(ann, session.annotations);
        write_viewports(vp, session.viewports);
        put(root / "gaze.csv", gaze.str());
        put(root / "segments.csv", seg.str());
        put(root / "annotations.csv", ann.str());
        put(root / "viewports.csv", vp.str());
    }

    ~Workspace() { fs::remove_all(root); }

    std::vector<std::string> metrics_args(const std::string& out) const {
        return {"metrics",       "--manifest",  (root / "manifest.json").string(),
                "--gaze",        (root / "gaze.csv").string(),
                "--segments",    (root / "segments.csv").string(),
                "--annotations", (root / "annotations.csv").string(),
                "--viewports",   (root / "viewports.csv").string(),
                "--subject",     "R1",
                "--out",         (root / out).string()};
    }
};

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("no arguments prints usage and fails") {
        const auto r = run({});
        CHECK(r.code == 1);
        CHECK(r.err.find("Usage") != std::string::npos);
        CHECK(r.out.empty());
    }

    TEST_CASE("power prints the per-group sample size") {
        const auto r = run({"power", "--delta", "10", "--sd", "10", "--alpha", "0.05", "--power", "0.8"});
        CHECK(r.code == 0);
        CHECK(r.out == "n=17\n");
    }

    TEST_CASE("unknown flags and bad parameters are validation errors") {
        CHECK(run({"power", "--delta", "1", "--sd", "1", "--bogus", "2"}).code == 1);
        CHECK(run({"power", "--delta", "1", "--sd", "0"}).code == 1);
        CHECK(run({"power", "--delta", "1", "--sd", "1", "--alpha", "1.5"}).code == 1);
        CHECK(run({"frobnicate"}).code == 1);
        CHECK(run({"--help"}).code == 0);
    }

    TEST_CASE("missing input file is an I/O error") {
        const auto r = run({"anova", "--panel", "/nonexistent/panel.csv"});
        CHECK(r.code == 2);
        CHECK(r.err.find("/nonexistent/panel.csv") != std::string::npos);
    }

    TEST_CASE("anova writes Group, Session and Interaction rows per metric") {
        const auto dir = fs::temp_directory_path() / "gazelab_cli_anova";
        fs::remove_all(dir);
        auto config = default_trial_config();
        const auto panel = simulate_detection_panel(config);
        std::ostringstream csv;
        write_panel_csv(csv, panel);
        put(dir / "panel.csv", csv.str());
        const auto r = run({"anova", "--panel", (dir / "panel.csv").string(), "--out", (dir / "anova.csv").string()});
        REQUIRE(r.code == 0);
        const auto text = slurp(dir / "anova.csv");
        CHECK(text.rfind("Variable,Source,DF1,DF2,F,p-value,eta-squared\nAccuracy,Group,1,8,", 0) == 0);
        CHECK(text.find("\nAccuracy,Session,3,24,") != std::string::npos);
        CHECK(text.find("\nAccuracy,Interaction,3,24,") != std::string::npos);
        const auto stdout_run = run({"anova", "--panel", (dir / "panel.csv").string()});
        CHECK(stdout_run.out == text);
        fs::remove_all(dir);
    }

    TEST_CASE("metrics then report on one recording") {
        const Workspace ws("gazelab_cli_metrics");
        const auto r = run(ws.metrics_args("m"));
        REQUIRE_MESSAGE(r.code == 0, r.err);
        for (const char* f : {"metrics.json", "heatmap.pgm", "heatmap.json", "features.json"})
            CHECK(fs::exists(ws.root / "m" / f));

        const auto doc = metrics_from_json(slurp(ws.root / "m" / "metrics.json"));
        const auto direct =
            session_metrics({&ws.session.recording, &ws.session.viewports, &ws.pool, &ws.session.annotations, {}});
        CHECK(doc.bundle.sensitivity == direct.bundle.sensitivity);
        CHECK(doc.bundle.coverage == direct.bundle.coverage);
        CHECK(doc.bundle.interruptions == direct.bundle.interruptions);
        CHECK(doc.bundle.heterogeneity.matrix == direct.bundle.heterogeneity.matrix);
        CHECK(slurp(ws.root / "m" / "heatmap.pgm").rfind("P5\n", 0) == 0);

        // Same bundle under a faculty alias so both reference strata exist.
        auto text = slurp(ws.root / "m" / "metrics.json");
        const auto pos = text.find("\"subject_id\": \"R1\"");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 18, "\"subject_id\": \"F1\"");
        put(ws.root / "f" / "metrics.json", text);
        put(ws.root / "roles.csv", "subject_id,role\nR1,resident\nF1,faculty\n");
        const auto rep = run({"report", "--bundles", (ws.root / "m" / "metrics.json").string(),
                              (ws.root / "f" / "metrics.json").string(), "--roles", (ws.root / "roles.csv").string(),
                              "--out", (ws.root / "reports").string()});
        REQUIRE_MESSAGE(rep.code == 0, rep.err);
        CHECK(fs::exists(ws.root / "reports" / "R1" / "1" / "report.html"));
        CHECK(fs::exists(ws.root / "reports" / "F1" / "1" / "heatmap.png"));
    }

    TEST_CASE("flags override the config file") {
        const Workspace ws("gazelab_cli_config");
        put(ws.root / "cfg.json", R"({"metrics": {"foveal_radius_px": 2.0, "hit_slack_px": 1.0}})");
        auto args = ws.metrics_args("m");
        args.insert(args.end(), {"--config", (ws.root / "cfg.json").string(), "--foveal-radius", "5"});
        REQUIRE(run(args).code == 0);
        const auto doc = metrics_from_json(slurp(ws.root / "m" / "metrics.json"));
        CHECK(doc.bundle.foveal_radius_px == 5.0);
        CHECK(doc.bundle.hit_slack_px == 1.0);
    }

    TEST_CASE("validation failures write nothing") {
        const Workspace ws("gazelab_cli_invalid");
        put(ws.root / "annotations.csv", "case_id,x,y,mark_timestamp_ms\nnope,1,1,0\n");
        const auto r = run(ws.metrics_args("m"));
        CHECK(r.code == 1);
        CHECK(r.err.find("line 2") != std::string::npos);
        CHECK_FALSE(fs::exists(ws.root / "m"));

        auto args = ws.metrics_args("m2");
        args.insert(args.end(), {"--foveal-radius", "-1"});
        CHECK(run(args).code == 1);
        CHECK_FALSE(fs::exists(ws.root / "m2"));
    }

    TEST_CASE("report rejects a roles file that misses a subject") {
        const Workspace ws("gazelab_cli_roles");
        REQUIRE(run(ws.metrics_args("m")).code == 0);
        put(ws.root / "roles.csv", "subject_id,role\nF1,faculty\n");
        const auto r = run({"report", "--bundles", (ws.root / "m" / "metrics.json").string(), "--roles",
                            (ws.root / "roles.csv").string(), "--out", (ws.root / "reports").string()});
        CHECK(r.code == 1);
        CHECK_FALSE(fs::exists(ws.root / "reports"));
    }
}

#endif
