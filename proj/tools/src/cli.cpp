#include "cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gazelab/error.hpp"
#include "gazelab/fixations.hpp"
#include "gazelab/ingest.hpp"
#include "gazelab/log.hpp"
#include "gazelab/metrics.hpp"
#include "gazelab/preprocess.hpp"
#include "gazelab/raster.hpp"
#include "gazelab/report.hpp"
#include "gazelab/serialize.hpp"
#include "gazelab/stats.hpp"
#include "gazelab/trial.hpp"

namespace gazelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    if (f.bad()) throw IoError("cannot read '" + path + "'");
    return ss.str();
}

// Output files are staged in memory and written only after every step has
// validated.
class Staging {
public:
    void add(fs::path path, std::string bytes) { files_.emplace_back(std::move(path), std::move(bytes)); }

    void commit() const {
        for (const auto& [path, bytes] : files_) {
            std::error_code ec;
            if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
            if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
            std::ofstream f(path, std::ios::binary);
            if (!f || !f.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
                throw IoError("cannot write '" + path.string() + "'");
        }
    }

    std::size_t size() const noexcept { return files_.size(); }

private:
    std::vector<std::pair<fs::path, std::string>> files_;
};

void check_radius(const std::optional<double>& r) {
    if (r && !(*r > 0.0 && *r < 1e6)) throw ValidationError("--foveal-radius must lie in (0, 1e6)");
}

void check_slack(double s) {
    if (!(s >= 0.0 && s < 1e6)) throw ValidationError("--hit-slack must lie in [0, 1e6)");
}

void check_jobs(unsigned j) {
    if (j < 1 || j > 256) throw ValidationError("--jobs must lie in [1, 256]");
}

std::string heatmap_pgm(const HeatmapGrid& h) {
    std::vector<std::uint16_t> px;
    px.reserve(h.cells.size());
    for (auto c : h.cells) px.push_back(static_cast<std::uint16_t>(std::min<std::uint32_t>(c, 65535)));
    return raster::encode_pgm16(h.grid_width, h.grid_height, px);
}

std::vector<FeatureRow> feature_rows(const SessionAnalysis& a, const std::vector<CaseDefinition>& cases,
                                     const MetricParams& params) {
    std::map<std::string, const CaseDefinition*> by_id;
    for (const auto& c : cases) by_id[c.case_id] = &c;
    std::vector<FeatureRow> rows;
    for (const auto& tr : a.traces) {
        const auto& def = *by_id.at(tr.trajectory.case_id);
        std::optional<Disc> aoi;
        if (def.nodule) aoi = Disc{def.nodule->cx, def.nodule->cy, def.nodule->radius + params.hit_slack_px};
        const double r = params.foveal_radius_px.value_or(default_foveal_radius(def.width));
        const auto fx = detect_fixations(tr.trajectory, default_fixation_params(def.width));
        rows.push_back({a.bundle.subject_id, a.bundle.session_index, def.case_id,
                        consensus_features(fx, tr.trajectory, aoi, def, r)});
    }
    return rows;
}

// ---- metrics ---------------------------------------------------------------

struct MetricsOptions {
    std::string manifest, gaze, segments, annotations, viewports, subject, out, config;
    int session = 1;
    std::optional<double> foveal_radius;
    std::optional<double> hit_slack;
    std::optional<unsigned> jobs;
};

int cmd_metrics(const MetricsOptions& o, std::ostream& out) {
    MetricParams params;
    unsigned jobs = 1;
    if (!o.config.empty()) {
        json cfg;
        try {
            cfg = json::parse(read_file(o.config));
            if (cfg.contains("metrics")) {
                const auto& m = cfg["metrics"];
                if (m.contains("foveal_radius_px") && !m["foveal_radius_px"].is_null())
                    params.foveal_radius_px = m["foveal_radius_px"].get<double>();
                params.hit_slack_px = m.value("hit_slack_px", params.hit_slack_px);
            }
            jobs = cfg.value("jobs", jobs);
        } catch (const json::exception& e) {
            throw ValidationError(std::string("config: ") + e.what());
        }
    }
    if (o.foveal_radius) params.foveal_radius_px = o.foveal_radius;
    if (o.hit_slack) params.hit_slack_px = *o.hit_slack;
    if (o.jobs) jobs = *o.jobs;
    check_radius(params.foveal_radius_px);
    check_slack(params.hit_slack_px);
    check_jobs(jobs);
    params.jobs = jobs;
    if (o.session < 1) throw ValidationError("--session must be >= 1");

    std::istringstream manifest_in(read_file(o.manifest));
    const auto cases = parse_case_manifest(manifest_in, file_mask_loader(fs::path(o.manifest).parent_path().string()));

    const std::string subject = o.subject.empty() ? fs::path(o.gaze).stem().string() : o.subject;
    std::istringstream gaze_in(read_file(o.gaze));
    auto rec = parse_gaze_log(gaze_in, subject, o.session);
    std::istringstream seg_in(read_file(o.segments));
    attach_segments(rec, parse_segments(seg_in));

    ViewportMap viewports;
    if (o.viewports.empty()) {
        for (const auto& s : rec.segments) viewports[s.case_id] = Viewport{};
    } else {
        std::istringstream vp_in(read_file(o.viewports));
        viewports = parse_viewports(vp_in);
    }
    std::istringstream ann_in(read_file(o.annotations));
    const auto annotations = parse_annotations(ann_in, cases);

    log::info(fmt::format("metrics: {} samples, {} segments", rec.samples.size(), rec.segments.size()));
    const auto analysis = session_metrics({&rec, &viewports, &cases, &annotations, params});

    Staging st;
    const fs::path dir(o.out);
    st.add(dir / "metrics.json", metrics_to_json(analysis.bundle, analysis.outcomes));
    st.add(dir / "heatmap.pgm", heatmap_pgm(analysis.bundle.heatmap));
    st.add(dir / "heatmap.json", heatmap_to_json(analysis.bundle.heatmap));
    st.add(dir / "features.json", features_to_json(feature_rows(analysis, cases, params)));
    st.commit();
    out << fmt::format("sensitivity={:.4f} coverage={:.4f} heterogeneity={:.4f} interruptions={} time_s={:.2f}\n",
                       analysis.bundle.sensitivity, analysis.bundle.coverage, analysis.bundle.heterogeneity_mean,
                       analysis.bundle.interruptions, analysis.bundle.mean_review_time_s);
    return kExitOk;
}

// ---- report ----------------------------------------------------------------

std::map<std::string, Role> parse_roles(const std::string& text) {
    std::map<std::string, Role> roles;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (n == 1) {
            if (line != "subject_id,role") throw ParseError(n, "roles: expected header 'subject_id,role'");
            continue;
        }
        if (comma == std::string::npos) throw ParseError(n, "roles: expected 2 fields");
        const auto id = line.substr(0, comma);
        const auto role = role_from_string(line.substr(comma + 1));
        if (id.empty() || !role) throw ParseError(n, "roles: bad row '" + line + "'");
        if (!roles.emplace(id, *role).second) throw ParseError(n, "roles: duplicate subject '" + id + "'");
    }
    return roles;
}

std::string roles_csv(const std::map<std::string, Role>& roles) {
    std::string s = "subject_id,role\n";
    for (const auto& [id, r] : roles) s += id + "," + std::string(to_string(r)) + "\n";
    return s;
}

void stage_report(Staging& st, const RenderedReport& r, const fs::path& root) {
    const auto dir = root / r.subject_id / std::to_string(r.session_index);
    st.add(dir / "report.html", r.html);
    st.add(dir / "report.md", r.markdown);
    st.add(dir / "report.json", r.json);
    st.add(dir / "heatmap.png", r.heatmap_png);
    st.add(dir / "dtw.png", r.dtw_png);
}

// Renders every bundle and a change table for each subject with all four sessions.
void stage_reports(Staging& st, const std::vector<MetricsDocument>& docs, const std::map<std::string, Role>& roles,
                   const fs::path& root) {
    std::vector<MetricsBundle> bundles;
    for (const auto& d : docs) bundles.push_back(d.bundle);
    const auto ref = build_cohort_reference(bundles, roles);
    std::map<std::string, std::vector<MetricsBundle>> per_subject;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& d : docs) {
        if (!seen.emplace(d.bundle.subject_id, d.bundle.session_index).second)
            throw ValidationError(fmt::format("duplicate bundle for '{}' session {}", d.bundle.subject_id,
                                              d.bundle.session_index));
        stage_report(st, render_report(d.bundle, ref, d.outcomes), root);
        per_subject[d.bundle.subject_id].push_back(d.bundle);
    }
    for (const auto& [id, list] : per_subject) {
        if (list.size() != static_cast<std::size_t>(kSessions)) {
            log::info(fmt::format("report: '{}' has {} sessions; no change table", id, list.size()));
            continue;
        }
        const auto table = change_table(list);
        st.add(root / id / "changes.csv", change_table_csv(table));
        st.add(root / id / "changes.md", change_table_markdown(table));
    }
}

struct ReportOptions {
    std::vector<std::string> bundles;
    std::string roles, out;
};

int cmd_report(const ReportOptions& o, std::ostream& out) {
    const auto roles = parse_roles(read_file(o.roles));
    std::vector<MetricsDocument> docs;
    for (const auto& p : o.bundles) {
        try {
            docs.push_back(metrics_from_json(read_file(p)));
        } catch (const IoError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ValidationError(p + ": " + e.what());
        }
    }
    Staging st;
    stage_reports(st, docs, roles, o.out);
    st.commit();
    out << fmt::format("wrote {} files under {}\n", st.size(), o.out);
    return kExitOk;
}

// ---- anova -----------------------------------------------------------------

std::string anova_csv(const TrialPanel& panel) {
    std::vector<AnovaTable> tables;
    for (std::size_t m = 0; m < panel.metrics.size(); ++m) tables.push_back(mixed_anova(panel, m));
    std::ostringstream s;
    write_anova_csv(s, tables);
    return s.str();
}

int cmd_anova(const std::string& panel_path, const std::string& out_path, std::ostream& out) {
    std::istringstream in(read_file(panel_path));
    const auto csv = anova_csv(parse_panel_csv(in));
    if (out_path.empty()) {
        out << csv;
    } else {
        Staging st;
        st.add(out_path, csv);
        st.commit();
    }
    return kExitOk;
}

// ---- simulate --------------------------------------------------------------

std::string improvement_csv(const TrialPanel& panel) {
    std::string s = "metric,group,baseline,final,absolute_change,relative_change\n";
    for (const auto& m : panel.metrics)
        for (const auto& g : improvement_summary(panel, m))
            s += fmt::format("{},{},{},{},{},{}\n", m, to_string(g.group), format_double(g.baseline),
                             format_double(g.final_mean), format_double(g.absolute_change),
                             g.relative_change ? format_double(*g.relative_change) : std::string());
    return s;
}

struct SimulateOptions {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
    auto config = o.config.empty() ? default_trial_config() : trial_config_from_json(read_file(o.config));
    if (o.seed) config.seed = *o.seed;
    check_jobs(o.jobs);

    log::info(fmt::format("simulate: seed {}, {} residents per arm", config.seed, config.subjects_per_group));
    const auto res = simulate_trial(config, o.jobs);

    Staging st;
    const fs::path root(o.out);
    st.add(root / "config.json", trial_config_to_json(config));
    st.add(root / "data" / "manifest.json", write_case_manifest(res.pool));
    for (const auto& c : res.pool) st.add(root / "data" / c.mask_path, write_mask(c.lung_mask));

    std::map<std::string, Role> roles;
    std::vector<MetricsDocument> docs;
    for (const auto& run : res.runs) {
        roles[run.subject_id] = run.role;
        const auto dir = root / "data" / run.subject_id / fmt::format("session-{}", run.session_index);
        std::ostringstream gaze, seg, ann, vp;
        write_gaze_log(gaze, run.data.recording);
        write_segments(seg, run.data.recording.segments);
        write_annotations(ann, run.data.annotations);
        write_viewports(vp, run.data.viewports);
        st.add(dir / "gaze.csv", gaze.str());
        st.add(dir / "segments.csv", seg.str());
        st.add(dir / "annotations.csv", ann.str());
        st.add(dir / "viewports.csv", vp.str());

        const auto& a = run.analysis;
        const auto mdir = root / "metrics" / run.subject_id / fmt::format("session-{}", run.session_index);
        st.add(mdir / "metrics.json", metrics_to_json(a.bundle, a.outcomes));
        st.add(mdir / "heatmap.pgm", heatmap_pgm(a.bundle.heatmap));
        docs.push_back({a.bundle, a.outcomes});
    }
    st.add(root / "roles.csv", roles_csv(roles));

    std::ostringstream panel;
    write_panel_csv(panel, res.panel);
    st.add(root / "panel.csv", panel.str());
    const auto anova = anova_csv(res.panel);
    st.add(root / "anova.csv", anova);
    st.add(root / "improvement.csv", improvement_csv(res.panel));
    stage_reports(st, docs, roles, root / "reports");
    st.commit();
    out << anova;
    return kExitOk;
}

// ---- power -----------------------------------------------------------------

int cmd_power(double delta, double sd, double alpha, double power, std::ostream& out) {
    out << "n=" << power_sample_size(delta, sd, alpha, power) << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Eye-tracking search-pattern analysis for chest radiograph reading studies", "gazelab"};
    app.require_subcommand(1);

    MetricsOptions mo;
    auto* metrics = app.add_subcommand("metrics", "Compute session metrics from a gaze recording");
    metrics->add_option("--manifest", mo.manifest, "Case manifest JSON")->required();
    metrics->add_option("--gaze", mo.gaze, "Gaze log CSV")->required();
    metrics->add_option("--segments", mo.segments, "Display segments CSV")->required();
    metrics->add_option("--annotations", mo.annotations, "Reader marks CSV")->required();
    metrics->add_option("--viewports", mo.viewports, "Per-case viewport CSV (default: identity)");
    metrics->add_option("--subject", mo.subject, "Subject id (default: gaze file stem)");
    metrics->add_option("--session", mo.session, "Session index");
    metrics->add_option("--out", mo.out, "Output directory")->required();
    metrics->add_option("--foveal-radius", mo.foveal_radius, "Foveal radius in image pixels");
    metrics->add_option("--hit-slack", mo.hit_slack, "Extra mark tolerance in image pixels");
    metrics->add_option("--jobs", mo.jobs, "Worker threads");
    metrics->add_option("--config", mo.config, "JSON config; flags win");

    ReportOptions ro;
    auto* report = app.add_subcommand("report", "Render feedback reports from metrics bundles");
    report->add_option("--bundles", ro.bundles, "metrics.json files")->required()->expected(1, -1);
    report->add_option("--roles", ro.roles, "CSV subject_id,role (faculty|resident)")->required();
    report->add_option("--out", ro.out, "Output directory")->required();

    std::string panel_path, anova_out;
    auto* anova = app.add_subcommand("anova", "Split-plot ANOVA over every metric of a panel CSV");
    anova->add_option("--panel", panel_path, "Panel CSV")->required();
    anova->add_option("--out", anova_out, "Output CSV (default: stdout)");

    SimulateOptions so;
    auto* simulate = app.add_subcommand("simulate", "Simulate a trial and run the full analysis");
    simulate->add_option("--config", so.config, "Trial config JSON (default: built-in)");
    simulate->add_option("--out", so.out, "Output directory")->required();
    simulate->add_option("--seed", so.seed, "Override the config seed");
    simulate->add_option("--jobs", so.jobs, "Worker threads");

    double delta = 0, sd = 0, alpha = 0.05, power = 0.8;
    auto* pw = app.add_subcommand("power", "Per-group sample size for a two-sample t-test");
    pw->add_option("--delta", delta, "Mean difference")->required();
    pw->add_option("--sd", sd, "Common standard deviation")->required();
    pw->add_option("--alpha", alpha, "Two-sided significance level");
    pw->add_option("--power", power, "Target power");

    if (args.empty()) {
        err << app.help();
        return kExitValidation;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "gazelab: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (metrics->parsed()) return cmd_metrics(mo, out);
        if (report->parsed()) return cmd_report(ro, out);
        if (anova->parsed()) return cmd_anova(panel_path, anova_out, out);
        if (simulate->parsed()) return cmd_simulate(so, out);
        if (pw->parsed()) return cmd_power(delta, sd, alpha, power, out);
    } catch (const IoError& e) {
        err << "gazelab: I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        err << "gazelab: error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "gazelab: error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace gazelab::cli
