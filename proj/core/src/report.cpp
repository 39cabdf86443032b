#include "gazelab/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "gazelab/error.hpp"
#include "gazelab/raster.hpp"

namespace gazelab {

using nlohmann::json;

const std::vector<std::string>& reference_metric_names() {
    static const std::vector<std::string> names = {"sensitivity", "coverage", "heterogeneity", "interruptions",
                                                   "review_time"};
    return names;
}

GaussianSummary gaussian_summary(std::span<const double> values) {
    GaussianSummary g;
    g.n = values.size();
    if (values.empty()) return g;
    double sum = 0.0;
    for (double v : values) sum += v;
    g.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - g.mean) * (v - g.mean);
    g.sd = std::sqrt(ss / static_cast<double>(values.size()));
    return g;
}

namespace {

double metric_value(const MetricsBundle& b, const std::string& name) {
    if (name == "sensitivity") return b.sensitivity;
    if (name == "coverage") return b.coverage;
    if (name == "heterogeneity") return b.heterogeneity_mean;
    if (name == "interruptions") return static_cast<double>(b.interruptions);
    return b.mean_review_time_s;
}

}  // namespace

CohortReference build_cohort_reference(std::span<const MetricsBundle> bundles,
                                       const std::map<std::string, Role>& roles) {
    std::vector<const MetricsBundle*> peers, experts;
    for (const auto& b : bundles) {
        const auto it = roles.find(b.subject_id);
        if (it == roles.end()) throw ValidationError("no role for subject '" + b.subject_id + "'");
        (it->second == Role::faculty ? experts : peers).push_back(&b);
    }
    if (peers.empty()) throw ValidationError("cohort reference: empty resident (peer) stratum");
    if (experts.empty()) throw ValidationError("cohort reference: empty faculty (expert) stratum");

    CohortReference ref;
    for (const auto& name : reference_metric_names()) {
        std::vector<double> pv, ev;
        for (const auto* b : peers) pv.push_back(metric_value(*b, name));
        for (const auto* b : experts) ev.push_back(metric_value(*b, name));
        ref.peer[name] = gaussian_summary(pv);
        ref.expert[name] = gaussian_summary(ev);
    }
    return ref;
}

// ---- rendering helpers -----------------------------------------------------

namespace {

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string pct(double v, int digits = 2) { return fmt::format("{:.{}f}%", 100.0 * v, digits); }

struct Series {
    std::string label;
    std::string colour;
    GaussianSummary g;
};

// Gaussian density curves; a zero-SD series is drawn as a vertical line.
std::string gaussian_svg(const std::vector<Series>& series, double marker, const std::string& marker_label,
                         double scale = 1.0) {
    constexpr double W = 480, H = 200, pad = 24;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : series) {
        const double spread = std::max(3.0 * s.g.sd, 1e-9);
        lo = std::min(lo, s.g.mean - spread);
        hi = std::max(hi, s.g.mean + spread);
    }
    lo = std::min(lo, marker);
    hi = std::max(hi, marker);
    if (hi - lo < 1e-9) {
        lo -= 0.5;
        hi += 0.5;
    }
    const auto sx = [&](double x) { return pad + (x - lo) / (hi - lo) * (W - 2 * pad); };

    double peak = 0.0;
    for (const auto& s : series)
        if (s.g.sd > 0) peak = std::max(peak, 1.0 / (s.g.sd * std::sqrt(2.0 * std::numbers::pi)));
    if (peak <= 0) peak = 1.0;
    const auto sy = [&](double d) { return H - pad - d / peak * (H - 2 * pad); };

    std::string svg = fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}">)", W, H, W, H);
    svg += fmt::format(R"(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="#444"/>)", pad, H - pad, W - pad, H - pad);
    int row = 0;
    for (const auto& s : series) {
        if (s.g.sd > 0) {
            std::string pts;
            for (int k = 0; k <= 200; ++k) {
                const double x = lo + (hi - lo) * k / 200.0;
                const double z = (x - s.g.mean) / s.g.sd;
                const double d = std::exp(-0.5 * z * z) / (s.g.sd * std::sqrt(2.0 * std::numbers::pi));
                pts += fmt::format("{}{:.2f},{:.2f}", k ? " " : "", sx(x), sy(d));
            }
            svg += fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>)", s.colour, pts);
        } else {
            svg += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="{3}" stroke-width="2"/>)",
                               sx(s.g.mean), H - pad, pad, s.colour);
        }
        svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11" fill="{}">{} (mean {:.2f}, sd {:.2f})</text>)",
                           W - 200, 14.0 + 13.0 * row++, s.colour, escape(s.label), s.g.mean * scale, s.g.sd * scale);
    }
    svg += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="#000" stroke-dasharray="4 3"/>)",
                       sx(marker), H - pad, pad);
    svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11">{}</text>)", sx(marker) + 3, H - pad - 4,
                       escape(marker_label));
    svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="10">{:.2f}</text><text x="{:.2f}" y="{:.2f}" font-size="10" text-anchor="end">{:.2f}</text>)",
                       pad, H - 8, lo * scale, W - pad, H - 8, hi * scale);
    svg += "</svg>";
    return svg;
}

std::string bar_svg(const std::vector<std::pair<std::string, double>>& bars, double max_value,
                    const std::string& unit_fmt_suffix, std::optional<double> reference_line = std::nullopt) {
    constexpr double W = 480, pad = 24, bar_h = 18, gap = 6;
    const double H = pad * 2 + bars.size() * (bar_h + gap);
    const double label_w = 140;
    const double plot_w = W - label_w - pad - 60;
    if (max_value <= 0) max_value = 1.0;
    std::string svg = fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}">)", W, H, W, H);
    double y = pad;
    for (const auto& [label, v] : bars) {
        const double w = std::max(0.0, v / max_value * plot_w);
        svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11" text-anchor="end">{}</text>)", label_w - 6,
                           y + bar_h - 5, escape(label));
        svg += fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="#4a78b5"/>)", label_w, y, w, bar_h);
        svg += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="11">{:.2f}{}</text>)", label_w + w + 4, y + bar_h - 5,
                           v, unit_fmt_suffix);
        y += bar_h + gap;
    }
    if (reference_line) {
        const double x = label_w + *reference_line / max_value * plot_w;
        svg += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="#c0392b" stroke-dasharray="4 3"/>)",
                           x, pad - 6, H - pad + 6);
    }
    svg += "</svg>";
    return svg;
}

std::array<std::uint8_t, 3> heat_colour(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto c = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
    return {c(3.0 * t), c(3.0 * t - 1.0), c(3.0 * t - 2.0)};
}

struct Marker {
    std::string case_id;
    bool hit;
    double px, py;  // heatmap image pixels
};

int heatmap_zoom(const HeatmapGrid& h) {
    const int long_side = std::max(1, std::max(h.grid_width, h.grid_height));
    return std::max(1, 512 / long_side);
}

std::vector<Marker> heatmap_markers(const HeatmapGrid& h, const SessionOutcomes& outcomes) {
    std::vector<Marker> out;
    if (h.grid_width == 0) return out;
    const int zoom = heatmap_zoom(h);
    for (const auto& o : outcomes.outcomes) {
        if (o.truth != Truth::positive || !o.nodule || o.image_width <= 0) continue;
        const double sx = static_cast<double>(h.image_width) / o.image_width;
        const double sy = static_cast<double>(h.image_height) / o.image_height;
        out.push_back({o.case_id, o.call == Call::hit, o.nodule->cx * sx / h.config.cell_size_px * zoom,
                       o.nodule->cy * sy / h.config.cell_size_px * zoom});
    }
    return out;
}

std::string render_heatmap_png(const HeatmapGrid& h, const std::vector<Marker>& markers) {
    const int zoom = heatmap_zoom(h);
    raster::RgbImage img{h.grid_width * zoom, h.grid_height * zoom, {}};
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
    const double top = std::max(1, h.n_scans);
    for (int gy = 0; gy < h.grid_height; ++gy)
        for (int gx = 0; gx < h.grid_width; ++gx) {
            const auto [r, g, b] = heat_colour(h.at(gx, gy) / top);
            for (int y = 0; y < zoom; ++y)
                for (int x = 0; x < zoom; ++x) img.put(gx * zoom + x, gy * zoom + y, r, g, b);
        }
    for (const auto& m : markers) {
        const int cx = static_cast<int>(std::lround(m.px));
        const int cy = static_cast<int>(std::lround(m.py));
        constexpr int R = 7;
        if (m.hit) {  // O
            for (int a = 0; a < 360; a += 2) {
                const double rad = a * std::numbers::pi / 180.0;
                for (int w = 0; w < 2; ++w)
                    img.put(cx + static_cast<int>(std::lround((R - w) * std::cos(rad))),
                            cy + static_cast<int>(std::lround((R - w) * std::sin(rad))), 0, 230, 0);
            }
        } else {  // X
            for (int d = -R; d <= R; ++d)
                for (int w = 0; w < 2; ++w) {
                    img.put(cx + d + w, cy + d, 0, 160, 255);
                    img.put(cx + d + w, cy - d, 0, 160, 255);
                }
        }
    }
    return raster::encode_png(img);
}

std::string render_dtw_png(const HeterogeneityResult& het) {
    constexpr int cell = 32;
    const int n = static_cast<int>(het.n);
    raster::RgbImage img{std::max(1, n * cell), std::max(1, n * cell), {}};
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);
    double top = 0.0;
    for (double v : het.matrix) top = std::max(top, v);
    if (top <= 0) top = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double t = het.at(i, j) / top;  // dark = similar
            const auto v = static_cast<std::uint8_t>(std::lround(255.0 * t));
            for (int y = 1; y < cell; ++y)
                for (int x = 1; x < cell; ++x) img.put(j * cell + x, i * cell + y, v, v, static_cast<std::uint8_t>(255 - v / 2));
        }
    return raster::encode_png(img);
}

constexpr const char* kFooter =
    "Percentage changes compare each session with the same metric at session 1 (sensitivity on detected "
    "nodules, time in seconds, interruptions as counts); the sign is the raw change and the direction column "
    "decides whether it is an improvement. Heterogeneity values are accumulated DTW distances (DTW units) "
    "and are only comparable within this tool.";

}  // namespace

RenderedReport render_report(const MetricsBundle& b, const CohortReference& ref, const SessionOutcomes& outcomes) {
    if (outcomes.outcomes.empty()) throw ValidationError("report: empty outcomes list");
    if (outcomes.subject_id != b.subject_id || outcomes.session_index != b.session_index)
        throw ValidationError("report: outcome/bundle subject mismatch ('" + outcomes.subject_id + "' session " +
                              std::to_string(outcomes.session_index) + " vs '" + b.subject_id + "' session " +
                              std::to_string(b.session_index) + ")");
    if (b.heatmap.grid_width <= 0 || b.heatmap.cells.empty()) throw ValidationError("report: missing heatmap");
    for (const auto& name : reference_metric_names())
        if (!ref.peer.contains(name) || !ref.expert.contains(name))
            throw ValidationError("report: cohort reference lacks metric '" + name + "'");

    RenderedReport r;
    r.subject_id = b.subject_id;
    r.session_index = b.session_index;

    const auto markers = heatmap_markers(b.heatmap, outcomes);
    r.heatmap_png = render_heatmap_png(b.heatmap, markers);
    r.dtw_png = render_dtw_png(b.heterogeneity);

    std::vector<double> cov_scan, times;
    for (const auto& c : b.cases) {
        cov_scan.push_back(c.coverage);
        times.push_back(c.review_time_s);
    }
    const auto cov_g = gaussian_summary(cov_scan);
    const auto pairs = b.heterogeneity.upper_triangle();
    const GaussianSummary het_g{b.heterogeneity_mean, b.heterogeneity_std, pairs.size()};
    const auto time_g = gaussian_summary(times);
    const std::string headline = fmt::format("{:.0f}%", 100.0 * b.sensitivity);

    // ---- JSON
    json j;
    j["subject_id"] = b.subject_id;
    j["session_index"] = b.session_index;
    j["headline"] = {{"sensitivity", headline}};
    const auto gj = [](const GaussianSummary& g) { return json{{"mean", g.mean}, {"sd", g.sd}, {"n", g.n}}; };
    j["panels"]["A_accuracy"] = {{"subject", b.sensitivity}, {"hits", b.hits}, {"positives", b.positives},
                                 {"peer", gj(ref.peer.at("sensitivity"))}, {"expert", gj(ref.expert.at("sensitivity"))}};
    j["panels"]["B_coverage"] = {{"subject_cumulative", b.coverage}, {"subject_per_scan", gj(cov_g)},
                                 {"peer", gj(ref.peer.at("coverage"))}, {"expert", gj(ref.expert.at("coverage"))}};
    {
        json m = json::array();
        for (std::size_t i = 0; i < b.heterogeneity.n; ++i) {
            json row = json::array();
            for (std::size_t k = 0; k < b.heterogeneity.n; ++k) row.push_back(b.heterogeneity.at(i, k));
            m.push_back(std::move(row));
        }
        j["panels"]["C_dtw_matrix"] = {{"case_ids", b.heterogeneity.case_ids}, {"matrix", m}, {"units", "DTW units"}};
    }
    j["panels"]["D_heterogeneity"] = {{"subject", gj(het_g)}, {"peer", gj(ref.peer.at("heterogeneity"))},
                                      {"expert", gj(ref.expert.at("heterogeneity"))}};
    {
        json ev = json::array();
        for (const auto& c : b.cases)
            for (const auto& g : c.gaps)
                if (g.kind == GapKind::interruption)
                    ev.push_back({{"case_id", c.case_id}, {"start_ms", g.start_ms}, {"end_ms", g.end_ms}});
        j["panels"]["E_interruptions"] = {{"count", b.interruptions}, {"events", ev},
                                          {"peer", gj(ref.peer.at("interruptions"))},
                                          {"expert", gj(ref.expert.at("interruptions"))}};
    }
    {
        json pc = json::array();
        for (const auto& c : b.cases) pc.push_back({{"case_id", c.case_id}, {"seconds", c.review_time_s}});
        j["panels"]["F_review_time"] = {{"mean_s", b.mean_review_time_s}, {"per_case", pc},
                                        {"peer", gj(ref.peer.at("review_time"))},
                                        {"expert", gj(ref.expert.at("review_time"))}};
    }
    {
        json mk = json::array();
        for (const auto& m : markers)
            mk.push_back({{"case_id", m.case_id}, {"symbol", m.hit ? "O" : "X"}, {"x", m.px}, {"y", m.py}});
        j["cancer_summary"] = {{"n_scans", b.heatmap.n_scans},
                               {"grid", {b.heatmap.grid_width, b.heatmap.grid_height}},
                               {"max_value", b.heatmap.max_value()},
                               {"markers", mk}};
    }
    j["footer"] = kFooter;
    r.json = j.dump(2) + "\n";

    // ---- HTML
    const auto& pe = ref.peer;
    const auto& ex = ref.expert;
    std::string h;
    h += "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">";
    h += fmt::format("<title>Search-pattern feedback: {} session {}</title>", escape(b.subject_id), b.session_index);
    h += "<style>body{font-family:sans-serif;max-width:1040px;margin:auto}section{margin:18px 0}"
         "table{border-collapse:collapse}td,th{border:1px solid #bbb;padding:2px 6px;font-size:12px}</style>";
    h += "</head><body>\n";
    h += fmt::format("<h1>Feedback report: {} (session {})</h1>\n", escape(b.subject_id), b.session_index);
    h += fmt::format("<p class=\"headline\">Sensitivity: <strong>{}</strong> ({} of {} nodules detected)</p>\n", headline,
                     b.hits, b.positives);

    // Cancer summary
    const int zoom = heatmap_zoom(b.heatmap);
    const int hw = b.heatmap.grid_width * zoom;
    const int hh = b.heatmap.grid_height * zoom;
    h += "<section id=\"cancer-summary\"><h2>Cancer detection summary</h2>\n";
    h += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}"><image href="heatmap.png" width="{0}" height="{1}"/>)", hw, hh);
    for (const auto& m : markers)
        h += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="16" font-weight="bold" text-anchor="middle" fill="{}">{}</text>)",
                         m.px, m.py + 6, m.hit ? "#00e600" : "#00a0ff", m.hit ? "O" : "X");
    h += "</svg>\n";
    h += fmt::format("<p>{} scans overlaid. O = detected nodule (true positive), X = missed nodule (false negative).</p>\n",
                     b.heatmap.n_scans);
    h += "</section>\n";

    // A
    h += "<section id=\"panel-a\"><h2>A. Accuracy compared with peers and faculty</h2>\n";
    h += bar_svg({{"You", 100.0 * b.sensitivity},
                  {"Residents (mean)", 100.0 * pe.at("sensitivity").mean},
                  {"Faculty (mean)", 100.0 * ex.at("sensitivity").mean}},
                 100.0, "%");
    h += "</section>\n";

    // B
    h += "<section id=\"panel-b\"><h2>B. Coverage of the lung fields</h2>\n";
    h += gaussian_svg({{"You (per scan)", "#4a78b5", cov_g},
                       {"Residents", "#7f8c8d", pe.at("coverage")},
                       {"Faculty", "#c0392b", ex.at("coverage")}},
                      b.coverage, "session " + pct(b.coverage, 1), 100.0);
    h += fmt::format("<p>Cumulative coverage: {}</p></section>\n", pct(b.coverage));

    // C
    h += "<section id=\"panel-c\"><h2>C. Dynamic time warping matrix (normal cases)</h2>\n";
    h += "<img src=\"dtw.png\" alt=\"DTW matrix\"/>\n<table><tr><th></th>";
    for (std::size_t i = 0; i < b.heterogeneity.n; ++i) h += fmt::format("<th>{}</th>", i);
    h += "</tr>";
    for (std::size_t i = 0; i < b.heterogeneity.n; ++i) {
        h += fmt::format("<tr><th>{}</th>", i);
        for (std::size_t k = 0; k < b.heterogeneity.n; ++k) h += fmt::format("<td>{:.2f}</td>", b.heterogeneity.at(i, k));
        h += "</tr>";
    }
    h += "</table><p>Smaller values mean more similar search patterns (DTW units).</p></section>\n";

    // D
    h += "<section id=\"panel-d\"><h2>D. Search-pattern heterogeneity</h2>\n";
    h += gaussian_svg({{"You", "#4a78b5", het_g},
                       {"Residents", "#7f8c8d", pe.at("heterogeneity")},
                       {"Faculty", "#c0392b", ex.at("heterogeneity")}},
                      b.heterogeneity_mean, fmt::format("mean {:.2f}", b.heterogeneity_mean));
    h += fmt::format("<p>Heterogeneity: mean {:.2f}, sd {:.2f} DTW units (lower is better).</p></section>\n",
                     b.heterogeneity_mean, b.heterogeneity_std);

    // E
    h += "<section id=\"panel-e\"><h2>E. Interruptions</h2>\n";
    h += fmt::format("<p>Interruptions this session: <strong>{}</strong> (residents mean {:.2f}, faculty mean {:.2f})</p>\n",
                     b.interruptions, pe.at("interruptions").mean, ex.at("interruptions").mean);
    {
        constexpr double W = 480, row_h = 8;
        const double H = 20 + row_h * static_cast<double>(b.cases.size());
        h += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}">)", W, H, W, H);
        double max_s = 0;
        for (const auto& c : b.cases) max_s = std::max(max_s, c.review_time_s);
        if (max_s <= 0) max_s = 1;
        double y = 10;
        for (const auto& c : b.cases) {
            h += fmt::format(R"(<rect x="0" y="{:.1f}" width="{:.2f}" height="{:.1f}" fill="#dfe6ee"/>)", y,
                             c.review_time_s / max_s * W, row_h - 2);
            for (const auto& g : c.gaps) {
                if (g.kind != GapKind::interruption) continue;
                const double start = static_cast<double>(g.start_ms - c.display_start_ms) / 1000.0;
                const double len = static_cast<double>(g.duration_ms()) / 1000.0;
                h += fmt::format(R"(<rect x="{:.2f}" y="{:.1f}" width="{:.2f}" height="{:.1f}" fill="#c0392b"/>)",
                                 start / max_s * W, y, len / max_s * W, row_h - 2);
            }
            y += row_h;
        }
        h += "</svg>\n";
    }
    h += "</section>\n";

    // F
    h += "<section id=\"panel-f\"><h2>F. Time to review each scan</h2>\n";
    {
        std::vector<std::pair<std::string, double>> bars;
        double top = ex.at("review_time").mean;
        for (const auto& c : b.cases) {
            bars.emplace_back(c.case_id, c.review_time_s);
            top = std::max(top, c.review_time_s);
        }
        h += bar_svg(bars, top, " s", ex.at("review_time").mean);
    }
    h += fmt::format("<p>Mean time per scan: {:.2f} s (residents {:.2f} s, faculty {:.2f} s; dashed line = faculty mean)</p>\n",
                     b.mean_review_time_s, pe.at("review_time").mean, ex.at("review_time").mean);
    h += fmt::format("<p>Time per scan: sd {:.2f} s over {} scans</p>\n", time_g.sd, time_g.n);
    h += "</section>\n";

    h += fmt::format("<footer><p>{}</p></footer>\n</body></html>\n", kFooter);
    r.html = std::move(h);

    // ---- Markdown twin
    std::string md;
    md += fmt::format("# Feedback report: {} (session {})\n\n", b.subject_id, b.session_index);
    md += fmt::format("**Sensitivity: {}** ({} of {} nodules detected)\n\n", headline, b.hits, b.positives);
    md += "## Cancer detection summary\n\n![heatmap](heatmap.png)\n\n| case | marker |\n|---|---|\n";
    for (const auto& m : markers) md += fmt::format("| {} | {} |\n", m.case_id, m.hit ? "O" : "X");
    md += "\n## A. Accuracy compared with peers and faculty\n\n| | sensitivity |\n|---|---|\n";
    md += fmt::format("| You | {} |\n| Residents (mean) | {} |\n| Faculty (mean) | {} |\n\n", pct(b.sensitivity),
                      pct(pe.at("sensitivity").mean), pct(ex.at("sensitivity").mean));
    md += "## B. Coverage of the lung fields\n\n| | mean | sd |\n|---|---|---|\n";
    md += fmt::format("| You (cumulative) | {} | |\n| You (per scan) | {} | {} |\n| Residents | {} | {} |\n| Faculty | {} | {} |\n\n",
                      pct(b.coverage), pct(cov_g.mean), pct(cov_g.sd), pct(pe.at("coverage").mean),
                      pct(pe.at("coverage").sd), pct(ex.at("coverage").mean), pct(ex.at("coverage").sd));
    md += "## C. Dynamic time warping matrix (normal cases)\n\n![dtw](dtw.png)\n\n|";
    for (std::size_t i = 0; i < b.heterogeneity.n; ++i) md += fmt::format(" {} |", i);
    md += "\n|";
    for (std::size_t i = 0; i < b.heterogeneity.n; ++i) md += "---|";
    md += "\n";
    for (std::size_t i = 0; i < b.heterogeneity.n; ++i) {
        md += "|";
        for (std::size_t k = 0; k < b.heterogeneity.n; ++k) md += fmt::format(" {:.2f} |", b.heterogeneity.at(i, k));
        md += "\n";
    }
    md += "\n## D. Search-pattern heterogeneity (DTW units)\n\n| | mean | sd |\n|---|---|---|\n";
    md += fmt::format("| You | {:.2f} | {:.2f} |\n| Residents | {:.2f} | {:.2f} |\n| Faculty | {:.2f} | {:.2f} |\n\n",
                      b.heterogeneity_mean, b.heterogeneity_std, pe.at("heterogeneity").mean, pe.at("heterogeneity").sd,
                      ex.at("heterogeneity").mean, ex.at("heterogeneity").sd);
    md += fmt::format("## E. Interruptions\n\nInterruptions this session: **{}** (residents mean {:.2f}, faculty mean {:.2f})\n\n",
                      b.interruptions, pe.at("interruptions").mean, ex.at("interruptions").mean);
    md += "## F. Time to review each scan\n\n| case | seconds |\n|---|---|\n";
    for (const auto& c : b.cases) md += fmt::format("| {} | {:.2f} |\n", c.case_id, c.review_time_s);
    md += fmt::format("\nMean {:.2f} s (residents {:.2f} s, faculty {:.2f} s)\n\n", b.mean_review_time_s,
                      pe.at("review_time").mean, ex.at("review_time").mean);
    md += fmt::format("---\n{}\n", kFooter);
    r.markdown = std::move(md);
    return r;
}

std::filesystem::path write_report(const RenderedReport& report, const std::filesystem::path& root) {
    const auto dir = root / report.subject_id / std::to_string(report.session_index);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    const auto put = [&](const char* name, const std::string& bytes) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f || !f.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
            throw IoError("cannot write '" + (dir / name).string() + "'");
    };
    put("report.html", report.html);
    put("report.md", report.markdown);
    put("report.json", report.json);
    put("heatmap.png", report.heatmap_png);
    put("dtw.png", report.dtw_png);
    return dir;
}

// ---- change table ----------------------------------------------------------

ChangeTable change_table(std::span<const MetricsBundle> bundles) {
    if (bundles.size() != 4)
        throw ValidationError("change table needs exactly 4 session bundles, got " + std::to_string(bundles.size()));
    std::array<const MetricsBundle*, 4> by_session{};
    for (const auto& b : bundles) {
        if (b.subject_id != bundles.front().subject_id) throw ValidationError("change table: bundles from different subjects");
        if (b.session_index < 1 || b.session_index > 4 || by_session[b.session_index - 1])
            throw ValidationError("change table: sessions must be 1..4, each exactly once");
        by_session[b.session_index - 1] = &b;
    }

    struct Spec {
        const char* name;
        Direction dir;
        double (*get)(const MetricsBundle&);
    };
    static const Spec specs[] = {
        {"Sensitivity", Direction::increase, [](const MetricsBundle& b) { return b.sensitivity; }},
        {"Coverage", Direction::increase, [](const MetricsBundle& b) { return b.coverage; }},
        {"Heterogeneity", Direction::decrease, [](const MetricsBundle& b) { return b.heterogeneity_mean; }},
        {"Interruptions", Direction::decrease, [](const MetricsBundle& b) { return static_cast<double>(b.interruptions); }},
        {"Total Time", Direction::decrease, [](const MetricsBundle& b) { return b.mean_review_time_s; }},
    };

    ChangeTable t;
    t.subject_id = bundles.front().subject_id;
    for (const auto& s : specs) {
        ChangeRow row;
        row.metric = s.name;
        row.better = s.dir;
        row.baseline = s.get(*by_session[0]);
        for (int k = 0; k < 3; ++k) {
            const double v = s.get(*by_session[k + 1]);
            row.values[k] = v;
            if (row.baseline != 0.0)
                row.percent[k] = 100.0 * (v - row.baseline) / row.baseline;
            else if (v == 0.0)
                row.percent[k] = 0.0;
        }
        const double delta = row.values[2] - row.baseline;
        const double gain = s.dir == Direction::increase ? delta : -delta;
        const double tol = 1e-12 * std::max(1.0, std::abs(row.baseline));
        row.result = std::abs(delta) <= tol ? "No change" : (gain > 0 ? "Improved" : "Declined");
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace {
std::string pct_cell(const std::optional<double>& p) { return p ? fmt::format("{:.2f}%", *p) : std::string("n/a"); }
}  // namespace

std::string change_table_csv(const ChangeTable& t) {
    std::string out = "metric,direction,baseline,session2,session3,session4,change2,change3,change4,result\n";
    for (const auto& r : t.rows)
        out += fmt::format("{},{},{:.6g},{:.6g},{:.6g},{:.6g},{},{},{},{}\n", r.metric,
                           r.better == Direction::increase ? "increase" : "decrease", r.baseline, r.values[0], r.values[1],
                           r.values[2], pct_cell(r.percent[0]), pct_cell(r.percent[1]), pct_cell(r.percent[2]), r.result);
    return out;
}

std::string change_table_markdown(const ChangeTable& t) {
    std::string out = fmt::format("# Changes against baseline: {}\n\n", t.subject_id);
    out += "| Metric | Session 2 | Session 3 | Session 4 | Result |\n|---|---|---|---|---|\n";
    for (const auto& r : t.rows)
        out += fmt::format("| {} | {} | {} | {} | {} |\n", r.metric, pct_cell(r.percent[0]), pct_cell(r.percent[1]),
                           pct_cell(r.percent[2]), r.result);
    out += fmt::format("\n{}\n", kFooter);
    return out;
}

}  // namespace gazelab
