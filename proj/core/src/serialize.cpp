#include "gazelab/serialize.hpp"

#include <json.hpp>

#include "gazelab/error.hpp"

namespace gazelab {

using nlohmann::json;

namespace {

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

json disc_json(const Disc& d) { return {{"cx", d.cx}, {"cy", d.cy}, {"radius", d.radius}}; }

json heatmap_json(const HeatmapGrid& h) {
    json cfg = {{"cell_size_px", h.config.cell_size_px},
                {"radial_radius_px", h.config.radial_radius_px},
                {"binarize_threshold", h.config.binarize_threshold},
                {"normalize_to", nullptr}};
    if (h.config.normalize_to) cfg["normalize_to"] = {h.config.normalize_to->first, h.config.normalize_to->second};
    return {{"grid_width", h.grid_width}, {"grid_height", h.grid_height}, {"image_width", h.image_width},
            {"image_height", h.image_height}, {"n_scans", h.n_scans}, {"max_value", h.max_value()},
            {"config", cfg}, {"cells", h.cells}};
}

GapKind gap_kind_from(const std::string& s) {
    if (s == "blink") return GapKind::blink;
    if (s == "interruption") return GapKind::interruption;
    throw ValidationError("unknown gap kind '" + s + "'");
}

Call call_from(const std::string& s) {
    if (s == "hit") return Call::hit;
    if (s == "miss") return Call::miss;
    if (s == "not-applicable") return Call::not_applicable;
    throw ValidationError("unknown call '" + s + "'");
}

}  // namespace

std::string metrics_to_json(const MetricsBundle& b, const SessionOutcomes& o) {
    json j;
    j["subject_id"] = b.subject_id;
    j["session_index"] = b.session_index;
    j["sensitivity"] = b.sensitivity;
    j["hits"] = b.hits;
    j["positives"] = b.positives;
    j["coverage"] = b.coverage;
    j["heterogeneity_mean"] = b.heterogeneity_mean;
    j["heterogeneity_std"] = b.heterogeneity_std;
    j["interruptions"] = b.interruptions;
    j["mean_review_time_s"] = b.mean_review_time_s;
    j["foveal_radius_px"] = b.foveal_radius_px;
    j["hit_slack_px"] = b.hit_slack_px;
    j["heterogeneity"] = {{"n", b.heterogeneity.n},
                          {"case_ids", b.heterogeneity.case_ids},
                          {"matrix", b.heterogeneity.matrix},
                          {"mean", b.heterogeneity.mean},
                          {"std", b.heterogeneity.std}};
    json cases = json::array();
    for (const auto& c : b.cases) {
        json gaps = json::array();
        for (const auto& g : c.gaps)
            gaps.push_back({{"start_ms", g.start_ms}, {"end_ms", g.end_ms}, {"kind", g.kind == GapKind::blink ? "blink" : "interruption"}});
        cases.push_back({{"case_id", c.case_id},
                         {"case_class", std::string(to_string(c.case_class))},
                         {"display_start_ms", c.display_start_ms},
                         {"review_time_s", c.review_time_s},
                         {"coverage", c.coverage},
                         {"samples", c.samples},
                         {"blinks", c.blinks},
                         {"interruptions", c.interruptions},
                         {"call", std::string(to_string(c.call))},
                         {"gaps", gaps}});
    }
    j["cases"] = cases;
    j["heatmap"] = heatmap_json(b.heatmap);
    json outs = json::array();
    for (const auto& d : o.outcomes) {
        json m = nullptr;
        if (d.matched_mark) m = {{"x", d.matched_mark->x}, {"y", d.matched_mark->y}};
        outs.push_back({{"case_id", d.case_id},
                        {"truth", std::string(to_string(d.truth))},
                        {"call", std::string(to_string(d.call))},
                        {"matched_mark", m},
                        {"nodule", d.nodule ? disc_json(*d.nodule) : json(nullptr)},
                        {"image_width", d.image_width},
                        {"image_height", d.image_height}});
    }
    j["outcomes"] = outs;
    return j.dump(2) + "\n";
}

MetricsDocument metrics_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("metrics JSON: ") + e.what());
    }
    MetricsDocument doc;
    try {
        auto& b = doc.bundle;
        b.subject_id = j.at("subject_id").get<std::string>();
        b.session_index = j.at("session_index").get<int>();
        b.sensitivity = j.at("sensitivity").get<double>();
        b.hits = j.at("hits").get<std::size_t>();
        b.positives = j.at("positives").get<std::size_t>();
        b.coverage = j.at("coverage").get<double>();
        b.heterogeneity_mean = j.at("heterogeneity_mean").get<double>();
        b.heterogeneity_std = j.at("heterogeneity_std").get<double>();
        b.interruptions = j.at("interruptions").get<std::size_t>();
        b.mean_review_time_s = j.at("mean_review_time_s").get<double>();
        b.foveal_radius_px = j.at("foveal_radius_px").get<double>();
        b.hit_slack_px = j.at("hit_slack_px").get<double>();
        const auto& h = j.at("heterogeneity");
        b.heterogeneity.n = h.at("n").get<std::size_t>();
        b.heterogeneity.case_ids = h.at("case_ids").get<std::vector<std::string>>();
        b.heterogeneity.matrix = h.at("matrix").get<std::vector<double>>();
        b.heterogeneity.mean = h.at("mean").get<double>();
        b.heterogeneity.std = h.at("std").get<double>();
        if (b.heterogeneity.matrix.size() != b.heterogeneity.n * b.heterogeneity.n)
            throw ValidationError("metrics JSON: heterogeneity matrix size mismatch");
        for (const auto& c : j.at("cases")) {
            CaseDetail d;
            d.case_id = c.at("case_id").get<std::string>();
            {
                const auto cc = case_class_from_string(c.at("case_class").get<std::string>());
                if (!cc) throw ValidationError("unknown case class");
                d.case_class = *cc;
            }
            d.display_start_ms = c.at("display_start_ms").get<std::int64_t>();
            d.review_time_s = c.at("review_time_s").get<double>();
            d.coverage = c.at("coverage").get<double>();
            d.samples = c.at("samples").get<std::size_t>();
            d.blinks = c.at("blinks").get<std::size_t>();
            d.interruptions = c.at("interruptions").get<std::size_t>();
            d.call = call_from(c.at("call").get<std::string>());
            for (const auto& g : c.at("gaps"))
                d.gaps.push_back({g.at("start_ms").get<std::int64_t>(), g.at("end_ms").get<std::int64_t>(),
                                  gap_kind_from(g.at("kind").get<std::string>())});
            b.cases.push_back(std::move(d));
        }
        const auto& hm = j.at("heatmap");
        b.heatmap.grid_width = hm.at("grid_width").get<int>();
        b.heatmap.grid_height = hm.at("grid_height").get<int>();
        b.heatmap.image_width = hm.at("image_width").get<int>();
        b.heatmap.image_height = hm.at("image_height").get<int>();
        b.heatmap.n_scans = hm.at("n_scans").get<int>();
        b.heatmap.cells = hm.at("cells").get<std::vector<std::uint32_t>>();
        const auto& cfg = hm.at("config");
        b.heatmap.config.cell_size_px = cfg.at("cell_size_px").get<double>();
        b.heatmap.config.radial_radius_px = cfg.at("radial_radius_px").get<double>();
        b.heatmap.config.binarize_threshold = cfg.at("binarize_threshold").get<double>();
        if (!cfg.at("normalize_to").is_null())
            b.heatmap.config.normalize_to =
                std::pair{cfg.at("normalize_to").at(0).get<int>(), cfg.at("normalize_to").at(1).get<int>()};
        if (b.heatmap.grid_width < 0 || b.heatmap.grid_height < 0 ||
            b.heatmap.cells.size() != static_cast<std::size_t>(b.heatmap.grid_width) * b.heatmap.grid_height)
            throw ValidationError("metrics JSON: heatmap cell count mismatch");

        doc.outcomes.subject_id = b.subject_id;
        doc.outcomes.session_index = b.session_index;
        for (const auto& o : j.at("outcomes")) {
            DetectionOutcome d;
            d.case_id = o.at("case_id").get<std::string>();
            const auto truth = o.at("truth").get<std::string>();
            if (truth != "positive" && truth != "negative") throw ValidationError("unknown truth '" + truth + "'");
            d.truth = truth == "positive" ? Truth::positive : Truth::negative;
            d.call = call_from(o.at("call").get<std::string>());
            if (!o.at("matched_mark").is_null())
                d.matched_mark = Point{o["matched_mark"].at("x").get<double>(), o["matched_mark"].at("y").get<double>()};
            if (!o.at("nodule").is_null())
                d.nodule = Disc{o["nodule"].at("cx").get<double>(), o["nodule"].at("cy").get<double>(),
                                o["nodule"].at("radius").get<double>()};
            d.image_width = o.at("image_width").get<int>();
            d.image_height = o.at("image_height").get<int>();
            doc.outcomes.outcomes.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("metrics JSON: ") + e.what());
    }
    return doc;
}

std::string heatmap_to_json(const HeatmapGrid& grid) { return heatmap_json(grid).dump(2) + "\n"; }

std::string features_to_json(const std::vector<FeatureRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        const auto& f = r.features;
        arr.push_back({{"subject_id", r.subject_id},
                       {"session_index", r.session_index},
                       {"case_id", r.case_id},
                       {"total_time_s", f.total_time_s},
                       {"time_to_first_aoi_fixation_s", opt(f.time_to_first_aoi_fixation_s)},
                       {"mean_aoi_fixation_duration_s", opt(f.mean_aoi_fixation_duration_s)},
                       {"dwell_time_ratio", opt(f.dwell_time_ratio)},
                       {"total_fixations", f.total_fixations},
                       {"aoi_fixations", opt(f.aoi_fixations)},
                       {"mean_saccade_length_px", f.mean_saccade_length_px},
                       {"image_coverage", f.image_coverage}});
    }
    return arr.dump(2) + "\n";
}

}  // namespace gazelab
