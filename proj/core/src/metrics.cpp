#include "gazelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "gazelab/error.hpp"
#include "parallel.hpp"

namespace gazelab {

std::string_view to_string(Truth t) noexcept { return t == Truth::positive ? "positive" : "negative"; }

std::string_view to_string(Call c) noexcept {
    switch (c) {
        case Call::hit: return "hit";
        case Call::miss: return "miss";
        case Call::not_applicable: return "not-applicable";
    }
    return "not-applicable";
}

namespace {

std::unordered_map<std::string, const CaseDefinition*> index_cases(const std::vector<CaseDefinition>& cases) {
    std::unordered_map<std::string, const CaseDefinition*> out;
    for (const auto& c : cases) out.emplace(c.case_id, &c);
    return out;
}

}  // namespace

// ---- detection -------------------------------------------------------------

DetectionSummary detection_outcomes(const AnnotationSet& annotations, const std::vector<CaseDefinition>& cases,
                                    double hit_slack_px) {
    if (!(hit_slack_px >= 0.0)) throw ValidationError("hit_slack_px must be non-negative");
    const auto by_id = index_cases(cases);
    for (const auto& [id, marks] : annotations)
        if (!by_id.contains(id)) throw ValidationError("annotation references case '" + id + "' absent from the case list");

    DetectionSummary out;
    out.outcomes.reserve(cases.size());
    for (const auto& c : cases) {
        DetectionOutcome o;
        o.case_id = c.case_id;
        o.image_width = c.width;
        o.image_height = c.height;
        if (!c.positive()) {
            o.truth = Truth::negative;
            o.call = Call::not_applicable;
        } else {
            if (!c.nodule) throw ValidationError("nodule case '" + c.case_id + "' has no ground-truth disc");
            o.truth = Truth::positive;
            o.nodule = c.nodule;
            o.call = Call::miss;
            ++out.positives;
            if (const auto it = annotations.find(c.case_id); it != annotations.end()) {
                for (const auto& m : it->second) {
                    if (c.nodule->contains(m.point, hit_slack_px)) {
                        o.call = Call::hit;
                        o.matched_mark = m.point;
                        ++out.hits;
                        break;
                    }
                }
            }
        }
        out.outcomes.push_back(std::move(o));
    }
    if (out.positives == 0) throw ValidationError("sensitivity undefined: no positive (nodule) cases");
    out.sensitivity = static_cast<double>(out.hits) / static_cast<double>(out.positives);
    return out;
}

// ---- coverage --------------------------------------------------------------

double default_foveal_radius(int image_width) noexcept { return 0.05 * image_width; }

std::size_t covered_lung_pixels(const GazeTrajectory& trajectory, const Bitmap& mask, double radius) {
    if (!(radius > 0.0)) throw ValidationError("foveal radius must be positive");
    const int w = mask.width();
    const int h = mask.height();
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
    std::size_t covered = 0;
    for (const auto& s : trajectory.samples) {
        const Point p = s.point();
        const int x0 = std::max(0, static_cast<int>(std::floor(p.x - radius - 0.5)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(p.x + radius - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(p.y - radius - 0.5)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(p.y + radius - 0.5)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                auto& flag = seen[static_cast<std::size_t>(y) * w + x];
                if (flag || !mask.at(x, y) || !pixel_within(x, y, p, radius)) continue;
                flag = 1;
                ++covered;
            }
        }
    }
    return covered;
}

CoverageResult coverage(std::span<const GazeTrajectory> trajectories, const std::vector<CaseDefinition>& cases,
                        std::optional<double> foveal_radius_px) {
    const auto by_id = index_cases(cases);
    CoverageResult out;
    out.per_scan.reserve(trajectories.size());
    for (const auto& t : trajectories) {
        const auto it = by_id.find(t.case_id);
        if (it == by_id.end() || it->second->lung_mask.empty())
            throw ValidationError("coverage: no lung mask for case '" + t.case_id + "'");
        const auto& mask = it->second->lung_mask;
        const double r = foveal_radius_px.value_or(default_foveal_radius(mask.width()));
        const auto covered = covered_lung_pixels(t, mask, r);
        const auto total = mask.count();
        out.covered += covered;
        out.total += total;
        out.per_scan.push_back(total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0);
    }
    out.fraction = out.total ? static_cast<double>(out.covered) / static_cast<double>(out.total) : 0.0;
    return out;
}

// ---- DTW -------------------------------------------------------------------

double dtw_distance(std::span<const Point> a, std::span<const Point> b) {
    if (a.empty() || b.empty()) throw ValidationError("dtw: empty trajectory");
    const auto cost = [](Point p, Point q) {
        const double dx = p.x - q.x;
        const double dy = p.y - q.y;
        return std::sqrt(dx * dx + dy * dy);
    };
    // Rolling rows over b; `prev[j]` holds D(i-1, j).
    const std::size_t m = b.size();
    std::vector<double> prev(m), cur(m);
    prev[0] = cost(a[0], b[0]);
    for (std::size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + cost(a[0], b[j]);
    for (std::size_t i = 1; i < a.size(); ++i) {
        const Point ai = a[i];
        cur[0] = prev[0] + cost(ai, b[0]);
        for (std::size_t j = 1; j < m; ++j) {
            const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
            cur[j] = best + cost(ai, b[j]);
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

std::vector<Point> normalized_positions(const GazeTrajectory& t) {
    if (t.width <= 0 || t.height <= 0) throw ValidationError("trajectory '" + t.case_id + "' has no image size");
    std::vector<Point> out;
    out.reserve(t.samples.size());
    const double sx = 1.0 / t.width;
    const double sy = 1.0 / t.height;
    for (const auto& s : t.samples) out.push_back({s.x * sx, s.y * sy});
    return out;
}

double dtw_distance(const GazeTrajectory& a, const GazeTrajectory& b) {
    if (a.samples.empty() || b.samples.empty())
        throw ValidationError("dtw: empty trajectory ('" + (a.samples.empty() ? a.case_id : b.case_id) + "')");
    const auto pa = normalized_positions(a);
    const auto pb = normalized_positions(b);
    return dtw_distance(pa, pb);
}

std::vector<double> HeterogeneityResult::upper_triangle() const {
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.push_back(at(i, j));
    return out;
}

HeterogeneityResult heterogeneity(std::span<const GazeTrajectory> normals, unsigned jobs) {
    const std::size_t n = normals.size();
    if (n < 2) throw ValidationError("heterogeneity needs at least 2 trajectories, got " + std::to_string(n));

    std::vector<std::vector<Point>> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (normals[i].samples.empty())
            throw ValidationError("dtw: empty trajectory ('" + normals[i].case_id + "')");
        pts[i] = normalized_positions(normals[i]);
    }

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    HeterogeneityResult out;
    out.n = n;
    out.matrix.assign(n * n, 0.0);
    for (const auto& t : normals) out.case_ids.push_back(t.case_id);

    std::vector<double> values(pairs.size());
    detail::parallel_for(pairs.size(), jobs, [&](std::size_t k) {
        values[k] = dtw_distance(pts[pairs[k].first], pts[pairs[k].second]);
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        out.matrix[i * n + j] = values[k];
        out.matrix[j * n + i] = values[k];
    }

    const double count = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / count);
    return out;
}

// ---- interruptions & time --------------------------------------------------

std::size_t count_interruptions(std::span<const GapEvent> gaps) noexcept {
    return static_cast<std::size_t>(
        std::count_if(gaps.begin(), gaps.end(), [](const GapEvent& g) { return g.kind == GapKind::interruption; }));
}

ReviewTimes review_times(std::span<const GazeTrajectory> trajectories) {
    if (trajectories.empty()) throw ValidationError("review time: no cases (mean undefined)");
    ReviewTimes out;
    double sum = 0.0;
    for (const auto& t : trajectories) {
        if (t.duration_ms() <= 0) throw ValidationError("review time: non-positive display duration for '" + t.case_id + "'");
        const double s = static_cast<double>(t.duration_ms()) / 1000.0;
        out.per_case_s.push_back(s);
        sum += s;
    }
    out.mean_s = sum / static_cast<double>(trajectories.size());
    return out;
}

// ---- heatmap ---------------------------------------------------------------

HeatmapConfig default_heatmap_config(int width, int height, double foveal_radius_px) {
    HeatmapConfig cfg;
    const int long_side = std::max(width, height);
    cfg.cell_size_px = std::max(1.0, std::ceil(static_cast<double>(long_side) / 256.0));
    cfg.radial_radius_px = foveal_radius_px;
    cfg.binarize_threshold = 0.0;
    return cfg;
}

std::uint32_t HeatmapGrid::max_value() const noexcept {
    return cells.empty() ? 0u : *std::max_element(cells.begin(), cells.end());
}

HeatmapGrid build_heatmap(std::span<const GazeTrajectory> trajectories, const HeatmapConfig& config) {
    if (!(config.cell_size_px > 0.0)) throw ValidationError("heatmap: cell_size_px must be positive");
    if (!(config.radial_radius_px >= 0.0)) throw ValidationError("heatmap: radial_radius_px must be non-negative");

    int width = 0, height = 0;
    if (config.normalize_to) {
        std::tie(width, height) = *config.normalize_to;
    } else if (!trajectories.empty()) {
        width = trajectories.front().width;
        height = trajectories.front().height;
        for (const auto& t : trajectories)
            if (t.width != width || t.height != height)
                throw ValidationError("heatmap: mixed image dimensions without normalization");
    }

    HeatmapGrid grid;
    grid.config = config;
    grid.image_width = width;
    grid.image_height = height;
    grid.n_scans = static_cast<int>(trajectories.size());
    if (width <= 0 || height <= 0) return grid;

    const double cell = config.cell_size_px;
    grid.grid_width = static_cast<int>(std::ceil(width / cell));
    grid.grid_height = static_cast<int>(std::ceil(height / cell));
    const int gw = grid.grid_width;
    const int gh = grid.grid_height;
    grid.cells.assign(static_cast<std::size_t>(gw) * gh, 0);

    // Flat disc kernel in cell offsets.
    const double r = config.radial_radius_px;
    const int reach = static_cast<int>(std::floor(r / cell));
    std::vector<std::pair<int, int>> kernel;
    for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx) {
            const double ex = dx * cell;
            const double ey = dy * cell;
            if (ex * ex + ey * ey <= r * r) kernel.emplace_back(dx, dy);
        }

    std::vector<std::uint32_t> counts(grid.cells.size());
    std::vector<double> smooth(grid.cells.size());
    for (const auto& t : trajectories) {
        if (t.width <= 0 || t.height <= 0) throw ValidationError("heatmap: trajectory without image size");
        const double sx = static_cast<double>(width) / t.width;
        const double sy = static_cast<double>(height) / t.height;
        std::fill(counts.begin(), counts.end(), 0u);
        for (const auto& s : t.samples) {
            const int gx = std::clamp(static_cast<int>(std::floor(s.x * sx / cell)), 0, gw - 1);
            const int gy = std::clamp(static_cast<int>(std::floor(s.y * sy / cell)), 0, gh - 1);
            ++counts[static_cast<std::size_t>(gy) * gw + gx];
        }
        std::fill(smooth.begin(), smooth.end(), 0.0);
        for (int gy = 0; gy < gh; ++gy)
            for (int gx = 0; gx < gw; ++gx) {
                const auto c = counts[static_cast<std::size_t>(gy) * gw + gx];
                if (!c) continue;
                for (const auto& [dx, dy] : kernel) {
                    const int x = gx + dx;
                    const int y = gy + dy;
                    if (x < 0 || y < 0 || x >= gw || y >= gh) continue;
                    smooth[static_cast<std::size_t>(y) * gw + x] += c;
                }
            }
        for (std::size_t k = 0; k < smooth.size(); ++k)
            if (smooth[k] > config.binarize_threshold) ++grid.cells[k];
    }
    return grid;
}

// ---- session ---------------------------------------------------------------

SessionAnalysis session_metrics(const SessionInputs& in) {
    if (!in.recording || !in.viewports || !in.cases) throw ValidationError("session metrics: incomplete inputs");
    if (!in.annotations) throw ValidationError("session metrics: missing annotations");
    const auto& rec = *in.recording;
    const auto& p = in.params;

    SessionAnalysis out;
    out.traces = segment_by_case(rec, *in.viewports, *in.cases);
    if (out.traces.empty()) throw ValidationError("session metrics: recording has no case segments");

    const auto by_id = index_cases(*in.cases);
    std::vector<CaseDefinition> shown;  // displayed cases, display order
    std::vector<GazeTrajectory> trajs;
    std::vector<GazeTrajectory> normals;
    for (const auto& tr : out.traces) {
        shown.push_back(*by_id.at(tr.trajectory.case_id));
        trajs.push_back(tr.trajectory);
        if (shown.back().case_class == CaseClass::normal) normals.push_back(tr.trajectory);
    }

    const auto det = detection_outcomes(*in.annotations, shown, p.hit_slack_px);
    const auto cov = coverage(trajs, shown, p.foveal_radius_px);
    const auto het = heterogeneity(normals, p.jobs);
    const auto times = review_times(trajs);

    HeatmapConfig hcfg;
    if (p.heatmap) {
        hcfg = *p.heatmap;
    } else {
        const auto& first = shown.front();
        hcfg = default_heatmap_config(first.width, first.height,
                                      p.foveal_radius_px.value_or(default_foveal_radius(first.width)));
        const bool mixed = std::any_of(shown.begin(), shown.end(), [&](const CaseDefinition& c) {
            return c.width != first.width || c.height != first.height;
        });
        if (mixed) hcfg.normalize_to = std::make_pair(first.width, first.height);
    }

    auto& b = out.bundle;
    b.subject_id = rec.subject_id;
    b.session_index = rec.session_index;
    b.sensitivity = det.sensitivity;
    b.hits = det.hits;
    b.positives = det.positives;
    b.coverage = cov.fraction;
    b.heterogeneity = het;
    b.heterogeneity_mean = het.mean;
    b.heterogeneity_std = het.std;
    b.mean_review_time_s = times.mean_s;
    b.foveal_radius_px = p.foveal_radius_px.value_or(0.0);
    b.hit_slack_px = p.hit_slack_px;
    b.heatmap = build_heatmap(trajs, hcfg);

    for (std::size_t i = 0; i < out.traces.size(); ++i) {
        const auto& tr = out.traces[i];
        CaseDetail d;
        d.case_id = tr.trajectory.case_id;
        d.case_class = shown[i].case_class;
        d.review_time_s = times.per_case_s[i];
        d.coverage = cov.per_scan[i];
        d.samples = tr.trajectory.samples.size();
        d.interruptions = count_interruptions(tr.gaps);
        d.blinks = tr.gaps.size() - d.interruptions;
        d.call = det.outcomes[i].call;
        d.gaps = tr.gaps;
        d.display_start_ms = tr.trajectory.display_start_ms;
        b.interruptions += d.interruptions;
        b.cases.push_back(std::move(d));
    }

    out.outcomes.subject_id = rec.subject_id;
    out.outcomes.session_index = rec.session_index;
    out.outcomes.outcomes = det.outcomes;
    return out;
}

}  // namespace gazelab
