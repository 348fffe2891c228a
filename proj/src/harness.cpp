#include "slicewise/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "slicewise/nifti.hpp"
#include "slicewise/wire.hpp"

namespace slicewise::harness {

namespace fs = std::filesystem;

namespace {

template <typename T>
T field(const json& j, const char* name)
{
    if (!j.contains(name)) throw format_error(name, "missing field");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw format_error(name, "wrong type");
    }
}

template <typename T>
T field_or(const json& j, const char* name, T fallback)
{
    if (!j.contains(name) || j.at(name).is_null()) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw format_error(name, "wrong type");
    }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j, const char* name)
{
    if (!j.contains(name) || j.at(name).is_null()) return std::nullopt;
    return j.at(name).get<double>();
}

std::string format_number(double v, const char* fmt = "%.10g")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

}  // namespace

// ============================================================================
// Manifest / config
// ============================================================================

json window_to_json(const WindowSpec& w)
{
    if (w.mode == WindowSpec::Mode::percentile) return {{"mode", "percentile"}, {"lo", w.lo}, {"hi", w.hi}};
    return {{"mode", "hounsfield"}, {"center", w.center}, {"width", w.width}};
}

WindowSpec window_from_json(const json& j)
{
    const auto mode = field<std::string>(j, "mode");
    try {
        if (mode == "percentile") return WindowSpec::percentile(field<double>(j, "lo"), field<double>(j, "hi"));
        if (mode == "hounsfield") return WindowSpec::hounsfield(field<double>(j, "center"), field<double>(j, "width"));
    } catch (const contract_error& e) {
        throw format_error("window", e.what());
    }
    throw format_error("window.mode", "expected \"percentile\" or \"hounsfield\"");
}

std::vector<CaseManifestEntry> parse_manifest(const json& j, const fs::path& base_dir)
{
    if (!j.is_array()) throw format_error("manifest", "must be a JSON array");
    std::vector<CaseManifestEntry> out;
    for (const json& e : j) {
        CaseManifestEntry entry;
        entry.case_id = field<std::string>(e, "case_id");
        entry.image_path = field<std::string>(e, "image_path");
        entry.label_path = field<std::string>(e, "label_path");
        if (!base_dir.empty()) {
            if (entry.image_path.is_relative()) entry.image_path = base_dir / entry.image_path;
            if (entry.label_path.is_relative()) entry.label_path = base_dir / entry.label_path;
        }
        entry.axis = field_or<int>(e, "axis", 2);
        if (entry.axis < 0 || entry.axis > 2) throw format_error("axis", "must be 0, 1 or 2");
        entry.modality_tag = field_or<std::string>(e, "modality_tag", "MR");
        if (e.contains("window") && !e.at("window").is_null()) entry.window = window_from_json(e.at("window"));
        out.push_back(std::move(entry));
    }
    return out;
}

std::vector<CaseManifestEntry> load_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("cannot open manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw format_error("manifest", e.what());
    }
    return parse_manifest(j, path.parent_path());
}

json manifest_to_json(const std::vector<CaseManifestEntry>& manifest)
{
    json arr = json::array();
    for (const auto& e : manifest) {
        json item{{"case_id", e.case_id},
                  {"image_path", e.image_path.generic_string()},
                  {"label_path", e.label_path.generic_string()},
                  {"axis", e.axis},
                  {"modality_tag", e.modality_tag}};
        if (e.window) item["window"] = window_to_json(*e.window);
        arr.push_back(std::move(item));
    }
    return arr;
}

void ExperimentConfig::validate() const
{
    if (mode == Mode::clicks && clicks < 1) throw contract_error("clicks mode needs k >= 1");
    if (!std::isfinite(nsd_delta) || nsd_delta < 0.0) throw contract_error("nsd_delta must be >= 0");
    for (const BackendChoice* b : {&propagator, &segmenter_2d}) {
        if (b->kind == BackendChoice::Kind::remote && b->endpoint.empty()) {
            throw contract_error("remote backend needs an endpoint");
        }
    }
    reference_propagator.validate();
}

std::string ExperimentConfig::label() const
{
    if (!method_label.empty()) return method_label;
    if (mode == Mode::gt_mask) return "slicewise (1 mask)";
    return "slicewise (" + std::to_string(clicks) + (clicks == 1 ? " click)" : " clicks)");
}

namespace {

json backend_to_json(const BackendChoice& b)
{
    if (b.kind == BackendChoice::Kind::reference) return {{"kind", "reference"}};
    return {{"kind", "remote"}, {"endpoint", b.endpoint}, {"step_timeout_ms", b.step_timeout_ms}};
}

BackendChoice backend_from_json(const json& j)
{
    BackendChoice b;
    if (j.is_string()) {
        if (j.get<std::string>() != "reference") throw format_error("backend", "string form must be \"reference\"");
        return b;
    }
    const auto kind = field<std::string>(j, "kind");
    if (kind == "reference") return b;
    if (kind != "remote") throw format_error("kind", "expected \"reference\" or \"remote\"");
    b.kind = BackendChoice::Kind::remote;
    b.endpoint = field<std::string>(j, "endpoint");
    b.step_timeout_ms = field_or<std::int64_t>(j, "step_timeout_ms", 30000);
    return b;
}

}  // namespace

json config_to_json(const ExperimentConfig& c)
{
    json j{{"mode", c.mode == ExperimentConfig::Mode::clicks ? "clicks" : "gt_mask"},
           {"clicks", c.clicks},
           {"propagator", backend_to_json(c.propagator)},
           {"segmenter_2d", backend_to_json(c.segmenter_2d)},
           {"reference_propagator",
            {{"band_k", c.reference_propagator.band_k}, {"min_overlap", c.reference_propagator.min_overlap}}},
           {"reference_segmenter", {{"tolerance", c.reference_segmenter.tolerance}}},
           {"salient_filter", c.salient_filter},
           {"salient_threshold", c.salient_threshold},
           {"nsd_delta", c.nsd_delta},
           {"rng_seed", c.rng_seed},
           {"task", c.task},
           {"split", c.split},
           {"method_label", c.label()}};
    return j;
}

ExperimentConfig config_from_json(const json& j)
{
    if (!j.is_object()) throw format_error("config", "must be a JSON object");
    ExperimentConfig c;
    const auto mode = field_or<std::string>(j, "mode", "gt_mask");
    if (mode == "clicks") {
        c.mode = ExperimentConfig::Mode::clicks;
    } else if (mode == "gt_mask") {
        c.mode = ExperimentConfig::Mode::gt_mask;
    } else {
        throw format_error("mode", "expected \"clicks\" or \"gt_mask\"");
    }
    c.clicks = field_or<std::size_t>(j, "clicks", 5);
    if (j.contains("propagator")) c.propagator = backend_from_json(j.at("propagator"));
    if (j.contains("segmenter_2d")) c.segmenter_2d = backend_from_json(j.at("segmenter_2d"));
    if (j.contains("reference_propagator")) {
        const json& p = j.at("reference_propagator");
        c.reference_propagator.band_k = field_or<double>(p, "band_k", 2.5);
        c.reference_propagator.min_overlap = field_or<double>(p, "min_overlap", 0.3);
    }
    if (j.contains("reference_segmenter")) {
        c.reference_segmenter.tolerance = field_or<double>(j.at("reference_segmenter"), "tolerance", 25.0);
    }
    c.salient_filter = field_or<bool>(j, "salient_filter", false);
    c.salient_threshold = field_or<std::size_t>(j, "salient_threshold", 256);
    c.nsd_delta = field_or<double>(j, "nsd_delta", 1.0);
    c.rng_seed = field_or<std::uint64_t>(j, "rng_seed", 0);
    c.task = field_or<std::string>(j, "task", "");
    c.split = field_or<std::string>(j, "split", "");
    c.method_label = field_or<std::string>(j, "method_label", "");
    c.workers = field_or<std::size_t>(j, "workers", 0);
    try {
        c.validate();
    } catch (const contract_error& e) {
        throw format_error("config", e.what());
    }
    return c;
}

// ============================================================================
// Running
// ============================================================================

std::size_t Report::failed_count() const
{
    return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [](const CaseResult& c) { return !c.ok; }));
}

namespace {

std::unique_ptr<prompt::InteractiveSegmenter> make_segmenter(const ExperimentConfig& config)
{
    if (config.segmenter_2d.kind == BackendChoice::Kind::remote) {
        wire::RemoteOptions opts;
        opts.step_timeout = std::chrono::milliseconds(config.segmenter_2d.step_timeout_ms);
        return std::make_unique<wire::RemoteSegmenter>(config.segmenter_2d.endpoint, opts);
    }
    return prompt::reference_2d_segmenter(config.reference_segmenter);
}

propagation::PropagatorFactory make_propagator(const ExperimentConfig& config)
{
    if (config.propagator.kind == BackendChoice::Kind::remote) {
        wire::RemoteOptions opts;
        opts.step_timeout = std::chrono::milliseconds(config.propagator.step_timeout_ms);
        return wire::remote_propagator(config.propagator.endpoint, opts);
    }
    return propagation::reference_propagator(config.reference_propagator);
}

CaseResult run_case(const CaseManifestEntry& entry, const ExperimentConfig& config)
{
    const auto start = std::chrono::steady_clock::now();
    CaseResult result;
    result.case_id = entry.case_id;
    result.metrics.case_id = entry.case_id;
    try {
        const Volume vol = nifti::load_volume(entry.image_path);
        const MaskVolume gt = nifti::load_mask(entry.label_path);
        if (!gt.matches(vol)) throw contract_error("label dims do not match image dims");

        const WindowSpec window = entry.window ? *entry.window : WindowSpec::default_for(entry.modality_tag);
        const FrameStack stack = to_frames(vol, entry.axis, window);
        const std::size_t center = prompt::select_center_slice(gt, entry.axis);
        result.center_slice = center;
        const MaskSlice gt_center = slice_of(gt, entry.axis, center);

        MaskSlice center_mask;
        if (config.mode == ExperimentConfig::Mode::gt_mask) {
            center_mask = gt_center;
        } else {
            auto segmenter = make_segmenter(config);
            prompt::SliceSessionLog log =
                prompt::run_click_session(stack.frames[center], gt_center, *segmenter, config.clicks);
            if (log.error) throw error("click session: " + *log.error);
            result.session_log = log.rounds;
            result.rounds_used = log.rounds.size();
            for (const auto& r : log.rounds) result.round_log.push_back(metrics::RoundEntry{1, r.dice});
            center_mask = std::move(log.final_mask);
        }

        propagation::PropagateOptions opts;
        opts.concurrent = false;  // cases already run in parallel
        const auto prop = propagation::propagate(stack, center_mask, center, make_propagator(config), opts);
        result.missing_slices = static_cast<std::size_t>(std::count(prop.provenance.begin(), prop.provenance.end(),
                                                                    propagation::Provenance::missing));
        if (!prop.complete()) {
            throw error(prop.forward_error ? *prop.forward_error : *prop.backward_error);
        }

        const metrics::Tolerance tol(config.nsd_delta);
        result.metrics.dice = metrics::dice(prop.mask, gt);
        result.metrics.nsd = metrics::nsd(prop.mask, gt, vol.spacing(), tol);
        try {
            result.metrics.hd95 = metrics::hd95(prop.mask, gt, vol.spacing());
        } catch (const undefined_metric_error&) {
            result.metrics.hd95.reset();
        }
        if (config.salient_filter) {
            const auto indices = metrics::salient_slices(gt, entry.axis, config.salient_threshold);
            if (indices.empty()) {
                result.metrics.salient_empty = true;
                result.metrics.salient_dice = result.metrics.dice;
                result.metrics.salient_nsd = result.metrics.nsd;
            } else {
                const auto sub = metrics::masked_metrics(prop.mask, gt, vol.spacing(), entry.axis, indices, tol);
                result.metrics.salient_dice = sub.dice;
                result.metrics.salient_nsd = sub.nsd;
            }
        }
        result.ok = true;
    } catch (const std::exception& e) {
        result.ok = false;
        result.error = e.what();
    }
    result.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace

Report run_experiment(const std::vector<CaseManifestEntry>& manifest, const ExperimentConfig& config)
{
    if (manifest.empty()) throw contract_error("manifest is empty");
    config.validate();

    Report report;
    report.config = config;
    report.cases.resize(manifest.size());

    std::size_t workers = config.workers;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, manifest.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < manifest.size(); i = next++) {
            report.cases[i] = run_case(manifest[i], config);
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::vector<metrics::CaseMetrics> ok;
    for (const auto& c : report.cases) {
        if (c.ok) ok.push_back(c.metrics);
    }
    if (!ok.empty()) report.aggregate = metrics::aggregate(ok);
    return report;
}

int exit_code(const Report& report)
{
    const std::size_t failed = report.failed_count();
    if (failed == 0) return 0;
    if (failed == report.cases.size()) return 3;
    return 2;
}

// ----------------------------------------------------------------------------
// Report JSON

namespace {

json summary_to_json(const metrics::MetricSummary& s)
{
    return {{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}, {"excluded", s.excluded}};
}

metrics::MetricSummary summary_from_json(const json& j)
{
    metrics::MetricSummary s;
    s.mean = j.at("mean").get<double>();
    s.stddev = j.at("std").get<double>();
    s.count = j.at("count").get<std::size_t>();
    s.excluded = j.value("excluded", std::size_t{0});
    return s;
}

}  // namespace

json report_to_json(const Report& report, bool include_timing)
{
    json cases = json::array();
    for (const auto& c : report.cases) {
        json item{{"case_id", c.case_id}, {"status", c.ok ? "ok" : "failed"}};
        if (!c.ok) item["error"] = c.error;
        item["center_slice"] = c.center_slice;
        item["rounds_used"] = c.rounds_used;
        item["missing_slices"] = c.missing_slices;
        if (c.ok) {
            json m{{"dice", c.metrics.dice},
                   {"nsd", c.metrics.nsd},
                   {"hd95", optional_number(c.metrics.hd95)},
                   {"salient_dice", optional_number(c.metrics.salient_dice)},
                   {"salient_nsd", optional_number(c.metrics.salient_nsd)},
                   {"salient_empty", c.metrics.salient_empty}};
            item["metrics"] = std::move(m);
        }
        json session = json::array();
        for (const auto& r : c.session_log) {
            session.push_back({{"round", r.round},
                               {"row", r.click.row},
                               {"col", r.click.col},
                               {"label", wire::to_string(r.click.label)},
                               {"dice", r.dice}});
        }
        item["session_log"] = std::move(session);
        json rounds = json::array();
        for (const auto& r : c.round_log) rounds.push_back({{"points_added", r.points_added}, {"dice_after", r.dice_after}});
        item["round_log"] = std::move(rounds);
        if (include_timing) item["timing"] = {{"elapsed_ms", c.elapsed_ms}};
        cases.push_back(std::move(item));
    }

    json out{{"schema_version", kReportSchemaVersion},
             {"method", report.config.label()},
             {"config", config_to_json(report.config)},
             {"split", report.config.split},
             {"cases", std::move(cases)},
             {"counts",
              {{"total", report.cases.size()},
               {"failed", report.failed_count()},
               {"ok", report.cases.size() - report.failed_count()}}}};
    if (report.aggregate) {
        const auto& a = *report.aggregate;
        json agg{{"dice", summary_to_json(a.dice)}, {"nsd", summary_to_json(a.nsd)}, {"hd95", summary_to_json(a.hd95)}};
        if (a.salient_dice) agg["salient_dice"] = summary_to_json(*a.salient_dice);
        if (a.salient_nsd) agg["salient_nsd"] = summary_to_json(*a.salient_nsd);
        out["aggregate"] = std::move(agg);
    } else {
        out["aggregate"] = nullptr;
    }
    return out;
}

Report report_from_json(const json& j)
{
    if (field<int>(j, "schema_version") != kReportSchemaVersion) {
        throw unsupported_error("unsupported report schema_version");
    }
    Report report;
    report.config = config_from_json(j.at("config"));
    for (const json& item : j.at("cases")) {
        CaseResult c;
        c.case_id = field<std::string>(item, "case_id");
        c.ok = field<std::string>(item, "status") == "ok";
        c.error = item.value("error", std::string{});
        c.center_slice = item.value("center_slice", std::size_t{0});
        c.rounds_used = item.value("rounds_used", std::size_t{0});
        c.missing_slices = item.value("missing_slices", std::size_t{0});
        c.metrics.case_id = c.case_id;
        if (item.contains("metrics")) {
            const json& m = item.at("metrics");
            c.metrics.dice = m.at("dice").get<double>();
            c.metrics.nsd = m.at("nsd").get<double>();
            c.metrics.hd95 = number_or_null(m, "hd95");
            c.metrics.salient_dice = number_or_null(m, "salient_dice");
            c.metrics.salient_nsd = number_or_null(m, "salient_nsd");
            c.metrics.salient_empty = m.value("salient_empty", false);
        }
        for (const json& r : item.value("session_log", json::array())) {
            prompt::SessionRound round;
            round.round = r.at("round").get<std::size_t>();
            round.click = prompt::Click{r.at("row").get<std::size_t>(), r.at("col").get<std::size_t>(),
                                        wire::click_label_from_string(r.at("label").get<std::string>()), round.round};
            round.dice = r.at("dice").get<double>();
            c.session_log.push_back(round);
        }
        for (const json& r : item.value("round_log", json::array())) {
            c.round_log.push_back(
                metrics::RoundEntry{r.at("points_added").get<std::size_t>(), r.at("dice_after").get<double>()});
        }
        if (item.contains("timing")) c.elapsed_ms = item.at("timing").value("elapsed_ms", 0.0);
        report.cases.push_back(std::move(c));
    }
    if (j.contains("aggregate") && !j.at("aggregate").is_null()) {
        const json& a = j.at("aggregate");
        metrics::AggregateSummary s;
        s.dice = summary_from_json(a.at("dice"));
        s.nsd = summary_from_json(a.at("nsd"));
        s.hd95 = summary_from_json(a.at("hd95"));
        if (a.contains("salient_dice")) s.salient_dice = summary_from_json(a.at("salient_dice"));
        if (a.contains("salient_nsd")) s.salient_nsd = summary_from_json(a.at("salient_nsd"));
        report.aggregate = s;
    }
    return report;
}

// ============================================================================
// Baselines and comparison tables
// ============================================================================

namespace {

MethodRow row_from_json(const json& j, std::size_t columns)
{
    MethodRow row;
    row.method = field<std::string>(j, "method");
    const json& values = j.at("values");
    if (!values.is_array() || values.size() != columns) {
        throw format_error("values", "row '" + row.method + "' must have one value per column");
    }
    for (const json& v : values) row.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    return row;
}

}  // namespace

Baselines parse_baselines(const json& j)
{
    Baselines out;
    for (const json& t : j.value("tables", json::array())) {
        BaselineTable table;
        table.name = field<std::string>(t, "name");
        table.caption = t.value("caption", std::string{});
        table.columns = field<std::vector<std::string>>(t, "columns");
        for (const json& r : t.value("baselines", json::array())) table.baselines.push_back(row_from_json(r, table.columns.size()));
        for (const json& r : t.value("reference_results", json::array())) {
            table.reference_results.push_back(row_from_json(r, table.columns.size()));
        }
        out.tables.push_back(std::move(table));
    }
    for (const json& g : j.value("growth", json::array())) {
        GrowthBaseline b;
        b.method = field<std::string>(g, "method");
        const auto points = field<std::vector<std::size_t>>(g, "points_added");
        const auto dice = field<std::vector<double>>(g, "dice_after");
        if (points.size() != dice.size()) throw format_error("growth", "points_added and dice_after differ in length");
        for (std::size_t i = 0; i < points.size(); ++i) b.rounds.push_back(metrics::RoundEntry{points[i], dice[i]});
        out.growth.push_back(std::move(b));
    }
    return out;
}

Baselines load_baselines(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("cannot open baselines " + path.string());
    try {
        return parse_baselines(json::parse(in));
    } catch (const json::exception& e) {
        throw format_error("baselines", e.what());
    }
}

double percent_delta(double ours, double best)
{
    if (best == 0.0) throw contract_error("best value is zero; percent delta undefined");
    return (ours - best) / best * 100.0;
}

std::string render_delta(double percent)
{
    std::string text = format_number(percent, "%.2f");
    if (text == "-0.00") text = "0.00";
    if (percent > 0.0 && text != "0.00") text = "+" + text;
    return text + "%";
}

std::vector<ComparisonRow> comparison_rows(const BaselineTable& table, const std::vector<MethodRow>& ours)
{
    std::vector<std::optional<double>> best(table.columns.size());
    for (const MethodRow& b : table.baselines) {
        for (std::size_t i = 0; i < best.size() && i < b.values.size(); ++i) {
            if (b.values[i] && (!best[i] || *b.values[i] > *best[i])) best[i] = b.values[i];
        }
    }
    std::vector<ComparisonRow> out;
    for (const MethodRow& row : ours) {
        ComparisonRow cr;
        cr.method = row.method;
        cr.values = row.values;
        cr.values.resize(table.columns.size());
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
            if (cr.values[i] && best[i]) {
                const double d = percent_delta(*cr.values[i], *best[i]);
                cr.delta_percent.push_back(d);
                cr.rendered_delta.push_back(render_delta(d));
            } else {
                cr.delta_percent.push_back(std::nullopt);
                cr.rendered_delta.emplace_back();
            }
        }
        out.push_back(std::move(cr));
    }
    return out;
}

std::vector<MethodRow> method_rows_from_report(const Report& report, const BaselineTable& table)
{
    std::vector<MethodRow> out;
    if (!report.aggregate || report.config.task.empty()) return out;
    const auto& a = *report.aggregate;
    const std::string& task = report.config.task;

    auto build = [&](const std::string& label, double dice, std::optional<double> nsd) {
        MethodRow row;
        row.method = label;
        bool any = false;
        for (const std::string& col : table.columns) {
            std::optional<double> v;
            if (col == task || col == task + " Dice") {
                v = dice * 100.0;
            } else if (col == task + " NSD" && nsd) {
                v = *nsd * 100.0;
            }
            any = any || v.has_value();
            row.values.push_back(v);
        }
        if (any) out.push_back(std::move(row));
    };
    build(report.config.label(), a.dice.mean, a.nsd.mean);
    if (a.salient_dice) {
        build(report.config.label() + " (salient area)", a.salient_dice->mean,
              a.salient_nsd ? std::optional<double>(a.salient_nsd->mean) : std::nullopt);
    }
    return out;
}

std::string render_comparison_markdown(const BaselineTable& table, const std::vector<ComparisonRow>& rows)
{
    std::ostringstream out;
    if (!table.caption.empty()) out << "**" << table.caption << "**\n\n";
    out << "| Method |";
    for (const auto& c : table.columns) out << ' ' << c << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << "---|";
    out << '\n';
    auto cell = [](const std::optional<double>& v) { return v ? format_number(*v, "%.2f") : std::string("-"); };
    for (const auto& b : table.baselines) {
        out << "| " << b.method << " |";
        for (std::size_t i = 0; i < table.columns.size(); ++i) out << ' ' << cell(i < b.values.size() ? b.values[i] : std::nullopt) << " |";
        out << '\n';
    }
    for (const auto& r : rows) {
        out << "| " << r.method << " |";
        for (const auto& v : r.values) out << ' ' << cell(v) << " |";
        out << "\n| Compared with the best results |";
        for (const auto& d : r.rendered_delta) out << ' ' << (d.empty() ? "-" : d) << " |";
        out << '\n';
    }
    return out.str();
}

GrowthTable growth_report(const Report& report, const std::vector<GrowthBaseline>& baselines)
{
    GrowthTable table;
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    bool any = false;
    for (const auto& c : report.cases) {
        if (!c.ok || c.round_log.empty()) continue;
        any = true;
        const auto growth = metrics::dice_growth_per_point(c.round_log);
        if (sums.size() < growth.size()) {
            sums.resize(growth.size(), 0.0);
            counts.resize(growth.size(), 0);
        }
        for (std::size_t r = 0; r < growth.size(); ++r) {
            sums[r] += growth[r];
            ++counts[r];
        }
    }
    if (any) {
        std::vector<double> means(sums.size());
        for (std::size_t r = 0; r < sums.size(); ++r) means[r] = sums[r] / static_cast<double>(counts[r]);
        table.methods.push_back(report.config.label());
        table.per_round.push_back(std::move(means));
    }
    for (const auto& b : baselines) {
        table.methods.push_back(b.method);
        table.per_round.push_back(metrics::dice_growth_per_point(b.rounds));
    }
    return table;
}

std::string render_growth_markdown(const GrowthTable& table)
{
    std::size_t rounds = 0;
    for (const auto& r : table.per_round) rounds = std::max(rounds, r.size());
    std::ostringstream out;
    out << "| Method |";
    for (std::size_t r = 0; r < rounds; ++r) out << " Round " << r + 1 << " |";
    out << "\n|---|";
    for (std::size_t r = 0; r < rounds; ++r) out << "---|";
    out << '\n';
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
        out << "| " << table.methods[m] << " |";
        for (std::size_t r = 0; r < rounds; ++r) {
            out << ' ' << (r < table.per_round[m].size() ? format_number(table.per_round[m][r], "%.4f") : "-") << " |";
        }
        out << '\n';
    }
    return out.str();
}

// ============================================================================
// Output
// ============================================================================

ReportFormat report_format_from_string(const std::string& s)
{
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    if (s == "md" || s == "markdown") return ReportFormat::markdown;
    throw contract_error("unknown report format '" + s + "' (json, csv, md)");
}

namespace {

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string opt_cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

std::string render_csv(const Report& report)
{
    std::ostringstream out;
    out << "case_id,dice,nsd,hd95,salient_dice,salient_nsd,rounds_used,status,error\n";
    for (const auto& c : report.cases) {
        out << csv_escape(c.case_id) << ',';
        if (c.ok) {
            out << format_number(c.metrics.dice) << ',' << format_number(c.metrics.nsd) << ','
                << opt_cell(c.metrics.hd95) << ',' << opt_cell(c.metrics.salient_dice) << ','
                << opt_cell(c.metrics.salient_nsd) << ',';
        } else {
            out << ",,,,,";
        }
        out << c.rounds_used << ',' << (c.ok ? "ok" : "failed") << ',' << csv_escape(c.error) << '\n';
    }
    return out.str();
}

std::string render_markdown(const Report& report, const Baselines* baselines)
{
    std::ostringstream out;
    out << "# " << report.config.label();
    if (!report.config.task.empty()) out << ": " << report.config.task;
    out << "\n\n";

    bool rendered_table = false;
    if (baselines != nullptr) {
        for (const auto& table : baselines->tables) {
            const auto rows = method_rows_from_report(report, table);
            if (rows.empty()) continue;
            out << render_comparison_markdown(table, comparison_rows(table, rows)) << '\n';
            rendered_table = true;
        }
    }
    if (!rendered_table && report.aggregate) {
        const auto& a = *report.aggregate;
        out << "| Method | Dice | NSD | HD95 (mm) |";
        if (a.salient_dice) out << " Dice (salient) | NSD (salient) |";
        out << "\n|---|---|---|---|";
        if (a.salient_dice) out << "---|---|";
        out << "\n| " << report.config.label() << " | " << format_number(a.dice.mean * 100.0, "%.2f") << " | "
            << format_number(a.nsd.mean * 100.0, "%.2f") << " | "
            << (a.hd95.count ? format_number(a.hd95.mean, "%.2f") : std::string("-")) << " |";
        if (a.salient_dice) {
            out << ' ' << format_number(a.salient_dice->mean * 100.0, "%.2f") << " | "
                << (a.salient_nsd ? format_number(a.salient_nsd->mean * 100.0, "%.2f") : std::string("-")) << " |";
        }
        out << "\n\n";
    }

    out << "| case_id | dice | nsd | hd95 | salient_dice | salient_nsd | rounds_used | status |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    auto cell = [](const std::optional<double>& v) { return v ? format_number(*v, "%.4f") : std::string("-"); };
    for (const auto& c : report.cases) {
        out << "| " << c.case_id << " | ";
        if (c.ok) {
            out << format_number(c.metrics.dice, "%.4f") << " | " << format_number(c.metrics.nsd, "%.4f") << " | "
                << cell(c.metrics.hd95) << " | " << cell(c.metrics.salient_dice) << " | "
                << cell(c.metrics.salient_nsd) << " | ";
        } else {
            out << "- | - | - | - | - | ";
        }
        out << c.rounds_used << " | " << (c.ok ? "ok" : "failed: " + c.error) << " |\n";
    }
    return out.str();
}

void emit_report(const Report& report, ReportFormat format, const fs::path& path, const Baselines* baselines,
                 bool include_timing)
{
    std::string text;
    switch (format) {
        case ReportFormat::json: text = report_to_json(report, include_timing).dump(2) + "\n"; break;
        case ReportFormat::csv: text = render_csv(report); break;
        case ReportFormat::markdown: text = render_markdown(report, baselines); break;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw io_error("write failed: " + path.string());
}

// ============================================================================
// Phantom corpus
// ============================================================================

std::vector<CaseManifestEntry> write_phantom_corpus(const fs::path& dir, std::size_t count, std::uint64_t seed)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());

    std::mt19937_64 shape_rng(seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<CaseManifestEntry> manifest;
    for (std::size_t i = 0; i < count; ++i) {
        PhantomSpec spec;
        spec.rng_seed = seed + i;
        if (i > 0) {
            auto jitter = [&](double lo, double hi) {
                return lo + (hi - lo) * (static_cast<double>(shape_rng() >> 11) * 0x1.0p-53);
            };
            spec.semi_axes = {std::round(jitter(14.0, 24.0)), std::round(jitter(12.0, 20.0)),
                              std::round(jitter(8.0, 14.0))};
            for (int a = 0; a < 3; ++a) {
                const double room = 31.0 - spec.semi_axes[a] - 1.0;
                spec.center[a] = 32.0 + std::round(jitter(-room, room) / 2.0);
            }
        }
        const Phantom ph = make_phantom(spec);
        char name[32];
        std::snprintf(name, sizeof name, "phantom_%03zu", i);
        CaseManifestEntry entry;
        entry.case_id = name;
        entry.image_path = std::string(name) + "_image.nii.gz";
        entry.label_path = std::string(name) + "_label.nii.gz";
        entry.axis = 2;
        entry.modality_tag = "MR";
        entry.window = WindowSpec::percentile(0.5, 99.5);
        nifti::save_volume(ph.volume, dir / entry.image_path);
        nifti::save_mask(ph.mask, ph.volume, dir / entry.label_path);
        manifest.push_back(std::move(entry));
    }
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw io_error("cannot write manifest in " + dir.string());
    out << manifest_to_json(manifest).dump(2) << '\n';

    for (auto& e : manifest) {
        e.image_path = dir / e.image_path;
        e.label_path = dir / e.label_path;
    }
    return manifest;
}

}  // namespace slicewise::harness
