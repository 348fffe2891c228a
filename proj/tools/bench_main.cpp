#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "slicewise/errors.hpp"
#include "slicewise/harness.hpp"
#include "slicewise/metrics.hpp"
#include "slicewise/nifti.hpp"

namespace {

using namespace slicewise;
using harness::json;

constexpr int kUsage = 64;

json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw format_error(path, e.what());
    }
}

void write_text(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << text;
}

int cmd_run(const std::string& manifest_path, const std::string& config_path, const std::string& out,
            const std::string& format, int workers, bool timing, const std::string& baselines_path)
{
    const auto manifest = harness::load_manifest(manifest_path);
    harness::ExperimentConfig config = harness::config_from_json(read_json(config_path));
    if (workers > 0) config.workers = static_cast<std::size_t>(workers);

    const harness::Report report = harness::run_experiment(manifest, config);
    std::optional<harness::Baselines> baselines;
    if (!baselines_path.empty()) baselines = harness::load_baselines(baselines_path);
    harness::emit_report(report, harness::report_format_from_string(format), out,
                         baselines ? &*baselines : nullptr, timing);

    for (const auto& c : report.cases) {
        if (!c.ok) std::cerr << "case " << c.case_id << " failed: " << c.error << '\n';
    }
    std::cerr << report.cases.size() - report.failed_count() << '/' << report.cases.size() << " cases ok";
    if (report.aggregate) std::fprintf(stderr, ", mean dice %.4f, mean nsd %.4f", report.aggregate->dice.mean,
                                       report.aggregate->nsd.mean);
    std::cerr << '\n';
    return harness::exit_code(report);
}

int cmd_phantoms(const std::string& out, std::size_t count, std::uint64_t seed)
{
    const auto manifest = harness::write_phantom_corpus(out, count, seed);
    std::cerr << "wrote " << manifest.size() << " phantom cases to " << out << '\n';
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, double delta)
{
    const Volume reference = nifti::load_volume(gt_path);
    const MaskVolume gt = nifti::load_mask(gt_path);
    const MaskVolume pred = nifti::load_mask(pred_path);
    if (pred.dims() != gt.dims()) throw contract_error("prediction and ground truth dims differ");

    json out{{"dice", metrics::dice(pred, gt)},
             {"nsd", metrics::nsd(pred, gt, reference.spacing(), metrics::Tolerance(delta))},
             {"delta_mm", delta}};
    try {
        out["hd95"] = metrics::hd95(pred, gt, reference.spacing());
    } catch (const undefined_metric_error&) {
        out["hd95"] = nullptr;
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_tables(const std::string& report_path, const std::string& baselines_path, const std::string& out)
{
    const harness::Baselines baselines = harness::load_baselines(baselines_path);
    std::string text;
    if (!report_path.empty()) {
        const harness::Report report = harness::report_from_json(read_json(report_path));
        text = harness::render_markdown(report, &baselines);
        if (report.config.mode == harness::ExperimentConfig::Mode::clicks) {
            text += "\n" + harness::render_growth_markdown(harness::growth_report(report, baselines.growth));
        }
    } else {
        for (const auto& table : baselines.tables) {
            text += harness::render_comparison_markdown(table, harness::comparison_rows(table, table.reference_results));
            text += '\n';
        }
        if (!baselines.growth.empty()) {
            text += harness::render_growth_markdown(harness::growth_report(harness::Report{}, baselines.growth));
        }
    }
    write_text(out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"slicewise benchmark harness"};
    app.require_subcommand(1);

    std::string manifest, config, out, format = "json", baselines;
    int workers = 0;
    bool timing = false;
    auto* run = app.add_subcommand("run", "run an experiment over a manifest");
    run->add_option("--manifest", manifest, "manifest JSON")->required();
    run->add_option("--config", config, "experiment config JSON")->required();
    run->add_option("--out", out, "report path")->required();
    run->add_option("--format", format, "json, csv or md")->check(CLI::IsMember({"json", "csv", "md", "markdown"}));
    run->add_option("--workers", workers, "parallel cases (default: all cores)")->check(CLI::NonNegativeNumber);
    run->add_flag("--timing", timing, "include timing fields in json output");
    run->add_option("--baselines", baselines, "baseline table JSON for markdown output");

    std::string phantom_dir;
    std::size_t count = 3;
    std::uint64_t seed = 42;
    auto* phantoms = app.add_subcommand("phantoms", "write a synthetic phantom corpus");
    phantoms->add_option("--out", phantom_dir, "output directory")->required();
    phantoms->add_option("--count", count, "number of cases");
    phantoms->add_option("--seed", seed, "noise seed");

    std::string pred, gt;
    double delta = 1.0;
    auto* eval = app.add_subcommand("eval", "metrics for one prediction");
    eval->add_option("--pred", pred, "predicted label NIfTI")->required();
    eval->add_option("--gt", gt, "ground truth label NIfTI")->required();
    eval->add_option("--delta", delta, "NSD tolerance in mm")->check(CLI::NonNegativeNumber);

    std::string report_path, table_baselines, table_out;
    auto* tables = app.add_subcommand("tables", "render comparison tables");
    tables->add_option("--report", report_path, "report JSON (omit to render the published rows)");
    tables->add_option("--baselines", table_baselines, "baseline table JSON")->required();
    tables->add_option("--out", table_out, "markdown output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run) return cmd_run(manifest, config, out, format, workers, timing, baselines);
        if (*phantoms) return cmd_phantoms(phantom_dir, count, seed);
        if (*eval) return cmd_eval(pred, gt, delta);
        if (*tables) return cmd_tables(report_path, table_baselines, table_out);
    } catch (const format_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const contract_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return kUsage;
}
