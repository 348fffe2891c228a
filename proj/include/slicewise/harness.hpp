#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slicewise/metrics.hpp"
#include "slicewise/prompt.hpp"
#include "slicewise/propagation.hpp"
#include "slicewise/volume.hpp"

namespace slicewise::harness {

using json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

// ============================================================================
// Inputs
// ============================================================================

struct CaseManifestEntry {
    std::string case_id;
    std::filesystem::path image_path;
    std::filesystem::path label_path;
    int axis = 2;
    std::optional<WindowSpec> window;  // default chosen from modality_tag
    std::string modality_tag = "MR";
};

/// Manifest is a JSON array of entries. Relative paths resolve against `base_dir`.
std::vector<CaseManifestEntry> parse_manifest(const json& j, const std::filesystem::path& base_dir = {});
std::vector<CaseManifestEntry> load_manifest(const std::filesystem::path& path);
json manifest_to_json(const std::vector<CaseManifestEntry>& manifest);

json window_to_json(const WindowSpec& w);
WindowSpec window_from_json(const json& j);

struct BackendChoice {
    enum class Kind { reference, remote };
    Kind kind = Kind::reference;
    std::string endpoint;
    std::int64_t step_timeout_ms = 30000;
};

struct ExperimentConfig {
    enum class Mode { clicks, gt_mask };

    Mode mode = Mode::gt_mask;
    std::size_t clicks = 5;
    BackendChoice propagator;
    BackendChoice segmenter_2d;
    propagation::ReferencePropagatorParams reference_propagator;
    prompt::RegionGrowParams reference_segmenter;
    bool salient_filter = false;
    std::size_t salient_threshold = 256;
    double nsd_delta = 1.0;
    std::uint64_t rng_seed = 0;
    std::string task;   // column name in comparison tables, e.g. "Spleen"
    std::string split;  // recorded only
    std::string method_label;
    std::size_t workers = 0;  // 0: hardware concurrency

    void validate() const;
    /// "slicewise (5 clicks)" / "slicewise (1 mask)" unless method_label is set.
    std::string label() const;
};

json config_to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const json& j);

// ============================================================================
// Report
// ============================================================================

struct CaseResult {
    std::string case_id;
    bool ok = false;
    std::string error;
    metrics::CaseMetrics metrics;
    std::size_t center_slice = 0;
    std::size_t rounds_used = 0;
    std::vector<prompt::SessionRound> session_log;
    metrics::RoundLog round_log;
    std::size_t missing_slices = 0;
    double elapsed_ms = 0.0;  // timing; not part of the canonical report
};

struct Report {
    ExperimentConfig config;
    std::vector<CaseResult> cases;
    std::optional<metrics::AggregateSummary> aggregate;

    std::size_t failed_count() const;
};

/// Runs every case independently (bounded by config.workers). A failing case
/// is recorded with its error; the run itself throws only when the manifest
/// is empty.
Report run_experiment(const std::vector<CaseManifestEntry>& manifest, const ExperimentConfig& config);

/// Canonical JSON. Timing fields appear only with include_timing.
json report_to_json(const Report& report, bool include_timing = false);
Report report_from_json(const json& j);

/// 0 success, 2 partial failure, 3 total failure.
int exit_code(const Report& report);

// ============================================================================
// Baselines and tables
// ============================================================================

struct MethodRow {
    std::string method;
    std::vector<std::optional<double>> values;  // aligned with the table's columns
};

struct BaselineTable {
    std::string name;
    std::string caption;
    std::vector<std::string> columns;
    std::vector<MethodRow> baselines;          // compared against
    std::vector<MethodRow> reference_results;  // published rows, for side-by-side rendering
};

struct GrowthBaseline {
    std::string method;
    metrics::RoundLog rounds;
};

struct Baselines {
    std::vector<BaselineTable> tables;
    std::vector<GrowthBaseline> growth;
};

Baselines parse_baselines(const json& j);
Baselines load_baselines(const std::filesystem::path& path);

/// (ours - best) / best * 100.
double percent_delta(double ours, double best);

/// Two decimals with explicit sign: "-10.69%", "+26.20%", "0.00%".
std::string render_delta(double percent);

struct ComparisonRow {
    std::string method;
    std::vector<std::optional<double>> values;
    std::vector<std::optional<double>> delta_percent;  // vs the best baseline per column
    std::vector<std::string> rendered_delta;           // "" where undefined
};

/// Best = maximum over the table's baseline rows per column.
std::vector<ComparisonRow> comparison_rows(const BaselineTable& table, const std::vector<MethodRow>& ours);

/// Rows for this report in the table's columns: the main row, and a
/// "(salient area)" row when salient metrics exist. Values are percentages.
/// Columns are matched as "<task>" (dice), "<task> Dice" or "<task> NSD".
std::vector<MethodRow> method_rows_from_report(const Report& report, const BaselineTable& table);

/// Markdown grid: baseline rows, then each compared row followed by its
/// "Compared with the best results" line.
std::string render_comparison_markdown(const BaselineTable& table, const std::vector<ComparisonRow>& rows);

struct GrowthTable {
    std::vector<std::string> methods;
    std::vector<std::vector<double>> per_round;  // per method
};

/// Mean dice growth per point per round across cases (cases that stopped
/// early contribute only to their own rounds), plus baseline rows.
GrowthTable growth_report(const Report& report, const std::vector<GrowthBaseline>& baselines = {});
std::string render_growth_markdown(const GrowthTable& table);

// ============================================================================
// Output
// ============================================================================

enum class ReportFormat { json, csv, markdown };
ReportFormat report_format_from_string(const std::string& s);

std::string render_csv(const Report& report);
std::string render_markdown(const Report& report, const Baselines* baselines = nullptr);

/// Writes the report; json output is canonical (no timing) unless include_timing.
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path,
                 const Baselines* baselines = nullptr, bool include_timing = false);

// ============================================================================
// Phantom corpus
// ============================================================================

/// Writes `count` phantom cases (image + label NIfTI) plus manifest.json into `dir`.
/// Case 0 is the default 64^3 phantom with the given seed; later cases vary
/// centre and semi-axes deterministically from the seed.
std::vector<CaseManifestEntry> write_phantom_corpus(const std::filesystem::path& dir, std::size_t count,
                                                    std::uint64_t seed);

}  // namespace slicewise::harness
