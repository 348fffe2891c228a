#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "slicewise/harness.hpp"

using namespace slicewise;
using namespace slicewise::harness;
namespace fs = std::filesystem;

namespace {

class HarnessTest : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        dir_ = fs::temp_directory_path() / ("slicewise_harness_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        manifest_ = new std::vector<CaseManifestEntry>(write_phantom_corpus(dir_, 3, 42));
    }
    static void TearDownTestSuite()
    {
        delete manifest_;
        fs::remove_all(dir_);
    }

    static ExperimentConfig gt_config()
    {
        ExperimentConfig c;
        c.mode = ExperimentConfig::Mode::gt_mask;
        c.workers = 2;
        return c;
    }

    static ExperimentConfig click_config(std::size_t k)
    {
        ExperimentConfig c;
        c.mode = ExperimentConfig::Mode::clicks;
        c.clicks = k;
        c.salient_filter = true;
        return c;
    }

    static inline fs::path dir_;
    static inline std::vector<CaseManifestEntry>* manifest_ = nullptr;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

BaselineTable table_one()
{
    BaselineTable t;
    t.name = "interactive";
    t.columns = {"BraTS", "Spleen", "Liver"};
    t.baselines = {{"DeepIGeoS", {88.54, 91.97, 48.57}},
                   {"InterCNN", {88.39, 93.52, 59.92}},
                   {"IteR-MRL", {89.22, 91.50, 62.29}},
                   {"MECCA", {91.02, 94.96, 71.46}}};
    return t;
}

}  // namespace

TEST_F(HarnessTest, PhantomCorpusManifestLoads)
{
    const auto loaded = load_manifest(dir_ / "manifest.json");
    ASSERT_EQ(loaded.size(), 3u);
    EXPECT_EQ(loaded[0].case_id, "phantom_000");
    EXPECT_EQ(loaded[1].image_path, (*manifest_)[1].image_path);
    EXPECT_TRUE(fs::exists(loaded[2].label_path));
    ASSERT_TRUE(loaded[0].window);
    EXPECT_EQ(*loaded[0].window, WindowSpec::percentile(0.5, 99.5));
}

TEST_F(HarnessTest, GtMaskRunProducesAllCases)
{
    const Report r = run_experiment(*manifest_, gt_config());
    ASSERT_EQ(r.cases.size(), 3u);
    EXPECT_EQ(r.failed_count(), 0u);
    ASSERT_TRUE(r.aggregate);
    EXPECT_EQ(r.aggregate->dice.count, 3u);
    for (const auto& c : r.cases) {
        EXPECT_TRUE(c.ok) << c.error;
        EXPECT_GT(c.metrics.dice, 0.9);
        EXPECT_TRUE(c.session_log.empty());
        EXPECT_EQ(c.missing_slices, 0u);
    }
    EXPECT_EQ(exit_code(r), 0);
}

TEST_F(HarnessTest, RunsAreDeterministic)
{
    auto c = gt_config();
    const std::string a = report_to_json(run_experiment(*manifest_, c)).dump();
    c.workers = 1;
    const std::string b = report_to_json(run_experiment(*manifest_, c)).dump();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.find("elapsed_ms"), std::string::npos);
}

TEST_F(HarnessTest, ClickModeLogs)
{
    const Report r = run_experiment(*manifest_, click_config(5));
    for (const auto& c : r.cases) {
        ASSERT_TRUE(c.ok) << c.error;
        EXPECT_GE(c.session_log.size(), 1u);
        EXPECT_LE(c.session_log.size(), 5u);
        EXPECT_EQ(c.rounds_used, c.session_log.size());
        ASSERT_EQ(c.round_log.size(), c.session_log.size());
        EXPECT_EQ(c.round_log.back().dice_after, c.session_log.back().dice);
        EXPECT_GT(c.session_log.back().dice, 0.0);
        EXPECT_TRUE(c.metrics.salient_dice);
        EXPECT_FALSE(c.metrics.salient_empty);
    }
    EXPECT_EQ(r.config.label(), "slicewise (5 clicks)");
}

TEST_F(HarnessTest, CorruptCaseIsIsolated)
{
    auto manifest = *manifest_;
    const fs::path bad = dir_ / "corrupt.nii";
    {
        std::ofstream out(bad, std::ios::binary);
        out << "not a nifti file";
    }
    manifest[1].image_path = bad;
    const Report clean = run_experiment(*manifest_, gt_config());
    const Report r = run_experiment(manifest, gt_config());
    ASSERT_EQ(r.cases.size(), 3u);
    EXPECT_FALSE(r.cases[1].ok);
    EXPECT_NE(r.cases[1].error.find("sizeof_hdr"), std::string::npos) << r.cases[1].error;
    EXPECT_EQ(r.cases[0].metrics.dice, clean.cases[0].metrics.dice);
    EXPECT_EQ(r.cases[2].metrics.nsd, clean.cases[2].metrics.nsd);
    EXPECT_EQ(exit_code(r), 2);
    EXPECT_EQ(r.aggregate->dice.count, 2u);

    for (auto& e : manifest) e.label_path = dir_ / "missing.nii.gz";
    const Report all_bad = run_experiment(manifest, gt_config());
    EXPECT_EQ(exit_code(all_bad), 3);
    EXPECT_FALSE(all_bad.aggregate);
}

TEST_F(HarnessTest, EmptyManifestRejected)
{
    EXPECT_THROW(run_experiment({}, gt_config()), contract_error);
}

TEST_F(HarnessTest, JsonRoundTripAndCsvAgree)
{
    const Report r = run_experiment(*manifest_, click_config(2));
    const json j = report_to_json(r, true);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_TRUE(j["cases"][0].contains("timing"));
    const Report back = report_from_json(j);
    EXPECT_EQ(report_to_json(back).dump(), report_to_json(r).dump());

    const std::string csv = render_csv(back);
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "case_id,dice,nsd,hd95,salient_dice,salient_nsd,rounds_used,status,error");
    for (const auto& c : r.cases) {
        std::string line;
        std::getline(lines, line);
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        ASSERT_GE(cells.size(), 8u);
        EXPECT_EQ(cells[0], c.case_id);
        EXPECT_NEAR(std::stod(cells[1]), c.metrics.dice, 1e-9);
        EXPECT_NEAR(std::stod(cells[2]), c.metrics.nsd, 1e-9);
        EXPECT_EQ(cells[6], std::to_string(c.rounds_used));
        EXPECT_EQ(cells[7], "ok");
    }
}

TEST_F(HarnessTest, EmitReportFormats)
{
    auto c = gt_config();
    c.task = "Spleen";
    auto manifest = *manifest_;
    manifest[2].label_path = dir_ / "missing.nii.gz";
    const Report r = run_experiment(manifest, c);
    emit_report(r, ReportFormat::csv, dir_ / "r.csv");
    const std::string csv = slurp(dir_ / "r.csv");
    EXPECT_NE(csv.find("phantom_002,,,,,,0,failed,"), std::string::npos) << csv;

    Baselines b;
    b.tables.push_back(table_one());
    emit_report(r, ReportFormat::markdown, dir_ / "r.md", &b);
    const std::string md = slurp(dir_ / "r.md");
    for (const char* row : {"| DeepIGeoS |", "| InterCNN |", "| IteR-MRL |", "| MECCA |", "| slicewise (1 mask) |",
                            "| Compared with the best results |", "| phantom_000 |"}) {
        EXPECT_NE(md.find(row), std::string::npos) << row;
    }
    EXPECT_THROW(emit_report(r, ReportFormat::json, dir_ / "no_such_dir" / "r.json"), io_error);
}

TEST(Comparison, DeltasAndRendering)
{
    EXPECT_EQ(render_delta(percent_delta(81.29, 91.02)), "-10.69%");
    EXPECT_EQ(render_delta(percent_delta(90.18, 71.46)), "+26.20%");
    EXPECT_EQ(render_delta(percent_delta(50.0, 50.0)), "0.00%");
    EXPECT_EQ(render_delta(-0.001), "0.00%");
    EXPECT_THROW(percent_delta(1.0, 0.0), contract_error);

    const auto rows = comparison_rows(table_one(), {{"ours", {81.29, 82.77, 90.18}}});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].rendered_delta, (std::vector<std::string>{"-10.69%", "-12.84%", "+26.20%"}));
}

TEST(Comparison, MissingValuesStayBlank)
{
    const auto rows = comparison_rows(table_one(), {{"ours", {std::nullopt, 90.0, std::nullopt}}});
    EXPECT_EQ(rows[0].rendered_delta[0], "");
    EXPECT_FALSE(rows[0].delta_percent[2]);
    EXPECT_TRUE(rows[0].delta_percent[1]);
}

TEST(Comparison, MethodRowsMatchTaskColumns)
{
    Report r;
    r.config.task = "Liver";
    r.config.mode = ExperimentConfig::Mode::gt_mask;
    metrics::AggregateSummary a;
    a.dice.mean = 0.9;
    a.nsd.mean = 0.6;
    a.salient_dice = metrics::MetricSummary{0.95, 0, 1, 0};
    r.aggregate = a;
    BaselineTable t;
    t.columns = {"Spleen Dice", "Liver Dice", "Liver NSD"};
    const auto rows = method_rows_from_report(r, t);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_FALSE(rows[0].values[0]);
    EXPECT_DOUBLE_EQ(*rows[0].values[1], 90.0);
    EXPECT_DOUBLE_EQ(*rows[0].values[2], 60.0);
    EXPECT_EQ(rows[1].method, "slicewise (1 mask) (salient area)");
    EXPECT_DOUBLE_EQ(*rows[1].values[1], 95.0);
    EXPECT_FALSE(rows[1].values[2]);
}

TEST(Growth, SingleAndAveragedCases)
{
    Report r;
    r.config.mode = ExperimentConfig::Mode::clicks;
    CaseResult a;
    a.ok = true;
    a.round_log = {{1, 0.5}, {1, 0.6}};
    r.cases.push_back(a);
    GrowthTable one = growth_report(r);
    ASSERT_EQ(one.per_round.size(), 1u);
    EXPECT_DOUBLE_EQ(one.per_round[0][0], 0.5);
    EXPECT_DOUBLE_EQ(one.per_round[0][1], 0.6 - 0.5);

    CaseResult b;
    b.ok = true;
    b.round_log = {{1, 0.3}};  // stopped after one round
    r.cases.push_back(b);
    const GrowthTable two = growth_report(r, {{"baseline", {{25, 0.5}, {5, 0.7}}}});
    EXPECT_DOUBLE_EQ(two.per_round[0][0], (0.5 + 0.3) / 2);
    EXPECT_DOUBLE_EQ(two.per_round[0][1], 0.6 - 0.5);
    ASSERT_EQ(two.methods.size(), 2u);
    EXPECT_DOUBLE_EQ(two.per_round[1][0], 0.5 / 25);
    EXPECT_DOUBLE_EQ(two.per_round[1][1], (0.7 - 0.5) / 5);
    const std::string md = render_growth_markdown(two);
    EXPECT_NE(md.find("| baseline |"), std::string::npos);
}

TEST(Config, ParseAndValidate)
{
    const auto c = config_from_json(json::parse(R"({"mode":"clicks","clicks":3,"salient_filter":true,
        "propagator":{"kind":"remote","endpoint":"http://127.0.0.1:9"},"nsd_delta":2.0,"task":"Spleen"})"));
    EXPECT_EQ(c.mode, ExperimentConfig::Mode::clicks);
    EXPECT_EQ(c.clicks, 3u);
    EXPECT_EQ(c.propagator.kind, BackendChoice::Kind::remote);
    EXPECT_EQ(c.nsd_delta, 2.0);
    EXPECT_EQ(config_from_json(config_to_json(c)).propagator.endpoint, "http://127.0.0.1:9");

    EXPECT_THROW(config_from_json(json::parse(R"({"mode":"clicks","clicks":0})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"mode":"guess"})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"propagator":{"kind":"remote"}})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"clicks":"five"})")), format_error);
}

TEST(Manifest, ParseErrors)
{
    EXPECT_THROW(parse_manifest(json::object()), format_error);
    EXPECT_THROW(parse_manifest(json::parse(R"([{"case_id":"a","image_path":"x"}])")), format_error);
    EXPECT_THROW(parse_manifest(json::parse(R"([{"case_id":"a","image_path":"x","label_path":"y","axis":3}])")),
                 format_error);
    const auto m = parse_manifest(
        json::parse(R"([{"case_id":"a","image_path":"x.nii","label_path":"/abs/y.nii","modality_tag":"CT",
                         "window":{"mode":"hounsfield","center":40,"width":400}}])"),
        "/data");
    EXPECT_EQ(m[0].image_path, fs::path("/data/x.nii"));
    EXPECT_EQ(m[0].label_path, fs::path("/abs/y.nii"));
    EXPECT_EQ(m[0].window->mode, WindowSpec::Mode::hounsfield);
    EXPECT_EQ(manifest_to_json(m)[0]["window"]["center"], 40.0);
}

TEST(Baselines, ShippedFileParses)
{
    const Baselines b = load_baselines(fs::path(SLICEWISE_SOURCE_DIR) / "data" / "baselines.json");
    ASSERT_EQ(b.tables.size(), 2u);
    EXPECT_EQ(b.tables[0].columns.size(), 3u);
    EXPECT_EQ(b.tables[1].columns.size(), 8u);
    EXPECT_EQ(b.tables[0].baselines.size(), 4u);
    EXPECT_EQ(b.tables[1].reference_results.size(), 4u);
}

// Values recorded from the reference pipeline on the default phantom (seed 42).
TEST_F(HarnessTest, DefaultPhantomRegression)
{
    const std::vector<CaseManifestEntry> first{(*manifest_)[0]};
    const Report gt = run_experiment(first, gt_config());
    EXPECT_NEAR(gt.cases[0].metrics.dice, 0.9997497654050672, 1e-12);

    const Report one = run_experiment(first, click_config(1));
    const Report five = run_experiment(first, click_config(5));
    EXPECT_NEAR(one.cases[0].session_log.back().dice, 0.9810159055926116, 1e-12);
    EXPECT_NEAR(five.cases[0].session_log.back().dice, 0.986734693877551, 1e-12);
    EXPECT_EQ(five.cases[0].rounds_used, 5u);
    EXPECT_NEAR(five.cases[0].metrics.dice, 0.9989042982813136, 1e-12);
}
