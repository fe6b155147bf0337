#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "semleak/errors.hpp"
#include "semleak/pipeline.hpp"
#include "semleak/report.hpp"

using namespace semleak;
namespace fs = std::filesystem;

namespace {

LeakRateReport overall(std::string model, std::string backend, std::optional<double> rate) {
  LeakRateReport r;
  r.model_id = std::move(model);
  r.backend_id = std::move(backend);
  r.bucket = "all";
  r.leak_rate = rate;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0, pos;
  while ((pos = s.find('\n', start)) != std::string::npos) {
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

TEST(FormatRate, HalfToEven) {
  EXPECT_EQ(format_rate(76.9), "76.9");
  EXPECT_EQ(format_rate(85.0), "85.0");
  EXPECT_EQ(format_rate(62.5), "62.5");
  EXPECT_EQ(format_rate(70.45), "70.4");
  EXPECT_EQ(format_rate(70.55), "70.6");
  EXPECT_EQ(format_rate(70.46), "70.5");
  EXPECT_EQ(format_rate(100.0), "100.0");
  EXPECT_EQ(format_rate(0.0), "0.0");
  EXPECT_EQ(format_rate(200.0 / 3.0), "66.7");
}

TEST(Table, PaperRow) {
  ReportBundle b;
  b.metadata["backend_ids"] = {"BS", "SB", "OAI"};
  b.reports = {overall("GPT4o", "BS", 76.9), overall("GPT4o", "SB", 70.4),
               overall("GPT4o", "OAI", 85.0)};
  const auto t = render_leak_table(b);
  const auto rows = lines(t.text);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "Model | BS | SB | OAI");
  EXPECT_EQ(rows[1], "GPT4o | 76.9 | 70.4 | 85.0");
  EXPECT_EQ(t.csv, "model,BS,SB,OAI\nGPT4o,76.9,70.4,85.0\n");
}

TEST(Table, SingleCellAndMissing) {
  ReportBundle b;
  b.reports = {overall("m", "BS", 55.0)};
  EXPECT_EQ(render_leak_table(b).text, "Model | BS\nm | 55.0\n");
  b.reports.push_back(overall("n", "SB", std::nullopt));
  EXPECT_EQ(render_leak_table(b).text, "Model | BS | SB\nm | 55.0 | -\nn | - | n/a\n");
  EXPECT_THROW(render_leak_table(ReportBundle{}), Error);
}

TEST(Table, FamilyMaximumBolded) {
  ReportBundle b;
  b.reports = {overall("A", "BS", 60.0), overall("B", "BS", 70.0), overall("C", "BS", 90.0)};
  b.model_families = {{"A", "fam"}, {"B", "fam"}, {"C", "solo"}};
  const auto rows = lines(render_leak_table(b).text);
  EXPECT_EQ(rows[1], "A | 60.0");
  EXPECT_EQ(rows[2], "B | **70.0**");
  EXPECT_EQ(rows[3], "C | 90.0");
}

TEST(Table, FixtureBundleGptFamily) {
  const auto b = read_bundle(SEMLEAK_SOURCE_DIR "/tests/fixtures/bundle.json");
  const auto rows = lines(render_leak_table(b).text);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1], "GPT3.5 | 74.3 | 68.6 | **85.5**");
  EXPECT_EQ(rows[2], "GPT4 | 70.8 | 61.2 | 84.4");
  EXPECT_EQ(rows[3], "GPT4o | **76.9** | **70.4** | 85.0");
}

TEST(Histogram, Shares) {
  const std::vector<double> d{-0.1, 0.0, 0.1, 0.2};
  const auto h = emit_diff_distribution(d, 2);
  ASSERT_EQ(h.edges.size(), 3u);
  EXPECT_DOUBLE_EQ(h.edges[0], -0.1);
  EXPECT_NEAR(h.edges[1], 0.05, 1e-12);
  EXPECT_DOUBLE_EQ(h.edges[2], 0.2);
  // Equal-width bins put 0.0 below the 0.05 edge and 0.1 above it.
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(h.positive_share, 0.5);
  EXPECT_EQ(h.negative_share, 0.25);
  EXPECT_EQ(h.zero_share, 0.25);
}

TEST(Histogram, Properties) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> d(999);
  for (auto& x : d) x = g(rng);
  const auto h = emit_diff_distribution(d, 17);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, d.size());

  const std::vector<double> pos{0.1, 0.2, 0.3};
  EXPECT_EQ(emit_diff_distribution(pos, 3).positive_share, 1.0);
  const std::vector<double> sym{-0.3, -0.1, 0.1, 0.3};
  const auto s = emit_diff_distribution(sym, 4);
  EXPECT_EQ(s.positive_share, s.negative_share);
  const std::vector<double> same{0.2, 0.2};
  EXPECT_EQ(emit_diff_distribution(same, 3).counts.size(), 3u);
  EXPECT_THROW(emit_diff_distribution(std::vector<double>{}, 2), Error);
  EXPECT_THROW(emit_diff_distribution(pos, 0), Error);
  EXPECT_EQ(histogram_csv(emit_diff_distribution(pos, 1)), "lower,upper,count\n0.1,0.3,3\n");
}

TEST(Bundle, RoundTripAndDeterministicRendering) {
  PromptSuite suite;
  for (int i = 0; i < 4; ++i) {
    PromptInstance p;
    p.id = "i" + std::to_string(i);
    p.category = i % 2 ? "animal" : "color";
    suite.instances.push_back(p);
  }
  std::vector<PairScore> pairs;
  for (int i = 0; i < 16; ++i) {
    PairScore p;
    p.instance_id = "i" + std::to_string(i % 4);
    p.backend_id = "BS";
    p.model_id = "m";
    p.temperature = i < 8 ? 0.0 : 1.0;
    p.sample_index = i;
    p.sim_test = 0.1 * (i % 5);
    p.sim_control = 0.15;
    p.diff = p.sim_test - p.sim_control;
    pairs.push_back(p);
  }
  BundleOptions options;
  options.histogram_bins = 4;
  const auto bundle = build_bundle(suite, pairs, {{"suite", "t"}}, options);
  EXPECT_EQ(bundle.reports.size(), 1u + 2u + 2u);
  ASSERT_EQ(bundle.histograms.size(), 1u);
  EXPECT_EQ(bundle.metadata["tie_epsilon"], 0.0);
  EXPECT_EQ(bundle.metadata["epsilon_slack"], 0.03);

  const auto path = fs::temp_directory_path() / ("semleak-bundle-" + std::to_string(std::random_device{}()) + ".json");
  write_bundle(bundle, path);
  const auto back = read_bundle(path);
  fs::remove(path);
  EXPECT_EQ(back.to_json(), bundle.to_json());
  EXPECT_EQ(render_leak_table(back).text, render_leak_table(bundle).text);
  EXPECT_EQ(reports_csv(back.reports), reports_csv(bundle.reports));
}
