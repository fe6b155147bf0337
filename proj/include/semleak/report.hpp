#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semleak/metric.hpp"
#include "semleak/similarity.hpp"

namespace semleak {

inline constexpr std::string_view kCodeVersion = "0.1.0";

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  double positive_share = 0.0;
  double negative_share = 0.0;
  double zero_share = 0.0;

  bool operator==(const Histogram&) const = default;
};

// Equal-width bins over [min, max]; the last bin is closed. Throws Error on
// empty input or bins < 1.
Histogram emit_diff_distribution(std::span<const double> diffs, int bins);

nlohmann::json histogram_to_json(const Histogram& h);
Histogram histogram_from_json(const nlohmann::json& j);
// "lower,upper,count" rows after a header.
std::string histogram_csv(const Histogram& h);

struct NamedHistogram {
  std::string backend_id;
  std::string model_id;
  Histogram histogram;
};

struct ReportBundle {
  // Suite, models, backends, plan, policy, tie_epsilon, epsilon_slack,
  // bertscore component, routing, label encoding, seed, code version.
  nlohmann::json metadata = nlohmann::json::object();
  // model_id -> family, used for bolding the per-family maximum.
  std::map<std::string, std::string> model_families;
  std::vector<LeakRateReport> reports;
  std::vector<PairScore> pairs;
  std::vector<NamedHistogram> histograms;
  nlohmann::json stats = nlohmann::json::object();

  nlohmann::json to_json() const;
  static ReportBundle from_json(const nlohmann::json& j);
};

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& path);
ReportBundle read_bundle(const std::filesystem::path& path);

// Half-to-even at one decimal; decimal ties are detected within 1e-9.
std::string format_rate(double rate);

struct RenderedTable {
  std::string text;
  std::string csv;
};

// Overall reports only: one row per model, one column per backend. In the
// text form the maximum per (family, backend) is wrapped in ** when the
// family has more than one model. Throws Error when there is nothing to
// render.
RenderedTable render_leak_table(const ReportBundle& bundle);

// Every report as delimited rows.
std::string reports_csv(std::span<const LeakRateReport> reports);

}  // namespace semleak
