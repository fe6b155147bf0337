#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semleak/similarity.hpp"
#include "semleak/suite.hpp"

namespace semleak {

// 1 when the concept is closer to the test generation, 0 when closer to the
// control generation, 0.5 when the two similarities are within tie_epsilon.
double leak_indicator(double sim_test, double sim_control, double tie_epsilon = 0.0);

struct LeakOutcome {
  const PairScore* pair = nullptr;
  double value = 0.5;
};

// Throws Error on empty input.
double leak_rate(std::span<const double> outcome_values);
double leak_rate(std::span<const LeakOutcome> outcomes);

// A pair already marked as a tie scores 0.5 whatever its sims.
double pair_outcome(const PairScore& pair, double tie_epsilon = 0.0);

// Outcomes for every non-excluded pair, in input order.
std::vector<LeakOutcome> leak_outcomes(std::span<const PairScore> pairs, double tie_epsilon = 0.0);

enum class BreakdownAxis { kOverall, kTemperature, kCategory };

std::string_view to_string(BreakdownAxis axis);
BreakdownAxis parse_breakdown_axis(std::string_view name);

struct LeakRateReport {
  std::string backend_id;
  std::string model_id;
  BreakdownAxis axis = BreakdownAxis::kOverall;
  std::string bucket;
  std::size_t n = 0;
  // Unset when every pair in the bucket was excluded.
  std::optional<double> leak_rate;
  // One-sided test of per-pair outcome values (x100) against 50.
  std::optional<double> t_statistic;
  std::optional<double> p_value;
  std::size_t flagged_count = 0;
  double mean_diff = 0.0;

  bool operator==(const LeakRateReport&) const = default;
};

nlohmann::json report_to_json(const LeakRateReport& report);
LeakRateReport report_from_json(const nlohmann::json& j);

// One report per (backend, model, bucket). Temperatures sort numerically,
// categories lexicographically. Throws Error for an instance_id missing from
// the suite.
std::vector<LeakRateReport> breakdown(std::span<const PairScore> pairs, const PromptSuite& suite,
                                      BreakdownAxis axis, double tie_epsilon = 0.0);

}  // namespace semleak
