#include "semleak/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <unordered_map>

#include "semleak/errors.hpp"
#include "semleak/stats.hpp"
#include "semleak/text.hpp"

namespace semleak {

double leak_indicator(double sim_test, double sim_control, double tie_epsilon) {
  const double diff = sim_test - sim_control;
  if (std::abs(diff) <= tie_epsilon) return 0.5;
  return diff > 0.0 ? 1.0 : 0.0;
}

double leak_rate(std::span<const double> outcome_values) {
  if (outcome_values.empty()) throw Error("leak rate of an empty outcome list");
  const auto n = static_cast<unsigned __int128>(outcome_values.size());
  unsigned __int128 halves = 0;
  for (double v : outcome_values) {
    if (v == 0.0) continue;
    if (v == 0.5) halves += 1;
    else if (v == 1.0) halves += 2;
    else {
      const double sum = std::accumulate(outcome_values.begin(), outcome_values.end(), 0.0);
      return 100.0 * sum / static_cast<double>(outcome_values.size());
    }
  }
  // 50 * halves / n rounded half-to-even onto a 2^-40 grid; 100 - x stays exact there.
  constexpr int kGridBits = 40;
  const unsigned __int128 num = halves * 50u << kGridBits;
  unsigned __int128 q = num / n;
  const unsigned __int128 rem = num % n;
  if (2 * rem > n || (2 * rem == n && (q & 1u))) ++q;
  return std::ldexp(static_cast<double>(static_cast<std::uint64_t>(q)), -kGridBits);
}

double leak_rate(std::span<const LeakOutcome> outcomes) {
  std::vector<double> values;
  values.reserve(outcomes.size());
  for (const auto& o : outcomes) values.push_back(o.value);
  return leak_rate(values);
}

double pair_outcome(const PairScore& pair, double tie_epsilon) {
  return pair.tie ? 0.5 : leak_indicator(pair.sim_test, pair.sim_control, tie_epsilon);
}

std::vector<LeakOutcome> leak_outcomes(std::span<const PairScore> pairs, double tie_epsilon) {
  std::vector<LeakOutcome> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.excluded()) continue;
    out.push_back({&p, pair_outcome(p, tie_epsilon)});
  }
  return out;
}

std::string_view to_string(BreakdownAxis axis) {
  switch (axis) {
    case BreakdownAxis::kOverall:
      return "overall";
    case BreakdownAxis::kTemperature:
      return "temperature";
    case BreakdownAxis::kCategory:
      return "category";
  }
  return "overall";
}

BreakdownAxis parse_breakdown_axis(std::string_view name) {
  if (name == "overall") return BreakdownAxis::kOverall;
  if (name == "temperature") return BreakdownAxis::kTemperature;
  if (name == "category") return BreakdownAxis::kCategory;
  throw Error("unknown breakdown axis '" + std::string(name) + "'");
}

nlohmann::json report_to_json(const LeakRateReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"backend_id", r.backend_id},
          {"model_id", r.model_id},
          {"axis", std::string(to_string(r.axis))},
          {"bucket", r.bucket},
          {"n", r.n},
          {"leak_rate", opt(r.leak_rate)},
          {"t_statistic", opt(r.t_statistic)},
          {"p_value", opt(r.p_value)},
          {"flagged_count", r.flagged_count},
          {"mean_diff", r.mean_diff}};
}

LeakRateReport report_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  LeakRateReport r;
  try {
    r.backend_id = j.at("backend_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.axis = parse_breakdown_axis(j.at("axis").get<std::string>());
    r.bucket = j.at("bucket").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.leak_rate = opt("leak_rate");
    r.t_statistic = opt("t_statistic");
    r.p_value = opt("p_value");
    r.flagged_count = j.value("flagged_count", std::size_t{0});
    r.mean_diff = j.value("mean_diff", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return r;
}

namespace {

struct BucketKey {
  std::string backend_id;
  std::string model_id;
  // Numeric for temperatures so 10 sorts after 1.5.
  double order = 0.0;
  std::string bucket;

  auto operator<=>(const BucketKey&) const = default;
};

LeakRateReport summarize(const BucketKey& key, BreakdownAxis axis,
                         const std::vector<const PairScore*>& members, double tie_epsilon) {
  LeakRateReport r;
  r.backend_id = key.backend_id;
  r.model_id = key.model_id;
  r.axis = axis;
  r.bucket = key.bucket;
  std::vector<double> values;
  double diff_sum = 0.0;
  for (const PairScore* p : members) {
    if (p->excluded()) {
      ++r.flagged_count;
      continue;
    }
    values.push_back(pair_outcome(*p, tie_epsilon));
    diff_sum += p->diff;
  }
  r.n = values.size();
  if (values.empty()) return r;
  r.leak_rate = leak_rate(values);
  r.mean_diff = diff_sum / static_cast<double>(values.size());
  for (double& v : values) v *= 100.0;
  try {
    const auto t = t_test_one_sample_greater(values, 50.0);
    r.t_statistic = t.t_statistic;
    r.p_value = t.p_value;
  } catch (const Error&) {
    // n < 2 or zero variance: no p-value.
  }
  return r;
}

}  // namespace

std::vector<LeakRateReport> breakdown(std::span<const PairScore> pairs, const PromptSuite& suite,
                                      BreakdownAxis axis, double tie_epsilon) {
  std::unordered_map<std::string_view, const PromptInstance*> by_id;
  for (const auto& instance : suite.instances) by_id.emplace(instance.id, &instance);

  std::map<BucketKey, std::vector<const PairScore*>> buckets;
  for (const auto& p : pairs) {
    auto it = by_id.find(p.instance_id);
    if (it == by_id.end()) throw Error("pair refers to unknown instance '" + p.instance_id + "'");
    BucketKey key{p.backend_id, p.model_id, 0.0, "all"};
    if (axis == BreakdownAxis::kTemperature) {
      key.order = p.temperature;
      key.bucket = text::format_number(p.temperature);
    } else if (axis == BreakdownAxis::kCategory) {
      key.bucket = it->second->category;
    }
    buckets[key].push_back(&p);
  }

  std::vector<LeakRateReport> reports;
  reports.reserve(buckets.size());
  for (const auto& [key, members] : buckets) {
    reports.push_back(summarize(key, axis, members, tie_epsilon));
  }
  return reports;
}

}  // namespace semleak
