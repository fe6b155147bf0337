#include "semleak/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "semleak/errors.hpp"
#include "semleak/stats.hpp"

namespace semleak {

namespace {

struct PairTask {
  const PromptInstance* instance = nullptr;
  GenerationRecord test;
  GenerationRecord control;
};

}  // namespace

ScoreSummary score_store(const PromptSuite& suite, const RunStore& store,
                         const std::string& model_id, const RunPlan& plan,
                         const PostprocessPolicy& policy, SimilarityBackend& backend,
                         const ScoringOptions& options) {
  ScoreSummary summary;
  std::vector<PairTask> tasks;
  for (const auto& instance : suite.instances) {
    for (double t : plan.temperatures) {
      for (int s = 0; s < plan.samples_per_cell; ++s) {
        CellCoordinates cell{instance.id, Variant::kTest, model_id, t, s};
        auto test = store.find(cell);
        cell.variant = Variant::kControl;
        auto control = store.find(cell);
        if (!test || !control) {
          ++summary.missing_pairs;
          continue;
        }
        tasks.push_back({&instance, std::move(*test), std::move(*control)});
      }
    }
  }

  summary.pairs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < tasks.size(); i = next++) {
        const auto& task = tasks[i];
        const auto test = apply_policy(task.test, *task.instance, policy);
        const auto control = apply_policy(task.control, *task.instance, policy);
        PairScore p = score_pair(task.instance->concept_eval, test.processed_text.value_or(""),
                                 control.processed_text.value_or(""), backend,
                                 task.instance->language, options.tie_epsilon);
        p.instance_id = task.instance->id;
        p.backend_id = backend.id();
        p.model_id = model_id;
        p.temperature = task.test.cell.temperature;
        p.sample_index = task.test.cell.sample_index;
        summary.pairs[i] = std::move(p);
      }
    } catch (...) {
      std::lock_guard lock(fatal_mu);
      if (!fatal) fatal = std::current_exception();
      next = tasks.size();
    }
  };
  const int n_threads =
      std::clamp<int>(options.parallelism, 1, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
  std::vector<std::thread> threads;
  for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

ReportBundle build_bundle(const PromptSuite& suite, std::span<const PairScore> pairs,
                          const nlohmann::json& metadata, const BundleOptions& options) {
  ReportBundle bundle;
  bundle.metadata = metadata;
  bundle.metadata["tie_epsilon"] = options.tie_epsilon;
  bundle.metadata["epsilon_slack"] = options.epsilon_slack;
  bundle.metadata["seed"] = options.seed;
  bundle.metadata["code_version"] = std::string(kCodeVersion);
  bundle.metadata["label_encoding"] = {{"tau", {{"control", -1}, {"neither", 0}, {"test", 1}}},
                                       {"metric", {{"control", 0}, {"neither", 0.5}, {"test", 1}}}};
  bundle.pairs.assign(pairs.begin(), pairs.end());

  for (auto axis : {BreakdownAxis::kOverall, BreakdownAxis::kTemperature, BreakdownAxis::kCategory}) {
    auto r = breakdown(pairs, suite, axis, options.tie_epsilon);
    bundle.reports.insert(bundle.reports.end(), r.begin(), r.end());
  }

  std::map<std::pair<std::string, std::string>, std::vector<double>> diffs;
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::size_t>> labels;
  for (const auto& p : pairs) {
    auto key = std::make_pair(p.backend_id, p.model_id);
    auto& d = diffs[key];
    if (p.excluded()) continue;
    d.push_back(p.diff);
    ++labels[key][std::string(to_string(diff_to_label(p.diff, options.epsilon_slack)))];
  }
  nlohmann::json label_stats = nlohmann::json::array();
  for (const auto& [key, values] : diffs) {
    if (values.empty()) continue;
    bundle.histograms.push_back(
        {key.first, key.second, emit_diff_distribution(values, options.histogram_bins)});
    nlohmann::json counts = nlohmann::json::object();
    for (auto name : {"test", "control", "neither"}) {
      auto it = labels[key].find(name);
      counts[name] = it == labels[key].end() ? 0 : it->second;
    }
    label_stats.push_back({{"backend_id", key.first}, {"model_id", key.second}, {"labels", counts}});
  }
  bundle.stats["slack_labels"] = label_stats;
  return bundle;
}

}  // namespace semleak
