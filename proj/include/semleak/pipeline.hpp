#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semleak/generation.hpp"
#include "semleak/postprocess.hpp"
#include "semleak/report.hpp"
#include "semleak/similarity.hpp"
#include "semleak/suite.hpp"

namespace semleak {

struct ScoringOptions {
  double tie_epsilon = 0.0;
  int parallelism = 4;
};

struct ScoreSummary {
  std::vector<PairScore> pairs;
  // Test/control cells with no stored record (failed collection).
  std::size_t missing_pairs = 0;
};

// Postprocesses the stored generations of `model_id` and scores every
// complete (instance, temperature, sample) pair with `backend`.
ScoreSummary score_store(const PromptSuite& suite, const RunStore& store,
                         const std::string& model_id, const RunPlan& plan,
                         const PostprocessPolicy& policy, SimilarityBackend& backend,
                         const ScoringOptions& options);

struct BundleOptions {
  double tie_epsilon = 0.0;
  double epsilon_slack = 0.03;
  int histogram_bins = 20;
  std::uint64_t seed = 0;
};

// Overall, per-temperature and per-category reports plus diff histograms.
ReportBundle build_bundle(const PromptSuite& suite, std::span<const PairScore> pairs,
                          const nlohmann::json& metadata, const BundleOptions& options);

}  // namespace semleak
