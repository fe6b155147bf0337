#pragma once

#include <chrono>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace semleak {

// Non-empty vector of finite reals.
class EmbeddingVector {
 public:
  // Throws Error when empty or non-finite.
  explicit EmbeddingVector(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t dimension() const { return values_.size(); }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

struct TokenEmbeddings {
  std::vector<std::string> tokens;
  std::vector<EmbeddingVector> vectors;

  // Throws Error unless tokens and vectors line up, are non-empty and share
  // one dimension.
  void validate() const;
  std::size_t dimension() const { return vectors.empty() ? 0 : vectors.front().dimension(); }
};

// Throws DimensionMismatchError or ZeroNormError.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Greedy max-matching of token embeddings, no IDF weighting, no rescaling.
// Precision averages over candidate tokens, recall over reference tokens.
BertScore bertscore(const TokenEmbeddings& candidate, const TokenEmbeddings& reference);

enum class BackendKind { kSentenceCosine, kTokenBertScore, kMock };
enum class BertScoreComponent { kF1, kPrecision, kRecall };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);
std::string_view to_string(BertScoreComponent component);
BertScoreComponent parse_bertscore_component(std::string_view name);

struct SimilarityBackendConfig {
  std::string backend_id;
  BackendKind kind = BackendKind::kSentenceCosine;
  std::string endpoint;
  std::string embed_model;
  std::map<std::string, std::string, std::less<>> language_routing;
  std::string auth_token_env;
  BertScoreComponent bertscore_component = BertScoreComponent::kF1;
  std::string cache_dir;
  int max_parallel_requests = 4;
  std::chrono::milliseconds request_timeout{60000};
  int max_attempts = 3;
  std::chrono::milliseconds retry_base_delay{500};
  // Only read for kind == kMock.
  nlohmann::json mock;

  void validate() const;
  static SimilarityBackendConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Override for the exact language tag if configured, otherwise the default
// model. Crosslingual tags ("zh-en") only match their own override.
std::string route_model(const SimilarityBackendConfig& backend, std::string_view language);

struct PairScore {
  std::string instance_id;
  std::string backend_id;
  std::string model_id;
  double temperature = 0.0;
  int sample_index = 0;
  double sim_test = 0.0;
  double sim_control = 0.0;
  double diff = 0.0;
  bool tie = false;
  // Either generation was empty; similarity set to 0 for that side.
  bool flagged = false;
  // The backend failed; sims are meaningless.
  bool unscored = false;
  std::string note;

  bool excluded() const { return flagged || unscored; }
  bool operator==(const PairScore&) const = default;
};

nlohmann::json pair_to_json(const PairScore& pair);
PairScore pair_from_json(const nlohmann::json& j);

class SimilarityBackend {
 public:
  virtual ~SimilarityBackend() = default;
  virtual const std::string& id() const = 0;
  // Similarity between a concept and a non-empty text. May throw on backend
  // failure.
  virtual double similarity(std::string_view concept_text, std::string_view text,
                            std::string_view language) = 0;
};

// Scores both generations against `concept_eval` with the same backend.
// Empty generations score 0 and flag the pair; backend failures mark it
// unscored. Coordinates are left for the caller to fill in.
PairScore score_pair(std::string_view concept_eval, std::string_view test_gen,
                     std::string_view control_gen, SimilarityBackend& backend,
                     std::string_view language, double tie_epsilon = 0.0);

}  // namespace semleak
