#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semleak/suite.hpp"

namespace semleak {

enum class Variant { kTest, kControl };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);

inline constexpr std::string_view kCompletionPrefix = "Complete the sentence: ";

struct ModelEndpointConfig {
  std::string model_id;
  // Groups models for the per-family maximum in tables; model_id when empty.
  std::string family;
  std::string base_url;
  std::string auth_token_env;
  bool use_completion_prefix = false;
  int max_tokens_completion = 100;
  int max_tokens_open = 300;
  std::chrono::milliseconds request_timeout{60000};
  int max_parallel_requests = 4;
  int max_attempts = 3;
  std::chrono::milliseconds retry_base_delay{500};

  // Throws ConfigError.
  void validate() const;
  static ModelEndpointConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RunPlan {
  std::vector<double> temperatures{0.0, 0.5, 1.0, 1.5};
  int samples_per_cell = 10;

  void validate() const;
  nlohmann::json to_json() const;
};

struct CellCoordinates {
  std::string instance_id;
  Variant variant = Variant::kTest;
  std::string model_id;
  double temperature = 0.0;
  int sample_index = 0;

  bool operator==(const CellCoordinates&) const = default;
};

struct GenerationRecord {
  CellCoordinates cell;
  std::string raw_text;
  std::optional<std::string> processed_text;
  std::string created_at;

  bool operator==(const GenerationRecord&) const = default;
};

nlohmann::json record_to_json(const GenerationRecord& record);
GenerationRecord record_from_json(const nlohmann::json& j);

// Deterministic and injective over the five coordinates.
std::string cache_key(const CellCoordinates& cell);

std::string build_prompt(const PromptInstance& instance, Variant variant,
                         const ModelEndpointConfig& config);

// Append-only, line-delimited record store. An empty path keeps records in
// memory only. Writes are serialized; reads take a snapshot.
class RunStore {
 public:
  RunStore() = default;
  explicit RunStore(std::filesystem::path path);

  bool contains(const CellCoordinates& cell) const;
  std::optional<GenerationRecord> find(const CellCoordinates& cell) const;
  // Throws Error when the cell is already present.
  void append(const GenerationRecord& record);
  std::vector<GenerationRecord> records() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<GenerationRecord> records_;
  std::map<std::string, std::size_t> index_;
};

std::filesystem::path run_store_path(const std::filesystem::path& dir, std::string_view suite_name,
                                     std::string_view model_id);

struct CompletionRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 100;
};

nlohmann::json completion_request_body(const CompletionRequest& request);

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  // Throws TransportError (retryable), AuthError, MalformedResponseError.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// Speaks POST {base_url}/chat/completions.
class HttpCompletionClient : public CompletionClient {
 public:
  explicit HttpCompletionClient(ModelEndpointConfig config);
  std::string complete(const CompletionRequest& request) override;

 private:
  ModelEndpointConfig config_;
};

struct CellFailure {
  CellCoordinates cell;
  std::string reason;
};

struct CollectionSummary {
  std::size_t fetched = 0;
  std::size_t cached = 0;
  std::vector<CellFailure> failures;
};

// Fills `store` with one record per (instance, variant, temperature, sample)
// cell. Cached cells are skipped; failing cells are listed in the summary and
// not stored. An AuthError aborts the whole collection.
CollectionSummary collect_generations(const PromptSuite& suite, const ModelEndpointConfig& config,
                                      const RunPlan& plan, RunStore& store,
                                      CompletionClient& client);

}  // namespace semleak
