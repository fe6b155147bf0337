#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semleak/similarity.hpp"

namespace semleak {

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  // One vector per input text.
  virtual std::vector<EmbeddingVector> embed(const std::string& model,
                                             const std::vector<std::string>& texts) = 0;
  virtual TokenEmbeddings embed_tokens(const std::string& model, const std::string& text) = 0;
};

// POST {endpoint}/embeddings and POST {endpoint}/token_embeddings, with
// retries on transport errors and retryable statuses.
class HttpEmbeddingClient : public EmbeddingClient {
 public:
  explicit HttpEmbeddingClient(const SimilarityBackendConfig& config);

  std::vector<EmbeddingVector> embed(const std::string& model,
                                     const std::vector<std::string>& texts) override;
  TokenEmbeddings embed_tokens(const std::string& model, const std::string& text) override;

 private:
  nlohmann::json post_with_retries(const std::string& path, const nlohmann::json& body);

  SimilarityBackendConfig config_;
};

// Content-addressed store keyed by (embed_model, text). With a directory,
// entries live at <dir>/<kind>/<hh>/<sha256>.json; without one the cache is
// memory-only. Thread-safe.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path dir);

  std::optional<EmbeddingVector> get_sentence(std::string_view model, std::string_view text);
  void put_sentence(std::string_view model, std::string_view text, const EmbeddingVector& v);
  std::optional<TokenEmbeddings> get_tokens(std::string_view model, std::string_view text);
  void put_tokens(std::string_view model, std::string_view text, const TokenEmbeddings& t);

  static std::string key(std::string_view model, std::string_view text);

 private:
  std::filesystem::path entry_path(std::string_view kind, const std::string& key) const;
  std::optional<nlohmann::json> load(std::string_view kind, const std::string& key);
  void store(std::string_view kind, const std::string& key, const nlohmann::json& value);

  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, nlohmann::json> memory_;
};

nlohmann::json token_embeddings_to_json(const TokenEmbeddings& t);
TokenEmbeddings token_embeddings_from_json(const nlohmann::json& j);

}  // namespace semleak
