#pragma once

#include <memory>
#include <string>

#include "semleak/embedding_client.hpp"
#include "semleak/similarity.hpp"

namespace semleak {

// Cosine between whole-text embeddings.
class SentenceCosineBackend : public SimilarityBackend {
 public:
  SentenceCosineBackend(SimilarityBackendConfig config, std::shared_ptr<EmbeddingClient> client,
                        std::shared_ptr<EmbeddingCache> cache);

  const std::string& id() const override { return config_.backend_id; }
  double similarity(std::string_view concept_text, std::string_view text,
                    std::string_view language) override;

 private:
  EmbeddingVector embedding(const std::string& model, std::string_view text);

  SimilarityBackendConfig config_;
  std::shared_ptr<EmbeddingClient> client_;
  std::shared_ptr<EmbeddingCache> cache_;
};

// BERT-score between the generation (candidate) and the concept (reference).
class TokenBertScoreBackend : public SimilarityBackend {
 public:
  TokenBertScoreBackend(SimilarityBackendConfig config, std::shared_ptr<EmbeddingClient> client,
                        std::shared_ptr<EmbeddingCache> cache);

  const std::string& id() const override { return config_.backend_id; }
  double similarity(std::string_view concept_text, std::string_view text,
                    std::string_view language) override;

 private:
  TokenEmbeddings tokens(const std::string& model, std::string_view text);

  SimilarityBackendConfig config_;
  std::shared_ptr<EmbeddingClient> client_;
  std::shared_ptr<EmbeddingCache> cache_;
};

// Builds the backend for `config`. HTTP kinds get an HttpEmbeddingClient and
// a cache rooted at config.cache_dir (memory-only when empty).
std::unique_ptr<SimilarityBackend> make_backend(const SimilarityBackendConfig& config);

}  // namespace semleak
