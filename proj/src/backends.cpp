#include "semleak/backends.hpp"

#include "semleak/errors.hpp"
#include "semleak/mockbench.hpp"

namespace semleak {

SentenceCosineBackend::SentenceCosineBackend(SimilarityBackendConfig config,
                                             std::shared_ptr<EmbeddingClient> client,
                                             std::shared_ptr<EmbeddingCache> cache)
    : config_(std::move(config)), client_(std::move(client)), cache_(std::move(cache)) {}

EmbeddingVector SentenceCosineBackend::embedding(const std::string& model, std::string_view text) {
  if (auto hit = cache_->get_sentence(model, text)) return *hit;
  auto vectors = client_->embed(model, {std::string(text)});
  cache_->put_sentence(model, text, vectors.front());
  return vectors.front();
}

double SentenceCosineBackend::similarity(std::string_view concept_text, std::string_view text,
                                         std::string_view language) {
  const std::string model = route_model(config_, language);
  return cosine(embedding(model, concept_text), embedding(model, text));
}

TokenBertScoreBackend::TokenBertScoreBackend(SimilarityBackendConfig config,
                                             std::shared_ptr<EmbeddingClient> client,
                                             std::shared_ptr<EmbeddingCache> cache)
    : config_(std::move(config)), client_(std::move(client)), cache_(std::move(cache)) {}

TokenEmbeddings TokenBertScoreBackend::tokens(const std::string& model, std::string_view text) {
  if (auto hit = cache_->get_tokens(model, text)) return *hit;
  auto t = client_->embed_tokens(model, std::string(text));
  cache_->put_tokens(model, text, t);
  return t;
}

double TokenBertScoreBackend::similarity(std::string_view concept_text, std::string_view text,
                                         std::string_view language) {
  const std::string model = route_model(config_, language);
  const BertScore s = bertscore(tokens(model, text), tokens(model, concept_text));
  switch (config_.bertscore_component) {
    case BertScoreComponent::kPrecision:
      return s.precision;
    case BertScoreComponent::kRecall:
      return s.recall;
    case BertScoreComponent::kF1:
      break;
  }
  return s.f1;
}

std::unique_ptr<SimilarityBackend> make_backend(const SimilarityBackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::kMock) {
    return std::make_unique<MockSimilarityBackend>(
        config.backend_id, config.mock.is_null() ? MockLeakConfig{}
                                                 : MockLeakConfig::from_json(config.mock));
  }
  auto client = std::make_shared<HttpEmbeddingClient>(config);
  auto cache = config.cache_dir.empty() ? std::make_shared<EmbeddingCache>()
                                        : std::make_shared<EmbeddingCache>(config.cache_dir);
  if (config.kind == BackendKind::kTokenBertScore) {
    return std::make_unique<TokenBertScoreBackend>(config, client, cache);
  }
  return std::make_unique<SentenceCosineBackend>(config, client, cache);
}

}  // namespace semleak
