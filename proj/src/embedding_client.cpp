#include "semleak/embedding_client.hpp"

#include <fstream>
#include <thread>

#include "semleak/errors.hpp"
#include "semleak/http.hpp"
#include "semleak/text.hpp"

namespace semleak {

namespace {

EmbeddingVector vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw MalformedResponseError("embedding is not an array");
  std::vector<double> values;
  values.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw MalformedResponseError("embedding entry is not a number");
    values.push_back(x.get<double>());
  }
  try {
    return EmbeddingVector(std::move(values));
  } catch (const Error& e) {
    throw MalformedResponseError(e.what());
  }
}

}  // namespace

nlohmann::json token_embeddings_to_json(const TokenEmbeddings& t) {
  nlohmann::json vectors = nlohmann::json::array();
  for (const auto& v : t.vectors) {
    vectors.push_back(std::vector<double>(v.values().begin(), v.values().end()));
  }
  return {{"tokens", t.tokens}, {"vectors", vectors}};
}

TokenEmbeddings token_embeddings_from_json(const nlohmann::json& j) {
  TokenEmbeddings t;
  if (!j.contains("tokens") || !j.contains("vectors") || !j["tokens"].is_array() ||
      !j["vectors"].is_array()) {
    throw MalformedResponseError("token embeddings need 'tokens' and 'vectors' arrays");
  }
  for (const auto& tok : j["tokens"]) {
    if (!tok.is_string()) throw MalformedResponseError("token is not a string");
    t.tokens.push_back(tok.get<std::string>());
  }
  for (const auto& v : j["vectors"]) t.vectors.push_back(vector_from_json(v));
  try {
    t.validate();
  } catch (const Error& e) {
    throw MalformedResponseError(e.what());
  }
  return t;
}

HttpEmbeddingClient::HttpEmbeddingClient(const SimilarityBackendConfig& config)
    : config_(config) {
  http::parse_endpoint(config_.endpoint);
}

nlohmann::json HttpEmbeddingClient::post_with_retries(const std::string& path,
                                                      const nlohmann::json& body) {
  const auto endpoint = http::parse_endpoint(config_.endpoint);
  const auto headers = http::bearer_headers(config_.auth_token_env);
  std::string last_error;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry_base_delay * (1 << (attempt - 1)));
    http::Response response;
    try {
      response = http::post_json(endpoint, path, body, headers, config_.request_timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (response.status == 401 || response.status == 403) {
      throw AuthError("embedding endpoint rejected credentials");
    }
    if (http::is_retryable_status(response.status)) {
      last_error = "HTTP " + std::to_string(response.status);
      continue;
    }
    if (response.status != 200) {
      throw MalformedResponseError("HTTP " + std::to_string(response.status));
    }
    try {
      return nlohmann::json::parse(response.body);
    } catch (const nlohmann::json::parse_error&) {
      throw MalformedResponseError("embedding response is not JSON");
    }
  }
  throw TransportError("embedding request failed after retries: " + last_error);
}

std::vector<EmbeddingVector> HttpEmbeddingClient::embed(const std::string& model,
                                                        const std::vector<std::string>& texts) {
  const auto body = post_with_retries("/embeddings", {{"model", model}, {"input", texts}});
  if (!body.contains("data") || !body["data"].is_array() || body["data"].size() != texts.size()) {
    throw MalformedResponseError("embeddings response must hold one item per input");
  }
  std::vector<EmbeddingVector> out(texts.size(), EmbeddingVector({0.0}));
  std::vector<bool> filled(texts.size(), false);
  for (std::size_t k = 0; k < body["data"].size(); ++k) {
    const auto& item = body["data"][k];
    const std::size_t index = item.value("index", k);
    if (index >= texts.size() || filled[index]) {
      throw MalformedResponseError("embeddings response has a bad index");
    }
    out[index] = vector_from_json(item.at("embedding"));
    filled[index] = true;
  }
  return out;
}

TokenEmbeddings HttpEmbeddingClient::embed_tokens(const std::string& model,
                                                  const std::string& text) {
  return token_embeddings_from_json(
      post_with_retries("/token_embeddings", {{"model", model}, {"input", text}}));
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string EmbeddingCache::key(std::string_view model, std::string_view text) {
  std::string material(model);
  material.push_back('\0');
  material.append(text);
  return text::sha256_hex(material);
}

std::filesystem::path EmbeddingCache::entry_path(std::string_view kind,
                                                 const std::string& key) const {
  return dir_ / std::string(kind) / key.substr(0, 2) / (key + ".json");
}

std::optional<nlohmann::json> EmbeddingCache::load(std::string_view kind, const std::string& key) {
  const std::string memo_key = std::string(kind) + "/" + key;
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(memo_key); it != memory_.end()) return it->second;
  if (dir_.empty()) return std::nullopt;
  std::ifstream in(entry_path(kind, key));
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  memory_[memo_key] = j;
  return j;
}

void EmbeddingCache::store(std::string_view kind, const std::string& key,
                           const nlohmann::json& value) {
  const std::string memo_key = std::string(kind) + "/" + key;
  std::lock_guard lock(mu_);
  memory_[memo_key] = value;
  if (dir_.empty()) return;
  const auto path = entry_path(kind, key);
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << value.dump();
  }
  std::filesystem::rename(tmp, path);
}

std::optional<EmbeddingVector> EmbeddingCache::get_sentence(std::string_view model,
                                                            std::string_view text) {
  auto j = load("sentence", key(model, text));
  if (!j) return std::nullopt;
  return vector_from_json(*j);
}

void EmbeddingCache::put_sentence(std::string_view model, std::string_view text,
                                  const EmbeddingVector& v) {
  store("sentence", key(model, text), std::vector<double>(v.values().begin(), v.values().end()));
}

std::optional<TokenEmbeddings> EmbeddingCache::get_tokens(std::string_view model,
                                                          std::string_view text) {
  auto j = load("tokens", key(model, text));
  if (!j) return std::nullopt;
  return token_embeddings_from_json(*j);
}

void EmbeddingCache::put_tokens(std::string_view model, std::string_view text,
                                const TokenEmbeddings& t) {
  store("tokens", key(model, text), token_embeddings_to_json(t));
}

}  // namespace semleak
