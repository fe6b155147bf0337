#include "semleak/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "semleak/errors.hpp"
#include "semleak/text.hpp"

namespace semleak {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error("embedding vector must be non-empty");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error("embedding vector has a non-finite entry");
  }
}

void TokenEmbeddings::validate() const {
  if (tokens.empty() || vectors.empty()) throw Error("token embeddings must be non-empty");
  if (tokens.size() != vectors.size()) {
    throw Error("token embeddings: " + std::to_string(tokens.size()) + " tokens but " +
                std::to_string(vectors.size()) + " vectors");
  }
  for (const auto& v : vectors) {
    if (v.dimension() != vectors.front().dimension()) {
      throw DimensionMismatchError("token embeddings have mixed dimensions");
    }
  }
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dimension() != v.dimension()) {
    throw DimensionMismatchError("cosine: dimensions " + std::to_string(u.dimension()) + " and " +
                                 std::to_string(v.dimension()));
  }
  const auto a = u.values();
  const auto b = v.values();
  double dot = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ZeroNormError("cosine of a zero vector");
  // sqrt(aa * bb) rather than sqrt(aa) * sqrt(bb): self-similarity comes out as exactly 1.
  return std::clamp(dot / std::sqrt(aa * bb), -1.0, 1.0);
}

BertScore bertscore(const TokenEmbeddings& candidate, const TokenEmbeddings& reference) {
  candidate.validate();
  reference.validate();
  if (candidate.dimension() != reference.dimension()) {
    throw DimensionMismatchError("bertscore: candidate and reference dimensions differ");
  }
  const std::size_t nc = candidate.vectors.size();
  const std::size_t nr = reference.vectors.size();
  std::vector<double> sim(nc * nr);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      sim[i * nr + j] = cosine(candidate.vectors[i], reference.vectors[j]);
    }
  }
  double precision = 0.0;
  for (std::size_t i = 0; i < nc; ++i) {
    precision += *std::max_element(sim.begin() + i * nr, sim.begin() + (i + 1) * nr);
  }
  precision /= static_cast<double>(nc);
  double recall = 0.0;
  for (std::size_t j = 0; j < nr; ++j) {
    double best = sim[j];
    for (std::size_t i = 1; i < nc; ++i) best = std::max(best, sim[i * nr + j]);
    recall += best;
  }
  recall /= static_cast<double>(nr);
  const double denom = precision + recall;
  const double f1 = denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
  return {precision, recall, f1};
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kSentenceCosine:
      return "sentence-cosine";
    case BackendKind::kTokenBertScore:
      return "token-bertscore";
    case BackendKind::kMock:
      return "mock";
  }
  return "sentence-cosine";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "sentence-cosine") return BackendKind::kSentenceCosine;
  if (name == "token-bertscore") return BackendKind::kTokenBertScore;
  if (name == "mock") return BackendKind::kMock;
  throw ConfigError("unknown backend kind '" + std::string(name) + "'");
}

std::string_view to_string(BertScoreComponent component) {
  switch (component) {
    case BertScoreComponent::kF1:
      return "f1";
    case BertScoreComponent::kPrecision:
      return "precision";
    case BertScoreComponent::kRecall:
      return "recall";
  }
  return "f1";
}

BertScoreComponent parse_bertscore_component(std::string_view name) {
  if (name == "f1") return BertScoreComponent::kF1;
  if (name == "precision") return BertScoreComponent::kPrecision;
  if (name == "recall") return BertScoreComponent::kRecall;
  throw ConfigError("unknown bertscore component '" + std::string(name) + "'");
}

void SimilarityBackendConfig::validate() const {
  if (backend_id.empty()) throw ConfigError("backend_id must be non-empty");
  if (kind != BackendKind::kMock) {
    if (endpoint.empty()) throw ConfigError("backend '" + backend_id + "' needs an endpoint");
    if (embed_model.empty()) throw ConfigError("backend '" + backend_id + "' needs embed_model");
  }
  if (max_parallel_requests < 1) throw ConfigError("max_parallel_requests must be >= 1");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

SimilarityBackendConfig SimilarityBackendConfig::from_json(const nlohmann::json& j) {
  SimilarityBackendConfig c;
  try {
    c.backend_id = j.at("backend_id").get<std::string>();
    c.kind = parse_backend_kind(j.at("kind").get<std::string>());
    c.endpoint = j.value("endpoint", c.endpoint);
    c.embed_model = j.value("embed_model", c.embed_model);
    if (j.contains("language_routing")) {
      for (const auto& [lang, model] : j.at("language_routing").items()) {
        c.language_routing[lang] = model.get<std::string>();
      }
    }
    c.auth_token_env = j.value("auth_token_env", c.auth_token_env);
    c.bertscore_component =
        parse_bertscore_component(j.value("bertscore_component", std::string("f1")));
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.max_parallel_requests = j.value("max_parallel_requests", c.max_parallel_requests);
    c.request_timeout =
        std::chrono::milliseconds(j.value("request_timeout_ms", c.request_timeout.count()));
    c.max_attempts = j.value("max_attempts", c.max_attempts);
    c.retry_base_delay =
        std::chrono::milliseconds(j.value("retry_base_delay_ms", c.retry_base_delay.count()));
    if (j.contains("mock")) c.mock = j.at("mock");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("backend config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json SimilarityBackendConfig::to_json() const {
  nlohmann::json routing = nlohmann::json::object();
  for (const auto& [lang, model] : language_routing) routing[lang] = model;
  nlohmann::json j = {{"backend_id", backend_id},
                      {"kind", std::string(to_string(kind))},
                      {"endpoint", endpoint},
                      {"embed_model", embed_model},
                      {"language_routing", routing},
                      {"bertscore_component", std::string(to_string(bertscore_component))},
                      {"max_parallel_requests", max_parallel_requests}};
  if (!mock.is_null()) j["mock"] = mock;
  return j;
}

std::string route_model(const SimilarityBackendConfig& backend, std::string_view language) {
  if (auto it = backend.language_routing.find(language); it != backend.language_routing.end()) {
    return it->second;
  }
  return backend.embed_model;
}

nlohmann::json pair_to_json(const PairScore& p) {
  nlohmann::json j = {{"instance_id", p.instance_id}, {"backend_id", p.backend_id},
                      {"model_id", p.model_id},       {"temperature", p.temperature},
                      {"sample_index", p.sample_index}, {"sim_test", p.sim_test},
                      {"sim_control", p.sim_control}, {"diff", p.diff},
                      {"tie", p.tie},                 {"flagged", p.flagged},
                      {"unscored", p.unscored}};
  if (!p.note.empty()) j["note"] = p.note;
  return j;
}

PairScore pair_from_json(const nlohmann::json& j) {
  PairScore p;
  try {
    p.instance_id = j.at("instance_id").get<std::string>();
    p.backend_id = j.at("backend_id").get<std::string>();
    p.model_id = j.at("model_id").get<std::string>();
    p.temperature = j.at("temperature").get<double>();
    p.sample_index = j.at("sample_index").get<int>();
    p.sim_test = j.at("sim_test").get<double>();
    p.sim_control = j.at("sim_control").get<double>();
    p.diff = j.at("diff").get<double>();
    p.tie = j.at("tie").get<bool>();
    p.flagged = j.value("flagged", false);
    p.unscored = j.value("unscored", false);
    p.note = j.value("note", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed pair score: ") + e.what());
  }
  return p;
}

PairScore score_pair(std::string_view concept_eval, std::string_view test_gen,
                     std::string_view control_gen, SimilarityBackend& backend,
                     std::string_view language, double tie_epsilon) {
  PairScore p;
  p.backend_id = backend.id();
  auto side = [&](std::string_view gen, const char* which) {
    if (text::trim(gen).empty()) {
      p.flagged = true;
      p.note += std::string(p.note.empty() ? "" : "; ") + "empty " + which + " generation";
      return 0.0;
    }
    return backend.similarity(concept_eval, gen, language);
  };
  try {
    p.sim_test = side(test_gen, "test");
    p.sim_control = side(control_gen, "control");
  } catch (const AuthError&) {
    throw;
  } catch (const std::exception& e) {
    p.unscored = true;
    p.sim_test = 0.0;
    p.sim_control = 0.0;
    p.note = std::string("backend failure: ") + e.what();
  }
  p.diff = p.sim_test - p.sim_control;
  p.tie = std::abs(p.diff) <= tie_epsilon;
  return p;
}

}  // namespace semleak
