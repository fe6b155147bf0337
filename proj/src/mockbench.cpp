#include "semleak/mockbench.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "semleak/errors.hpp"
#include "semleak/metric.hpp"
#include "semleak/text.hpp"

namespace semleak {

namespace {

constexpr std::string_view kSyllables[] = {"ka", "lo", "mi", "ren", "tu", "vo", "sa", "pel",
                                           "dri", "nu", "ost", "gar", "fen", "bi", "quo", "hap"};

std::string cell_tag(std::string_view instance_id, double temperature, int sample_index) {
  return std::string(instance_id) + "|" + text::format_number(temperature) + "|" +
         std::to_string(sample_index);
}

std::string nonsense_word(std::uint64_t h) {
  std::string word;
  const int syllables = 2 + static_cast<int>(h % 2);
  for (int i = 0; i < syllables; ++i) {
    h = text::stable_hash(std::to_string(h), 0x5eed);
    word += kSyllables[h % std::size(kSyllables)];
  }
  return word;
}

std::vector<std::string> filler_words(std::string_view tag, std::uint64_t seed, int count) {
  std::vector<std::string> words;
  for (int i = 0; i < count; ++i) {
    words.push_back(nonsense_word(text::stable_hash(std::string(tag) + "#" + std::to_string(i), seed)));
  }
  return words;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

// Box-Muller on two hash-derived uniforms.
double hashed_normal(std::string_view material, std::uint64_t seed) {
  const double u1 = 1.0 - text::unit_interval(text::stable_hash(material, seed ^ 0xA5A5A5A5ULL));
  const double u2 = text::unit_interval(text::stable_hash(material, seed ^ 0x5A5A5A5AULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double rng_uniform(std::mt19937_64& rng) { return text::unit_interval(rng()); }

double rng_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - rng_uniform(rng);
  const double u2 = rng_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void MockLeakConfig::validate() const {
  if (!(leak_strength >= 0.0 && leak_strength <= 1.0)) throw ConfigError("p must be in [0, 1]");
  if (!(tie_fraction >= 0.0 && tie_fraction <= 1.0)) throw ConfigError("q must be in [0, 1]");
  if (leak_strength + tie_fraction > 1.0 + 1e-12) throw ConfigError("p + q must be <= 1");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("noise_sd must be >= 0");
}

MockLeakConfig MockLeakConfig::from_json(const nlohmann::json& j) {
  MockLeakConfig c;
  try {
    c.leak_strength = j.value("leak_strength", c.leak_strength);
    c.tie_fraction = j.value("tie_fraction", c.tie_fraction);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mock config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json MockLeakConfig::to_json() const {
  return {{"leak_strength", leak_strength},
          {"tie_fraction", tie_fraction},
          {"noise_sd", noise_sd},
          {"seed", seed}};
}

MockCase mock_case(std::string_view instance_id, double temperature, int sample_index,
                   const MockLeakConfig& config) {
  const double u = text::unit_interval(
      text::stable_hash("case|" + cell_tag(instance_id, temperature, sample_index), config.seed));
  if (u < config.leak_strength) return MockCase::kLeak;
  if (u < config.leak_strength + config.tie_fraction) return MockCase::kTie;
  return MockCase::kFiller;
}

std::string mock_generate(const PromptInstance& instance, Variant variant,
                          const MockLeakConfig& config, double temperature, int sample_index) {
  const std::string tag = cell_tag(instance.id, temperature, sample_index);
  const std::string control = join(filler_words(tag + "|control", config.seed, 4)) + ".";
  if (variant == Variant::kControl) return control;
  switch (mock_case(instance.id, temperature, sample_index, config)) {
    case MockCase::kLeak: {
      auto words = filler_words(tag + "|leak", config.seed, 4);
      return words[0] + " " + words[1] + " " + instance.concept_eval + " " + words[2] + " " +
             words[3] + ".";
    }
    case MockCase::kTie:
      return control;
    case MockCase::kFiller:
      break;
  }
  return join(filler_words(tag + "|test", config.seed, 4)) + ".";
}

double mock_similarity(std::string_view concept_text, std::string_view text,
                       const MockLeakConfig& config) {
  const PostprocessPolicy policy;
  const std::string terms[] = {std::string(concept_text)};
  const bool marker = count_mentions(text, concept_text, policy.removal_case_insensitive) > 0;
  const std::string stripped = marker ? remove_concept_mentions(text, terms, policy) : std::string(text);
  std::string material(concept_text);
  material.push_back('\0');
  material += stripped;
  double score = 0.5 * text::unit_interval(text::stable_hash(material, config.seed));
  if (marker) score += kMockMarkerBonus;
  if (config.noise_sd > 0.0) {
    std::string noise_material(concept_text);
    noise_material.push_back('\0');
    noise_material.append(text);
    score += config.noise_sd * hashed_normal(noise_material, config.seed);
  }
  return score;
}

ExpectedLeakRate expected_leak_rate(const MockLeakConfig& config, int trials) {
  config.validate();
  const double p = config.leak_strength;
  if (config.noise_sd == 0.0) {
    // Ties score 0.5; filler pairs compare two i.i.d. base scores, so they
    // also average 0.5.
    return {100.0 * p + 50.0 * (1.0 - p), 0.0, true};
  }
  if (trials < 2) throw Error("Monte-Carlo needs at least two trials");
  std::mt19937_64 rng(config.seed ^ 0xC0FFEEULL);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < trials; ++i) {
    const double u = rng_uniform(rng);
    double outcome = 0.5;
    if (u < p + config.tie_fraction && u >= p) {
      outcome = 0.5;
    } else {
      const double bonus = u < p ? kMockMarkerBonus : 0.0;
      const double s_test = 0.5 * rng_uniform(rng) + bonus + config.noise_sd * rng_normal(rng);
      const double s_control = 0.5 * rng_uniform(rng) + config.noise_sd * rng_normal(rng);
      outcome = leak_indicator(s_test, s_control);
    }
    sum += outcome;
    sum_sq += outcome * outcome;
  }
  const double mean = sum / trials;
  const double var = (sum_sq - trials * mean * mean) / (trials - 1);
  return {100.0 * mean, 100.0 * std::sqrt(std::max(var, 0.0) / trials), false};
}

MockSimilarityBackend::MockSimilarityBackend(std::string id, MockLeakConfig config)
    : id_(std::move(id)), config_(config) {
  config_.validate();
}

double MockSimilarityBackend::similarity(std::string_view concept_text, std::string_view text,
                                         std::string_view /*language*/) {
  return mock_similarity(concept_text, text, config_);
}

PromptSuite synthetic_suite(std::size_t size, std::uint64_t seed) {
  static constexpr std::string_view kCategories[] = {"color", "food", "animal", "song",
                                                     "occupation"};
  static constexpr std::string_view kFrames[] = {"He works as a", "His favorite food is",
                                                 "His favorite song is", "His friend lives in"};
  PromptSuite suite;
  suite.name = "synthetic-" + std::to_string(seed);
  suite.source_path = "<synthetic>";
  suite.instances.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    PromptInstance instance;
    instance.id = "syn-" + std::to_string(i);
    instance.category = std::string(kCategories[i % std::size(kCategories)]);
    instance.language = "en";
    instance.concept_text = "concept" + std::to_string(text::stable_hash(std::to_string(i), seed) % 100000) +
                            "x" + std::to_string(i);
    instance.concept_eval = instance.concept_text;
    const std::string frame(kFrames[i % std::size(kFrames)]);
    instance.test_prompt = "He likes " + instance.concept_text + ". " + frame;
    instance.control_prompt = frame;
    suite.instances.push_back(std::move(instance));
  }
  return suite;
}

CalibrationResult run_calibration(const MockLeakConfig& config, std::size_t instances,
                                  const PostprocessPolicy& policy) {
  config.validate();
  const PromptSuite suite = synthetic_suite(instances, config.seed);
  MockSimilarityBackend backend("mock", config);
  std::vector<PairScore> pairs;
  pairs.reserve(instances);
  for (const auto& instance : suite.instances) {
    const auto test = postprocess_text(mock_generate(instance, Variant::kTest, config),
                                       instance.test_prompt, instance, policy);
    const auto control = postprocess_text(mock_generate(instance, Variant::kControl, config),
                                          instance.control_prompt, instance, policy);
    auto pair = score_pair(instance.concept_eval, test, control, backend, instance.language);
    pair.instance_id = instance.id;
    pair.model_id = "mock-model";
    pairs.push_back(std::move(pair));
  }
  const auto outcomes = leak_outcomes(pairs);
  CalibrationResult result;
  result.pairs = outcomes.size();
  result.measured = leak_rate(outcomes);
  if (outcomes.size() > 1) {
    double ss = 0.0;
    for (const auto& o : outcomes) {
      const double d = 100.0 * o.value - result.measured;
      ss += d * d;
    }
    const double n = static_cast<double>(outcomes.size());
    result.standard_error = std::sqrt(ss / (n - 1.0) / n);
  }
  result.expected = expected_leak_rate(config);
  return result;
}

EmbeddingVector hash_token_vector(std::string_view model, std::string_view token,
                                  std::size_t dimension) {
  const std::string base = std::string(model) + "|" + text::ascii_lower(token) + "|";
  std::vector<double> values(dimension);
  for (std::size_t k = 0; k < dimension; ++k) {
    values[k] = 2.0 * text::unit_interval(text::stable_hash(base + std::to_string(k))) - 1.0;
  }
  return EmbeddingVector(std::move(values));
}

TokenEmbeddings hash_token_embeddings(std::string_view model, std::string_view text,
                                      std::size_t dimension) {
  TokenEmbeddings out;
  out.tokens = text::simple_tokens(text);
  if (out.tokens.empty()) {
    const auto trimmed = text::trim(text);
    out.tokens.emplace_back(trimmed.empty() ? std::string_view("<empty>") : trimmed);
  }
  for (const auto& token : out.tokens) out.vectors.push_back(hash_token_vector(model, token, dimension));
  return out;
}

EmbeddingVector hash_sentence_embedding(std::string_view model, std::string_view text,
                                        std::size_t dimension) {
  const auto tokens = hash_token_embeddings(model, text, dimension);
  std::vector<double> sum(dimension, 0.0);
  for (const auto& v : tokens.vectors) {
    for (std::size_t k = 0; k < dimension; ++k) sum[k] += v.values()[k];
  }
  return EmbeddingVector(std::move(sum));
}

}  // namespace semleak
