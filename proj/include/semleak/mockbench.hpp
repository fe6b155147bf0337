#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "semleak/generation.hpp"
#include "semleak/postprocess.hpp"
#include "semleak/similarity.hpp"
#include "semleak/suite.hpp"

namespace semleak {

// p: chance the test generation carries the concept marker.
// q: chance test and control generations are identical.
// The remainder gets two unrelated filler texts.
struct MockLeakConfig {
  double leak_strength = 0.5;
  double tie_fraction = 0.0;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  static MockLeakConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Similarity bonus for a marker hit. Base scores live in [0, 0.5), so with
// zero noise a marker always wins.
inline constexpr double kMockMarkerBonus = 1.0;

enum class MockCase { kLeak, kTie, kFiller };

// Which case a given (instance, temperature, sample) falls in.
MockCase mock_case(std::string_view instance_id, double temperature, int sample_index,
                   const MockLeakConfig& config);

std::string mock_generate(const PromptInstance& instance, Variant variant,
                          const MockLeakConfig& config, double temperature = 0.0,
                          int sample_index = 0);

// Seeded base score of the text with marker mentions removed, plus the bonus
// when the concept appears as a word, plus hash-seeded Gaussian noise.
double mock_similarity(std::string_view concept_text, std::string_view text,
                       const MockLeakConfig& config);

struct ExpectedLeakRate {
  double value = 50.0;
  double standard_error = 0.0;
  bool closed_form = true;
};

// Closed form 100p + 50(1 - p) without noise; seeded Monte-Carlo otherwise.
ExpectedLeakRate expected_leak_rate(const MockLeakConfig& config, int trials = 200000);

class MockSimilarityBackend : public SimilarityBackend {
 public:
  MockSimilarityBackend(std::string id, MockLeakConfig config);

  const std::string& id() const override { return id_; }
  double similarity(std::string_view concept_text, std::string_view text,
                    std::string_view language) override;

 private:
  std::string id_;
  MockLeakConfig config_;
};

// Completion-mode suite with synthetic concepts, for calibration runs.
PromptSuite synthetic_suite(std::size_t size, std::uint64_t seed);

struct CalibrationResult {
  double measured = 0.0;
  // Standard error of the measured rate.
  double standard_error = 0.0;
  ExpectedLeakRate expected;
  std::size_t pairs = 0;
};

// mock_generate -> postprocess -> MockSimilarityBackend -> leak metric over
// `instances` synthetic instances, one sample each.
CalibrationResult run_calibration(const MockLeakConfig& config, std::size_t instances,
                                  const PostprocessPolicy& policy = {});

// Deterministic hash-based embeddings; same (model, token) gives the same
// unit vector.
EmbeddingVector hash_token_vector(std::string_view model, std::string_view token,
                                  std::size_t dimension = 64);
TokenEmbeddings hash_token_embeddings(std::string_view model, std::string_view text,
                                      std::size_t dimension = 64);
// Sum of the text's token vectors.
EmbeddingVector hash_sentence_embedding(std::string_view model, std::string_view text,
                                        std::size_t dimension = 64);

}  // namespace semleak
