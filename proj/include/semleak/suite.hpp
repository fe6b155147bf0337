#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace semleak {

enum class GenerationMode { kCompletion, kStory, kRecipe };

std::string_view to_string(GenerationMode mode);
// Throws SuiteError on an unknown name.
GenerationMode parse_generation_mode(std::string_view name);
bool is_open_ended(GenerationMode mode);

// One concept/test/control triple.
//
// `concept_eval` is the string similarity is scored against. It equals
// `concept_text` except for crosslingual prompts, where the displayed concept
// is in the source language and scoring uses the English concept.
struct PromptInstance {
  std::string id;
  std::string category;
  std::string language = "en";
  std::string concept_text;
  std::string concept_eval;
  std::string test_prompt;
  std::string control_prompt;
  GenerationMode mode = GenerationMode::kCompletion;
  std::vector<std::string> removal_terms;
  std::optional<std::string> notes;

  bool operator==(const PromptInstance&) const = default;
};

struct PromptSuite {
  std::string name;
  std::vector<PromptInstance> instances;
  std::string source_path;

  // Linear lookup; nullptr when absent.
  const PromptInstance* find(std::string_view id) const;

  bool operator==(const PromptSuite&) const = default;
};

// Returns one message per broken invariant; empty when the instance is valid.
std::vector<std::string> validate_instance(const PromptInstance& instance);

// Throws SuiteError naming the offending key.
PromptInstance instance_from_json(const nlohmann::json& record);
nlohmann::json instance_to_json(const PromptInstance& instance);

// Parses line-delimited records. Blank lines are skipped. Errors carry the
// 1-based line number.
PromptSuite parse_suite(std::istream& in, std::string name, std::string source_path);
PromptSuite load_suite(const std::filesystem::path& path);

// Writes one record per line in suite order.
void write_suite(const PromptSuite& suite, std::ostream& out);

}  // namespace semleak
