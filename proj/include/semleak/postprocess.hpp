#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semleak/generation.hpp"
#include "semleak/suite.hpp"

namespace semleak {

struct PostprocessPolicy {
  bool strip_echo = true;
  // Unset means: truncate completion-mode generations only.
  std::optional<bool> truncate_first_sentence;
  std::map<std::string, std::vector<std::string>, std::less<>> sentence_terminators{
      {"en", {"."}}, {"he", {"."}}, {"zh", {"\xE3\x80\x82", "."}}};
  std::vector<std::string> default_terminators{"."};
  bool removal_case_insensitive = true;

  // Exact tag first, then the primary subtag ("zh-en" -> "zh"), then the
  // default list.
  const std::vector<std::string>& terminators_for(std::string_view language) const;
  bool truncates(GenerationMode mode) const;

  void validate() const;
  nlohmann::json to_json() const;
};

// Removes a leading echo of `prompt` (with or without the completion prefix)
// from `generation`. Repeated echoes are all removed.
std::string strip_prompt_echo(std::string_view prompt, std::string_view generation);

// Keeps everything up to and including the first sentence terminator.
std::string truncate_first_sentence(std::string_view text, std::string_view language,
                                    const PostprocessPolicy& policy);

// Deletes every word-bounded occurrence of each term, collapsing the
// whitespace left behind.
std::string remove_concept_mentions(std::string_view text, std::span<const std::string> terms,
                                    const PostprocessPolicy& policy);

// Count of word-bounded occurrences of `term` in `text`.
std::size_t count_mentions(std::string_view text, std::string_view term, bool case_insensitive);

// Sets processed_text on a copy of `record`; raw_text is untouched.
GenerationRecord apply_policy(const GenerationRecord& record, const PromptInstance& instance,
                              const PostprocessPolicy& policy);

// The pipeline on bare text: strip echo, truncate (completion mode), remove
// concept mentions (open-ended modes), repeated until nothing changes.
std::string postprocess_text(std::string_view raw, std::string_view prompt,
                             const PromptInstance& instance, const PostprocessPolicy& policy);

}  // namespace semleak
