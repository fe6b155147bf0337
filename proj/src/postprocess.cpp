#include "semleak/postprocess.hpp"

#include "semleak/errors.hpp"
#include "semleak/text.hpp"

namespace semleak {

namespace {

constexpr std::string_view kPrefixLabel = "Complete the sentence:";

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::string_view drop_prefix_label(std::string_view s) {
  if (starts_with(s, kPrefixLabel)) return text::trim_left(s.substr(kPrefixLabel.size()));
  return s;
}

bool boundary_ok(std::string_view text, std::size_t begin, std::size_t end,
                 std::string_view term) {
  const char32_t first = text::decode_at(term, 0);
  const char32_t last = text::decode_before(term, term.size());
  if (begin > 0 && text::is_word_codepoint(first) &&
      text::is_word_codepoint(text::decode_before(text, begin))) {
    return false;
  }
  if (end < text.size() && text::is_word_codepoint(last) &&
      text::is_word_codepoint(text::decode_at(text, end))) {
    return false;
  }
  return true;
}

// Byte offsets of word-bounded, non-overlapping matches.
std::vector<std::size_t> find_mentions(std::string_view text, std::string_view term,
                                       bool case_insensitive) {
  std::vector<std::size_t> hits;
  if (term.empty() || term.size() > text.size()) return hits;
  const std::string hay = case_insensitive ? text::ascii_lower(text) : std::string(text);
  const std::string needle = case_insensitive ? text::ascii_lower(term) : std::string(term);
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    if (boundary_ok(text, pos, pos + needle.size(), term)) {
      hits.push_back(pos);
      pos += needle.size();
    } else {
      ++pos;
    }
  }
  return hits;
}

std::string remove_term_once(std::string_view text, std::string_view term, bool case_insensitive,
                             bool* removed) {
  const auto hits = find_mentions(text, term, case_insensitive);
  *removed = !hits.empty();
  if (hits.empty()) return std::string(text);
  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (std::size_t hit : hits) {
    out.append(text.substr(cursor, hit - cursor));
    std::size_t after = hit + term.size();
    if (out.empty() || text::is_space(out.back())) {
      while (after < text.size() && text::is_space(text[after])) ++after;
      if (after == text.size()) {
        while (!out.empty() && text::is_space(out.back())) out.pop_back();
      }
    }
    cursor = after;
  }
  out.append(text.substr(cursor));
  return out;
}

}  // namespace

const std::vector<std::string>& PostprocessPolicy::terminators_for(
    std::string_view language) const {
  if (auto it = sentence_terminators.find(language); it != sentence_terminators.end()) {
    return it->second;
  }
  const auto dash = language.find('-');
  if (dash != std::string_view::npos) {
    if (auto it = sentence_terminators.find(language.substr(0, dash));
        it != sentence_terminators.end()) {
      return it->second;
    }
  }
  return default_terminators;
}

bool PostprocessPolicy::truncates(GenerationMode mode) const {
  return truncate_first_sentence.value_or(mode == GenerationMode::kCompletion);
}

void PostprocessPolicy::validate() const {
  auto check = [](const std::vector<std::string>& list, const std::string& where) {
    if (list.empty()) throw ConfigError("no sentence terminators for " + where);
    for (const auto& t : list) {
      if (t.empty()) throw ConfigError("empty sentence terminator for " + where);
    }
  };
  for (const auto& [language, list] : sentence_terminators) check(list, language);
  check(default_terminators, "default");
}

nlohmann::json PostprocessPolicy::to_json() const {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [language, list] : sentence_terminators) terms[language] = list;
  nlohmann::json j = {{"strip_echo", strip_echo},
                      {"sentence_terminators", terms},
                      {"default_terminators", default_terminators},
                      {"removal_case_insensitive", removal_case_insensitive}};
  j["truncate_first_sentence"] = truncate_first_sentence
                                     ? nlohmann::json(*truncate_first_sentence)
                                     : nlohmann::json("completion-only");
  return j;
}

std::string strip_prompt_echo(std::string_view prompt, std::string_view generation) {
  const std::string_view core = drop_prefix_label(text::trim(prompt));
  if (core.empty()) return std::string(generation);
  std::string_view rest = text::trim_left(generation);
  bool changed = false;
  while (true) {
    const std::string_view candidate = drop_prefix_label(rest);
    if (starts_with(candidate, core)) {
      rest = text::trim_left(candidate.substr(core.size()));
      changed = true;
    } else {
      break;
    }
  }
  return changed ? std::string(rest) : std::string(generation);
}

std::string truncate_first_sentence(std::string_view text, std::string_view language,
                                    const PostprocessPolicy& policy) {
  std::size_t cut = std::string_view::npos;
  for (const auto& terminator : policy.terminators_for(language)) {
    if (terminator.empty()) continue;
    const auto pos = text.find(terminator);
    if (pos != std::string_view::npos && (cut == std::string_view::npos || pos + terminator.size() < cut)) {
      cut = pos + terminator.size();
    }
  }
  if (cut == std::string_view::npos) return std::string(text);
  return std::string(text.substr(0, cut));
}

std::size_t count_mentions(std::string_view text, std::string_view term, bool case_insensitive) {
  return find_mentions(text, term, case_insensitive).size();
}

std::string remove_concept_mentions(std::string_view text, std::span<const std::string> terms,
                                    const PostprocessPolicy& policy) {
  std::string current(text);
  // Deleting a span can join its neighbours into a fresh match ("blue blue
  // pan pan"), so sweep until a pass removes nothing.
  bool any = true;
  while (any) {
    any = false;
    for (const auto& term : terms) {
      if (term.empty()) continue;
      bool removed = false;
      current = remove_term_once(current, term, policy.removal_case_insensitive, &removed);
      any = any || removed;
    }
  }
  return current;
}

std::string postprocess_text(std::string_view raw, std::string_view prompt,
                             const PromptInstance& instance, const PostprocessPolicy& policy) {
  std::string current(raw);
  while (true) {
    std::string next = current;
    if (policy.strip_echo) next = strip_prompt_echo(prompt, next);
    if (policy.truncates(instance.mode)) {
      next = truncate_first_sentence(next, instance.language, policy);
    }
    if (is_open_ended(instance.mode)) {
      next = remove_concept_mentions(next, instance.removal_terms, policy);
    }
    if (next == current) return current;
    current = std::move(next);
  }
}

GenerationRecord apply_policy(const GenerationRecord& record, const PromptInstance& instance,
                              const PostprocessPolicy& policy) {
  GenerationRecord out = record;
  const std::string& prompt =
      record.cell.variant == Variant::kTest ? instance.test_prompt : instance.control_prompt;
  out.processed_text = postprocess_text(record.raw_text, prompt, instance, policy);
  return out;
}

}  // namespace semleak
