#include <gtest/gtest.h>

#include <random>

#include "semleak/postprocess.hpp"

using namespace semleak;

namespace {

PromptInstance completion_instance() {
  PromptInstance p;
  p.id = "color-yellow";
  p.category = "color";
  p.concept_text = p.concept_eval = "yellow";
  p.test_prompt = "He likes yellow. He works as a";
  p.control_prompt = "He works as a";
  return p;
}

PromptInstance story_instance() {
  PromptInstance p;
  p.id = "story-coral";
  p.category = "name";
  p.concept_text = p.concept_eval = "Coral";
  p.test_prompt = "Tell me a short story about a child named Coral.";
  p.control_prompt = "Tell me a short story about a child.";
  p.mode = GenerationMode::kStory;
  p.removal_terms = {"Coral"};
  return p;
}

}  // namespace

TEST(Echo, StripsLeadingPrompt) {
  EXPECT_EQ(strip_prompt_echo("He likes yellow. He works as a",
                              "He likes yellow. He works as a school bus driver."),
            "school bus driver.");
  EXPECT_EQ(strip_prompt_echo("He likes yellow. He works as a", "school bus driver."),
            "school bus driver.");
  EXPECT_EQ(strip_prompt_echo("He likes yellow. He works as a", "He likes yellow. He works as a"),
            "");
}

TEST(Echo, HandlesCompletionLabelAndRepeats) {
  EXPECT_EQ(strip_prompt_echo("He works as a",
                              "Complete the sentence: He works as a He works as a baker."),
            "baker.");
  EXPECT_EQ(strip_prompt_echo("Complete the sentence: He works as a", "He works as a baker."),
            "baker.");
}

TEST(Truncate, FirstTerminator) {
  const PostprocessPolicy policy;
  EXPECT_EQ(truncate_first_sentence("marine biologist. He also enjoys sailing", "en", policy),
            "marine biologist.");
  EXPECT_EQ(truncate_first_sentence("桉树叶。他每天都吃", "zh", policy), "桉树叶。");
  EXPECT_EQ(truncate_first_sentence("bamboo", "en", policy), "bamboo");
  EXPECT_EQ(truncate_first_sentence("eucalyptus. 桉树叶。", "zh", policy), "eucalyptus.");
  // Crosslingual tags fall back to the primary subtag.
  EXPECT_EQ(truncate_first_sentence("桉树叶。x", "zh-en", policy), "桉树叶。");
}

TEST(Removal, AllNameOccurrences) {
  const PostprocessPolicy policy;
  const std::vector<std::string> terms{"Coral"};
  const std::string story =
      "Coral loved the sea. Every morning Coral walked to the shore, and coral reefs called "
      "to Coral.";
  const auto out = remove_concept_mentions(story, terms, policy);
  EXPECT_EQ(count_mentions(out, "Coral", true), 0u);
  EXPECT_EQ(out, "loved the sea. Every morning walked to the shore, and reefs called to .");
}

TEST(Removal, ColorPanCollapsesWhitespace) {
  const PostprocessPolicy policy;
  const std::vector<std::string> terms{"blue pan"};
  EXPECT_EQ(remove_concept_mentions("use your blue pan for this", terms, policy),
            "use your for this");
  EXPECT_EQ(remove_concept_mentions("nothing to see", terms, policy), "nothing to see");
  EXPECT_EQ(remove_concept_mentions("blue blue pan pan", terms, policy), "");
}

TEST(Removal, WordBoundaries) {
  EXPECT_EQ(count_mentions("Coralie and Coral", "Coral", true), 1u);
  EXPECT_EQ(count_mentions("CORAL coral", "Coral", true), 2u);
  EXPECT_EQ(count_mentions("CORAL coral", "Coral", false), 0u);
  // CJK terms match without word boundaries.
  EXPECT_EQ(count_mentions("他喜欢考拉和考拉", "考拉", true), 2u);
}

TEST(ApplyPolicy, ComposesByMode) {
  const PostprocessPolicy policy;
  GenerationRecord rec{{"color-yellow", Variant::kTest, "m", 1.0, 0},
                       "He likes yellow. He works as a school bus driver. He loves it.",
                       std::nullopt,
                       ""};
  const auto out = apply_policy(rec, completion_instance(), policy);
  EXPECT_EQ(out.processed_text, "school bus driver.");
  EXPECT_EQ(out.raw_text, rec.raw_text);

  GenerationRecord story{{"story-coral", Variant::kTest, "m", 1.0, 0},
                         "Tell me a short story about a child named Coral. Coral lived by the "
                         "sea. The waves sang.",
                         std::nullopt,
                         ""};
  EXPECT_EQ(apply_policy(story, story_instance(), policy).processed_text,
            "lived by the sea. The waves sang.");

  GenerationRecord clean{{"color-yellow", Variant::kControl, "m", 1.0, 0}, "baker.",
                         std::nullopt, ""};
  EXPECT_EQ(apply_policy(clean, completion_instance(), policy).processed_text, "baker.");
}

TEST(ApplyPolicy, IdempotentOnFuzzedInputs) {
  const PostprocessPolicy policy;
  std::mt19937_64 rng(42);
  const std::vector<std::string> pieces{
      "He likes yellow. He works as a", "Complete the sentence:", "Coral", "coral", " ", "  ",
      ".", "。", "school", "bus", "driver", "blue pan", "Tell me a short story about a child named Coral.",
      "桉树叶", "\n", "yellow"};
  for (int i = 0; i < 200; ++i) {
    std::string raw;
    const int n = static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) raw += pieces[rng() % pieces.size()] + (rng() % 2 ? " " : "");
    for (const auto& inst : {completion_instance(), story_instance()}) {
      for (Variant v : {Variant::kTest, Variant::kControl}) {
        GenerationRecord rec{{inst.id, v, "m", 0.0, 0}, raw, std::nullopt, ""};
        const auto once = apply_policy(rec, inst, policy);
        GenerationRecord again = rec;
        again.raw_text = *once.processed_text;
        EXPECT_EQ(apply_policy(again, inst, policy).processed_text, once.processed_text)
            << "raw: " << raw;
        if (is_open_ended(inst.mode)) {
          EXPECT_EQ(count_mentions(*once.processed_text, "Coral", true), 0u);
        }
      }
    }
  }
}

TEST(Policy, TerminatorLookup) {
  PostprocessPolicy policy;
  EXPECT_EQ(policy.terminators_for("he").front(), ".");
  EXPECT_EQ(policy.terminators_for("zh").size(), 2u);
  EXPECT_EQ(policy.terminators_for("fr"), policy.default_terminators);
  EXPECT_TRUE(policy.truncates(GenerationMode::kCompletion));
  EXPECT_FALSE(policy.truncates(GenerationMode::kRecipe));
  policy.sentence_terminators["xx"] = {};
  EXPECT_ANY_THROW(policy.validate());
}
