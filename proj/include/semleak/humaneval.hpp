#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semleak/similarity.hpp"
#include "semleak/stats.hpp"

namespace semleak {

enum class Side { kA, kB };
enum class AnnotatorLabel { kA, kB, kNeither };

std::string_view to_string(AnnotatorLabel label);
// Accepts "A", "B", "Neither" (case-insensitive).
AnnotatorLabel parse_annotator_label(std::string_view name);

struct SourceCoordinates {
  std::string instance_id;
  std::string model_id;
  double temperature = 0.0;
  int sample_index = 0;

  bool operator==(const SourceCoordinates&) const = default;
};

struct AnnotationPair {
  std::string concept_text;
  std::string test_gen;
  std::string control_gen;
  SourceCoordinates source;
};

struct AnnotationItem {
  std::string item_id;
  std::string concept_display;
  std::string text_a;
  std::string text_b;
  // Which side holds the test generation. Never leaves the server.
  Side test_side = Side::kA;
  SourceCoordinates source;

  bool operator==(const AnnotationItem&) const = default;
};

struct Progress {
  std::size_t labeled = 0;
  std::size_t total = 0;
};

// Wire form shown to annotators: concept and the two texts, nothing about
// which side is which.
nlohmann::json blinded_view(const AnnotationItem& item, std::size_t position, std::size_t total);

class AnnotationSession {
 public:
  // Items are presented in a seed-determined permutation of `pairs`, each
  // with an independently drawn A/B assignment. Throws AnnotationError on an
  // empty pair list or an empty generation.
  static AnnotationSession create(std::string session_id, std::span<const AnnotationPair> pairs,
                                  std::uint64_t seed, bool per_annotator_order = false);

  const std::string& id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  bool per_annotator_order() const { return per_annotator_order_; }
  const std::vector<AnnotationItem>& items() const { return items_; }
  const std::vector<std::string>& annotators() const { return annotators_; }

  const AnnotationItem& item(std::string_view item_id) const;

  // Presentation order for one annotator (indices into items()).
  std::vector<std::size_t> order_for(std::string_view annotator_id) const;

  // Next unlabeled item in the annotator's order, with its 1-based position.
  std::optional<std::pair<const AnnotationItem*, std::size_t>> next_item(
      std::string_view annotator_id) const;

  // Throws UnknownItemError or DuplicateLabelError.
  Progress submit_label(std::string_view item_id, std::string_view annotator_id,
                        AnnotatorLabel label);

  std::optional<AnnotatorLabel> label(std::string_view item_id,
                                      std::string_view annotator_id) const;
  Progress progress(std::string_view annotator_id) const;

  // Maps an A/B/Neither answer on `item` to test/control/neither.
  static ComparisonLabel unblind(const AnnotationItem& item, AnnotatorLabel label);

  // Unblinded labels in item order. Unlabeled items are skipped when
  // allow_partial, otherwise IncompleteLabelsError.
  std::vector<std::pair<std::size_t, ComparisonLabel>> unblinded_labels(
      std::string_view annotator_id, bool allow_partial = false) const;

  nlohmann::json to_json() const;
  static AnnotationSession from_json(const nlohmann::json& j);

 private:
  std::string id_;
  std::uint64_t seed_ = 0;
  bool per_annotator_order_ = false;
  std::vector<AnnotationItem> items_;
  std::vector<std::string> annotators_;
  // annotator -> item_id -> label
  std::map<std::string, std::map<std::string, AnnotatorLabel>, std::less<>> labels_;
};

// Leak rate over the annotator's unblinded labels.
double human_leak_rate(const AnnotationSession& session, std::string_view annotator_id,
                       bool allow_partial = false);

// Kendall tau between two annotators' ordinal label encodings.
double agreement(const AnnotationSession& session, std::string_view annotator_1,
                 std::string_view annotator_2);

// Kendall tau between an annotator and labels derived from similarity
// differences via the epsilon slack. Each item must match exactly one
// non-excluded pair by source coordinates.
double human_vs_auto(const AnnotationSession& session, std::string_view annotator_id,
                     std::span<const PairScore> pair_scores,
                     double epsilon = kDefaultEpsilonSlack);

struct LabelRecord {
  std::string session_id;
  std::string item_id;
  std::string annotator_id;
  AnnotatorLabel label = AnnotatorLabel::kNeither;
};

nlohmann::json label_record_to_json(const LabelRecord& record);
LabelRecord label_record_from_json(const nlohmann::json& j);

// Every label in the session, annotators in registration order, items in
// session order.
std::vector<LabelRecord> export_labels(const AnnotationSession& session);

struct ImportSummary {
  std::size_t accepted = 0;
  std::size_t duplicates = 0;
};

// Applies records addressed to this session; duplicates are counted, not
// fatal. Unknown items throw.
ImportSummary import_labels(AnnotationSession& session, std::span<const LabelRecord> records);

}  // namespace semleak
