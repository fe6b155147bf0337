#include "semleak/humaneval.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "semleak/errors.hpp"
#include "semleak/metric.hpp"
#include "semleak/text.hpp"

namespace semleak {

namespace {

constexpr std::string_view kGuideline =
    "Consider the word or phrase X. Which of the following texts (A or B) is more "
    "semantically related to X? (A/B/Neither)";

// std::shuffle and the <random> distributions are implementation-defined;
// mt19937_64's raw output is not, which keeps sessions byte-identical across
// standard libraries.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::string item_id_for(std::size_t index, std::size_t total) {
  const int width = std::max<int>(3, static_cast<int>(std::to_string(total).size()));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "item-%0*zu", width, index);
  return buf;
}

nlohmann::json source_to_json(const SourceCoordinates& s) {
  return {{"instance_id", s.instance_id},
          {"model_id", s.model_id},
          {"temperature", s.temperature},
          {"sample_index", s.sample_index}};
}

SourceCoordinates source_from_json(const nlohmann::json& j) {
  return {j.at("instance_id").get<std::string>(), j.at("model_id").get<std::string>(),
          j.at("temperature").get<double>(), j.at("sample_index").get<int>()};
}

}  // namespace

std::string_view to_string(AnnotatorLabel label) {
  switch (label) {
    case AnnotatorLabel::kA:
      return "A";
    case AnnotatorLabel::kB:
      return "B";
    case AnnotatorLabel::kNeither:
      return "Neither";
  }
  return "Neither";
}

AnnotatorLabel parse_annotator_label(std::string_view name) {
  const std::string lower = text::ascii_lower(name);
  if (lower == "a") return AnnotatorLabel::kA;
  if (lower == "b") return AnnotatorLabel::kB;
  if (lower == "neither") return AnnotatorLabel::kNeither;
  throw AnnotationError("label must be A, B or Neither, got '" + std::string(name) + "'");
}

nlohmann::json blinded_view(const AnnotationItem& item, std::size_t position, std::size_t total) {
  return {{"item_id", item.item_id},
          {"concept", item.concept_display},
          {"text_a", item.text_a},
          {"text_b", item.text_b},
          {"question", kGuideline},
          {"position", position},
          {"total", total}};
}

AnnotationSession AnnotationSession::create(std::string session_id,
                                            std::span<const AnnotationPair> pairs,
                                            std::uint64_t seed, bool per_annotator_order) {
  if (pairs.empty()) throw AnnotationError("annotation session needs at least one pair");
  for (const auto& p : pairs) {
    if (p.test_gen.empty() || p.control_gen.empty()) {
      throw AnnotationError("annotation pair for '" + p.source.instance_id +
                            "' has an empty generation");
    }
  }
  AnnotationSession session;
  session.id_ = std::move(session_id);
  session.seed_ = seed;
  session.per_annotator_order_ = per_annotator_order;

  std::mt19937_64 rng(seed);
  const auto order = seeded_permutation(pairs.size(), rng);
  session.items_.reserve(pairs.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const AnnotationPair& p = pairs[order[k]];
    AnnotationItem item;
    item.item_id = item_id_for(k, pairs.size());
    item.concept_display = p.concept_text;
    item.test_side = (rng() >> 63) ? Side::kB : Side::kA;
    item.text_a = item.test_side == Side::kA ? p.test_gen : p.control_gen;
    item.text_b = item.test_side == Side::kA ? p.control_gen : p.test_gen;
    item.source = p.source;
    session.items_.push_back(std::move(item));
  }
  return session;
}

const AnnotationItem& AnnotationSession::item(std::string_view item_id) const {
  for (const auto& it : items_) {
    if (it.item_id == item_id) return it;
  }
  throw UnknownItemError("unknown item '" + std::string(item_id) + "' in session " + id_);
}

std::vector<std::size_t> AnnotationSession::order_for(std::string_view annotator_id) const {
  if (!per_annotator_order_) {
    std::vector<std::size_t> identity(items_.size());
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
    return identity;
  }
  std::mt19937_64 rng(text::stable_hash(annotator_id, seed_));
  return seeded_permutation(items_.size(), rng);
}

std::optional<std::pair<const AnnotationItem*, std::size_t>> AnnotationSession::next_item(
    std::string_view annotator_id) const {
  const auto labels = labels_.find(annotator_id);
  std::size_t position = 1;
  for (std::size_t index : order_for(annotator_id)) {
    const auto& candidate = items_[index];
    if (labels == labels_.end() || !labels->second.contains(candidate.item_id)) {
      return std::make_pair(&candidate, position);
    }
    ++position;
  }
  return std::nullopt;
}

Progress AnnotationSession::submit_label(std::string_view item_id, std::string_view annotator_id,
                                         AnnotatorLabel label) {
  if (annotator_id.empty()) throw AnnotationError("annotator id must be non-empty");
  item(item_id);
  auto it = labels_.find(annotator_id);
  if (it == labels_.end()) {
    it = labels_.emplace(std::string(annotator_id), std::map<std::string, AnnotatorLabel>{}).first;
    annotators_.emplace_back(annotator_id);
  }
  if (!it->second.emplace(std::string(item_id), label).second) {
    throw DuplicateLabelError("annotator '" + std::string(annotator_id) + "' already labeled '" +
                              std::string(item_id) + "'");
  }
  return progress(annotator_id);
}

std::optional<AnnotatorLabel> AnnotationSession::label(std::string_view item_id,
                                                       std::string_view annotator_id) const {
  auto it = labels_.find(annotator_id);
  if (it == labels_.end()) return std::nullopt;
  auto jt = it->second.find(std::string(item_id));
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

Progress AnnotationSession::progress(std::string_view annotator_id) const {
  auto it = labels_.find(annotator_id);
  return {it == labels_.end() ? 0 : it->second.size(), items_.size()};
}

ComparisonLabel AnnotationSession::unblind(const AnnotationItem& item, AnnotatorLabel label) {
  if (label == AnnotatorLabel::kNeither) return ComparisonLabel::kNeither;
  const bool picked_a = label == AnnotatorLabel::kA;
  const bool test_is_a = item.test_side == Side::kA;
  return picked_a == test_is_a ? ComparisonLabel::kTest : ComparisonLabel::kControl;
}

std::vector<std::pair<std::size_t, ComparisonLabel>> AnnotationSession::unblinded_labels(
    std::string_view annotator_id, bool allow_partial) const {
  std::vector<std::pair<std::size_t, ComparisonLabel>> out;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto l = label(items_[i].item_id, annotator_id);
    if (!l) {
      if (allow_partial) continue;
      throw IncompleteLabelsError("annotator '" + std::string(annotator_id) +
                                  "' has not labeled " + items_[i].item_id);
    }
    out.emplace_back(i, unblind(items_[i], *l));
  }
  return out;
}

nlohmann::json AnnotationSession::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : items_) {
    items.push_back({{"item_id", it.item_id},
                     {"concept_display", it.concept_display},
                     {"text_a", it.text_a},
                     {"text_b", it.text_b},
                     {"test_side", it.test_side == Side::kA ? "A" : "B"},
                     {"source", source_to_json(it.source)}});
  }
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [annotator, by_item] : labels_) {
    nlohmann::json entry = nlohmann::json::object();
    for (const auto& [item_id, l] : by_item) entry[item_id] = std::string(to_string(l));
    labels[annotator] = entry;
  }
  return {{"session_id", id_},
          {"seed", seed_},
          {"per_annotator_order", per_annotator_order_},
          {"items", items},
          {"annotators", annotators_},
          {"labels", labels}};
}

AnnotationSession AnnotationSession::from_json(const nlohmann::json& j) {
  AnnotationSession s;
  try {
    s.id_ = j.at("session_id").get<std::string>();
    s.seed_ = j.at("seed").get<std::uint64_t>();
    s.per_annotator_order_ = j.value("per_annotator_order", false);
    for (const auto& it : j.at("items")) {
      AnnotationItem item;
      item.item_id = it.at("item_id").get<std::string>();
      item.concept_display = it.at("concept_display").get<std::string>();
      item.text_a = it.at("text_a").get<std::string>();
      item.text_b = it.at("text_b").get<std::string>();
      const auto side = it.at("test_side").get<std::string>();
      if (side != "A" && side != "B") throw AnnotationError("test_side must be A or B");
      item.test_side = side == "A" ? Side::kA : Side::kB;
      item.source = source_from_json(it.at("source"));
      s.items_.push_back(std::move(item));
    }
    s.annotators_ = j.value("annotators", std::vector<std::string>{});
    if (j.contains("labels")) {
      for (const auto& [annotator, by_item] : j.at("labels").items()) {
        auto& dest = s.labels_[annotator];
        for (const auto& [item_id, l] : by_item.items()) {
          dest[item_id] = parse_annotator_label(l.get<std::string>());
        }
        if (std::find(s.annotators_.begin(), s.annotators_.end(), annotator) ==
            s.annotators_.end()) {
          s.annotators_.push_back(annotator);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw AnnotationError(std::string("malformed session: ") + e.what());
  }
  if (s.items_.empty()) throw AnnotationError("session has no items");
  return s;
}

double human_leak_rate(const AnnotationSession& session, std::string_view annotator_id,
                       bool allow_partial) {
  const auto labels = session.unblinded_labels(annotator_id, allow_partial);
  if (labels.empty()) throw IncompleteLabelsError("no labels for '" + std::string(annotator_id) + "'");
  std::vector<double> outcomes;
  outcomes.reserve(labels.size());
  for (const auto& [index, l] : labels) outcomes.push_back(label_outcome(l));
  return leak_rate(outcomes);
}

double agreement(const AnnotationSession& session, std::string_view annotator_1,
                 std::string_view annotator_2) {
  const auto a = session.unblinded_labels(annotator_1);
  const auto b = session.unblinded_labels(annotator_2);
  std::vector<double> xa, xb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    xa.push_back(label_score(a[i].second));
    xb.push_back(label_score(b[i].second));
  }
  return kendall_tau(xa, xb);
}

double human_vs_auto(const AnnotationSession& session, std::string_view annotator_id,
                     std::span<const PairScore> pair_scores, double epsilon) {
  const auto human = session.unblinded_labels(annotator_id);
  std::vector<double> xh, xa;
  for (const auto& [index, l] : human) {
    const auto& src = session.items()[index].source;
    const PairScore* match = nullptr;
    for (const auto& p : pair_scores) {
      if (p.excluded() || p.instance_id != src.instance_id || p.model_id != src.model_id ||
          p.temperature != src.temperature || p.sample_index != src.sample_index) {
        continue;
      }
      if (match != nullptr) {
        throw AnnotationError("several scored pairs match item " + session.items()[index].item_id +
                              "; pass scores from a single backend");
      }
      match = &p;
    }
    if (match == nullptr) {
      throw AnnotationError("no scored pair matches item " + session.items()[index].item_id);
    }
    xh.push_back(label_score(l));
    xa.push_back(label_score(diff_to_label(match->diff, epsilon)));
  }
  return kendall_tau(xh, xa);
}

nlohmann::json label_record_to_json(const LabelRecord& r) {
  return {{"session_id", r.session_id},
          {"item_id", r.item_id},
          {"annotator_id", r.annotator_id},
          {"label", std::string(to_string(r.label))}};
}

LabelRecord label_record_from_json(const nlohmann::json& j) {
  try {
    return {j.at("session_id").get<std::string>(), j.at("item_id").get<std::string>(),
            j.at("annotator_id").get<std::string>(),
            parse_annotator_label(j.at("label").get<std::string>())};
  } catch (const nlohmann::json::exception& e) {
    throw AnnotationError(std::string("malformed label record: ") + e.what());
  }
}

std::vector<LabelRecord> export_labels(const AnnotationSession& session) {
  std::vector<LabelRecord> out;
  for (const auto& annotator : session.annotators()) {
    for (const auto& item : session.items()) {
      if (auto l = session.label(item.item_id, annotator)) {
        out.push_back({session.id(), item.item_id, annotator, *l});
      }
    }
  }
  return out;
}

ImportSummary import_labels(AnnotationSession& session, std::span<const LabelRecord> records) {
  ImportSummary summary;
  for (const auto& r : records) {
    if (r.session_id != session.id()) {
      throw UnknownSessionError("label record for session '" + r.session_id + "', expected '" +
                                session.id() + "'");
    }
    try {
      session.submit_label(r.item_id, r.annotator_id, r.label);
      ++summary.accepted;
    } catch (const DuplicateLabelError&) {
      ++summary.duplicates;
    }
  }
  return summary;
}

}  // namespace semleak
