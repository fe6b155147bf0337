#include "semleak/suite.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "semleak/errors.hpp"

namespace semleak {

namespace {

const std::set<std::string, std::less<>> kKnownKeys = {
    "id",           "category",       "language", "concept",       "concept_eval",
    "test_prompt",  "control_prompt", "mode",     "removal_terms", "notes"};

std::string required_string(const nlohmann::json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw SuiteError(std::string("missing key '") + key + "'");
  if (!it->is_string()) throw SuiteError(std::string("key '") + key + "' must be a string");
  return it->get<std::string>();
}

// Key order follows the file schema rather than nlohmann's sorted map.
nlohmann::ordered_json ordered_record(const PromptInstance& instance) {
  nlohmann::ordered_json j;
  j["id"] = instance.id;
  j["category"] = instance.category;
  j["language"] = instance.language;
  j["concept"] = instance.concept_text;
  if (instance.concept_eval != instance.concept_text) j["concept_eval"] = instance.concept_eval;
  j["test_prompt"] = instance.test_prompt;
  j["control_prompt"] = instance.control_prompt;
  j["mode"] = std::string(to_string(instance.mode));
  if (!instance.removal_terms.empty()) j["removal_terms"] = instance.removal_terms;
  if (instance.notes) j["notes"] = *instance.notes;
  return j;
}

}  // namespace

std::string_view to_string(GenerationMode mode) {
  switch (mode) {
    case GenerationMode::kCompletion:
      return "completion";
    case GenerationMode::kStory:
      return "story";
    case GenerationMode::kRecipe:
      return "recipe";
  }
  return "completion";
}

GenerationMode parse_generation_mode(std::string_view name) {
  if (name == "completion") return GenerationMode::kCompletion;
  if (name == "story") return GenerationMode::kStory;
  if (name == "recipe") return GenerationMode::kRecipe;
  throw SuiteError("unknown mode '" + std::string(name) + "'");
}

bool is_open_ended(GenerationMode mode) { return mode != GenerationMode::kCompletion; }

const PromptInstance* PromptSuite::find(std::string_view id) const {
  for (const auto& instance : instances) {
    if (instance.id == id) return &instance;
  }
  return nullptr;
}

std::vector<std::string> validate_instance(const PromptInstance& instance) {
  std::vector<std::string> violations;
  if (instance.id.empty()) violations.emplace_back("id must be non-empty");
  if (instance.concept_text.empty()) violations.emplace_back("concept must be non-empty");
  if (instance.concept_eval.empty()) violations.emplace_back("concept_eval must be non-empty");
  if (instance.test_prompt.empty()) violations.emplace_back("test_prompt must be non-empty");
  if (instance.control_prompt.empty()) violations.emplace_back("control_prompt must be non-empty");
  if (is_open_ended(instance.mode)) {
    if (instance.removal_terms.empty()) {
      violations.emplace_back("removal_terms required for open-ended mode");
    }
  } else if (!instance.removal_terms.empty()) {
    violations.emplace_back("removal_terms must be empty for completion mode");
  }
  for (const auto& term : instance.removal_terms) {
    if (term.empty()) {
      violations.emplace_back("removal_terms entries must be non-empty");
      break;
    }
  }
  return violations;
}

PromptInstance instance_from_json(const nlohmann::json& record) {
  if (!record.is_object()) throw SuiteError("record must be a JSON object");
  for (const auto& [key, value] : record.items()) {
    if (!kKnownKeys.contains(key)) throw SuiteError("unknown key '" + key + "'");
  }
  PromptInstance instance;
  instance.id = required_string(record, "id");
  instance.category = required_string(record, "category");
  instance.language = required_string(record, "language");
  instance.concept_text = required_string(record, "concept");
  instance.concept_eval =
      record.contains("concept_eval") ? required_string(record, "concept_eval") : instance.concept_text;
  instance.test_prompt = required_string(record, "test_prompt");
  instance.control_prompt = required_string(record, "control_prompt");
  instance.mode = parse_generation_mode(required_string(record, "mode"));
  if (auto it = record.find("removal_terms"); it != record.end()) {
    if (!it->is_array()) throw SuiteError("key 'removal_terms' must be an array of strings");
    for (const auto& term : *it) {
      if (!term.is_string()) throw SuiteError("key 'removal_terms' must be an array of strings");
      instance.removal_terms.push_back(term.get<std::string>());
    }
  }
  if (record.contains("notes")) instance.notes = required_string(record, "notes");
  return instance;
}

nlohmann::json instance_to_json(const PromptInstance& instance) {
  return nlohmann::json::parse(ordered_record(instance).dump());
}

PromptSuite parse_suite(std::istream& in, std::string name, std::string source_path) {
  PromptSuite suite{std::move(name), {}, std::move(source_path)};
  std::set<std::string, std::less<>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& what) {
      throw SuiteError(suite.source_path + ":" + std::to_string(line_no) + ": " + what);
    };
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed record: ") + e.what());
    }
    PromptInstance instance;
    try {
      instance = instance_from_json(record);
    } catch (const SuiteError& e) {
      fail(e.what());
    }
    if (auto violations = validate_instance(instance); !violations.empty()) {
      std::string joined;
      for (const auto& v : violations) joined += (joined.empty() ? "" : "; ") + v;
      fail("instance '" + instance.id + "': " + joined);
    }
    if (!seen.insert(instance.id).second) fail("duplicate id '" + instance.id + "'");
    suite.instances.push_back(std::move(instance));
  }
  if (suite.instances.empty()) throw SuiteError(suite.source_path + ": empty suite");
  return suite;
}

PromptSuite load_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SuiteError("cannot open suite file " + path.string());
  return parse_suite(in, path.stem().string(), path.string());
}

void write_suite(const PromptSuite& suite, std::ostream& out) {
  for (const auto& instance : suite.instances) {
    out << ordered_record(instance).dump() << '\n';
  }
}

}  // namespace semleak
