#include "semleak/generation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include "semleak/errors.hpp"
#include "semleak/http.hpp"
#include "semleak/text.hpp"

namespace semleak {

std::string_view to_string(Variant variant) {
  return variant == Variant::kTest ? "test" : "control";
}

Variant parse_variant(std::string_view name) {
  if (name == "test") return Variant::kTest;
  if (name == "control") return Variant::kControl;
  throw Error("unknown variant '" + std::string(name) + "'");
}

void ModelEndpointConfig::validate() const {
  if (model_id.empty()) throw ConfigError("model_id must be non-empty");
  if (max_tokens_completion < 1) throw ConfigError("max_tokens_completion must be >= 1");
  if (max_tokens_open < max_tokens_completion) {
    throw ConfigError("max_tokens_open must be >= max_tokens_completion");
  }
  if (max_parallel_requests < 1) throw ConfigError("max_parallel_requests must be >= 1");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (request_timeout.count() <= 0) throw ConfigError("request_timeout must be positive");
}

ModelEndpointConfig ModelEndpointConfig::from_json(const nlohmann::json& j) {
  ModelEndpointConfig c;
  try {
    c.model_id = j.at("model_id").get<std::string>();
    c.family = j.value("family", c.family);
    c.base_url = j.value("base_url", c.base_url);
    c.auth_token_env = j.value("auth_token_env", c.auth_token_env);
    c.use_completion_prefix = j.value("use_completion_prefix", c.use_completion_prefix);
    c.max_tokens_completion = j.value("max_tokens_completion", c.max_tokens_completion);
    c.max_tokens_open = j.value("max_tokens_open", c.max_tokens_open);
    c.request_timeout =
        std::chrono::milliseconds(j.value("request_timeout_ms", c.request_timeout.count()));
    c.max_parallel_requests = j.value("max_parallel_requests", c.max_parallel_requests);
    c.max_attempts = j.value("max_attempts", c.max_attempts);
    c.retry_base_delay =
        std::chrono::milliseconds(j.value("retry_base_delay_ms", c.retry_base_delay.count()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json ModelEndpointConfig::to_json() const {
  return {{"model_id", model_id},
          {"family", family.empty() ? model_id : family},
          {"base_url", base_url},
          {"auth_token_env", auth_token_env},
          {"use_completion_prefix", use_completion_prefix},
          {"max_tokens_completion", max_tokens_completion},
          {"max_tokens_open", max_tokens_open},
          {"request_timeout_ms", request_timeout.count()},
          {"max_parallel_requests", max_parallel_requests},
          {"max_attempts", max_attempts},
          {"retry_base_delay_ms", retry_base_delay.count()}};
}

void RunPlan::validate() const {
  if (temperatures.empty()) throw ConfigError("plan needs at least one temperature");
  for (double t : temperatures) {
    if (!std::isfinite(t) || t < 0.0) throw ConfigError("temperatures must be finite and >= 0");
  }
  if (samples_per_cell < 1) throw ConfigError("samples_per_cell must be >= 1");
}

nlohmann::json RunPlan::to_json() const {
  return {{"temperatures", temperatures}, {"samples_per_cell", samples_per_cell}};
}

nlohmann::json record_to_json(const GenerationRecord& record) {
  nlohmann::json j = {{"instance_id", record.cell.instance_id},
                      {"variant", std::string(to_string(record.cell.variant))},
                      {"model_id", record.cell.model_id},
                      {"temperature", record.cell.temperature},
                      {"sample_index", record.cell.sample_index},
                      {"raw_text", record.raw_text},
                      {"created_at", record.created_at}};
  if (record.processed_text) j["processed_text"] = *record.processed_text;
  return j;
}

GenerationRecord record_from_json(const nlohmann::json& j) {
  GenerationRecord r;
  try {
    r.cell.instance_id = j.at("instance_id").get<std::string>();
    r.cell.variant = parse_variant(j.at("variant").get<std::string>());
    r.cell.model_id = j.at("model_id").get<std::string>();
    r.cell.temperature = j.at("temperature").get<double>();
    r.cell.sample_index = j.at("sample_index").get<int>();
    r.raw_text = j.at("raw_text").get<std::string>();
    r.created_at = j.value("created_at", std::string());
    if (j.contains("processed_text")) r.processed_text = j.at("processed_text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed generation record: ") + e.what());
  }
  return r;
}

std::string cache_key(const CellCoordinates& cell) {
  // JSON array encoding is unambiguous, so distinct coordinates never collide.
  return nlohmann::json::array({cell.instance_id, std::string(to_string(cell.variant)),
                                cell.model_id, text::format_number(cell.temperature),
                                cell.sample_index})
      .dump();
}

std::string build_prompt(const PromptInstance& instance, Variant variant,
                         const ModelEndpointConfig& config) {
  const std::string& prompt =
      variant == Variant::kTest ? instance.test_prompt : instance.control_prompt;
  if (config.use_completion_prefix && instance.mode == GenerationMode::kCompletion) {
    return std::string(kCompletionPrefix) + prompt;
  }
  return prompt;
}

RunStore::RunStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    GenerationRecord record;
    try {
      record = record_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw Error(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto key = cache_key(record.cell);
    if (index_.contains(key)) {
      throw Error(path_.string() + ":" + std::to_string(line_no) + ": duplicate cell " + key);
    }
    index_.emplace(std::move(key), records_.size());
    records_.push_back(std::move(record));
  }
}

bool RunStore::contains(const CellCoordinates& cell) const {
  std::lock_guard lock(mu_);
  return index_.contains(cache_key(cell));
}

std::optional<GenerationRecord> RunStore::find(const CellCoordinates& cell) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(cache_key(cell));
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

void RunStore::append(const GenerationRecord& record) {
  std::lock_guard lock(mu_);
  auto key = cache_key(record.cell);
  if (index_.contains(key)) throw Error("cell already stored: " + key);
  if (!path_.empty()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to run store " + path_.string());
    out << record_to_json(record).dump() << '\n';
    out.flush();
    if (!out) throw Error("write failed on run store " + path_.string());
  }
  index_.emplace(std::move(key), records_.size());
  records_.push_back(record);
}

std::vector<GenerationRecord> RunStore::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t RunStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::filesystem::path run_store_path(const std::filesystem::path& dir, std::string_view suite_name,
                                     std::string_view model_id) {
  std::string safe_model(model_id);
  for (char& c : safe_model) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return dir / ("generations-" + std::string(suite_name) + "-" + safe_model + ".jsonl");
}

nlohmann::json completion_request_body(const CompletionRequest& request) {
  return {{"model", request.model},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens},
          {"n", 1}};
}

HttpCompletionClient::HttpCompletionClient(ModelEndpointConfig config)
    : config_(std::move(config)) {
  config_.validate();
  if (config_.base_url.empty()) throw ConfigError("model config has no base_url");
}

std::string HttpCompletionClient::complete(const CompletionRequest& request) {
  const auto endpoint = http::parse_endpoint(config_.base_url);
  auto headers = http::bearer_headers(config_.auth_token_env);
  const auto response = http::post_json(endpoint, "/chat/completions",
                                        completion_request_body(request), headers,
                                        config_.request_timeout);
  if (response.status == 401 || response.status == 403) {
    throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(response.status) + ")");
  }
  if (http::is_retryable_status(response.status)) {
    throw TransportError("HTTP " + std::to_string(response.status));
  }
  if (response.status != 200) {
    throw MalformedResponseError("HTTP " + std::to_string(response.status) + ": " +
                                 response.body.substr(0, 200));
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(response.body);
  } catch (const nlohmann::json::parse_error&) {
    throw MalformedResponseError("response is not JSON");
  }
  const auto* choices = body.contains("choices") ? &body["choices"] : nullptr;
  if (choices == nullptr || !choices->is_array() || choices->empty()) {
    throw MalformedResponseError("response has no choices");
  }
  const auto& choice = (*choices)[0];
  if (choice.contains("message") && choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    return choice["message"]["content"].get<std::string>();
  }
  if (choice.contains("text") && choice["text"].is_string()) {
    return choice["text"].get<std::string>();
  }
  throw MalformedResponseError("response choice has no text");
}

namespace {

struct Cell {
  const PromptInstance* instance;
  CellCoordinates coords;
};

}  // namespace

CollectionSummary collect_generations(const PromptSuite& suite, const ModelEndpointConfig& config,
                                      const RunPlan& plan, RunStore& store,
                                      CompletionClient& client) {
  config.validate();
  plan.validate();

  CollectionSummary summary;
  std::vector<Cell> pending;
  for (const auto& instance : suite.instances) {
    for (Variant variant : {Variant::kTest, Variant::kControl}) {
      for (double temperature : plan.temperatures) {
        for (int s = 0; s < plan.samples_per_cell; ++s) {
          CellCoordinates coords{instance.id, variant, config.model_id, temperature, s};
          if (store.contains(coords)) {
            ++summary.cached;
          } else {
            pending.push_back({&instance, std::move(coords)});
          }
        }
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> fetched{0};
  std::atomic<bool> abort{false};
  std::mutex failures_mu;
  std::exception_ptr fatal;

  auto run_cells = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const Cell& cell = pending[i];
      CompletionRequest request{
          config.model_id, build_prompt(*cell.instance, cell.coords.variant, config),
          cell.coords.temperature,
          is_open_ended(cell.instance->mode) ? config.max_tokens_open
                                             : config.max_tokens_completion};
      std::string failure;
      std::optional<std::string> text;
      for (int attempt = 0; attempt < config.max_attempts && !abort.load(); ++attempt) {
        if (attempt > 0) {
          std::this_thread::sleep_for(config.retry_base_delay * (1 << (attempt - 1)));
        }
        try {
          text = client.complete(request);
          break;
        } catch (const TransportError& e) {
          failure = std::string("transport: ") + e.what();
        } catch (const MalformedResponseError& e) {
          failure = std::string("malformed response: ") + e.what();
          break;
        }
      }
      if (text) {
        store.append(GenerationRecord{cell.coords, *text, std::nullopt, text::utc_timestamp_now()});
        fetched.fetch_add(1);
      } else if (!abort.load()) {
        std::lock_guard lock(failures_mu);
        summary.failures.push_back({cell.coords, failure});
      }
    }
  };
  // Auth failures and store write errors abort every worker.
  auto worker = [&] {
    try {
      run_cells();
    } catch (...) {
      std::lock_guard lock(failures_mu);
      if (!fatal) fatal = std::current_exception();
      abort = true;
    }
  };

  const int workers =
      std::max(1, std::min<int>(config.max_parallel_requests, static_cast<int>(pending.size())));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  if (fatal) std::rethrow_exception(fatal);

  std::sort(summary.failures.begin(), summary.failures.end(),
            [](const CellFailure& a, const CellFailure& b) {
              return cache_key(a.cell) < cache_key(b.cell);
            });
  summary.fetched = fetched.load();
  return summary;
}

}  // namespace semleak
