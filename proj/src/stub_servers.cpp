#include "semleak/stub_servers.hpp"

#include <algorithm>

#include "httplib.h"
#include "semleak/embedding_client.hpp"
#include "semleak/errors.hpp"
#include "semleak/generation.hpp"
#include "semleak/text.hpp"

namespace semleak {

namespace {

int bind_and_serve(httplib::Server& server, std::thread& thread, int port) {
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port("127.0.0.1");
  } else if (!server.bind_to_port("127.0.0.1", port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error("stub server cannot bind");
  thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return bound;
}

}  // namespace

StubModelServer::StubModelServer(StubResponder responder, std::chrono::milliseconds latency)
    : responder_(std::move(responder)),
      latency_(latency),
      server_(std::make_unique<httplib::Server>()) {
  server_->Post("/v1/chat/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
    const int now = ++in_flight_;
    int peak = peak_in_flight_.load();
    while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
    }
    ++requests_;
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

    StubReply reply;
    try {
      const auto body = nlohmann::json::parse(req.body);
      StubChatRequest request;
      request.model = body.value("model", std::string());
      request.temperature = body.value("temperature", 0.0);
      request.max_tokens = body.value("max_tokens", 0);
      request.authorization = req.get_header_value("Authorization");
      const auto& messages = body.at("messages");
      if (!messages.empty()) request.prompt = messages.back().value("content", std::string());
      reply = responder_(request);
    } catch (const std::exception& e) {
      reply = StubReply{400, e.what(), false};
    }

    if (reply.status != 200) {
      res.status = reply.status;
      res.set_content(nlohmann::json{{"error", {{"message", reply.content}}}}.dump(),
                      "application/json");
    } else {
      nlohmann::json message = {{"role", "assistant"}};
      if (!reply.omit_content) message["content"] = reply.content;
      res.set_content(nlohmann::json{{"object", "chat.completion"},
                                     {"choices", nlohmann::json::array({{{"index", 0},
                                                                         {"message", message},
                                                                         {"finish_reason", "stop"}}})}}
                          .dump(),
                      "application/json");
    }
    --in_flight_;
  });
}

StubModelServer::~StubModelServer() { stop(); }

int StubModelServer::start(int port) {
  port_ = bind_and_serve(*server_, thread_, port);
  return port_;
}

void StubModelServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port)) throw Error("stub model server cannot listen");
}

void StubModelServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubModelServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
}

StubResponder mock_model_responder(const PromptSuite& suite, MockLeakConfig config) {
  struct State {
    std::mutex mu;
    std::map<std::string, std::pair<const PromptInstance*, Variant>> by_prompt;
    std::map<std::string, int> arrivals;
    PromptSuite suite;
  };
  auto state = std::make_shared<State>();
  state->suite = suite;
  for (const auto& instance : state->suite.instances) {
    state->by_prompt.try_emplace(instance.test_prompt, &instance, Variant::kTest);
    state->by_prompt.try_emplace(instance.control_prompt, &instance, Variant::kControl);
  }
  return [state, config](const StubChatRequest& request) {
    std::string prompt = request.prompt;
    if (prompt.starts_with(kCompletionPrefix)) prompt = prompt.substr(kCompletionPrefix.size());
    auto it = state->by_prompt.find(prompt);
    if (it == state->by_prompt.end()) return StubReply{200, "I am not sure.", false};
    int sample = 0;
    {
      std::lock_guard lock(state->mu);
      sample = state->arrivals[prompt + "|" + text::format_number(request.temperature)]++;
    }
    const auto& [instance, variant] = it->second;
    return StubReply{200, mock_generate(*instance, variant, config, request.temperature, sample),
                     false};
  };
}

StubEmbeddingServer::StubEmbeddingServer(std::size_t dimension)
    : dimension_(dimension), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

StubEmbeddingServer::~StubEmbeddingServer() { stop(); }

void StubEmbeddingServer::install_routes() {
  auto failing = [this](httplib::Response& res) {
    ++requests_;
    int remaining = fail_remaining_.load();
    while (remaining > 0 && !fail_remaining_.compare_exchange_weak(remaining, remaining - 1)) {
    }
    if (remaining > 0) {
      res.status = 500;
      res.set_content(R"({"error":{"message":"injected failure"}})", "application/json");
      return true;
    }
    return false;
  };

  server_->Post("/v1/embeddings", [this, failing](const httplib::Request& req,
                                                  httplib::Response& res) {
    if (failing(res)) return;
    try {
      const auto body = nlohmann::json::parse(req.body);
      const std::string model = body.at("model").get<std::string>();
      std::vector<std::string> inputs;
      if (body.at("input").is_string()) {
        inputs.push_back(body["input"].get<std::string>());
      } else {
        inputs = body.at("input").get<std::vector<std::string>>();
      }
      nlohmann::json data = nlohmann::json::array();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto v = hash_sentence_embedding(model, inputs[i], dimension_);
        data.push_back({{"object", "embedding"},
                        {"index", i},
                        {"embedding", std::vector<double>(v.values().begin(), v.values().end())}});
      }
      res.set_content(nlohmann::json{{"object", "list"}, {"data", data}, {"model", model}}.dump(),
                      "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", {{"message", e.what()}}}}.dump(), "application/json");
    }
  });

  server_->Post("/v1/token_embeddings", [this, failing](const httplib::Request& req,
                                                        httplib::Response& res) {
    if (failing(res)) return;
    try {
      const auto body = nlohmann::json::parse(req.body);
      const auto t = hash_token_embeddings(body.at("model").get<std::string>(),
                                           body.at("input").get<std::string>(), dimension_);
      res.set_content(token_embeddings_to_json(t).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", {{"message", e.what()}}}}.dump(), "application/json");
    }
  });
}

int StubEmbeddingServer::start(int port) {
  port_ = bind_and_serve(*server_, thread_, port);
  return port_;
}

void StubEmbeddingServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port)) throw Error("stub embedding server cannot listen");
}

void StubEmbeddingServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubEmbeddingServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
}

}  // namespace semleak
