#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "semleak/mockbench.hpp"
#include "semleak/suite.hpp"

namespace httplib {
class Server;
}

namespace semleak {

struct StubChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 0;
  std::string authorization;
};

struct StubReply {
  int status = 200;
  std::string content;
  // Respond 200 with no message content at all.
  bool omit_content = false;
};

using StubResponder = std::function<StubReply(const StubChatRequest&)>;

// Speaks POST /v1/chat/completions on 127.0.0.1. Counts requests and tracks
// the peak number of in-flight requests.
class StubModelServer {
 public:
  explicit StubModelServer(StubResponder responder,
                           std::chrono::milliseconds latency = std::chrono::milliseconds(0));
  ~StubModelServer();

  StubModelServer(const StubModelServer&) = delete;
  StubModelServer& operator=(const StubModelServer&) = delete;

  int start(int port = 0);
  void listen(const std::string& host, int port);
  void stop();

  // "http://127.0.0.1:<port>/v1"
  std::string base_url() const;
  int port() const { return port_; }
  int request_count() const { return requests_.load(); }
  int peak_in_flight() const { return peak_in_flight_.load(); }

 private:
  StubResponder responder_;
  std::chrono::milliseconds latency_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_in_flight_{0};
};

// Responder that plays the mock model: looks the prompt up in `suite`
// (ignoring the completion prefix) and answers with mock_generate. The
// sample index is the arrival count for that (prompt, temperature).
StubResponder mock_model_responder(const PromptSuite& suite, MockLeakConfig config);

// Serves /v1/embeddings and /v1/token_embeddings with hash_* vectors.
class StubEmbeddingServer {
 public:
  explicit StubEmbeddingServer(std::size_t dimension = 64);
  ~StubEmbeddingServer();

  StubEmbeddingServer(const StubEmbeddingServer&) = delete;
  StubEmbeddingServer& operator=(const StubEmbeddingServer&) = delete;

  int start(int port = 0);
  void listen(const std::string& host, int port);
  void stop();

  std::string base_url() const;
  int request_count() const { return requests_.load(); }
  // Makes the next `n` requests fail with 500.
  void fail_next(int n) { fail_remaining_ = n; }

 private:
  void install_routes();

  std::size_t dimension_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> fail_remaining_{0};
};

}  // namespace semleak
