#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>

#include "semleak/humaneval.hpp"

namespace httplib {
class Server;
}

namespace semleak {

// Holds sessions, one lock per session. When a directory is set every
// accepted label checkpoints the session to <dir>/<session_id>.json.
class SessionStore {
 public:
  SessionStore() = default;
  explicit SessionStore(std::filesystem::path dir);

  // Loads every *.json session in the directory.
  std::size_t load_all();
  void add(AnnotationSession session);
  bool has(const std::string& session_id) const;

  // Runs `fn` on the session under a shared lock.
  template <typename Fn>
  auto read(const std::string& session_id, Fn&& fn) const {
    auto slot = find(session_id);
    std::shared_lock lock(slot->mu);
    return fn(static_cast<const AnnotationSession&>(slot->session));
  }

  Progress submit_label(const std::string& session_id, const std::string& item_id,
                        const std::string& annotator_id, AnnotatorLabel label);

  static void save(const AnnotationSession& session, const std::filesystem::path& path);
  static AnnotationSession load(const std::filesystem::path& path);

 private:
  struct Slot {
    mutable std::shared_mutex mu;
    AnnotationSession session;
  };

  std::shared_ptr<Slot> find(const std::string& session_id) const;
  void checkpoint(const AnnotationSession& session) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

// HTTP API:
//   GET  /sessions/{id}/next?annotator=ID
//   POST /sessions/{id}/labels   {item_id, annotator_id, label}
//   GET  /sessions/{id}/progress[?annotator=ID]
class AnnotationServer {
 public:
  explicit AnnotationServer(std::shared_ptr<SessionStore> store,
                            std::filesystem::path static_dir = {});
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  std::shared_ptr<SessionStore> store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace semleak
