#include "semleak/annotation_server.hpp"

#include <fstream>

#include "httplib.h"
#include "semleak/errors.hpp"

namespace semleak {

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::size_t SessionStore::load_all() {
  if (dir_.empty()) return 0;
  std::size_t loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    add(load(entry.path()));
    ++loaded;
  }
  return loaded;
}

void SessionStore::add(AnnotationSession session) {
  auto slot = std::make_shared<Slot>();
  const std::string id = session.id();
  slot->session = std::move(session);
  {
    std::lock_guard lock(mu_);
    sessions_[id] = slot;
  }
  checkpoint(slot->session);
}

bool SessionStore::has(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return sessions_.contains(session_id);
}

std::shared_ptr<SessionStore::Slot> SessionStore::find(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw UnknownSessionError("unknown session '" + session_id + "'");
  return it->second;
}

Progress SessionStore::submit_label(const std::string& session_id, const std::string& item_id,
                                    const std::string& annotator_id, AnnotatorLabel label) {
  auto slot = find(session_id);
  std::unique_lock lock(slot->mu);
  const Progress p = slot->session.submit_label(item_id, annotator_id, label);
  checkpoint(slot->session);
  return p;
}

void SessionStore::checkpoint(const AnnotationSession& session) const {
  if (dir_.empty()) return;
  save(session, dir_ / (session.id() + ".json"));
}

void SessionStore::save(const AnnotationSession& session, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write session file " + tmp);
    out << session.to_json().dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

AnnotationSession SessionStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open session file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw AnnotationError(path.string() + ": " + e.what());
  }
  return AnnotationSession::from_json(j);
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

nlohmann::json progress_json(const Progress& p) {
  return {{"labeled", p.labeled}, {"total", p.total}};
}

}  // namespace

AnnotationServer::AnnotationServer(std::shared_ptr<SessionStore> store,
                                   std::filesystem::path static_dir)
    : store_(std::move(store)), server_(std::make_unique<httplib::Server>()) {
  if (!static_dir.empty()) server_->set_mount_point("/", static_dir.string());
  install_routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::install_routes() {
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server_->Options(R"(/sessions/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  server_->Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
    const std::string session_id = req.matches[1];
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "missing annotator parameter");
    try {
      auto body = store_->read(session_id, [&](const AnnotationSession& s) {
        auto next = s.next_item(annotator);
        if (!next) {
          return nlohmann::json{{"done", true}, {"progress", progress_json(s.progress(annotator))}};
        }
        return nlohmann::json{{"done", false},
                              {"item", blinded_view(*next->first, next->second, s.items().size())}};
      });
      send_json(res, 200, body);
    } catch (const UnknownSessionError& e) {
      send_error(res, 404, e.what());
    }
  });

  server_->Post(R"(/sessions/([^/]+)/labels)", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
    const std::string session_id = req.matches[1];
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      return send_error(res, 400, "body must be JSON");
    }
    if (!body.is_object() || !body.contains("item_id") || !body.contains("annotator_id") ||
        !body.contains("label") || !body["item_id"].is_string() ||
        !body["annotator_id"].is_string() || !body["label"].is_string()) {
      return send_error(res, 400, "expected {item_id, annotator_id, label}");
    }
    try {
      const auto label = parse_annotator_label(body["label"].get<std::string>());
      const auto p = store_->submit_label(session_id, body["item_id"].get<std::string>(),
                                          body["annotator_id"].get<std::string>(), label);
      send_json(res, 200, {{"accepted", true}, {"progress", progress_json(p)}});
    } catch (const UnknownSessionError& e) {
      send_error(res, 404, e.what());
    } catch (const UnknownItemError& e) {
      send_error(res, 404, e.what());
    } catch (const DuplicateLabelError& e) {
      send_json(res, 409, {{"accepted", false}, {"error", e.what()}});
    } catch (const AnnotationError& e) {
      send_error(res, 400, e.what());
    }
  });

  server_->Get(R"(/sessions/([^/]+)/progress)", [this](const httplib::Request& req,
                                                       httplib::Response& res) {
    const std::string session_id = req.matches[1];
    const std::string annotator = req.get_param_value("annotator");
    try {
      auto body = store_->read(session_id, [&](const AnnotationSession& s) {
        if (!annotator.empty()) {
          auto j = progress_json(s.progress(annotator));
          j["annotator_id"] = annotator;
          return j;
        }
        nlohmann::json per = nlohmann::json::object();
        for (const auto& a : s.annotators()) per[a] = progress_json(s.progress(a));
        return nlohmann::json{{"total", s.items().size()}, {"annotators", per}};
      });
      send_json(res, 200, body);
    } catch (const UnknownSessionError& e) {
      send_error(res, 404, e.what());
    }
  });
}

int AnnotationServer::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  if (port_ <= 0) throw Error("cannot bind annotation server on " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void AnnotationServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void AnnotationServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace semleak
