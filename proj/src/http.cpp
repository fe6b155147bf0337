#include "semleak/http.hpp"

#include <cstdlib>

#include "httplib.h"
#include "semleak/errors.hpp"

namespace semleak::http {

Endpoint parse_endpoint(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("url needs a scheme: " + base_url);
  }
  const std::string scheme = base_url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported url scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.origin = base_url;
  } else {
    ep.origin = base_url.substr(0, path_start);
    ep.path_prefix = base_url.substr(path_start);
  }
  while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
  if (ep.origin.size() <= scheme_end + 3) {
    throw ConfigError("url has no host: " + base_url);
  }
  return ep;
}

Response post_json(const Endpoint& endpoint, const std::string& path, const nlohmann::json& body,
                   const Headers& headers, std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto result = client.Post(endpoint.path_prefix + path, h, body.dump(), "application/json");
  if (!result) {
    throw TransportError("POST " + endpoint.origin + endpoint.path_prefix + path + ": " +
                         httplib::to_string(result.error()));
  }
  return Response{result->status, result->body};
}

Headers bearer_headers(const std::string& token_env) {
  if (token_env.empty()) return {};
  const char* token = std::getenv(token_env.c_str());
  if (token == nullptr || *token == '\0') {
    throw AuthError("environment variable " + token_env + " is not set");
  }
  return {{"Authorization", std::string("Bearer ") + token}};
}

bool is_retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace semleak::http
