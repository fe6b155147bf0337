#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace semleak::http {

// "https://api.example.com/v1" -> {"https://api.example.com", "/v1"}.
struct Endpoint {
  std::string origin;
  std::string path_prefix;
};

Endpoint parse_endpoint(const std::string& base_url);

struct Response {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// POSTs a JSON body to origin + path_prefix + path. Throws TransportError
// when no HTTP response was received.
Response post_json(const Endpoint& endpoint, const std::string& path, const nlohmann::json& body,
                   const Headers& headers, std::chrono::milliseconds timeout);

// Reads a bearer token from the named environment variable. Empty name means
// no auth header. A named-but-unset variable throws AuthError.
Headers bearer_headers(const std::string& token_env);

bool is_retryable_status(int status);

}  // namespace semleak::http
