#pragma once

#include <chrono>
#include <string>

#include "cotforge/gateway.hpp"

namespace cotforge {

struct HttpBackendConfig {
  std::string name;
  /// e.g. "https://api.openai.com/v1"; requests go to <base_url>/chat/completions.
  std::string base_url;
  std::string model;
  /// Environment variable holding the bearer credential. Empty: no auth header.
  std::string api_key_env;
  std::chrono::seconds timeout{120};
};

/// Chat-completion client speaking the OpenAI-compatible wire format.
///
/// Status mapping: 429 -> rate_limited, 5xx -> server_error, 401/403 -> auth,
/// other 4xx -> bad_request, transport read/connect timeouts -> timeout,
/// refused or reset connections -> connection_failure, unparseable bodies ->
/// protocol_error.
class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

  const std::string& name() const override { return config_.name; }
  std::string complete(const std::string& prompt, const GenerationParams& params) override;

  /// Request body for one prompt; exposed for wire-format tests.
  json request_body(const std::string& prompt, const GenerationParams& params) const;

 private:
  HttpBackendConfig config_;
  std::string origin_;
  std::string path_prefix_;
};

}  // namespace cotforge
