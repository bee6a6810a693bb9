#include "cotforge/http_backend.hpp"

#include <cstdlib>
#include <regex>

#include "cotforge/errors.hpp"
#include "httplib.h"

namespace cotforge {

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.base_url, m, kUrl))
    throw ConfigError("backend '" + config_.name + "': invalid base_url '" + config_.base_url + "'");
  origin_ = m[1].str();
  path_prefix_ = m[2].matched ? m[2].str() : "";
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json HttpChatBackend::request_body(const std::string& prompt, const GenerationParams& params) const {
  json body{{"model", config_.model},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", params.temperature},
            {"max_tokens", params.max_new_tokens}};
  if (!params.stop_sequences.empty()) body["stop"] = params.stop_sequences;
  return body;
}

std::string HttpChatBackend::complete(const std::string& prompt, const GenerationParams& params) {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(config_.timeout);
  cli.set_read_timeout(config_.timeout);
  cli.set_write_timeout(config_.timeout);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key)
      throw BackendError(FailureClass::auth, "credential variable " + config_.api_key_env + " is unset");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto res = cli.Post(path_prefix_ + "/chat/completions", headers,
                      request_body(prompt, params).dump(), "application/json");
  if (!res) {
    auto err = res.error();
    const std::string what = "transport error: " + httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw BackendError(FailureClass::timeout, what);
    throw BackendError(FailureClass::connection_failure, what);
  }

  const int status = res->status;
  if (status == 429) throw BackendError(FailureClass::rate_limited, "HTTP 429");
  if (status >= 500) throw BackendError(FailureClass::server_error, "HTTP " + std::to_string(status));
  if (status == 401 || status == 403) throw BackendError(FailureClass::auth, "HTTP " + std::to_string(status));
  if (status >= 400) {
    throw BackendError(FailureClass::bad_request,
                       "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
  }

  try {
    json reply = json::parse(res->body);
    const json& choice = reply.at("choices").at(0);
    if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(FailureClass::protocol_error, std::string("unexpected response body: ") + e.what());
  }
}

}  // namespace cotforge
