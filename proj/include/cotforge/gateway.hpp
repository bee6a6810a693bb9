#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace cotforge {

using json = nlohmann::json;

/// Decoding parameters for one request. Evaluation uses temperature 0.1 and
/// 512 new tokens; evolution and judging defaults live in the config.
struct GenerationParams {
  double temperature = 0.1;
  int max_new_tokens = 512;
  std::vector<std::string> stop_sequences;

  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

json to_json(const GenerationParams& p);
GenerationParams params_from_json(const json& j, GenerationParams defaults = {});

enum class FailureClass {
  rate_limited,
  server_error,
  timeout,
  connection_failure,
  bad_request,
  auth,
  protocol_error,
  no_rule,
};

std::string_view to_string(FailureClass f);
std::optional<FailureClass> parse_failure_class(std::string_view name);

class BackendError : public std::runtime_error {
 public:
  BackendError(FailureClass failure, const std::string& what, int attempts = 1)
      : std::runtime_error(what), failure_(failure), attempts_(attempts) {}
  FailureClass failure() const { return failure_; }
  int attempts() const { return attempts_; }

 private:
  FailureClass failure_;
  int attempts_;
};

/// A text-generation provider. One call is one wire request; failures are
/// reported as BackendError with attempts() == 1.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& name() const = 0;
  virtual std::string complete(const std::string& prompt, const GenerationParams& params) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_backoff{500};
  double backoff_multiplier = 2.0;
  std::set<FailureClass> retryable{FailureClass::rate_limited, FailureClass::server_error,
                                   FailureClass::timeout, FailureClass::connection_failure};

  void validate() const;
  bool is_retryable(FailureClass f) const { return retryable.count(f) > 0; }
  /// Delay slept after failed attempt `attempt` (1-based) before the next one.
  std::chrono::milliseconds backoff_after(int attempt) const;
};

RetryPolicy retry_policy_from_json(const json& j);

/// One wire attempt. Every attempt is logged, failed ones included.
struct BackendExchange {
  std::string backend_name;
  std::string prompt;
  GenerationParams params;
  std::optional<std::string> response;
  std::optional<FailureClass> failure;
  std::string error;
  int attempts = 1;
  std::chrono::microseconds latency{0};
  std::chrono::system_clock::time_point timestamp;
};

json to_json(const BackendExchange& e);
BackendExchange exchange_from_json(const json& j);

/// Append-only exchange record sink, optionally mirrored to a JSON-lines file.
class ExchangeLog {
 public:
  ExchangeLog() = default;
  explicit ExchangeLog(std::filesystem::path file) : file_(std::move(file)) {}

  void record(const BackendExchange& exchange);
  std::size_t size() const;
  std::vector<BackendExchange> records() const;

 private:
  mutable std::mutex mu_;
  std::optional<std::filesystem::path> file_;
  std::vector<BackendExchange> records_;
};

/// Requests-per-minute admission control. A rate of 0 disables limiting.
class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;
  using Sleeper = std::function<void(std::chrono::nanoseconds)>;

  explicit TokenBucket(double requests_per_minute, double burst = 1.0);

  /// Blocks until a token is available.
  void acquire();
  /// Takes a token at time `now` and returns how long the caller must wait
  /// before using it. Exposed for deterministic tests.
  std::chrono::nanoseconds reserve(Clock::time_point now);

  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

 private:
  std::mutex mu_;
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  std::optional<Clock::time_point> last_;
  Sleeper sleeper_;
};

/// Bounds the number of wire requests in flight across every client sharing it.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int max_in_flight);
  void acquire() { sem_.acquire(); }
  void release() { sem_.release(); }
  int limit() const { return limit_; }

 private:
  int limit_;
  std::counting_semaphore<> sem_;
};

/// Retrying, rate-limited, logged access to one backend. Safe for concurrent use.
class LlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  LlmClient(std::shared_ptr<Backend> backend, RetryPolicy policy,
            std::shared_ptr<ExchangeLog> log = nullptr, std::shared_ptr<TokenBucket> bucket = nullptr,
            std::shared_ptr<InFlightLimiter> limiter = nullptr);

  struct Outcome {
    std::string text;
    int attempts = 0;
    /// Every wire attempt made for this call, failed ones included.
    std::vector<BackendExchange> exchanges;
  };

  /// Throws BackendError carrying the last failure class once retries are
  /// exhausted or on the first non-retryable failure.
  Outcome generate_detailed(const std::string& prompt, const GenerationParams& params);
  std::string generate(const std::string& prompt, const GenerationParams& params) {
    return generate_detailed(prompt, params).text;
  }

  const std::string& name() const { return backend_->name(); }
  Backend& backend() { return *backend_; }
  const RetryPolicy& policy() const { return policy_; }
  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

 private:
  std::shared_ptr<Backend> backend_;
  RetryPolicy policy_;
  std::shared_ptr<ExchangeLog> log_;
  std::shared_ptr<TokenBucket> bucket_;
  std::shared_ptr<InFlightLimiter> limiter_;
  Sleeper sleeper_;
};

using ClientHandle = std::shared_ptr<LlmClient>;

/// Three judges queried with the same prompt. A member whose request fails
/// hard yields std::nullopt (an abstention) instead of failing the panel.
class JudgePanel {
 public:
  static constexpr std::size_t kSize = 3;
  using Responses = std::array<std::optional<std::string>, kSize>;

  /// Throws ConfigError unless exactly three members are given.
  explicit JudgePanel(std::vector<ClientHandle> members);

  /// Members are queried concurrently; results come back in member order.
  Responses ask(const std::string& prompt, const GenerationParams& params) const;

  const std::array<ClientHandle, kSize>& members() const { return members_; }

 private:
  std::array<ClientHandle, kSize> members_;
};

}  // namespace cotforge
