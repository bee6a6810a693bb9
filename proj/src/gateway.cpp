#include "cotforge/gateway.hpp"

#include <cmath>
#include <ctime>
#include <future>
#include <thread>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"

namespace cotforge {

namespace {

constexpr std::string_view kFailureNames[] = {"rate_limited", "server_error", "timeout",
                                              "connection_failure", "bad_request", "auth",
                                              "protocol_error", "no_rule"};

std::string iso8601(std::chrono::system_clock::time_point tp) {
  using namespace std::chrono;
  auto ms = duration_cast<milliseconds>(tp.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
  return out;
}

std::chrono::system_clock::time_point parse_iso8601(const std::string& s) {
  std::tm tm{};
  int millis = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d.%dZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                  &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &millis) < 6)
    return {};
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return std::chrono::system_clock::from_time_t(timegm(&tm)) + std::chrono::milliseconds(millis);
}

}  // namespace

void GenerationParams::validate() const {
  if (!std::isfinite(temperature) || temperature < 0)
    throw ConfigError("temperature must be finite and >= 0");
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
}

json to_json(const GenerationParams& p) {
  return json{{"temperature", p.temperature},
              {"max_new_tokens", p.max_new_tokens},
              {"stop_sequences", p.stop_sequences}};
}

GenerationParams params_from_json(const json& j, GenerationParams p) {
  if (!j.is_object()) throw ConfigError("decoding parameters must be an object");
  if (j.contains("temperature")) p.temperature = j.at("temperature").get<double>();
  if (j.contains("max_new_tokens")) p.max_new_tokens = j.at("max_new_tokens").get<int>();
  if (j.contains("stop_sequences"))
    p.stop_sequences = j.at("stop_sequences").get<std::vector<std::string>>();
  p.validate();
  return p;
}

std::string_view to_string(FailureClass f) { return kFailureNames[static_cast<int>(f)]; }

std::optional<FailureClass> parse_failure_class(std::string_view name) {
  for (int i = 0; i < static_cast<int>(std::size(kFailureNames)); ++i)
    if (kFailureNames[i] == name) return static_cast<FailureClass>(i);
  return std::nullopt;
}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  if (base_backoff.count() < 0) throw ConfigError("retry.base_backoff_ms must be >= 0");
  if (!(backoff_multiplier >= 1.0)) throw ConfigError("retry.backoff_multiplier must be >= 1");
}

std::chrono::milliseconds RetryPolicy::backoff_after(int attempt) const {
  double ms = static_cast<double>(base_backoff.count()) *
              std::pow(backoff_multiplier, static_cast<double>(attempt - 1));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

RetryPolicy retry_policy_from_json(const json& j) {
  RetryPolicy p;
  if (j.contains("max_attempts")) p.max_attempts = j.at("max_attempts").get<int>();
  if (j.contains("base_backoff_ms"))
    p.base_backoff = std::chrono::milliseconds(j.at("base_backoff_ms").get<long long>());
  if (j.contains("backoff_multiplier")) p.backoff_multiplier = j.at("backoff_multiplier").get<double>();
  if (j.contains("retryable")) {
    p.retryable.clear();
    for (const auto& name : j.at("retryable")) {
      auto f = parse_failure_class(name.get<std::string>());
      if (!f) throw ConfigError("unknown failure class '" + name.get<std::string>() + "'");
      p.retryable.insert(*f);
    }
  }
  p.validate();
  return p;
}

json to_json(const BackendExchange& e) {
  json j{{"backend_name", e.backend_name},
         {"prompt", e.prompt},
         {"params", to_json(e.params)},
         {"response", e.response ? json(*e.response) : json(nullptr)},
         {"failure", e.failure ? json(std::string(to_string(*e.failure))) : json(nullptr)},
         {"attempts", e.attempts},
         {"latency_us", e.latency.count()},
         {"timestamp", iso8601(e.timestamp)}};
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

BackendExchange exchange_from_json(const json& j) {
  BackendExchange e;
  e.backend_name = j.at("backend_name").get<std::string>();
  e.prompt = j.at("prompt").get<std::string>();
  e.params = params_from_json(j.at("params"));
  if (!j.at("response").is_null()) e.response = j.at("response").get<std::string>();
  if (j.contains("failure") && !j.at("failure").is_null())
    e.failure = parse_failure_class(j.at("failure").get<std::string>());
  e.error = j.value("error", "");
  e.attempts = j.at("attempts").get<int>();
  e.latency = std::chrono::microseconds(j.value("latency_us", 0LL));
  e.timestamp = parse_iso8601(j.value("timestamp", ""));
  return e;
}

void ExchangeLog::record(const BackendExchange& exchange) {
  std::lock_guard lock(mu_);
  if (file_) io::append_line(*file_, to_json(exchange).dump());
  records_.push_back(exchange);
}

std::size_t ExchangeLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::vector<BackendExchange> ExchangeLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

TokenBucket::TokenBucket(double requests_per_minute, double burst)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      sleeper_([](std::chrono::nanoseconds d) { std::this_thread::sleep_for(d); }) {
  if (requests_per_minute < 0) throw ConfigError("requests_per_minute must be >= 0");
}

std::chrono::nanoseconds TokenBucket::reserve(Clock::time_point now) {
  std::lock_guard lock(mu_);
  if (rate_per_sec_ <= 0) return std::chrono::nanoseconds(0);
  if (last_) {
    double elapsed = std::chrono::duration<double>(now - *last_).count();
    if (elapsed > 0) tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
  }
  if (!last_ || now > *last_) last_ = now;
  // Tokens may go negative: each waiter queues behind the previous reservation.
  tokens_ -= 1.0;
  if (tokens_ >= 0) return std::chrono::nanoseconds(0);
  double wait_sec = -tokens_ / rate_per_sec_;
  return std::chrono::nanoseconds(static_cast<long long>(wait_sec * 1e9));
}

void TokenBucket::acquire() {
  auto wait = reserve(Clock::now());
  if (wait.count() > 0) sleeper_(wait);
}

InFlightLimiter::InFlightLimiter(int max_in_flight)
    : limit_(max_in_flight), sem_(std::max(1, max_in_flight)) {
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

LlmClient::LlmClient(std::shared_ptr<Backend> backend, RetryPolicy policy,
                     std::shared_ptr<ExchangeLog> log, std::shared_ptr<TokenBucket> bucket,
                     std::shared_ptr<InFlightLimiter> limiter)
    : backend_(std::move(backend)),
      policy_(std::move(policy)),
      log_(log ? std::move(log) : std::make_shared<ExchangeLog>()),
      bucket_(std::move(bucket)),
      limiter_(std::move(limiter)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (!backend_) throw ConfigError("client requires a backend");
  policy_.validate();
}

LlmClient::Outcome LlmClient::generate_detailed(const std::string& prompt,
                                                const GenerationParams& params) {
  if (prompt.empty()) throw ConfigError("prompt must be non-empty");
  params.validate();

  std::vector<BackendExchange> trail;
  for (int attempt = 1;; ++attempt) {
    if (bucket_) bucket_->acquire();
    BackendExchange ex;
    ex.backend_name = backend_->name();
    ex.prompt = prompt;
    ex.params = params;
    ex.attempts = attempt;
    ex.timestamp = std::chrono::system_clock::now();
    auto start = std::chrono::steady_clock::now();

    std::optional<BackendError> failure;
    if (limiter_) limiter_->acquire();
    try {
      ex.response = backend_->complete(prompt, params);
    } catch (const BackendError& e) {
      failure = e;
    } catch (...) {
      if (limiter_) limiter_->release();
      throw;
    }
    if (limiter_) limiter_->release();

    ex.latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
    if (failure) {
      ex.failure = failure->failure();
      ex.error = failure->what();
    }
    log_->record(ex);
    trail.push_back(ex);

    if (!failure) return Outcome{std::move(*ex.response), attempt, std::move(trail)};
    if (!policy_.is_retryable(failure->failure()) || attempt >= policy_.max_attempts) {
      throw BackendError(failure->failure(),
                         backend_->name() + ": " + failure->what() + " (after " +
                             std::to_string(attempt) + " attempt" + (attempt == 1 ? "" : "s") + ")",
                         attempt);
    }
    auto delay = policy_.backoff_after(attempt);
    if (delay.count() > 0) sleeper_(delay);
  }
}

JudgePanel::JudgePanel(std::vector<ClientHandle> members) {
  if (members.size() != kSize)
    throw ConfigError("judge panel needs exactly 3 members, got " + std::to_string(members.size()));
  for (std::size_t i = 0; i < kSize; ++i) {
    if (!members[i]) throw ConfigError("judge panel member is null");
    members_[i] = std::move(members[i]);
  }
}

JudgePanel::Responses JudgePanel::ask(const std::string& prompt,
                                      const GenerationParams& params) const {
  std::array<std::future<std::optional<std::string>>, kSize> pending;
  for (std::size_t i = 0; i < kSize; ++i) {
    pending[i] = std::async(std::launch::async, [&, i]() -> std::optional<std::string> {
      try {
        return members_[i]->generate(prompt, params);
      } catch (const BackendError&) {
        return std::nullopt;
      }
    });
  }
  Responses out;
  for (std::size_t i = 0; i < kSize; ++i) out[i] = pending[i].get();
  return out;
}

}  // namespace cotforge
