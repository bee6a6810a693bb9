#include "cotforge/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "cotforge/errors.hpp"
#include "cotforge/http_backend.hpp"
#include "cotforge/io.hpp"
#include "cotforge/scripted_backend.hpp"

namespace cotforge {

namespace {

constexpr const char* kRoleNames[] = {"general_public", "scientist", "mathematician", "judge"};

template <typename T>
T field(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

BackendProfile profile_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("backend entries must be objects");
  BackendProfile p;
  p.name = field<std::string>(j, "name", "");
  p.kind = field<std::string>(j, "kind", "http");
  p.base_url = field<std::string>(j, "base_url", "");
  p.model = field<std::string>(j, "model", "");
  p.api_key_env = field<std::string>(j, "api_key_env", "");
  p.requests_per_minute = field<double>(j, "requests_per_minute", 0.0);
  p.timeout_seconds = field<int>(j, "timeout_seconds", 120);
  if (j.contains("script")) p.script = j.at("script");
  if (j.contains("script_file")) {
    auto path = std::filesystem::path(j.at("script_file").get<std::string>());
    if (path.is_relative()) path = base_dir / path;
    try {
      p.script = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }
  return p;
}

json profile_to_json(const BackendProfile& p) {
  json j{{"name", p.name}, {"kind", p.kind}, {"requests_per_minute", p.requests_per_minute}};
  if (p.kind == "http") {
    j["base_url"] = p.base_url;
    j["model"] = p.model;
    j["api_key_env"] = p.api_key_env;
    j["timeout_seconds"] = p.timeout_seconds;
  } else {
    j["script"] = p.script;
  }
  return j;
}

json retry_to_json(const RetryPolicy& r) {
  json classes = json::array();
  for (auto f : r.retryable) classes.push_back(to_string(f));
  return json{{"max_attempts", r.max_attempts},
              {"base_backoff_ms", r.base_backoff.count()},
              {"backoff_multiplier", r.backoff_multiplier},
              {"retryable", classes}};
}

}  // namespace

const BackendProfile* PipelineConfig::find_backend(const std::string& name) const {
  for (const auto& b : backends)
    if (b.name == name) return &b;
  return nullptr;
}

void PipelineConfig::validate() const {
  std::set<std::string> names;
  for (const auto& b : backends) {
    if (b.name.empty()) throw ConfigError("every backend needs a name");
    if (!names.insert(b.name).second) throw ConfigError("duplicate backend name '" + b.name + "'");
    if (b.kind == "http") {
      if (b.base_url.empty() || b.model.empty())
        throw ConfigError("http backend '" + b.name + "' needs base_url and model");
    } else if (b.kind == "scripted") {
      if (!b.script.is_object()) throw ConfigError("scripted backend '" + b.name + "' needs a script");
    } else {
      throw ConfigError("backend '" + b.name + "' has unknown kind '" + b.kind + "'");
    }
    if (b.requests_per_minute < 0 || !std::isfinite(b.requests_per_minute))
      throw ConfigError("backend '" + b.name + "' has an invalid requests_per_minute");
    if (b.timeout_seconds < 1) throw ConfigError("backend '" + b.name + "' has an invalid timeout");
  }
  auto require = [&](const std::string& name, const std::string& what) {
    if (!names.count(name)) throw ConfigError(what + " refers to unknown backend '" + name + "'");
  };
  if (!generator.empty()) require(generator, "generator");
  if (!panel.empty() && panel.size() != 3)
    throw ConfigError("panel must have exactly 3 members, got " + std::to_string(panel.size()));
  for (const auto& m : panel) require(m, "panel");
  if (!correctness_panel.empty()) {
    if (correctness_panel.size() != 3) throw ConfigError("correctness_panel must have exactly 3 members");
    for (const auto& m : correctness_panel) require(m, "correctness_panel");
  }
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  for (const auto& [role, backend] : debate_agents) {
    if (!parse_role(role)) throw ConfigError("unknown debate role '" + role + "'");
    require(backend, "debate agent " + role);
  }
  if (debate_max_rounds < 1 || debate_max_steps < 1) throw ConfigError("debate limits must be >= 1");
  evolution.validate();
  judging.validate();
  evaluation.validate();
  retry.validate();
}

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  for (const auto& b : j.value("backends", json::array())) c.backends.push_back(profile_from_json(b, base_dir));
  c.generator = field<std::string>(j, "generator", "");
  c.panel = field<std::vector<std::string>>(j, "panel", {});
  c.correctness_panel = field<std::vector<std::string>>(j, "correctness_panel", {});
  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : j.at("strategies")) {
      auto st = parse_strategy(s.get<std::string>());
      if (!st) throw ConfigError("unknown strategy '" + s.get<std::string>() + "'");
      c.strategies.push_back(*st);
    }
  }
  c.rounds = field<int>(j, "rounds", 4);
  c.seed = field<std::uint64_t>(j, "seed", 0);
  const std::string mode = field<std::string>(j, "round_input", "previous");
  if (mode == "previous")
    c.round_input = RoundInput::previous;
  else if (mode == "cumulative")
    c.round_input = RoundInput::cumulative;
  else
    throw ConfigError("round_input must be 'previous' or 'cumulative'");
  const json decoding = j.value("decoding", json::object());
  try {
    c.evolution = params_from_json(decoding.value("evolution", json::object()), c.evolution);
    c.judging = params_from_json(decoding.value("judging", json::object()), c.judging);
    c.evaluation = params_from_json(decoding.value("evaluation", json::object()), c.evaluation);
    if (j.contains("retry")) c.retry = retry_policy_from_json(j.at("retry"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad decoding or retry section: ") + e.what());
  }
  c.max_in_flight = field<int>(j, "max_in_flight", 8);
  c.verify_specify = field<bool>(j, "verify_specify", false);
  const json debate = j.value("debate", json::object());
  c.debate_agents = field<std::map<std::string, std::string>>(debate, "agents", {});
  c.debate_max_rounds = field<int>(debate, "max_rounds", 3);
  c.debate_max_steps = field<int>(debate, "max_steps", 15);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  json backends = json::array();
  for (const auto& b : c.backends) backends.push_back(profile_to_json(b));
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  return json{{"backends", backends},
              {"generator", c.generator},
              {"panel", c.panel},
              {"correctness_panel", c.correctness_panel},
              {"strategies", strategies},
              {"rounds", c.rounds},
              {"seed", c.seed},
              {"round_input", c.round_input == RoundInput::previous ? "previous" : "cumulative"},
              {"decoding",
               {{"evolution", to_json(c.evolution)},
                {"judging", to_json(c.judging)},
                {"evaluation", to_json(c.evaluation)}}},
              {"retry", retry_to_json(c.retry)},
              {"max_in_flight", c.max_in_flight},
              {"verify_specify", c.verify_specify},
              {"debate",
               {{"agents", c.debate_agents},
                {"max_rounds", c.debate_max_rounds},
                {"max_steps", c.debate_max_steps}}}};
}

std::string config_digest(const PipelineConfig& c) { return io::sha256_hex(to_json(c).dump()); }

BackendSet::BackendSet(const PipelineConfig& config, std::shared_ptr<ExchangeLog> log) : log_(std::move(log)) {
  auto limiter = std::make_shared<InFlightLimiter>(config.max_in_flight);
  for (const auto& p : config.backends) {
    std::shared_ptr<Backend> backend;
    if (p.kind == "scripted") {
      backend = ScriptedBackend::from_json(p.name, p.script);
    } else {
      HttpBackendConfig hc;
      hc.name = p.name;
      hc.base_url = p.base_url;
      hc.model = p.model;
      hc.api_key_env = p.api_key_env;
      hc.timeout = std::chrono::seconds(p.timeout_seconds);
      backend = std::make_shared<HttpChatBackend>(hc);
    }
    auto bucket = p.requests_per_minute > 0 ? std::make_shared<TokenBucket>(p.requests_per_minute) : nullptr;
    clients_[p.name] = std::make_shared<LlmClient>(backend, config.retry, log_, bucket, limiter);
  }
}

ClientHandle BackendSet::client(const std::string& name) const {
  auto it = clients_.find(name);
  if (it == clients_.end()) throw ConfigError("unknown backend '" + name + "'");
  return it->second;
}

JudgePanel BackendSet::panel(const std::vector<std::string>& names) const {
  std::vector<ClientHandle> members;
  for (const auto& n : names) members.push_back(client(n));
  return JudgePanel(std::move(members));
}

DebateAgents BackendSet::debate_agents(const std::map<std::string, std::string>& roles) const {
  DebateAgents agents;
  for (const char* role : kRoleNames) {
    auto it = roles.find(role);
    if (it == roles.end()) throw ConfigError(std::string("no backend bound to debate role '") + role + "'");
    agents.for_role(*parse_role(role)) = client(it->second);
  }
  return agents;
}

std::map<std::string, std::string> parse_agent_spec(const std::string& spec) {
  std::map<std::string, std::string> out;
  std::optional<std::string> fallback;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = io::trim(part);
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("agent binding '" + part + "' is not role=backend");
    std::string role = io::trim(part.substr(0, eq)), backend = io::trim(part.substr(eq + 1));
    if (role == "all") {
      fallback = backend;
    } else {
      if (!parse_role(role)) throw ConfigError("unknown debate role '" + role + "'");
      out[role] = backend;
    }
  }
  if (fallback)
    for (const char* role : kRoleNames) out.emplace(role, *fallback);
  return out;
}

}  // namespace cotforge
