#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cotforge/dataset.hpp"
#include "cotforge/debate.hpp"
#include "cotforge/gateway.hpp"

namespace cotforge {

enum class RoundInput { previous, cumulative };

struct BackendProfile {
  std::string name;
  /// "http" or "scripted".
  std::string kind = "http";
  std::string base_url;
  std::string model;
  std::string api_key_env;
  double requests_per_minute = 0;
  int timeout_seconds = 120;
  /// Inline rules for scripted backends (script files are inlined on load).
  json script;
};

struct PipelineConfig {
  std::vector<BackendProfile> backends;
  std::string generator;
  std::vector<std::string> panel;
  std::vector<std::string> correctness_panel;
  std::vector<Strategy> strategies{Strategy::complicate, Strategy::diversify, Strategy::specify};
  int rounds = 4;
  std::uint64_t seed = 0;
  RoundInput round_input = RoundInput::previous;
  GenerationParams evolution{0.7, 1024, {}};
  GenerationParams judging{0.0, 64, {}};
  GenerationParams evaluation{0.1, 512, {}};
  RetryPolicy retry;
  int max_in_flight = 8;
  bool verify_specify = false;
  /// Role name -> backend name for debates.
  std::map<std::string, std::string> debate_agents;
  int debate_max_rounds = 3;
  int debate_max_steps = 15;

  /// Throws ConfigError naming the first problem.
  void validate() const;
  const BackendProfile* find_backend(const std::string& name) const;
};

/// Parses a config document. `base_dir` resolves relative "script_file" paths.
PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);

/// Fully resolved config with every default spelled out.
json to_json(const PipelineConfig& c);

/// SHA-256 of the canonical encoding of to_json(c).
std::string config_digest(const PipelineConfig& c);

/// Live clients for every configured backend, sharing one exchange log and
/// one global in-flight bound.
class BackendSet {
 public:
  BackendSet(const PipelineConfig& config, std::shared_ptr<ExchangeLog> log);

  ClientHandle client(const std::string& name) const;
  JudgePanel panel(const std::vector<std::string>& names) const;
  DebateAgents debate_agents(const std::map<std::string, std::string>& roles) const;
  const std::shared_ptr<ExchangeLog>& log() const { return log_; }

 private:
  std::map<std::string, ClientHandle> clients_;
  std::shared_ptr<ExchangeLog> log_;
};

/// Parses "judge=a,scientist=b" or "all=a" into a role map; "all" fills
/// every role not named explicitly.
std::map<std::string, std::string> parse_agent_spec(const std::string& spec);

}  // namespace cotforge
