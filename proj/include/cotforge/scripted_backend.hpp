#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "cotforge/gateway.hpp"

namespace cotforge {

/// What a rule produces on one call: text, or an injected failure.
struct ScriptOutcome {
  std::optional<std::string> text;
  std::optional<FailureClass> fault;

  static ScriptOutcome reply(std::string t) { return {std::move(t), std::nullopt}; }
  static ScriptOutcome fail(FailureClass f) { return {std::nullopt, f}; }
};

/// A prompt matcher plus the outcomes it serves. All matcher conditions that
/// are set must hold. Outcomes are served in order; the last one repeats.
/// A `generator` replaces the outcome list and derives the reply from the prompt.
struct ScriptRule {
  std::vector<std::string> contains;
  std::vector<std::string> not_contains;
  std::optional<std::string> equals;
  std::optional<std::string> regex;
  std::vector<ScriptOutcome> outcomes;
  std::function<std::string(const std::string& prompt)> generator;

  bool matches(const std::string& prompt) const;

  static ScriptRule when_contains(std::vector<std::string> needles, std::string reply) {
    ScriptRule r;
    r.contains = std::move(needles);
    r.outcomes.push_back(ScriptOutcome::reply(std::move(reply)));
    return r;
  }
};

/// Deterministic backend for offline runs: the first matching rule answers.
/// Every call is recorded so tests can assert on the exact prompt sequence.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::string name, std::vector<ScriptRule> rules = {});

  /// {"rules": [{"contains": [...], "not_contains": [...], "equals": "...",
  ///   "regex": "...", "responses": ["..."], "outcomes": [{"text": "..."} |
  ///   {"fault": "rate_limited"}], "template": "..."}]}
  /// A "template" reply substitutes "{{#Label#}}" with the rest of the prompt
  /// line that starts with "#Label#: ".
  static std::shared_ptr<ScriptedBackend> from_json(std::string name, const json& script);

  /// Builds an exact-prompt script from recorded exchanges so a live session
  /// can be replayed offline. Failed attempts become injected faults.
  static std::shared_ptr<ScriptedBackend> from_exchanges(std::string name,
                                                         std::span<const BackendExchange> log);

  const std::string& name() const override { return name_; }
  std::string complete(const std::string& prompt, const GenerationParams& params) override;

  void add_rule(ScriptRule rule);
  std::vector<std::string> calls() const;
  std::size_t call_count() const;

 private:
  std::string name_;
  mutable std::mutex mu_;
  std::vector<ScriptRule> rules_;
  std::vector<std::size_t> cursors_;
  std::vector<std::optional<std::regex>> compiled_;
  std::vector<std::string> calls_;
};

}  // namespace cotforge
