#include "cotforge/scripted_backend.hpp"

#include <map>

#include "cotforge/errors.hpp"

namespace cotforge {

namespace {

// Replaces each "{{#Label#}}" with the text following "#Label#: " on the
// first prompt line that starts with that label.
std::string fill_from_prompt(const std::string& tmpl, const std::string& prompt) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(tmpl, pos, open - pos);
    const std::string label = tmpl.substr(open + 2, close - open - 2) + ": ";
    std::string value;
    std::size_t line_start = 0;
    while (line_start <= prompt.size()) {
      auto line_end = prompt.find('\n', line_start);
      if (line_end == std::string::npos) line_end = prompt.size();
      if (prompt.compare(line_start, label.size(), label) == 0) {
        value = prompt.substr(line_start + label.size(), line_end - line_start - label.size());
        break;
      }
      line_start = line_end + 1;
    }
    out += value;
    pos = close + 2;
  }
  out.append(tmpl, pos, std::string::npos);
  return out;
}

}  // namespace

bool ScriptRule::matches(const std::string& prompt) const {
  if (equals && prompt != *equals) return false;
  for (const auto& c : contains)
    if (prompt.find(c) == std::string::npos) return false;
  for (const auto& c : not_contains)
    if (prompt.find(c) != std::string::npos) return false;
  return true;
}

ScriptedBackend::ScriptedBackend(std::string name, std::vector<ScriptRule> rules)
    : name_(std::move(name)) {
  for (auto& r : rules) add_rule(std::move(r));
}

void ScriptedBackend::add_rule(ScriptRule rule) {
  if (!rule.generator && rule.outcomes.empty())
    throw ConfigError("script rule for backend '" + name_ + "' has no responses");
  std::lock_guard lock(mu_);
  compiled_.push_back(rule.regex ? std::optional<std::regex>(std::regex(*rule.regex)) : std::nullopt);
  rules_.push_back(std::move(rule));
  cursors_.push_back(0);
}

std::string ScriptedBackend::complete(const std::string& prompt, const GenerationParams&) {
  std::unique_lock lock(mu_);
  calls_.push_back(prompt);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const ScriptRule& r = rules_[i];
    if (!r.matches(prompt)) continue;
    if (compiled_[i] && !std::regex_search(prompt, *compiled_[i])) continue;
    if (r.generator) {
      auto gen = r.generator;
      lock.unlock();
      return gen(prompt);
    }
    const ScriptOutcome& o = r.outcomes[std::min(cursors_[i], r.outcomes.size() - 1)];
    ++cursors_[i];
    if (o.fault) throw BackendError(*o.fault, "scripted " + std::string(to_string(*o.fault)));
    return *o.text;
  }
  std::string head = prompt.substr(0, 80);
  for (char& c : head)
    if (c == '\n') c = ' ';
  throw BackendError(FailureClass::no_rule,
                     "no script rule matches prompt starting with \"" + head + "\"");
}

std::vector<std::string> ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(std::string name, const json& script) {
  auto backend = std::make_shared<ScriptedBackend>(std::move(name));
  const json& rules = script.is_array() ? script : script.at("rules");
  for (const auto& jr : rules) {
    ScriptRule r;
    if (jr.contains("contains")) {
      const auto& c = jr.at("contains");
      if (c.is_string())
        r.contains.push_back(c.get<std::string>());
      else
        r.contains = c.get<std::vector<std::string>>();
    }
    if (jr.contains("not_contains")) r.not_contains = jr.at("not_contains").get<std::vector<std::string>>();
    if (jr.contains("equals")) r.equals = jr.at("equals").get<std::string>();
    if (jr.contains("regex")) r.regex = jr.at("regex").get<std::string>();
    if (jr.contains("template")) {
      std::string tmpl = jr.at("template").get<std::string>();
      r.generator = [tmpl](const std::string& prompt) { return fill_from_prompt(tmpl, prompt); };
    }
    if (jr.contains("response")) r.outcomes.push_back(ScriptOutcome::reply(jr.at("response").get<std::string>()));
    if (jr.contains("responses"))
      for (const auto& t : jr.at("responses")) r.outcomes.push_back(ScriptOutcome::reply(t.get<std::string>()));
    if (jr.contains("outcomes")) {
      for (const auto& o : jr.at("outcomes")) {
        if (o.contains("fault")) {
          auto f = parse_failure_class(o.at("fault").get<std::string>());
          if (!f) throw ConfigError("unknown fault '" + o.at("fault").get<std::string>() + "'");
          r.outcomes.push_back(ScriptOutcome::fail(*f));
        } else {
          r.outcomes.push_back(ScriptOutcome::reply(o.at("text").get<std::string>()));
        }
      }
    }
    backend->add_rule(std::move(r));
  }
  return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_exchanges(
    std::string name, std::span<const BackendExchange> log) {
  // Group attempts per prompt, preserving first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<ScriptOutcome>> by_prompt;
  for (const auto& e : log) {
    auto [it, inserted] = by_prompt.try_emplace(e.prompt);
    if (inserted) order.push_back(e.prompt);
    if (e.response)
      it->second.push_back(ScriptOutcome::reply(*e.response));
    else
      it->second.push_back(ScriptOutcome::fail(e.failure.value_or(FailureClass::server_error)));
  }
  auto backend = std::make_shared<ScriptedBackend>(std::move(name));
  for (const auto& p : order) {
    ScriptRule r;
    r.equals = p;
    r.outcomes = std::move(by_prompt[p]);
    backend->add_rule(std::move(r));
  }
  return backend;
}

}  // namespace cotforge
