#include "cotforge/debate.hpp"

#include <algorithm>
#include <set>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"
#include "cotforge/templates.hpp"

namespace cotforge {

namespace {

constexpr std::string_view kRoleNames[] = {"general_public", "scientist", "mathematician", "judge"};
constexpr std::string_view kRoleLabels[] = {"General public", "Scientist", "Mathematician", "Judge"};
constexpr std::string_view kReasonNames[] = {"debate_ended_marker", "max_steps",
                                             "max_rounds_exhausted"};

std::string_view role_description(Role r) {
  switch (r) {
    case Role::general_public: return templates::kRoleGeneralPublic.text;
    case Role::scientist: return templates::kRoleScientist.text;
    case Role::mathematician: return templates::kRoleMathematician.text;
    case Role::judge: return templates::kRoleJudge.text;
  }
  return {};
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalpha(c) || ch == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_negation(const std::string& w) {
  static const std::set<std::string> kNeg = {"not", "no", "never", "cannot", "nor", "hardly", "neither"};
  return kNeg.count(w) > 0 || (w.size() > 3 && w.ends_with("n't"));
}

std::string strip_marker(std::string_view text) {
  std::string s(text);
  for (auto pos = s.find(kDebateEndedMarker); pos != std::string::npos; pos = s.find(kDebateEndedMarker))
    s.erase(pos, kDebateEndedMarker.size());
  return io::trim(s);
}

}  // namespace

std::string_view to_string(Role r) { return kRoleNames[static_cast<int>(r)]; }
std::string_view to_string(TerminationReason r) { return kReasonNames[static_cast<int>(r)]; }

std::optional<Role> parse_role(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (kRoleNames[i] == name) return static_cast<Role>(i);
  return std::nullopt;
}

ClientHandle& DebateAgents::for_role(Role r) {
  switch (r) {
    case Role::general_public: return general_public;
    case Role::scientist: return scientist;
    case Role::mathematician: return mathematician;
    case Role::judge: return judge;
  }
  throw InvariantViolation("unknown role");
}

const ClientHandle& DebateAgents::for_role(Role r) const {
  return const_cast<DebateAgents*>(this)->for_role(r);
}

json to_json(const DebateTranscript& t) {
  json turns = json::array();
  for (const auto& turn : t.turns)
    turns.push_back(json{{"role", std::string(to_string(turn.role))},
                         {"content", turn.content},
                         {"step_index", turn.step_index},
                         {"round_index", turn.round_index}});
  return json{{"question", t.question},
              {"turns", turns},
              {"settled_steps", t.settled_steps},
              {"final_answer", t.final_answer ? json(*t.final_answer) : json(nullptr)},
              {"terminated", t.terminated},
              {"termination_reason", t.termination_reason
                                         ? json(std::string(to_string(*t.termination_reason)))
                                         : json(nullptr)}};
}

DebateTranscript transcript_from_json(const json& j) {
  DebateTranscript t;
  t.question = j.at("question").get<std::string>();
  for (const auto& jt : j.at("turns")) {
    auto role = parse_role(jt.at("role").get<std::string>());
    if (!role) throw DataError("unknown debate role " + jt.at("role").dump());
    t.turns.push_back(DebateTurn{*role, jt.at("content").get<std::string>(),
                                 jt.at("step_index").get<int>(), jt.at("round_index").get<int>()});
  }
  t.settled_steps = j.at("settled_steps").get<std::vector<std::string>>();
  if (!j.at("final_answer").is_null()) t.final_answer = j.at("final_answer").get<std::string>();
  t.terminated = j.at("terminated").get<bool>();
  if (!j.at("termination_reason").is_null()) {
    auto name = j.at("termination_reason").get<std::string>();
    for (int i = 0; i < 3; ++i)
      if (kReasonNames[i] == name) t.termination_reason = static_cast<TerminationReason>(i);
  }
  return t;
}

std::vector<std::string> validate_turn_order(const DebateTranscript& t, bool allow_open_step) {
  std::vector<std::string> problems;
  auto problem = [&](size_t i, const std::string& what) {
    problems.push_back("turn " + std::to_string(i + 1) + ": " + what);
  };

  int expected_step = 1;
  size_t i = 0;
  size_t rulings = 0;
  size_t marker_turns = 0;
  while (i < t.turns.size()) {
    const DebateTurn& gp = t.turns[i];
    if (gp.role != Role::general_public) {
      problem(i, "step must open with general_public");
      return problems;
    }
    if (gp.step_index != expected_step)
      problem(i, "step_index " + std::to_string(gp.step_index) + ", expected " + std::to_string(expected_step));
    if (gp.round_index != 1) problem(i, "general_public turn must have round_index 1");
    ++i;

    int round = 0;
    while (i + 1 < t.turns.size() && t.turns[i].role == Role::scientist &&
           t.turns[i + 1].role == Role::mathematician) {
      ++round;
      for (size_t k = i; k < i + 2; ++k) {
        if (t.turns[k].step_index != expected_step) problem(k, "critic turn belongs to another step");
        if (t.turns[k].round_index != round)
          problem(k, "round_index " + std::to_string(t.turns[k].round_index) + ", expected " +
                         std::to_string(round));
      }
      i += 2;
    }

    if (allow_open_step && i + 1 == t.turns.size() && t.turns[i].role == Role::scientist) {
      // Mid-round: the mathematician has not answered yet.
      if (t.turns[i].step_index != expected_step) problem(i, "critic turn belongs to another step");
      if (t.turns[i].round_index != round + 1)
        problem(i, "round_index " + std::to_string(t.turns[i].round_index) + ", expected " +
                       std::to_string(round + 1));
      break;
    }
    if (i == t.turns.size()) {
      if (!allow_open_step) problems.push_back("step " + std::to_string(expected_step) + " has no judge ruling");
      break;
    }
    const DebateTurn& judge = t.turns[i];
    if (judge.role != Role::judge) {
      problem(i, std::string("unexpected ") + std::string(to_string(judge.role)) + " turn");
      return problems;
    }
    if (round == 0) problem(i, "judge ruled before any critique round");
    if (judge.step_index != expected_step) problem(i, "judge turn belongs to another step");
    if (judge.round_index != std::max(round, 1)) problem(i, "judge round_index does not match last critique round");
    ++rulings;
    if (judge.content.find(kDebateEndedMarker) != std::string::npos) {
      ++marker_turns;
      if (i + 1 != t.turns.size()) problem(i, "\"Debate ended.\" ruling is not the last turn");
    }
    ++i;
    ++expected_step;
  }

  if (marker_turns > 1) problems.push_back("\"Debate ended.\" appears in more than one judge turn");
  if (t.settled_steps.size() != rulings)
    problems.push_back("settled_steps has " + std::to_string(t.settled_steps.size()) + " entries for " +
                       std::to_string(rulings) + " rulings");
  const bool ended_by_marker = t.terminated && t.termination_reason == TerminationReason::debate_ended_marker;
  if (t.final_answer.has_value() != ended_by_marker)
    problems.push_back("final_answer must be present exactly when the marker ended the debate");
  return problems;
}

std::vector<Role> next_roles(const DebateTranscript& t) {
  if (t.terminated) return {};
  if (t.turns.empty()) return {Role::general_public};
  switch (t.turns.back().role) {
    case Role::judge: return {Role::general_public};
    case Role::general_public: return {Role::scientist};
    case Role::scientist: return {Role::mathematician};
    case Role::mathematician: return {Role::scientist, Role::judge};
  }
  return {};
}

std::string render_role_prompt(Role role, const DebateTranscript& context) {
  auto problems = validate_turn_order(context, true);
  if (!problems.empty()) throw InvariantViolation("debate context out of order: " + problems.front());
  auto allowed = next_roles(context);
  if (std::find(allowed.begin(), allowed.end(), role) == allowed.end())
    throw InvariantViolation(std::string(to_string(role)) + " may not speak next");

  std::string out(role_description(role));
  out += "\n\n#Question#: " + context.question;
  if (!context.settled_steps.empty()) {
    out += "\n#Settled Steps#:";
    for (size_t i = 0; i < context.settled_steps.size(); ++i)
      out += "\nStep " + std::to_string(i + 1) + ": " + context.settled_steps[i];
  }
  const int current = static_cast<int>(context.settled_steps.size()) + 1;
  bool header = false;
  for (const auto& turn : context.turns) {
    if (turn.step_index != current) continue;
    if (!header) {
      out += "\n#Current Step#:";
      header = true;
    }
    out += "\n";
    out += kRoleLabels[static_cast<int>(turn.role)];
    out += ": " + turn.content;
  }
  return out;
}

bool signals_agreement(std::string_view text) {
  std::string_view trimmed = text;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
  auto end = trimmed.find_first_of(".!?\n");
  auto sentence = words(trimmed.substr(0, end));
  for (size_t i = 0; i < sentence.size(); ++i) {
    const auto& w = sentence[i];
    if (w != "agree" && w != "agreed" && w != "agrees" && w != "correct") continue;
    bool negated = std::any_of(sentence.begin(), sentence.begin() + static_cast<long>(i), is_negation);
    if (!negated) return true;
  }
  return false;
}

void run_step(DebateTranscript& t, const DebateAgents& agents, int max_rounds,
              const GenerationParams& params) {
  if (t.terminated) throw InvariantViolation("run_step on a terminated debate");
  if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  const int step = static_cast<int>(t.settled_steps.size()) + 1;

  auto speak = [&](Role role, int round) -> const std::string& {
    const ClientHandle& agent = agents.for_role(role);
    if (!agent) throw ConfigError(std::string("no backend bound to role ") + std::string(to_string(role)));
    std::string prompt = render_role_prompt(role, t);
    std::string reply;
    try {
      reply = agent->generate(prompt, params);
    } catch (const BackendError& e) {
      throw DebateAborted(t, std::string(to_string(role)) + " failed: " + e.what());
    }
    t.turns.push_back(DebateTurn{role, io::trim(reply), step, round});
    return t.turns.back().content;
  };

  speak(Role::general_public, 1);
  int round = 1;
  bool consensus = false;
  for (;; ++round) {
    bool sci = signals_agreement(speak(Role::scientist, round));
    bool math = signals_agreement(speak(Role::mathematician, round));
    if (sci && math) {
      consensus = true;
      break;
    }
    if (round == max_rounds) break;
  }
  const std::string& ruling = speak(Role::judge, round);
  t.last_step_contested = !consensus;
  if (ruling.find(kDebateEndedMarker) != std::string::npos) {
    std::string answer = strip_marker(ruling);
    t.settled_steps.push_back(answer);
    t.final_answer = std::move(answer);
    t.terminated = true;
    t.termination_reason = TerminationReason::debate_ended_marker;
  } else {
    t.settled_steps.push_back(ruling);
  }
}

DebateTranscript debate(std::string_view question, const DebateAgents& agents,
                        const DebateOptions& options) {
  if (io::trim(question).empty()) throw DataError("debate question must be non-empty");
  if (options.max_steps < 1) throw ConfigError("max_steps must be >= 1");
  DebateTranscript t;
  t.question = std::string(question);
  for (int step = 0; step < options.max_steps && !t.terminated; ++step)
    run_step(t, agents, options.max_rounds, options.params);
  if (!t.terminated) {
    t.terminated = true;
    t.termination_reason =
        t.last_step_contested ? TerminationReason::max_rounds_exhausted : TerminationReason::max_steps;
  }
  return t;
}

}  // namespace cotforge
