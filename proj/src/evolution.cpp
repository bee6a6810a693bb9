#include "cotforge/evolution.hpp"

#include <algorithm>
#include <regex>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"
#include "cotforge/templates.hpp"

namespace cotforge {

namespace {

void require_question(const CoTSample& s) {
  if (io::trim(s.question).empty()) throw DataError("sample '" + s.id + "' has an empty question");
}

std::string call(LlmClient& backend, const std::string& prompt, const GenerationParams& params,
                 std::vector<BackendExchange>* exchanges) {
  auto outcome = backend.generate_detailed(prompt, params);
  if (exchanges)
    exchanges->insert(exchanges->end(), outcome.exchanges.begin(), outcome.exchanges.end());
  return std::move(outcome.text);
}

const std::regex kStepMarker(R"(^step\s*(\d+)\s*[:.)\-]\s*(.*)$)", std::regex::icase);
const std::regex kNumberMarker(R"(^(\d+)[.)]\s+(.*)$)");
const std::regex kAnswerCue(R"((final answer|the answer is|answer is|answer:)\s*:?\s*)", std::regex::icase);

std::string strip_answer(std::string a) {
  a = io::trim(a);
  while (!a.empty() && (a.back() == '.' || a.back() == '!')) a.pop_back();
  return io::trim(a);
}

size_t word_count(std::string_view s) {
  size_t n = 0;
  bool in_word = false;
  for (unsigned char c : s) {
    bool w = std::isalnum(c) != 0;
    if (w && !in_word) ++n;
    in_word = w;
  }
  return n;
}

}  // namespace

json to_json(const EvolutionCandidate& c) {
  return json{{"parent", to_json(c.parent)},
              {"strategy", std::string(to_string(c.strategy))},
              {"evolved_question", c.evolved_question},
              {"evolved_rationale", c.evolved_rationale},
              {"evolved_answer", c.evolved_answer},
              {"step_count_not_increased", c.step_count_not_increased}};
}

EvolutionCandidate candidate_from_json(const json& j) {
  EvolutionCandidate c;
  c.parent = sample_from_json(j.at("parent"));
  auto st = parse_strategy(j.at("strategy").get<std::string>());
  if (!st) throw DataError("candidate strategy is not one of complicate|diversify|specify");
  c.strategy = *st;
  c.evolved_question = j.at("evolved_question").get<std::string>();
  c.evolved_rationale = j.at("evolved_rationale").get<std::vector<std::string>>();
  c.evolved_answer = j.at("evolved_answer").get<std::string>();
  c.step_count_not_increased = j.value("step_count_not_increased", false);
  if (c.strategy == Strategy::specify && c.evolved_question != c.parent.question)
    throw DataError("specify candidate must keep the parent question");
  return c;
}

std::string render_complicate_prompt(const CoTSample& sample) {
  require_question(sample);
  return templates::render(templates::kComplicate.text, {{"Given Question", sample.question}});
}

std::string render_diversify_prompt(const CoTSample& sample) {
  require_question(sample);
  return templates::render(templates::kDiversify.text, {{"Given Question", sample.question}});
}

std::string render_specify_prompt(const CoTSample& sample) {
  require_question(sample);
  if (sample.rationale.empty()) throw DataError("sample '" + sample.id + "' has an empty rationale");
  return templates::render(templates::kSpecify.text,
                           {{"Given Question", sample.question},
                            {"Given CoT", format_cot(sample.rationale, sample.final_answer)}});
}

std::string render_regenerate_prompt(std::string_view question) {
  if (io::trim(question).empty()) throw DataError("question must be non-empty");
  return templates::render(templates::kRegenerate.text, {{"Question", std::string(question)}});
}

std::string after_last_marker(std::string_view text, std::string_view marker) {
  auto pos = text.rfind(marker);
  if (pos == std::string_view::npos) return io::trim(text);
  return io::trim(text.substr(pos + marker.size()));
}

ParsedSolution parse_solution(std::string_view text) {
  std::vector<std::string> lines;
  for (const auto& l : io::split_lines(text)) {
    auto t = io::trim(l);
    if (!t.empty()) lines.push_back(std::move(t));
  }
  ParsedSolution out;
  if (lines.empty()) return out;

  // The last line carrying an answer cue supplies the answer.
  std::optional<size_t> answer_line;
  std::string answer_prefix;
  for (size_t i = lines.size(); i-- > 0;) {
    std::smatch m;
    std::string last_match_prefix;
    std::string value;
    bool found = false;
    for (auto it = std::sregex_iterator(lines[i].begin(), lines[i].end(), kAnswerCue);
         it != std::sregex_iterator(); ++it) {
      found = true;
      last_match_prefix = lines[i].substr(0, static_cast<size_t>(it->position()));
      value = lines[i].substr(static_cast<size_t>(it->position() + it->length()));
    }
    if (!found) continue;
    value = strip_answer(value);
    if (value.empty()) continue;
    out.answer = value;
    answer_line = i;
    answer_prefix = last_match_prefix;
    break;
  }

  std::vector<std::string> body;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (answer_line && i == *answer_line) {
      // Keep reasoning that shares the answer line, drop a bare cue.
      std::string prefix = answer_prefix;
      std::smatch m;
      if (std::regex_match(prefix, m, kStepMarker)) prefix = m[2].str();
      if (word_count(prefix) >= 3 || lines.size() == 1) body.push_back(lines[i]);
      continue;
    }
    body.push_back(lines[i]);
  }

  auto collect = [&](const std::regex& marker, int group) {
    std::vector<std::string> steps;
    for (const auto& line : body) {
      std::smatch m;
      if (std::regex_match(line, m, marker)) {
        steps.push_back(io::trim(m[group].str()));
      } else if (!steps.empty()) {
        steps.back() += " " + line;
      }
    }
    std::erase_if(steps, [](const std::string& s) { return s.empty(); });
    return steps;
  };

  auto any_match = [&](const std::regex& marker) {
    return std::any_of(body.begin(), body.end(),
                       [&](const std::string& l) { return std::regex_match(l, marker); });
  };

  if (any_match(kStepMarker)) {
    out.steps = collect(kStepMarker, 2);
  } else if (any_match(kNumberMarker)) {
    out.steps = collect(kNumberMarker, 2);
  } else {
    out.steps = body;
  }
  return out;
}

std::string evolve_question(const CoTSample& sample, Strategy strategy, LlmClient& backend,
                            const GenerationParams& params, std::vector<BackendExchange>* exchanges) {
  std::string prompt;
  switch (strategy) {
    case Strategy::complicate: prompt = render_complicate_prompt(sample); break;
    case Strategy::diversify: prompt = render_diversify_prompt(sample); break;
    case Strategy::specify:
      throw InvariantViolation("evolve_question does not apply to specify");
  }
  std::string response = call(backend, prompt, params, exchanges);
  std::string question = after_last_marker(response, "#Rewritten Question#:");
  if (question.empty())
    throw SampleFailure("evolution_failed", "empty rewritten question for '" + sample.id + "'");
  return question;
}

RegeneratedRationale regenerate_rationale(std::string_view question, Strategy strategy,
                                          const CoTSample& parent, LlmClient& backend,
                                          const GenerationParams& params,
                                          std::vector<BackendExchange>* exchanges) {
  std::string response = call(backend, render_regenerate_prompt(question), params, exchanges);
  ParsedSolution parsed = parse_solution(after_last_marker(response, "#Solution#:"));
  if (!parsed.answer || parsed.steps.empty())
    throw SampleFailure("regeneration_failed",
                        "no parseable answer in regenerated rationale for '" + parent.id + "'");
  RegeneratedRationale out;
  out.steps = std::move(parsed.steps);
  out.answer = std::move(*parsed.answer);
  out.step_count_not_increased =
      strategy == Strategy::complicate && out.steps.size() <= parent.rationale.size();
  return out;
}

EvolutionCandidate specify_rationale(const CoTSample& sample, LlmClient& backend,
                                     const GenerationParams& params) {
  EvolutionCandidate c;
  c.parent = sample;
  c.strategy = Strategy::specify;
  c.evolved_question = sample.question;
  std::string response = call(backend, render_specify_prompt(sample), params, &c.exchanges);
  ParsedSolution parsed = parse_solution(after_last_marker(response, "#Rewritten CoT#:"));
  if (parsed.steps.empty())
    throw SampleFailure("evolution_failed", "empty rewritten CoT for '" + sample.id + "'");
  // The rewrite must keep the parent's answer; a rationale that reaches a different one is dropped.
  if (parsed.answer && io::to_lower(io::normalize_whitespace(*parsed.answer)) !=
                           io::to_lower(io::normalize_whitespace(sample.final_answer)))
    throw SampleFailure("specify_answer_changed", "rewritten CoT for '" + sample.id + "' ends with '" +
                                                      *parsed.answer + "', parent answer is '" +
                                                      sample.final_answer + "'");
  c.evolved_rationale = std::move(parsed.steps);
  c.evolved_answer = sample.final_answer;
  return c;
}

EvolutionCandidate make_candidate(const CoTSample& sample, Strategy strategy, LlmClient& backend,
                                  const GenerationParams& params) {
  if (strategy == Strategy::specify) return specify_rationale(sample, backend, params);
  EvolutionCandidate c;
  c.parent = sample;
  c.strategy = strategy;
  c.evolved_question = evolve_question(sample, strategy, backend, params, &c.exchanges);
  auto regen = regenerate_rationale(c.evolved_question, strategy, sample, backend, params, &c.exchanges);
  c.evolved_rationale = std::move(regen.steps);
  c.evolved_answer = std::move(regen.answer);
  c.step_count_not_increased = regen.step_count_not_increased;
  return c;
}

CoTSample materialize(const EvolutionCandidate& c, int round) {
  if (!c.complete()) throw InvariantViolation("materializing an incomplete candidate");
  CoTSample s;
  s.id = child_id(c.parent, c.strategy, round);
  s.question = c.evolved_question;
  s.rationale = c.evolved_rationale;
  s.final_answer = c.evolved_answer;
  s.category = c.parent.category;
  s.lineage.parent_id = c.parent.id;
  s.lineage.strategy = c.strategy;
  s.lineage.round = c.parent.lineage.round + 1;
  s.source_dataset = "evolved";
  validate(s);
  return s;
}

}  // namespace cotforge
