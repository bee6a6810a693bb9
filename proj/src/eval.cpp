#include "cotforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cotforge/dataset.hpp"
#include "cotforge/errors.hpp"
#include "cotforge/evolution.hpp"
#include "cotforge/io.hpp"
#include "cotforge/parallel.hpp"
#include "cotforge/seed_adapters.hpp"

namespace cotforge {

using ojson = nlohmann::ordered_json;

namespace {

const std::regex kAnswerCue(R"((final answer|answer is|answer:)\s*:?\s*)", std::regex::icase);
const std::regex kNumber(R"(-?\$?\d[\d,]*(?:\.\d+)?)");

/// Offset just past the last answer cue, if any.
std::optional<size_t> after_last_cue(const std::string& text) {
  std::optional<size_t> pos;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kAnswerCue); it != std::sregex_iterator(); ++it)
    pos = static_cast<size_t>(it->position() + it->length());
  return pos;
}

std::string strip_trailing_punct(std::string s) {
  s = io::trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == ',' || s.back() == ';'))
    s.pop_back();
  return io::trim(s);
}

std::optional<std::string> last_boxed(const std::string& text) {
  auto pos = text.rfind("\\boxed{");
  if (pos == std::string::npos) return std::nullopt;
  size_t i = pos + 7;
  int depth = 1;
  std::string out;
  for (; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return out;
    out.push_back(text[i]);
  }
  return std::nullopt;
}

std::set<std::string> word_set(std::string_view s) {
  std::set<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

std::string extract_choice(const std::string& text, std::span<const std::string> choices) {
  const size_t n = choices.empty() ? 5 : choices.size();
  auto in_range = [&](char c) { return c >= 'A' && static_cast<size_t>(c - 'A') < n; };

  static const std::regex kParen(R"(\(([A-Z])\))");
  std::string found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kParen); it != std::sregex_iterator(); ++it)
    if (in_range((*it)[1].str()[0])) found = (*it)[1].str();
  if (!found.empty()) return found;

  static const std::regex kBare(R"((?:^|[^A-Za-z0-9])([A-Z])(?=[^A-Za-z0-9]|$))");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kBare); it != std::sregex_iterator(); ++it)
    if (in_range((*it)[1].str()[0])) found = (*it)[1].str();
  if (!found.empty()) return found;

  // Fall back to the choice text: latest literal mention, then word overlap.
  const std::string lower = io::to_lower(text);
  std::optional<size_t> best;
  size_t best_pos = 0, best_len = 0;
  for (size_t i = 0; i < choices.size(); ++i) {
    std::string c = io::to_lower(io::trim(choices[i]));
    if (c.empty()) continue;
    auto pos = lower.rfind(c);
    if (pos == std::string::npos) continue;
    if (!best || pos > best_pos || (pos == best_pos && c.size() > best_len)) {
      best = i;
      best_pos = pos;
      best_len = c.size();
    }
  }
  if (best) return choice_label(*best);

  const auto response_words = word_set(text);
  double best_score = 0.0;
  for (size_t i = 0; i < choices.size(); ++i) {
    auto cw = word_set(choices[i]);
    if (cw.empty()) continue;
    size_t common = 0;
    for (const auto& w : cw) common += response_words.count(w);
    double score = static_cast<double>(common) / static_cast<double>(cw.size());
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best ? choice_label(*best) : std::string();
}

std::string extract_numeric(const std::string& text) {
  auto last_number_in = [](const std::string& s, bool first) -> std::string {
    std::string found;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), kNumber); it != std::sregex_iterator(); ++it) {
      found = it->str();
      if (first) break;
    }
    return found;
  };
  if (auto cue = after_last_cue(text)) {
    std::string tail = text.substr(*cue);
    auto nl = tail.find('\n');
    std::string n = last_number_in(tail.substr(0, nl), true);
    if (!n.empty()) return normalize_number(n);
  }
  // Prose conclusions ("Therefore, the total is 7, which includes ...") put the
  // result right after the last "is"/"=" of the concluding sentence.
  static const std::regex kConclusion(R"((?:^|[.!?\n]\s*)(?:therefore|thus|hence|so|in total)\b([^.!?\n]|\.\d)*)",
                                      std::regex::icase);
  std::string conclusion;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kConclusion); it != std::sregex_iterator(); ++it)
    conclusion = it->str();
  if (!conclusion.empty()) {
    static const std::regex kCopula(R"((?:\bis|\bequals|=)\s*)", std::regex::icase);
    std::optional<size_t> after;
    for (auto it = std::sregex_iterator(conclusion.begin(), conclusion.end(), kCopula); it != std::sregex_iterator(); ++it)
      after = static_cast<size_t>(it->position() + it->length());
    if (after) {
      std::string n = last_number_in(conclusion.substr(*after), true);
      if (!n.empty()) return normalize_number(n);
    }
  }
  std::string n = last_number_in(text, false);
  return n.empty() ? std::string() : normalize_number(n);
}

std::string extract_free_text(const std::string& text) {
  if (auto cue = after_last_cue(text)) {
    std::string tail = text.substr(*cue);
    auto nl = tail.find('\n');
    std::string v = strip_trailing_punct(tail.substr(0, nl));
    if (!v.empty()) return v;
  }
  if (auto boxed = last_boxed(text)) return io::trim(*boxed);
  auto lines = split_rationale(text);
  return lines.empty() ? std::string() : strip_trailing_punct(lines.back());
}

std::string normalize_text(std::string_view s) {
  std::string out = io::to_lower(io::normalize_whitespace(s));
  while (!out.empty() && (out.back() == '.' || out.back() == '!')) out.pop_back();
  if (out.size() >= 2 && (out.front() == '"' || out.front() == '\'') && out.back() == out.front())
    out = out.substr(1, out.size() - 2);
  return io::trim(out);
}

}  // namespace

std::string_view to_string(AnswerKind k) {
  switch (k) {
    case AnswerKind::multiple_choice: return "multiple_choice";
    case AnswerKind::numeric: return "numeric";
    case AnswerKind::free_text: return "free_text";
  }
  return "?";
}

std::string_view to_string(EvalStrategy s) {
  switch (s) {
    case EvalStrategy::direct: return "direct";
    case EvalStrategy::self_consistency: return "self_consistency";
    case EvalStrategy::debate: return "debate";
  }
  return "?";
}

std::string_view to_string(AnswerPosition p) { return p == AnswerPosition::front ? "front" : "behind"; }

std::optional<AnswerKind> parse_answer_kind(std::string_view name) {
  if (name == "multiple_choice") return AnswerKind::multiple_choice;
  if (name == "numeric") return AnswerKind::numeric;
  if (name == "free_text") return AnswerKind::free_text;
  return std::nullopt;
}

std::optional<EvalStrategy> parse_eval_strategy(std::string_view name) {
  if (name == "direct") return EvalStrategy::direct;
  if (name == "sc" || name == "self_consistency") return EvalStrategy::self_consistency;
  if (name == "debate") return EvalStrategy::debate;
  return std::nullopt;
}

void EvalTask::validate() const {
  if (items.empty()) throw DataError("task '" + name + "' has no items");
  if (shots < 0) throw DataError("shots must be >= 0");
  if (static_cast<size_t>(shots) > exemplars.size())
    throw DataError("task '" + name + "' asks for " + std::to_string(shots) + " shots but has " +
                    std::to_string(exemplars.size()) + " exemplars");
  const bool mc = answer_kind == AnswerKind::multiple_choice;
  std::unordered_set<std::string> questions;
  for (size_t i = 0; i < items.size(); ++i) {
    if (mc == items[i].choices.empty())
      throw DataError("item " + std::to_string(i + 1) + ": choices must be present exactly for multiple choice");
    questions.insert(io::normalize_whitespace(items[i].question));
  }
  for (size_t i = 0; i < static_cast<size_t>(shots); ++i) {
    if (exemplars[i].rationale.empty())
      throw DataError("exemplar '" + exemplars[i].id + "' has no rationale");
    if (questions.count(io::normalize_whitespace(exemplars[i].question)))
      throw DataError("exemplar '" + exemplars[i].id + "' also appears among the evaluated items");
  }
}

json to_json(const EvalResult& r) {
  json items = json::array();
  for (const auto& it : r.items) {
    json j{{"index", it.index},         {"question", it.question}, {"gold", it.gold},
           {"prediction", it.prediction}, {"extracted", it.extracted}, {"match", it.match}};
    if (it.error) j["error"] = *it.error;
    if (!it.detail.is_null()) j["detail"] = it.detail;
    items.push_back(std::move(j));
  }
  return json{{"task", r.task},         {"strategy", r.strategy},   {"n", r.n},
              {"correct", r.correct},   {"accuracy", r.accuracy},   {"exemplar_ids", r.exemplar_ids},
              {"items", items}};
}

std::string choice_label(std::size_t index) {
  if (index < 26) return std::string(1, static_cast<char>('A' + index));
  return std::to_string(index + 1);
}

std::string normalize_number(std::string_view text) {
  std::string s;
  for (char c : text)
    if (c != ',' && c != '$' && !std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  bool negative = !s.empty() && s.front() == '-';
  if (negative) s.erase(0, 1);
  if (auto dot = s.find('.'); dot != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  size_t lead = 0;
  while (lead + 1 < s.size() && s[lead] == '0' && s[lead + 1] != '.') ++lead;
  s.erase(0, lead);
  if (s.empty() || s == "0") return "0";
  return negative ? "-" + s : s;
}

std::string extract_answer(std::string_view response, AnswerKind kind, std::span<const std::string> choices) {
  const std::string text(response);
  if (io::trim(text).empty()) return {};
  switch (kind) {
    case AnswerKind::multiple_choice: return extract_choice(text, choices);
    case AnswerKind::numeric: return extract_numeric(text);
    case AnswerKind::free_text: return extract_free_text(text);
  }
  return {};
}

bool answers_match(std::string_view extracted, std::string_view gold, AnswerKind kind, double relative_tolerance) {
  if (io::trim(extracted).empty()) return false;
  switch (kind) {
    case AnswerKind::multiple_choice:
      return io::to_lower(io::trim(extracted)) == io::to_lower(io::trim(gold));
    case AnswerKind::numeric: {
      const std::string a = normalize_number(extracted);
      const std::string g = normalize_number(gold);
      if (a == g) return true;
      if (g.find('.') == std::string::npos) return false;
      try {
        double av = std::stod(a), gv = std::stod(g);
        return std::fabs(av - gv) <= relative_tolerance * std::fabs(gv);
      } catch (const std::exception&) {
        return false;
      }
    }
    case AnswerKind::free_text:
      return normalize_text(extracted) == normalize_text(gold);
  }
  return false;
}

std::string modal_answer(std::span<const std::string> answers) {
  std::vector<std::pair<std::string, size_t>> counts;  // first-seen order
  for (const auto& a : answers) {
    if (a.empty()) continue;
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == a; });
    if (it == counts.end())
      counts.emplace_back(a, 1);
    else
      ++it->second;
  }
  std::string best;
  size_t best_count = 0;
  for (const auto& [a, n] : counts) {
    if (n > best_count) {
      best = a;
      best_count = n;
    }
  }
  return best;
}

std::string render_question_block(std::string_view question, std::span<const std::string> choices) {
  std::string out(question);
  if (!choices.empty()) {
    out += "\nAnswer Choices:";
    for (size_t i = 0; i < choices.size(); ++i) out += " (" + choice_label(i) + ") " + choices[i];
  }
  return out;
}

std::string render_exemplar_answer(const Exemplar& e, AnswerPosition position) {
  std::vector<std::string> blocks;
  for (size_t i = 0; i < e.rationale.size(); ++i)
    blocks.push_back("Step " + std::to_string(i + 1) + ": " + e.rationale[i]);
  std::string answer_line = "The answer is " + e.answer + ".";
  if (position == AnswerPosition::front)
    blocks.insert(blocks.begin(), answer_line);
  else
    blocks.push_back(answer_line);
  std::string out;
  for (size_t i = 0; i < blocks.size(); ++i) out += (i ? "\n" : "") + blocks[i];
  return out;
}

std::string render_eval_prompt(const EvalTask& task, const EvalItem& item, const PromptOptions& options) {
  std::string instruction;
  const std::string answer_form = "\"The answer is <answer>.\"";
  if (options.position == AnswerPosition::front) {
    instruction = "Answer the following question. First give the final answer in the form " + answer_form +
                  ", then explain the reasoning step by step.";
  } else if (options.step_count) {
    instruction = "Answer the following question using exactly " + std::to_string(*options.step_count) +
                  " reasoning steps, one per line as \"Step i: ...\", then give the final answer on the "
                  "last line in the form " + answer_form;
  } else {
    instruction = "Answer the following question. Think step by step, then give the final answer on the "
                  "last line in the form " + answer_form;
  }
  if (task.answer_kind == AnswerKind::multiple_choice)
    instruction += " If there are choices, answer with the letter of the right choice.";

  std::string out = instruction + "\n\n";
  for (size_t i = 0; i < static_cast<size_t>(task.shots) && i < task.exemplars.size(); ++i) {
    const Exemplar& e = task.exemplars[i];
    out += "Question: " + render_question_block(e.question, e.choices) + "\n";
    out += "Answer: " + render_exemplar_answer(e, options.position) + "\n\n";
  }
  out += "Question: " + render_question_block(item.question, item.choices) + "\nAnswer:";
  return out;
}

SelfConsistencyResult self_consistency(const std::string& prompt, LlmClient& backend, int paths,
                                       const GenerationParams& params, AnswerKind kind,
                                       std::span<const std::string> choices) {
  if (paths < 1) throw ConfigError("self-consistency needs at least one path");
  if (!(params.temperature > 0)) throw ConfigError("self-consistency needs a positive temperature");
  SelfConsistencyResult r;
  for (int p = 0; p < paths; ++p) {
    r.responses.push_back(backend.generate(prompt, params));
    r.extracted.push_back(extract_answer(r.responses.back(), kind, choices));
  }
  r.answer = modal_answer(r.extracted);
  return r;
}

namespace {

EvalResult reduce(const EvalTask& task, std::string_view strategy, std::vector<ItemRecord> records) {
  EvalResult r;
  r.task = task.name;
  r.strategy = std::string(strategy);
  r.n = records.size();
  for (const auto& rec : records) r.correct += rec.match ? 1 : 0;
  r.accuracy = r.n ? static_cast<double>(r.correct) / static_cast<double>(r.n) : 0.0;
  r.items = std::move(records);
  for (size_t i = 0; i < static_cast<size_t>(task.shots) && i < task.exemplars.size(); ++i)
    r.exemplar_ids.push_back(task.exemplars[i].id);
  return r;
}

}  // namespace

EvalResult score_responses(const EvalTask& task, std::string_view strategy,
                           std::span<const std::string> responses, double relative_tolerance) {
  task.validate();
  if (responses.size() != task.items.size()) throw DataError("one response per item is required");
  std::vector<ItemRecord> records(task.items.size());
  for (size_t i = 0; i < task.items.size(); ++i) {
    const EvalItem& item = task.items[i];
    ItemRecord& rec = records[i];
    rec.index = i;
    rec.question = item.question;
    rec.gold = item.gold;
    rec.prediction = responses[i];
    rec.extracted = extract_answer(responses[i], task.answer_kind, item.choices);
    rec.match = answers_match(rec.extracted, item.gold, task.answer_kind, relative_tolerance);
  }
  return reduce(task, strategy, std::move(records));
}

EvalResult evaluate(const EvalTask& task, EvalStrategy strategy, const EvalBackends& backends,
                    const EvalOptions& options) {
  task.validate();
  if (strategy != EvalStrategy::debate && !backends.primary) throw ConfigError("no evaluation backend");
  std::vector<ItemRecord> records(task.items.size());

  parallel_for(task.items.size(), options.max_in_flight, [&](size_t i) {
    const EvalItem& item = task.items[i];
    ItemRecord& rec = records[i];
    rec.index = i;
    rec.question = item.question;
    rec.gold = item.gold;
    try {
      switch (strategy) {
        case EvalStrategy::direct:
          rec.prediction = backends.primary->generate(render_eval_prompt(task, item, options.prompt), options.params);
          rec.extracted = extract_answer(rec.prediction, task.answer_kind, item.choices);
          break;
        case EvalStrategy::self_consistency: {
          auto sc = self_consistency(render_eval_prompt(task, item, options.prompt), *backends.primary,
                                     options.paths, options.sc_params, task.answer_kind, item.choices);
          rec.prediction = sc.responses.empty() ? std::string() : sc.responses.front();
          rec.extracted = sc.answer;
          rec.detail = json{{"responses", sc.responses}, {"extracted", sc.extracted}};
          break;
        }
        case EvalStrategy::debate: {
          auto t = debate(render_question_block(item.question, item.choices), backends.debate, options.debate);
          rec.prediction = t.final_answer.value_or(t.settled_steps.empty() ? std::string() : t.settled_steps.back());
          rec.extracted = extract_answer(rec.prediction, task.answer_kind, item.choices);
          rec.detail = to_json(t);
          break;
        }
      }
    } catch (const BackendError& e) {
      rec.error = e.what();
    } catch (const DebateAborted& e) {
      rec.error = e.what();
      rec.detail = to_json(e.partial());
    }
    rec.match = !rec.error && answers_match(rec.extracted, item.gold, task.answer_kind, options.relative_tolerance);
  });

  return reduce(task, to_string(strategy), std::move(records));
}

EvalResult probe_step_count(const EvalTask& task, const ClientHandle& backend, int steps, EvalOptions options) {
  if (steps < 1) throw ConfigError("step count must be >= 1");
  options.prompt.step_count = steps;
  auto r = evaluate(task, EvalStrategy::direct, EvalBackends{backend, {}}, options);
  r.strategy = "step_count=" + std::to_string(steps);
  return r;
}

std::vector<Exemplar> specify_exemplars(std::vector<Exemplar> exemplars, LlmClient& backend, int iterations,
                                        const GenerationParams& params) {
  for (int it = 0; it < iterations; ++it) {
    for (auto& e : exemplars) {
      CoTSample s;
      s.id = e.id.empty() ? "exemplar" : e.id;
      s.question = render_question_block(e.question, e.choices);
      s.rationale = e.rationale;
      s.final_answer = e.answer;
      s.source_dataset = "exemplar";
      try {
        e.rationale = specify_rationale(s, backend, params).evolved_rationale;
      } catch (const SampleFailure&) {
        // Keep the previous rationale for this exemplar.
      }
    }
  }
  return exemplars;
}

EvalResult probe_specificity(const EvalTask& task, const ClientHandle& backend, int iterations,
                             EvalOptions options, const GenerationParams& rewrite_params) {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  EvalTask refined = task;
  std::vector<Exemplar> shown(task.exemplars.begin(),
                              task.exemplars.begin() + std::min<size_t>(task.shots, task.exemplars.size()));
  shown = specify_exemplars(std::move(shown), *backend, iterations, rewrite_params);
  std::copy(shown.begin(), shown.end(), refined.exemplars.begin());
  auto r = evaluate(refined, EvalStrategy::direct, EvalBackends{backend, {}}, options);
  r.strategy = "specificity_iterations=" + std::to_string(iterations);
  return r;
}

EvalResult probe_answer_position(const EvalTask& task, const ClientHandle& backend, AnswerPosition position,
                                 EvalOptions options) {
  options.prompt.position = position;
  auto r = evaluate(task, EvalStrategy::direct, EvalBackends{backend, {}}, options);
  r.strategy = "answer_position=" + std::string(to_string(position));
  return r;
}

// ---------------------------------------------------------------------------
// Benchmark adapters

namespace {

std::string ostr(const ojson& r, const char* key) {
  auto it = r.find(key);
  if (it == r.end() || it->is_null()) throw DataError(std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_boolean()) return it->get<bool>() ? "yes" : "no";
  return it->dump();
}

std::string gold_from_index(const ojson& v, size_t n) {
  if (v.is_number_integer()) {
    auto i = v.get<long long>();
    if (i < 0 || static_cast<size_t>(i) >= n) throw DataError("answer index out of range");
    return choice_label(static_cast<size_t>(i));
  }
  std::string s = io::trim(v.get<std::string>());
  if (s.size() == 1 && std::isdigit(static_cast<unsigned char>(s[0]))) {
    size_t i = static_cast<size_t>(s[0] - '1');  // 1-based labels (SocialIQA)
    if (i >= n) throw DataError("answer label out of range");
    return choice_label(i);
  }
  return s;
}

EvalItem stem_choices(const ojson& r, size_t) {
  EvalItem item;
  const ojson& q = r.at("question");
  if (q.is_object()) {
    item.question = ostr(q, "stem");
    for (const auto& c : q.at("choices")) item.choices.push_back(ostr(c, "text"));
  } else {
    item.question = q.get<std::string>();
    for (const auto& c : r.at("choices")) item.choices.push_back(c.is_string() ? c.get<std::string>() : ostr(c, "text"));
  }
  item.gold = io::trim(ostr(r, "answerKey"));
  return item;
}

EvalItem target_scores(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "input");
  const ojson& scores = r.at("target_scores");
  for (auto it = scores.begin(); it != scores.end(); ++it) {
    if (it.value().get<double>() > 0) item.gold = choice_label(item.choices.size());
    item.choices.push_back(it.key());
  }
  if (item.gold.empty()) throw DataError("no positive target score");
  return item;
}

EvalItem bigbench_target(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "input");
  const ojson& t = r.at("target");
  item.gold = t.is_array() ? (t.at(0).is_string() ? t.at(0).get<std::string>() : t.at(0).dump()) : ostr(r, "target");
  return item;
}

EvalItem gsm8k_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "question");
  std::string a = ostr(r, "answer");
  auto pos = a.rfind("####");
  item.gold = normalize_number(io::trim(pos == std::string::npos ? a : a.substr(pos + 4)));
  return item;
}

EvalItem math_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "problem");
  auto boxed = last_boxed(ostr(r, "solution"));
  if (!boxed) throw DataError("solution has no \\boxed{} answer");
  item.gold = io::trim(*boxed);
  return item;
}

EvalItem socialiqa_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "context") + " " + ostr(r, "question");
  for (const char* k : {"answerA", "answerB", "answerC"}) item.choices.push_back(ostr(r, k));
  item.gold = gold_from_index(r.at("label"), 3);
  return item;
}

EvalItem mmlu_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "question");
  if (r.contains("choices")) {
    for (const auto& c : r.at("choices")) item.choices.push_back(c.get<std::string>());
  } else {
    for (const char* k : {"A", "B", "C", "D"}) item.choices.push_back(ostr(r, k));
  }
  item.gold = gold_from_index(r.at("answer"), item.choices.size());
  return item;
}

EvalItem scienceqa_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "question");
  if (auto h = r.find("hint"); h != r.end() && h->is_string() && !h->get<std::string>().empty())
    item.question = h->get<std::string>() + "\n" + item.question;
  for (const auto& c : r.at("choices")) item.choices.push_back(c.get<std::string>());
  item.gold = gold_from_index(r.at("answer"), item.choices.size());
  return item;
}

// SciQ ships the correct answer apart from three distractors; the choice order
// is a seeded permutation of the record index so it is stable across runs.
EvalItem sciq_item(const ojson& r, size_t index) {
  EvalItem item;
  item.question = ostr(r, "question");
  std::vector<std::pair<std::string, bool>> opts = {{ostr(r, "correct_answer"), true},
                                                    {ostr(r, "distractor1"), false},
                                                    {ostr(r, "distractor2"), false},
                                                    {ostr(r, "distractor3"), false}};
  seeded_shuffle(opts, index);
  for (size_t i = 0; i < opts.size(); ++i) {
    item.choices.push_back(opts[i].first);
    if (opts[i].second) item.gold = choice_label(i);
  }
  return item;
}

EvalItem aqua_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "question");
  for (const auto& o : r.at("options")) {
    std::string s = o.get<std::string>();
    item.choices.push_back(s.size() >= 2 && s[1] == ')' ? io::trim(s.substr(2)) : s);
  }
  item.gold = io::trim(ostr(r, "correct"));
  return item;
}

EvalItem strategyqa_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "question");
  item.gold = ostr(r, "answer");
  return item;
}

EvalItem generic_item(const ojson& r, size_t) {
  EvalItem item;
  item.question = ostr(r, "question");
  item.gold = r.contains("answer") ? ostr(r, "answer") : ostr(r, "gold");
  if (auto c = r.find("choices"); c != r.end())
    for (const auto& x : *c) item.choices.push_back(x.get<std::string>());
  return item;
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<ojson> read_records(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  std::vector<ojson> records;
  if (path.extension() == ".csv") {
    for (const auto& line : io::split_lines(text)) {
      if (io::trim(line).empty()) continue;
      auto f = parse_csv_line(line);
      if (f.size() != 6) throw DataError(path.string() + ": expected question,A,B,C,D,answer rows");
      records.push_back(ojson{{"question", f[0]}, {"A", f[1]}, {"B", f[2]}, {"C", f[3]}, {"D", f[4]}, {"answer", f[5]}});
    }
    return records;
  }
  auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return records;
  if (text[first] == '[') {
    for (auto& r : ojson::parse(text)) records.push_back(r);
    return records;
  }
  try {
    ojson doc = ojson::parse(text);
    if (doc.is_object() && doc.contains("examples")) {
      for (auto& r : doc["examples"]) records.push_back(r);
      return records;
    }
  } catch (const ojson::exception&) {
  }
  size_t line_no = 0;
  for (const auto& line : io::split_lines(text)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    try {
      records.push_back(ojson::parse(line));
    } catch (const ojson::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace

const std::vector<TaskSpec>& task_registry() {
  static const std::vector<TaskSpec> registry = {
      {"commonsenseqa", AnswerKind::multiple_choice, 3, stem_choices},
      {"socialiqa", AnswerKind::multiple_choice, 3, socialiqa_item},
      {"math", AnswerKind::free_text, 3, math_item},
      {"elementary_mathematics", AnswerKind::multiple_choice, 0, mmlu_item},
      {"scienceqa", AnswerKind::multiple_choice, 0, scienceqa_item},
      {"sciq", AnswerKind::multiple_choice, 0, sciq_item},
      {"penguins_in_a_table", AnswerKind::multiple_choice, 0, target_scores},
      {"object_counting", AnswerKind::numeric, 3, bigbench_target},
      {"phrase_relatedness", AnswerKind::multiple_choice, 0, target_scores},
      {"gsm8k", AnswerKind::numeric, 3, gsm8k_item},
      {"aqua_rat", AnswerKind::multiple_choice, 3, aqua_item},
      {"arc_challenge", AnswerKind::multiple_choice, 3, stem_choices},
      {"openbookqa", AnswerKind::multiple_choice, 3, stem_choices},
      {"strategyqa", AnswerKind::free_text, 0, strategyqa_item},
      {"generic", std::nullopt, 0, generic_item},
  };
  return registry;
}

const TaskSpec* find_task(std::string_view name) {
  for (const auto& t : task_registry())
    if (t.name == name) return &t;
  return nullptr;
}

EvalTask load_eval_task(std::string_view name, const std::filesystem::path& items_path,
                        const std::optional<std::filesystem::path>& exemplars_path, std::optional<int> shots,
                        std::optional<std::size_t> limit) {
  const TaskSpec* spec = find_task(name);
  if (!spec) throw ConfigError("unknown task '" + std::string(name) + "'");
  EvalTask task;
  task.name = spec->name;
  auto records = read_records(items_path);
  for (size_t i = 0; i < records.size() && (!limit || task.items.size() < *limit); ++i) {
    try {
      task.items.push_back(spec->adapter(records[i], i));
    } catch (const std::exception& e) {
      throw DataError(items_path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (spec->kind) {
    task.answer_kind = *spec->kind;
  } else {
    static const std::regex kNumeric(R"(^\s*-?\$?\d[\d,]*(\.\d+)?\s*$)");
    const bool mc = !task.items.empty() && !task.items.front().choices.empty();
    const bool numeric = !task.items.empty() && std::all_of(task.items.begin(), task.items.end(), [](const EvalItem& it) {
      return std::regex_match(it.gold, kNumeric);
    });
    task.answer_kind = mc ? AnswerKind::multiple_choice : numeric ? AnswerKind::numeric : AnswerKind::free_text;
  }
  if (task.answer_kind == AnswerKind::numeric)
    for (auto& it : task.items) it.gold = normalize_number(it.gold);

  if (exemplars_path) {
    auto ex = read_records(*exemplars_path);
    for (size_t i = 0; i < ex.size(); ++i) {
      const ojson& r = ex[i];
      Exemplar e;
      e.id = r.contains("id") ? ostr(r, "id") : "exemplar-" + std::to_string(i);
      e.question = ostr(r, "question");
      const ojson& rat = r.at("rationale");
      if (rat.is_array())
        for (const auto& s : rat) e.rationale.push_back(s.get<std::string>());
      else
        e.rationale = split_rationale(rat.get<std::string>());
      e.answer = r.contains("answer") ? ostr(r, "answer") : ostr(r, "final_answer");
      if (auto c = r.find("choices"); c != r.end())
        for (const auto& x : *c) e.choices.push_back(x.get<std::string>());
      task.exemplars.push_back(std::move(e));
    }
  }
  task.shots = shots.value_or(std::min<int>(spec->default_shots, static_cast<int>(task.exemplars.size())));
  task.validate();
  return task;
}

}  // namespace cotforge
