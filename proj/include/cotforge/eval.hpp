#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotforge/debate.hpp"
#include "cotforge/gateway.hpp"

namespace cotforge {

enum class AnswerKind { multiple_choice, numeric, free_text };
enum class EvalStrategy { direct, self_consistency, debate };
enum class AnswerPosition { front, behind };

std::string_view to_string(AnswerKind k);
std::string_view to_string(EvalStrategy s);
std::string_view to_string(AnswerPosition p);
std::optional<AnswerKind> parse_answer_kind(std::string_view name);
/// Accepts "direct", "sc"/"self_consistency" and "debate".
std::optional<EvalStrategy> parse_eval_strategy(std::string_view name);

struct EvalItem {
  std::string question;
  std::string gold;
  /// Choice texts, labelled A, B, C... in order. Non-empty iff multiple choice.
  std::vector<std::string> choices;
};

/// Few-shot demonstration drawn from a split disjoint from the items.
struct Exemplar {
  std::string id;
  std::string question;
  std::vector<std::string> rationale;
  std::string answer;
  std::vector<std::string> choices;
};

struct EvalTask {
  std::string name;
  std::vector<EvalItem> items;
  std::vector<Exemplar> exemplars;
  int shots = 0;
  AnswerKind answer_kind = AnswerKind::free_text;

  /// Throws DataError on an empty task, shots without enough exemplars,
  /// choices inconsistent with the answer kind, or exemplar/item overlap.
  void validate() const;
};

struct ItemRecord {
  std::size_t index = 0;
  std::string question;
  std::string gold;
  std::string prediction;
  std::string extracted;
  bool match = false;
  std::optional<std::string> error;
  /// Every sampled completion (self-consistency) or the debate transcript.
  json detail;
};

struct EvalResult {
  std::string task;
  std::string strategy;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<ItemRecord> items;
  /// Exemplar ids actually shown, for the run manifest.
  std::vector<std::string> exemplar_ids;
};

json to_json(const EvalResult& r);

/// Choice letter for index i: 0 -> "A".
std::string choice_label(std::size_t index);

/// multiple_choice: last "(X)" choice letter, else the last standalone choice
/// letter, else the choice text with the best match; numeric: the first
/// number after the last answer cue, else the last number in the response,
/// with commas and currency removed and decimals canonicalised; free_text:
/// the text after the last "answer is" cue, else a trailing \boxed{...},
/// else the last line. Empty when nothing can be extracted.
std::string extract_answer(std::string_view response, AnswerKind kind,
                           std::span<const std::string> choices = {});

/// Canonical decimal form: "1,234.50" -> "1234.5", "$3.00" -> "3".
std::string normalize_number(std::string_view text);

/// Normalised equality. Numeric golds with a fractional part may match within
/// `relative_tolerance`.
bool answers_match(std::string_view extracted, std::string_view gold, AnswerKind kind,
                   double relative_tolerance = 1e-6);

/// Most frequent non-empty answer; ties go to the one sampled first.
std::string modal_answer(std::span<const std::string> answers);

struct PromptOptions {
  std::optional<int> step_count;
  AnswerPosition position = AnswerPosition::behind;
};

/// One exemplar rendered as its answer block. `behind` puts the answer line
/// after the steps, `front` before them.
std::string render_exemplar_answer(const Exemplar& e, AnswerPosition position);

std::string render_question_block(std::string_view question, std::span<const std::string> choices);

std::string render_eval_prompt(const EvalTask& task, const EvalItem& item,
                               const PromptOptions& options = {});

struct SelfConsistencyResult {
  std::string answer;
  std::vector<std::string> responses;
  std::vector<std::string> extracted;
};

/// Samples `paths` completions of `prompt` and returns the modal answer.
/// Requires paths >= 1 and a positive temperature.
SelfConsistencyResult self_consistency(const std::string& prompt, LlmClient& backend, int paths,
                                       const GenerationParams& params, AnswerKind kind,
                                       std::span<const std::string> choices = {});

struct EvalBackends {
  ClientHandle primary;
  DebateAgents debate;
};

struct EvalOptions {
  GenerationParams params{0.1, 512, {}};
  /// Self-consistency samples at a higher temperature for path diversity.
  GenerationParams sc_params{0.7, 512, {}};
  int paths = 10;
  DebateOptions debate;
  PromptOptions prompt;
  double relative_tolerance = 1e-6;
  int max_in_flight = 8;
};

EvalResult evaluate(const EvalTask& task, EvalStrategy strategy, const EvalBackends& backends,
                    const EvalOptions& options = {});

/// Scores precomputed responses; pure and independent of response order.
EvalResult score_responses(const EvalTask& task, std::string_view strategy,
                           std::span<const std::string> responses, double relative_tolerance = 1e-6);

EvalResult probe_step_count(const EvalTask& task, const ClientHandle& backend, int steps,
                            EvalOptions options = {});

/// Rewrites the shown exemplars' rationales with the specify instruction
/// `iterations` times, then evaluates directly.
EvalResult probe_specificity(const EvalTask& task, const ClientHandle& backend, int iterations,
                             EvalOptions options = {},
                             const GenerationParams& rewrite_params = {0.7, 1024, {}});

/// Returns the exemplars after `iterations` specify rewrites (exposed for tests).
std::vector<Exemplar> specify_exemplars(std::vector<Exemplar> exemplars, LlmClient& backend,
                                        int iterations, const GenerationParams& params);

EvalResult probe_answer_position(const EvalTask& task, const ClientHandle& backend,
                                 AnswerPosition position, EvalOptions options = {});

/// Task readers for benchmark file layouts, keyed by task name.
using TaskAdapter = std::function<EvalItem(const nlohmann::ordered_json& record, std::size_t index)>;

struct TaskSpec {
  std::string name;
  /// std::nullopt: inferred from the items (generic layout).
  std::optional<AnswerKind> kind;
  int default_shots;
  TaskAdapter adapter;
};

const std::vector<TaskSpec>& task_registry();
const TaskSpec* find_task(std::string_view name);

/// Loads items with the named adapter (JSON lines, a JSON array, a BIG-bench
/// task.json, or CSV for MMLU-style files) and exemplars from a JSON-lines
/// file of {id, question, rationale, answer[, choices]} records.
EvalTask load_eval_task(std::string_view name, const std::filesystem::path& items,
                        const std::optional<std::filesystem::path>& exemplars,
                        std::optional<int> shots = std::nullopt,
                        std::optional<std::size_t> limit = std::nullopt);

}  // namespace cotforge
