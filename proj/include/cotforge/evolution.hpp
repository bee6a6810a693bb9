#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotforge/dataset.hpp"
#include "cotforge/gateway.hpp"

namespace cotforge {

/// A rewritten sample awaiting the filters.
struct EvolutionCandidate {
  CoTSample parent;
  Strategy strategy = Strategy::complicate;
  std::string evolved_question;
  std::vector<std::string> evolved_rationale;
  std::string evolved_answer;
  std::vector<BackendExchange> exchanges;
  /// Complicate outputs are expected to need more steps than the parent;
  /// this flags (but does not reject) ones that do not.
  bool step_count_not_increased = false;

  bool complete() const { return !evolved_rationale.empty() && !evolved_answer.empty(); }
};

json to_json(const EvolutionCandidate& c);
EvolutionCandidate candidate_from_json(const json& j);

/// Throws DataError when the question (or, for specify, the rationale) is empty.
std::string render_complicate_prompt(const CoTSample& sample);
std::string render_diversify_prompt(const CoTSample& sample);
std::string render_specify_prompt(const CoTSample& sample);
std::string render_regenerate_prompt(std::string_view question);

/// Text after the last occurrence of `marker`, or the whole text; trimmed.
std::string after_last_marker(std::string_view text, std::string_view marker);

struct ParsedSolution {
  std::vector<std::string> steps;
  std::optional<std::string> answer;
};

/// Splits a model solution into steps and a final answer. Step markers are
/// recognised in precedence order "Step k:", then "k." / "k)", then one step
/// per bare line. The answer comes from the last line carrying an answer cue
/// ("The answer is", "Answer:", "Final answer").
ParsedSolution parse_solution(std::string_view text);

/// Complicate or diversify rewrite of the question. Throws SampleFailure
/// ("evolution_failed") when nothing usable comes back.
std::string evolve_question(const CoTSample& sample, Strategy strategy, LlmClient& backend,
                            const GenerationParams& params,
                            std::vector<BackendExchange>* exchanges = nullptr);

struct RegeneratedRationale {
  std::vector<std::string> steps;
  std::string answer;
  bool step_count_not_increased = false;
};

/// Solves `question` step by step with reason-then-answer ordering. Throws
/// SampleFailure ("regeneration_failed") if no answer can be parsed.
RegeneratedRationale regenerate_rationale(std::string_view question, Strategy strategy,
                                          const CoTSample& parent, LlmClient& backend,
                                          const GenerationParams& params,
                                          std::vector<BackendExchange>* exchanges = nullptr);

/// Specify rewrite of the rationale; the question is carried over verbatim.
/// A rewrite without a parseable answer keeps the parent's answer, since the
/// rewrite instruction requires it to be unchanged.
EvolutionCandidate specify_rationale(const CoTSample& sample, LlmClient& backend,
                                     const GenerationParams& params);

/// Full candidate for one (sample, strategy): one or two generation calls.
EvolutionCandidate make_candidate(const CoTSample& sample, Strategy strategy, LlmClient& backend,
                                  const GenerationParams& params);

/// Child sample for an accepted candidate at `round`.
CoTSample materialize(const EvolutionCandidate& candidate, int round);

}  // namespace cotforge
