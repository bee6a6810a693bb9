#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include "cotforge/evolution.hpp"
#include "cotforge/gateway.hpp"

namespace cotforge {

enum class Verdict { yes, no, abstain };
enum class CheckKind { success_complicate, success_diversify, success_specify, correctness };
enum class Decision { accepted, rejected };

std::string_view to_string(Verdict v);
std::string_view to_string(CheckKind k);
std::string_view to_string(Decision d);

/// Three judges' verdicts on one check and the majority outcome.
struct VerdictBallot {
  CheckKind check_kind = CheckKind::correctness;
  std::array<Verdict, 3> member_verdicts{Verdict::abstain, Verdict::abstain, Verdict::abstain};
  Decision decision = Decision::rejected;
  /// std::nullopt where the member failed hard.
  std::array<std::optional<std::string>, 3> raw_responses;
};

json to_json(const VerdictBallot& b);

/// First standalone "yes"/"no" (any case) after the last "#Your Judgement#"
/// marker, or anywhere when the marker is absent. Nothing found: abstain.
Verdict parse_verdict(std::string_view response);

/// Accepted iff yes-votes strictly outnumber no-votes among non-abstentions;
/// ties, including all-abstain, reject.
Decision majority_decision(std::span<const Verdict> verdicts);

CheckKind success_check_for(Strategy s);
std::string render_success_prompt(const EvolutionCandidate& candidate);
std::string render_correctness_prompt(std::string_view question, std::string_view answer_text);

VerdictBallot run_ballot(CheckKind kind, const std::string& prompt, const JudgePanel& panel,
                         const GenerationParams& params);

/// Strategy-specific judgement of whether the rewrite achieved its objective.
VerdictBallot judge_success(const EvolutionCandidate& candidate, const JudgePanel& panel,
                            const GenerationParams& params);

/// Panel check that `answer_text` correctly answers `question`.
VerdictBallot verify_correctness(std::string_view question, std::string_view answer_text,
                                 const JudgePanel& panel, const GenerationParams& params);

struct FilterOptions {
  GenerationParams judging{0.0, 64, {}};
  /// Specify keeps the question and the answer, so by default it skips the
  /// correctness check.
  bool verify_specify = false;
};

struct FilterOutcome {
  Decision decision = Decision::rejected;
  VerdictBallot success;
  std::optional<VerdictBallot> correctness;
};

/// Success judgement first; correctness only for candidates that passed it.
/// `correctness_panel` defaults to `success_panel`.
FilterOutcome filter_candidate(const EvolutionCandidate& candidate, const JudgePanel& success_panel,
                               const FilterOptions& options = {},
                               const JudgePanel* correctness_panel = nullptr);

}  // namespace cotforge
