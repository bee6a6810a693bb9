#include "cotforge/filter.hpp"

#include <cctype>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"
#include "cotforge/templates.hpp"

namespace cotforge {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::abstain: return "abstain";
  }
  return "?";
}

std::string_view to_string(CheckKind k) {
  switch (k) {
    case CheckKind::success_complicate: return "success_complicate";
    case CheckKind::success_diversify: return "success_diversify";
    case CheckKind::success_specify: return "success_specify";
    case CheckKind::correctness: return "correctness";
  }
  return "?";
}

std::string_view to_string(Decision d) { return d == Decision::accepted ? "accepted" : "rejected"; }

json to_json(const VerdictBallot& b) {
  json verdicts = json::array();
  json raw = json::array();
  for (size_t i = 0; i < 3; ++i) {
    verdicts.push_back(std::string(to_string(b.member_verdicts[i])));
    raw.push_back(b.raw_responses[i] ? json(*b.raw_responses[i]) : json(nullptr));
  }
  return json{{"check_kind", std::string(to_string(b.check_kind))},
              {"member_verdicts", verdicts},
              {"decision", std::string(to_string(b.decision))},
              {"raw_responses", raw}};
}

Verdict parse_verdict(std::string_view response) {
  constexpr std::string_view kMarker = "#Your Judgement#";
  auto pos = response.rfind(kMarker);
  std::string_view scan = pos == std::string_view::npos ? response : response.substr(pos + kMarker.size());
  size_t i = 0;
  while (i < scan.size()) {
    while (i < scan.size() && !std::isalnum(static_cast<unsigned char>(scan[i]))) ++i;
    size_t start = i;
    while (i < scan.size() && std::isalnum(static_cast<unsigned char>(scan[i]))) ++i;
    std::string word = io::to_lower(scan.substr(start, i - start));
    if (word == "yes") return Verdict::yes;
    if (word == "no") return Verdict::no;
  }
  return Verdict::abstain;
}

Decision majority_decision(std::span<const Verdict> verdicts) {
  int yes = 0, no = 0;
  for (Verdict v : verdicts) {
    if (v == Verdict::yes) ++yes;
    if (v == Verdict::no) ++no;
  }
  return yes > no ? Decision::accepted : Decision::rejected;
}

CheckKind success_check_for(Strategy s) {
  switch (s) {
    case Strategy::complicate: return CheckKind::success_complicate;
    case Strategy::diversify: return CheckKind::success_diversify;
    case Strategy::specify: return CheckKind::success_specify;
  }
  throw InvariantViolation("unknown strategy");
}

std::string render_success_prompt(const EvolutionCandidate& c) {
  switch (c.strategy) {
    case Strategy::complicate:
      return templates::render(templates::kSuccessComplicate.text,
                               {{"Question 1", c.parent.question}, {"Question 2", c.evolved_question}});
    case Strategy::diversify:
      return templates::render(templates::kSuccessDiversify.text,
                               {{"Question 1", c.parent.question}, {"Question 2", c.evolved_question}});
    case Strategy::specify:
      return templates::render(templates::kSuccessSpecify.text,
                               {{"Question", c.parent.question},
                                {"CoT 1", format_cot(c.parent.rationale, c.parent.final_answer)},
                                {"CoT 2", format_cot(c.evolved_rationale, c.evolved_answer)}});
  }
  throw InvariantViolation("unknown strategy");
}

std::string render_correctness_prompt(std::string_view question, std::string_view answer_text) {
  return templates::render(templates::kCorrectness.text,
                           {{"Question", std::string(question)}, {"Answer", std::string(answer_text)}});
}

VerdictBallot run_ballot(CheckKind kind, const std::string& prompt, const JudgePanel& panel,
                         const GenerationParams& params) {
  VerdictBallot b;
  b.check_kind = kind;
  b.raw_responses = panel.ask(prompt, params);
  for (size_t i = 0; i < 3; ++i)
    b.member_verdicts[i] = b.raw_responses[i] ? parse_verdict(*b.raw_responses[i]) : Verdict::abstain;
  b.decision = majority_decision(b.member_verdicts);
  return b;
}

VerdictBallot judge_success(const EvolutionCandidate& candidate, const JudgePanel& panel,
                            const GenerationParams& params) {
  return run_ballot(success_check_for(candidate.strategy), render_success_prompt(candidate), panel,
                    params);
}

VerdictBallot verify_correctness(std::string_view question, std::string_view answer_text,
                                 const JudgePanel& panel, const GenerationParams& params) {
  return run_ballot(CheckKind::correctness, render_correctness_prompt(question, answer_text), panel,
                    params);
}

FilterOutcome filter_candidate(const EvolutionCandidate& candidate, const JudgePanel& success_panel,
                               const FilterOptions& options, const JudgePanel* correctness_panel) {
  if (!candidate.complete()) throw InvariantViolation("filtering an incomplete candidate");
  FilterOutcome out;
  out.success = judge_success(candidate, success_panel, options.judging);
  if (out.success.decision == Decision::rejected) return out;

  const bool needs_correctness = candidate.strategy != Strategy::specify || options.verify_specify;
  if (needs_correctness) {
    out.correctness = verify_correctness(
        candidate.evolved_question, format_cot(candidate.evolved_rationale, candidate.evolved_answer),
        correctness_panel ? *correctness_panel : success_panel, options.judging);
    if (out.correctness->decision == Decision::rejected) return out;
  }
  out.decision = Decision::accepted;
  return out;
}

}  // namespace cotforge
