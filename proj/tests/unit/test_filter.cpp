#include "doctest.h"

#include <algorithm>

#include "cotforge/errors.hpp"
#include "cotforge/filter.hpp"
#include "cotforge/scripted_backend.hpp"
#include "test_support.hpp"

using namespace cotforge;
using testing_support::fast_retry;

namespace {

EvolutionCandidate candidate(Strategy s) {
  EvolutionCandidate c;
  c.parent.id = "p";
  c.parent.question = "How many clips in total?";
  c.parent.rationale = {"48 in April.", "24 in May."};
  c.parent.final_answer = "72";
  c.strategy = s;
  c.evolved_question = s == Strategy::specify ? c.parent.question : "How many clips if tripled?";
  c.evolved_rationale = {"48 + 24 = 72.", "72 * 3 = 216."};
  c.evolved_answer = "216";
  return c;
}

struct Panel {
  std::vector<std::shared_ptr<ScriptedBackend>> backends;
  std::unique_ptr<JudgePanel> panel;

  // Per-member replies for the success ballot and the correctness ballot.
  Panel(std::array<std::string, 3> success, std::array<std::string, 3> correctness) {
    std::vector<ClientHandle> clients;
    for (int i = 0; i < 3; ++i) {
      auto b = std::make_shared<ScriptedBackend>(
          "judge" + std::to_string(i),
          std::vector<ScriptRule>{ScriptRule::when_contains({"right or wrong"}, correctness[i]),
                                  ScriptRule::when_contains({"#Your Judgement#"}, success[i])});
      backends.push_back(b);
      clients.push_back(std::make_shared<LlmClient>(b, fast_retry(1)));
    }
    panel = std::make_unique<JudgePanel>(clients);
  }
  std::size_t calls() const {
    std::size_t n = 0;
    for (const auto& b : backends) n += b->call_count();
    return n;
  }
};

std::string word(Verdict v) {
  switch (v) {
    case Verdict::yes: return "#Your Judgement#: Yes";
    case Verdict::no: return "#Your Judgement#: No.";
    case Verdict::abstain: return "I cannot decide.";
  }
  return "";
}

constexpr Verdict kAll[] = {Verdict::yes, Verdict::no, Verdict::abstain};

}  // namespace

TEST_CASE("correctness template wording is what the panel fixture keys on") {
  CHECK(render_correctness_prompt("q", "a").find("right or wrong") != std::string::npos);
}

TEST_CASE("parse_verdict examples") {
  CHECK(parse_verdict("#Your Judgement#: Yes") == Verdict::yes);
  CHECK(parse_verdict("yes.") == Verdict::yes);
  CHECK(parse_verdict("  NO, it is not") == Verdict::no);
  CHECK(parse_verdict("Yesterday I thought no") == Verdict::no);
  CHECK(parse_verdict("maybe") == Verdict::abstain);
  CHECK(parse_verdict("") == Verdict::abstain);
  CHECK(parse_verdict("No wait. #Your Judgement#: yes") == Verdict::yes);
  CHECK(parse_verdict("Nothing to add. Yes") == Verdict::yes);
}

TEST_CASE("majority over all 27 verdict patterns") {
  for (Verdict a : kAll)
    for (Verdict b : kAll)
      for (Verdict c : kAll) {
        std::array<Verdict, 3> v{a, b, c};
        int yes = static_cast<int>(std::count(v.begin(), v.end(), Verdict::yes));
        int no = static_cast<int>(std::count(v.begin(), v.end(), Verdict::no));
        Decision oracle = yes > no ? Decision::accepted : Decision::rejected;
        CHECK(majority_decision(v) == oracle);

        // Order invariance: every permutation gives the same decision.
        std::array<Verdict, 3> p = v;
        std::sort(p.begin(), p.end());
        do {
          CHECK(majority_decision(p) == oracle);
        } while (std::next_permutation(p.begin(), p.end()));

        // Monotonicity: turning any member into Yes never flips accept to reject.
        for (int i = 0; i < 3; ++i) {
          auto up = v;
          up[i] = Verdict::yes;
          if (oracle == Decision::accepted) CHECK(majority_decision(up) == Decision::accepted);
        }
      }
  std::array<Verdict, 3> two_abstain{Verdict::yes, Verdict::abstain, Verdict::abstain};
  CHECK(majority_decision(two_abstain) == Decision::accepted);
  std::array<Verdict, 3> tie{Verdict::yes, Verdict::no, Verdict::abstain};
  CHECK(majority_decision(tie) == Decision::rejected);
}

TEST_CASE("filter over all success patterns agrees with the oracle") {
  for (Verdict a : kAll)
    for (Verdict b : kAll)
      for (Verdict c : kAll) {
        Panel p({word(a), word(b), word(c)}, {word(Verdict::yes), word(Verdict::yes), word(Verdict::no)});
        auto out = filter_candidate(candidate(Strategy::complicate), *p.panel);
        std::array<Verdict, 3> v{a, b, c};
        CHECK(out.success.member_verdicts == v);
        bool pass = majority_decision(v) == Decision::accepted;
        CHECK(out.decision == (pass ? Decision::accepted : Decision::rejected));
        CHECK(out.correctness.has_value() == pass);
        CHECK(p.calls() == (pass ? 6u : 3u));
      }
}

TEST_CASE("failed correctness rejects an evolved sample") {
  Panel p({word(Verdict::yes), word(Verdict::yes), word(Verdict::yes)},
          {word(Verdict::no), word(Verdict::no), word(Verdict::yes)});
  auto out = filter_candidate(candidate(Strategy::diversify), *p.panel);
  CHECK(out.success.decision == Decision::accepted);
  REQUIRE(out.correctness);
  CHECK(out.correctness->decision == Decision::rejected);
  CHECK(out.decision == Decision::rejected);
  CHECK(out.success.check_kind == CheckKind::success_diversify);
  CHECK(out.correctness->check_kind == CheckKind::correctness);
}

TEST_CASE("specify skips the correctness ballot unless asked") {
  Panel p({word(Verdict::yes), word(Verdict::yes), word(Verdict::no)},
          {word(Verdict::no), word(Verdict::no), word(Verdict::no)});
  auto out = filter_candidate(candidate(Strategy::specify), *p.panel);
  CHECK(out.decision == Decision::accepted);
  CHECK_FALSE(out.correctness);
  CHECK(p.calls() == 3);

  FilterOptions opts;
  opts.verify_specify = true;
  auto checked = filter_candidate(candidate(Strategy::specify), *p.panel, opts);
  CHECK(checked.decision == Decision::rejected);
  CHECK(p.calls() == 9);
}

TEST_CASE("a separate correctness panel is used when given") {
  Panel success({word(Verdict::yes), word(Verdict::yes), word(Verdict::yes)},
                {word(Verdict::no), word(Verdict::no), word(Verdict::no)});
  Panel correctness({word(Verdict::no), word(Verdict::no), word(Verdict::no)},
                    {word(Verdict::yes), word(Verdict::yes), word(Verdict::yes)});
  auto out = filter_candidate(candidate(Strategy::complicate), *success.panel, {}, correctness.panel.get());
  CHECK(out.decision == Decision::accepted);
  CHECK(success.calls() == 3);
  CHECK(correctness.calls() == 3);
}

TEST_CASE("a timed-out member abstains and the other two decide") {
  std::vector<ClientHandle> clients;
  ScriptRule timeout;
  timeout.outcomes.push_back(ScriptOutcome::fail(FailureClass::timeout));
  clients.push_back(std::make_shared<LlmClient>(
      std::make_shared<ScriptedBackend>("slow", std::vector<ScriptRule>{timeout}), fast_retry(2)));
  for (int i = 0; i < 2; ++i)
    clients.push_back(std::make_shared<LlmClient>(
        std::make_shared<ScriptedBackend>("ok" + std::to_string(i),
                                          std::vector<ScriptRule>{ScriptRule::when_contains({""}, "Yes")}),
        fast_retry(1)));
  JudgePanel panel(clients);
  auto out = filter_candidate(candidate(Strategy::complicate), panel);
  CHECK(out.success.member_verdicts ==
        std::array<Verdict, 3>{Verdict::abstain, Verdict::yes, Verdict::yes});
  CHECK_FALSE(out.success.raw_responses[0]);
  CHECK(out.decision == Decision::accepted);
}

TEST_CASE("success prompts carry both questions or both rationales") {
  auto c = candidate(Strategy::complicate);
  auto p = render_success_prompt(c);
  CHECK(p.find("#Question 1#: " + c.parent.question) != std::string::npos);
  CHECK(p.find("#Question 2#: " + c.evolved_question) != std::string::npos);
  auto s = render_success_prompt(candidate(Strategy::specify));
  CHECK(s.find("#CoT 1#: Step 1: 48 in April.") != std::string::npos);
  CHECK(s.find("#CoT 2#: Step 1: 48 + 24 = 72.") != std::string::npos);
  auto incomplete = candidate(Strategy::diversify);
  incomplete.evolved_answer.clear();
  Panel panel({"Yes", "Yes", "Yes"}, {"Yes", "Yes", "Yes"});
  CHECK_THROWS_AS(filter_candidate(incomplete, *panel.panel), InvariantViolation);
}

TEST_CASE("ballot JSON keeps raw responses and abstentions") {
  VerdictBallot b;
  b.check_kind = CheckKind::success_specify;
  b.member_verdicts = {Verdict::yes, Verdict::abstain, Verdict::no};
  b.raw_responses = {std::string("Yes"), std::nullopt, std::string("No")};
  auto j = to_json(b);
  CHECK(j["check_kind"] == "success_specify");
  CHECK(j["member_verdicts"] == json::array({"yes", "abstain", "no"}));
  CHECK(j["raw_responses"][1].is_null());
  CHECK(j["decision"] == "rejected");
}
