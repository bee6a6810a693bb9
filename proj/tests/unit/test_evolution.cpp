#include "doctest.h"

#include "cotforge/errors.hpp"
#include "cotforge/evolution.hpp"
#include "cotforge/io.hpp"
#include "cotforge/scripted_backend.hpp"
#include "test_support.hpp"

using namespace cotforge;
using testing_support::fast_retry;
using testing_support::fixture;
using testing_support::SampleGenerator;

namespace {

CoTSample natalia() {
  CoTSample s;
  s.id = "gsm8k-0";
  s.question =
      "Natalia sold clips to 48 of her friends in April, and then she sold half as many clips in May. How many "
      "clips did Natalia sell altogether in April and May?";
  s.rationale = {"Natalia sold 48/2 = 24 clips in May.", "Natalia sold 48+24 = 72 clips altogether in April and May."};
  s.final_answer = "72";
  s.source_dataset = "gsm8k";
  return s;
}

struct Scripted {
  std::shared_ptr<ScriptedBackend> backend;
  LlmClient client;
  explicit Scripted(std::vector<ScriptRule> rules)
      : backend(std::make_shared<ScriptedBackend>("gen", std::move(rules))), client(backend, fast_retry()) {}
};

ScriptRule reply_when(std::string needle, std::string text) { return ScriptRule::when_contains({needle}, text); }

}  // namespace

TEST_CASE("rendered prompts match golden files byte for byte") {
  CHECK(render_complicate_prompt(natalia()) == io::read_file(fixture("golden/rendered_complicate.txt")));
  CHECK(render_diversify_prompt(natalia()) == io::read_file(fixture("golden/rendered_diversify.txt")));
  CHECK(render_specify_prompt(natalia()) == io::read_file(fixture("golden/rendered_specify.txt")));
}

TEST_CASE("complicate prompt carries the question and both sub-methods") {
  CoTSample s = natalia();
  s.question = "Q";
  auto p = render_complicate_prompt(s);
  CHECK(p.find("\n#Given Question#: Q\n") != std::string::npos);
  CHECK(p.find("\n#Rewritten Question#:") != std::string::npos);
  CHECK(p.find("Add some more constraints/requirements") != std::string::npos);
  CHECK(p.find("Increase the depth") != std::string::npos);
  CHECK(render_diversify_prompt(s).find("more diverse version") != std::string::npos);
}

TEST_CASE("specify prompt lists the steps in order") {
  auto p = render_specify_prompt(natalia());
  auto a = p.find("#Given CoT#: Step 1: Natalia sold 48/2");
  auto b = p.find("Step 2: Natalia sold 48+24");
  REQUIRE(a != std::string::npos);
  REQUIRE(b != std::string::npos);
  CHECK(a < b);
  CHECK(p.find("Add more reasoning steps") != std::string::npos);
  CHECK(p.find("Rewrite existing reasoning steps") != std::string::npos);
}

TEST_CASE("empty inputs are precondition errors") {
  CoTSample s = natalia();
  s.question = "";
  CHECK_THROWS_AS(render_complicate_prompt(s), DataError);
  CHECK_THROWS_AS(render_diversify_prompt(s), DataError);
  s = natalia();
  s.rationale.clear();
  CHECK_THROWS_AS(render_specify_prompt(s), DataError);
}

TEST_CASE("evolve_question extraction") {
  {
    Scripted g({reply_when("more complex", "#Rewritten Question#: X")});
    CHECK(evolve_question(natalia(), Strategy::complicate, g.client, {}) == "X");
  }
  {
    Scripted g({reply_when("more diverse", "X")});
    CHECK(evolve_question(natalia(), Strategy::diversify, g.client, {}) == "X");
  }
  {
    Scripted g({reply_when("more complex", "#Given Question#: old\n#Rewritten Question#:  New one? ")});
    CHECK(evolve_question(natalia(), Strategy::complicate, g.client, {}) == "New one?");
  }
  {
    Scripted g({reply_when("more complex", "")});
    try {
      evolve_question(natalia(), Strategy::complicate, g.client, {});
      FAIL("expected SampleFailure");
    } catch (const SampleFailure& e) {
      CHECK(e.reason() == "evolution_failed");
    }
  }
  Scripted g({reply_when("", "x")});
  CHECK_THROWS_AS(evolve_question(natalia(), Strategy::specify, g.client, {}), InvariantViolation);
}

TEST_CASE("parse_solution: step marker precedence") {
  auto p = parse_solution("Step 1: a\nStep 2: b\ncontinued\nStep 3: c\nThe answer is 7.");
  CHECK(p.steps == std::vector<std::string>{"a", "b continued", "c"});
  CHECK(p.answer == "7");

  p = parse_solution("1. first\n2) second\nSo the answer is 12");
  CHECK(p.steps == std::vector<std::string>{"first", "second"});
  CHECK(p.answer == "12");

  p = parse_solution("Think about it.\nThen add.\nAnswer: 5");
  CHECK(p.steps == std::vector<std::string>{"Think about it.", "Then add."});
  CHECK(p.answer == "5");

  p = parse_solution("step 1 - x\n1. not a step marker here\nFinal answer: B!");
  CHECK(p.steps == std::vector<std::string>{"x 1. not a step marker here"});
  CHECK(p.answer == "B");
}

TEST_CASE("parse_solution keeps reasoning sharing the answer line") {
  auto p = parse_solution("Step 1: 3 + 4 = 7, so the answer is 7");
  CHECK(p.steps == std::vector<std::string>{"3 + 4 = 7, so the answer is 7"});
  CHECK(p.answer == "7");
}

TEST_CASE("regenerate_rationale: three-step fixture") {
  Scripted g({reply_when("Solve the following question",
                         "Step 1: Find May sales: 48/2 = 24.\nStep 2: Add: 48 + 24 = 72.\nStep 3: Triple it: 216.\n"
                         "The answer is 216")});
  auto r = regenerate_rationale("harder question", Strategy::complicate, natalia(), g.client, {});
  CHECK(r.steps.size() == 3);
  CHECK(r.answer == "216");
  CHECK_FALSE(r.step_count_not_increased);
  CHECK(g.backend->calls()[0].find("#Question#: harder question") != std::string::npos);
}

TEST_CASE("regenerate_rationale: single answer line and the step-count flag") {
  Scripted g({reply_when("Solve the following question", "The answer is 9")});
  auto r = regenerate_rationale("q", Strategy::complicate, natalia(), g.client, {});
  CHECK(r.steps == std::vector<std::string>{"The answer is 9"});
  CHECK(r.answer == "9");
  CHECK(r.step_count_not_increased);
  auto d = regenerate_rationale("q", Strategy::diversify, natalia(), g.client, {});
  CHECK_FALSE(d.step_count_not_increased);
}

TEST_CASE("regenerate_rationale: empty response fails the sample") {
  Scripted g({reply_when("Solve the following question", "")});
  try {
    regenerate_rationale("q", Strategy::diversify, natalia(), g.client, {});
    FAIL("expected SampleFailure");
  } catch (const SampleFailure& e) {
    CHECK(e.reason() == "regeneration_failed");
  }
}

TEST_CASE("specify keeps the question and falls back to the parent answer") {
  Scripted g({reply_when("Chain-of-Thought Rewriter",
                         "#Rewritten CoT#:\nStep 1: In April she sold 48.\nStep 2: May is half: 24.\nStep 3: 48 + 24 = 72.")});
  auto c = make_candidate(natalia(), Strategy::specify, g.client, {});
  CHECK(c.evolved_question == natalia().question);
  CHECK(c.evolved_rationale.size() == 3);
  CHECK(c.evolved_answer == "72");
  CHECK(g.backend->call_count() == 1);
  CHECK(c.exchanges.size() == 1);
}

TEST_CASE("specify drops a rewrite that changes the answer") {
  Scripted same({reply_when("Chain-of-Thought Rewriter", "#Rewritten CoT#:\nStep 1: 48 / 2 = 24.\nStep 2: 48 + 24 = 72.\nThe answer is 72.")});
  CHECK(make_candidate(natalia(), Strategy::specify, same.client, {}).evolved_answer == "72");
  Scripted changed({reply_when("Chain-of-Thought Rewriter", "#Rewritten CoT#:\nStep 1: 48 + 48 = 96.\nThe answer is 96")});
  try {
    make_candidate(natalia(), Strategy::specify, changed.client, {});
    FAIL("expected SampleFailure");
  } catch (const SampleFailure& e) {
    CHECK(e.reason() == "specify_answer_changed");
  }
}

TEST_CASE("generation calls per candidate are bounded") {
  Scripted g({reply_when("more complex", "#Rewritten Question#: harder"),
              reply_when("more diverse", "#Rewritten Question#: other"),
              reply_when("Chain-of-Thought Rewriter", "Step 1: a\nStep 2: b"),
              reply_when("Solve the following", "Step 1: a\nStep 2: b\nStep 3: c\nThe answer is 1")});
  for (auto s : kAllStrategies) {
    std::size_t before = g.backend->call_count();
    auto c = make_candidate(natalia(), s, g.client, {});
    std::size_t used = g.backend->call_count() - before;
    CHECK(used == (s == Strategy::specify ? 1u : 2u));
    CHECK(c.complete());
  }
}

TEST_CASE("property: specify children always keep the parent question") {
  SampleGenerator gen(31);
  ScriptRule rewrite;
  rewrite.contains = {"Chain-of-Thought Rewriter"};
  rewrite.generator = [](const std::string& prompt) {
    return "#Rewritten CoT#:\nStep 1: detail " + std::to_string(prompt.size()) + "\nStep 2: more detail";
  };
  Scripted g({rewrite});
  for (int i = 0; i < 300; ++i) {
    CoTSample parent = gen.sample("p" + std::to_string(i), i % 3, {"x"});
    auto c = make_candidate(parent, Strategy::specify, g.client, {});
    auto child = materialize(c, parent.lineage.round + 1);
    CHECK(child.question == parent.question);
    CHECK(child.lineage.parent_id == parent.id);
    CHECK(child.lineage.strategy == Strategy::specify);
    CHECK(child.lineage.round == parent.lineage.round + 1);
  }
}

TEST_CASE("candidate JSON round trip and specify invariant on read") {
  Scripted g({reply_when("more complex", "#Rewritten Question#: harder"),
              reply_when("Solve the following", "Step 1: a\nThe answer is 1")});
  auto c = make_candidate(natalia(), Strategy::complicate, g.client, {});
  auto back = candidate_from_json(to_json(c));
  CHECK(back.parent == c.parent);
  CHECK(back.evolved_question == c.evolved_question);
  CHECK(back.evolved_rationale == c.evolved_rationale);
  CHECK(back.evolved_answer == c.evolved_answer);
  CHECK(back.step_count_not_increased == c.step_count_not_increased);
  CHECK(back.exchanges.empty());

  json bad = to_json(c);
  bad["strategy"] = "specify";
  CHECK_THROWS_AS(candidate_from_json(bad), DataError);
}

TEST_CASE("materialize assigns id, lineage and provenance") {
  EvolutionCandidate c;
  c.parent = natalia();
  c.strategy = Strategy::diversify;
  c.evolved_question = "new";
  c.evolved_rationale = {"a"};
  c.evolved_answer = "b";
  auto s = materialize(c, 1);
  CHECK(s.id == "gsm8k-0/d1");
  CHECK(s.lineage.round == 1);
  CHECK(s.source_dataset == "evolved");
  c.evolved_rationale.clear();
  CHECK_THROWS_AS(materialize(c, 1), InvariantViolation);
}
