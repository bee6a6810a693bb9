#include "doctest.h"

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"
#include "cotforge/seed_adapters.hpp"
#include "test_support.hpp"

using namespace cotforge;
using testing_support::TempDir;

namespace {
CoTSample adapt(const std::string& corpus, const json& record, std::size_t index = 0) {
  return seed_adapters().at(corpus)(record, index);
}
}  // namespace

TEST_CASE("every seed corpus has an adapter") {
  for (const char* name : {"strategyqa", "date_understanding", "aqua_rat", "gsm8k", "arc_challenge", "openbookqa",
                           "worldtree", "colored_objects", "tracking_shuffled_objects", "word_sorting"})
    CHECK(seed_adapters().count(name) == 1);
}

TEST_CASE("gsm8k: answer after ####, calculator annotations removed") {
  json r{{"question", "Natalia sold 48 clips in April and half as many in May. How many in total?"},
         {"answer", "Natalia sold 48/2 = <<48/2=24>>24 clips in May.\nShe sold 48+24 = <<48+24=72>>72 in total.\n#### 72"}};
  auto s = adapt("gsm8k", r, 4);
  CHECK(s.id == "gsm8k-4");
  CHECK(s.final_answer == "72");
  REQUIRE(s.rationale.size() == 2);
  CHECK(s.rationale[0] == "Natalia sold 48/2 = 24 clips in May.");
  CHECK(s.category == TaskCategory::math);
  CHECK(s.lineage.round == 0);
  CHECK_THROWS_AS(adapt("gsm8k", json{{"question", "q"}, {"answer", "no terminator"}}), DataError);
}

TEST_CASE("strategyqa: boolean answers and facts") {
  json r{{"qid", "abc"},
         {"question", "Could a llama birth twice during the War in Vietnam (1945-46)?"},
         {"answer", false},
         {"facts", {"The war lasted 6 months.", "Llama gestation is 11 months."}}};
  auto s = adapt("strategyqa", r);
  CHECK(s.id == "strategyqa-abc");
  CHECK(s.final_answer == "no");
  CHECK(s.rationale.size() == 2);
  CHECK(s.category == TaskCategory::commonsense);
}

TEST_CASE("aqua_rat: options are folded into the question") {
  json r{{"question", "What is 3+4?"},
         {"options", {"A)6", "B)7", "C)8"}},
         {"rationale", "3+4 = 7\nSo the answer is B"},
         {"correct", "B"}};
  auto s = adapt("aqua_rat", r);
  CHECK(s.question == "What is 3+4?\nAnswer Choices: (A) 6 (B) 7 (C) 8");
  CHECK(s.final_answer == "B");
  CHECK(s.rationale.size() == 2);
}

TEST_CASE("arc and openbookqa: stem plus labelled choices") {
  json r{{"id", "Mercury_1"},
         {"question", {{"stem", "Which is a mammal?"},
                       {"choices", {{{"label", "A"}, {"text", "shark"}}, {{"label", "B"}, {"text", "whale"}}}}}},
         {"answerKey", "B"},
         {"rationale", {"Whales breathe air and nurse their young."}}};
  auto s = adapt("arc_challenge", r);
  CHECK(s.question == "Which is a mammal?\nAnswer Choices: (A) shark (B) whale");
  CHECK(s.category == TaskCategory::science);
  CHECK(adapt("openbookqa", r).source_dataset == "openbookqa");
}

TEST_CASE("big-bench style corpora use input/target") {
  json r{{"input", "Sort: pear apple"}, {"target", {"apple pear"}}, {"rationale", "a comes before p"}};
  auto s = adapt("word_sorting", r, 2);
  CHECK(s.final_answer == "apple pear");
  CHECK(s.category == TaskCategory::symbolic);
  CHECK(adapt("date_understanding", r).category == TaskCategory::commonsense);
}

TEST_CASE("records without a rationale are rejected") {
  CHECK_THROWS_AS(adapt("worldtree", json{{"question", "q"}, {"answer", "a"}}), DataError);
}

TEST_CASE("ingest reads JSON lines, arrays and wrapped examples") {
  TempDir dir;
  json rec{{"question", "q1"}, {"answer", "a"}, {"explanation", "because"}};
  io::write_file_atomic(dir / "a.jsonl", rec.dump() + "\n\n" + rec.dump() + "\n");
  io::write_file_atomic(dir / "b.json", json::array({rec, rec, rec}).dump());
  io::write_file_atomic(dir / "c.json", json{{"examples", {rec}}}.dump());
  io::write_file_atomic(dir / "d.json", json{{"examples", json::array()}}.dump());
  CHECK(ingest_seed_corpus("worldtree", dir / "a.jsonl").size() == 2);
  CHECK(ingest_seed_corpus("worldtree", dir / "b.json").size() == 3);
  CHECK(ingest_seed_corpus("worldtree", dir / "c.json").size() == 1);
  CHECK(ingest_seed_corpus("worldtree", dir / "d.json").empty());
  CHECK_THROWS_AS(ingest_seed_corpus("nope", dir / "a.jsonl"), ConfigError);
  io::write_file_atomic(dir / "bad.jsonl", rec.dump() + "\n{oops\n");
  CHECK_THROWS_WITH_AS(ingest_seed_corpus("worldtree", dir / "bad.jsonl"), doctest::Contains(":2:"), DataError);
  io::write_file_atomic(dir / "bad2.jsonl", rec.dump() + "\n" + json{{"question", "x"}}.dump() + "\n");
  CHECK_THROWS_WITH_AS(ingest_seed_corpus("worldtree", dir / "bad2.jsonl"), doctest::Contains("record 2"), DataError);
}
