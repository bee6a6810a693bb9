#include "doctest.h"

#include <algorithm>
#include <map>

#include "cotforge/dataset.hpp"
#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"
#include "test_support.hpp"

using namespace cotforge;
using testing_support::SampleGenerator;
using testing_support::TempDir;

namespace {

CoTSample make(const std::string& id, int round, const std::string& question = "Q",
               TaskCategory cat = TaskCategory::math) {
  CoTSample s;
  s.id = id;
  s.question = question;
  s.rationale = {"step one", "step two"};
  s.final_answer = "4";
  s.category = cat;
  s.source_dataset = round == 0 ? "gsm8k" : "evolved";
  s.lineage.round = round;
  if (round > 0) {
    s.lineage.parent_id = "p";
    s.lineage.strategy = Strategy::complicate;
  }
  return s;
}

}  // namespace

TEST_CASE("load_dataset: empty file gives an empty list") {
  TempDir dir;
  io::write_file_atomic(dir / "empty.jsonl", "");
  CHECK(load_dataset(dir / "empty.jsonl").empty());
}

TEST_CASE("load_dataset: three records keep file order") {
  TempDir dir;
  std::vector<CoTSample> in{make("b", 0), make("a", 0), make("c", 0)};
  save_dataset(in, dir / "d.jsonl");
  auto out = load_dataset(dir / "d.jsonl");
  REQUIRE(out.size() == 3);
  CHECK(out[0].id == "b");
  CHECK(out[1].id == "a");
  CHECK(out[2].id == "c");
  CHECK(out == in);
}

TEST_CASE("load_dataset: invariant violations name the line and the invariant") {
  json rec = to_json(make("x", 0));
  rec["rationale"] = json::array();
  std::string text = serialize_record(make("ok", 0)) + "\n" + rec.dump() + "\n";
  try {
    parse_dataset(text, "f.jsonl");
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("f.jsonl:2:") != std::string::npos);
    CHECK(std::string(e.what()).find("rationale is empty") != std::string::npos);
  }
  rec["rationale"] = json::array({"fine", "   "});
  CHECK_THROWS_WITH_AS(parse_dataset(rec.dump()), doctest::Contains("step 2 is blank"), DataError);
  rec = to_json(make("x", 0));
  rec["final_answer"] = "";
  CHECK_THROWS_WITH_AS(parse_dataset(rec.dump()), doctest::Contains("final_answer"), DataError);
  CHECK_THROWS_WITH_AS(parse_dataset("{not json"), doctest::Contains(":1:"), DataError);
}

TEST_CASE("load_dataset: duplicate ids are rejected") {
  std::string text = serialize_record(make("a", 0)) + "\n" + serialize_record(make("a", 0)) + "\n";
  CHECK_THROWS_WITH_AS(parse_dataset(text), doctest::Contains("duplicate id"), DataError);
}

TEST_CASE("lineage invariants are enforced on read") {
  json rec = to_json(make("x", 0));
  rec["lineage"]["parent_id"] = "p";
  CHECK_THROWS_AS(parse_dataset(rec.dump()), DataError);
  rec = to_json(make("x", 1));
  rec["lineage"]["strategy"] = nullptr;
  CHECK_THROWS_AS(parse_dataset(rec.dump()), DataError);
  rec = to_json(make("x", 0));
  rec["category"] = "poetry";
  CHECK_THROWS_AS(parse_dataset(rec.dump()), DataError);
}

TEST_CASE("save_dataset: empty list gives an empty file") {
  TempDir dir;
  save_dataset({}, dir / "e.jsonl");
  CHECK(io::read_file(dir / "e.jsonl").empty());
}

TEST_CASE("save_dataset: duplicate ids fail before anything is written") {
  TempDir dir;
  std::vector<CoTSample> dup{make("a", 0), make("a", 0)};
  CHECK_THROWS_AS(save_dataset(dup, dir / "d.jsonl"), DataError);
  CHECK_FALSE(std::filesystem::exists(dir / "d.jsonl"));
}

TEST_CASE("unknown fields survive a round trip") {
  json rec = to_json(make("a", 1));
  rec["difficulty"] = 3;
  rec["lineage"]["batch"] = "b7";
  auto parsed = parse_dataset(rec.dump());
  REQUIRE(parsed.size() == 1);
  json back = json::parse(serialize_record(parsed[0]));
  CHECK(back["difficulty"] == 3);
  CHECK(back["lineage"]["batch"] == "b7");
  CHECK(back == rec);
}

TEST_CASE("property: randomized datasets round-trip through save and load byte-exactly") {
  SampleGenerator gen(2024);
  TempDir dir;
  for (int i = 0; i < 1000; ++i) {
    auto ds = gen.dataset(6);
    const std::string first = serialize_dataset(ds);
    auto back = parse_dataset(first);
    REQUIRE(back == ds);
    REQUIRE(serialize_dataset(back) == first);
  }
  auto ds = gen.dataset(30);
  save_dataset(ds, dir / "r.jsonl");
  CHECK(load_dataset(dir / "r.jsonl") == ds);
}

TEST_CASE("finalize_dataset: seeds only gives nothing") {
  std::vector<CoTSample> in{make("a", 0), make("b", 0)};
  CHECK(finalize_dataset(in, 1).empty());
}

TEST_CASE("finalize_dataset: repeated questions keep the first occurrence") {
  std::vector<CoTSample> in{make("a", 1, "Same  question"), make("b", 1, " Same question "), make("c", 1, "Other")};
  auto out = finalize_dataset(in, 3);
  REQUIRE(out.size() == 2);
  std::vector<std::string> ids;
  for (const auto& s : out) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::vector<std::string>{"a", "c"});
}

TEST_CASE("finalize_dataset: deterministic per seed, idempotent, and a permutation") {
  SampleGenerator gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto ds = gen.dataset(25);
    auto a = finalize_dataset(ds, 99);
    auto b = finalize_dataset(ds, 99);
    CHECK(a == b);
    CHECK(finalize_dataset(a, 99) == a);
    for (const auto& s : a) CHECK(s.lineage.round >= 1);
    std::set<std::string> q;
    for (const auto& s : a) CHECK(q.insert(io::normalize_whitespace(s.question)).second);
  }
  std::vector<CoTSample> many;
  for (int i = 0; i < 40; ++i) many.push_back(make("id" + std::to_string(i), 1, "q" + std::to_string(i)));
  CHECK(finalize_dataset(many, 1) != finalize_dataset(many, 2));
}

TEST_CASE("finalize_dataset: round window") {
  std::vector<CoTSample> in{make("a", 1, "1"), make("b", 2, "2"), make("c", 3, "3")};
  auto out = finalize_dataset(in, 0, FinalizeOptions{2, 2});
  REQUIRE(out.size() == 1);
  CHECK(out[0].id == "b");
}

TEST_CASE("seeded_shuffle is a fixed function of the seed") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto a = v, b = v;
  seeded_shuffle(a, 42);
  seeded_shuffle(b, 42);
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);
}

TEST_CASE("compute_stats examples") {
  auto empty = compute_stats({});
  CHECK(empty.total == 0);
  CHECK(empty.by_category.empty());

  std::vector<CoTSample> three{make("a", 0, "q", TaskCategory::math), make("b", 0, "q", TaskCategory::math),
                               make("c", 0, "q", TaskCategory::science)};
  auto st = compute_stats(three);
  CHECK(st.total == 3);
  CHECK(st.by_category.at("math") == 2);
  CHECK(st.by_category.at("science") == 1);

  std::vector<CoTSample> rounds{make("a", 0), make("b", 1), make("c", 1), make("d", 2)};
  auto rs = compute_stats(rounds);
  CHECK(rs.by_round == std::map<int, std::size_t>{{0, 1}, {1, 2}, {2, 1}});
  CHECK(rs.by_strategy.at("seed") == 1);
  CHECK(rs.by_strategy.at("complicate") == 3);
  CHECK(rs.by_step_count.at(2) == 4);
}

TEST_CASE("property: stats partitions sum to the total and ignore order") {
  SampleGenerator gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    auto ds = gen.dataset(20);
    auto st = compute_stats(ds);
    auto sum = [](const auto& m) {
      std::size_t s = 0;
      for (const auto& [k, v] : m) s += v;
      return s;
    };
    CHECK(sum(st.by_category) == st.total);
    CHECK(sum(st.by_strategy) == st.total);
    CHECK(sum(st.by_round) == st.total);
    CHECK(sum(st.by_step_count) == st.total);
    std::shuffle(ds.begin(), ds.end(), gen.rng());
    CHECK(compute_stats(ds) == st);
  }
}

TEST_CASE("check_lineage reports dangling parents and round gaps") {
  CoTSample seed = make("s", 0);
  CoTSample child = make("s/c1", 1);
  child.lineage.parent_id = "s";
  CoTSample orphan = make("o/c1", 1);
  orphan.lineage.parent_id = "missing";
  CoTSample skipped = make("s/c3", 3);
  skipped.lineage.parent_id = "s";
  std::vector<CoTSample> universe{seed, child, orphan, skipped};
  auto problems = check_lineage(std::vector<CoTSample>{child, orphan, skipped}, universe);
  REQUIRE(problems.size() == 2);
  CHECK(problems[0].find("missing") != std::string::npos);
  CHECK(problems[1].find("round 3") != std::string::npos);
}

TEST_CASE("child ids and CoT formatting") {
  CoTSample p = make("gsm8k-1", 0);
  CHECK(child_id(p, Strategy::complicate, 1) == "gsm8k-1/c1");
  CHECK(child_id(p, Strategy::diversify, 2) == "gsm8k-1/d2");
  CHECK(child_id(p, Strategy::specify, 3) == "gsm8k-1/s3");
  std::vector<std::string> steps{"a", "b"};
  CHECK(format_cot(steps, "7") == "Step 1: a\nStep 2: b\nThe answer is 7");
}
