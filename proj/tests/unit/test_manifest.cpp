#include "doctest.h"

#include <sys/wait.h>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"
#include "cotforge/manifest.hpp"
#include "test_support.hpp"

using namespace cotforge;
using testing_support::TempDir;

namespace {

ManifestHeader header() {
  ManifestHeader h;
  h.run_id = "run-x";
  h.config_digest = "abc";
  h.seed_digest = "def";
  h.config = json{{"rounds", 2}};
  return h;
}

ManifestItem item(const std::string& id, Strategy s, ItemStatus status, int round = 1) {
  ManifestItem it;
  it.round = round;
  it.sample_id = id;
  it.strategy = s;
  it.status = status;
  return it;
}

}  // namespace

TEST_CASE("manifest records survive reopening") {
  TempDir dir;
  auto path = dir / "manifest.jsonl";
  {
    auto m = RunManifest::create(path, header());
    m.commit(item("a", Strategy::complicate, ItemStatus::evolved));
    auto accepted = item("a", Strategy::complicate, ItemStatus::accepted);
    CoTSample child;
    child.id = "a/c1";
    child.question = "q";
    child.rationale = {"r"};
    child.final_answer = "1";
    child.lineage = {"a", Strategy::complicate, 1, json::object()};
    child.source_dataset = "evolved";
    accepted.child = child;
    m.commit(accepted);
    auto failed = item("a", Strategy::specify, ItemStatus::failed);
    failed.reason = "evolution_failed";
    m.commit(failed);
    m.seal(1, 1);
    CHECK_THROWS_AS(RunManifest::create(path, header()), ConfigError);
  }
  auto m = RunManifest::open(path);
  CHECK(m.header().run_id == "run-x");
  CHECK(m.header().config["rounds"] == 2);
  CHECK(m.commit_count() == 3);
  CHECK(m.sealed(1));
  CHECK(m.sealed_count(1) == 1u);
  CHECK_FALSE(m.sealed(2));
  auto a = m.latest(1, "a", Strategy::complicate);
  REQUIRE(a);
  CHECK(a->status == ItemStatus::accepted);
  REQUIRE(a->child);
  CHECK(a->child->id == "a/c1");
  CHECK(m.latest(1, "a", Strategy::specify)->reason == "evolution_failed");
  CHECK_FALSE(m.latest(1, "a", Strategy::diversify));
  CHECK(m.items(1).size() == 2);
  CHECK(m.status_counts() == std::map<std::string, std::size_t>{{"accepted", 1}, {"failed", 1}});
}

TEST_CASE("terminal items and sealed rounds cannot be rewritten") {
  TempDir dir;
  auto m = RunManifest::create(dir / "m.jsonl", header());
  m.commit(item("a", Strategy::diversify, ItemStatus::filtered_out));
  CHECK_THROWS_AS(m.commit(item("a", Strategy::diversify, ItemStatus::accepted)), InvariantViolation);
  CHECK_NOTHROW(m.commit(item("a", Strategy::diversify, ItemStatus::filtered_out, 2)));
  m.seal(2, 0);
  CHECK_THROWS_AS(m.commit(item("b", Strategy::diversify, ItemStatus::evolved, 2)), InvariantViolation);
  CHECK_THROWS_AS(m.seal(2, 0), InvariantViolation);
}

TEST_CASE("a torn final line is dropped and cut before the next append") {
  TempDir dir;
  auto path = dir / "m.jsonl";
  {
    auto m = RunManifest::create(path, header());
    m.commit(item("a", Strategy::complicate, ItemStatus::filtered_out));
  }
  std::string full = io::read_file(path);
  io::write_file_atomic(path, full + R"({"type":"item","round":1,"sample_id":"b","str)");
  {
    auto m = RunManifest::open(path);
    CHECK(m.commit_count() == 1);
    CHECK_FALSE(m.latest(1, "b", Strategy::complicate));
    m.commit(item("b", Strategy::complicate, ItemStatus::failed));
  }
  auto m = RunManifest::open(path);
  CHECK(m.commit_count() == 2);
  CHECK(m.latest(1, "b", Strategy::complicate)->status == ItemStatus::failed);
}

TEST_CASE("corrupt manifests are data errors") {
  TempDir dir;
  io::write_file_atomic(dir / "empty.jsonl", "");
  CHECK_THROWS_AS(RunManifest::open(dir / "empty.jsonl"), DataError);
  io::write_file_atomic(dir / "nohdr.jsonl", "{\"type\":\"seal\",\"round\":1,\"count\":0}\n");
  CHECK_THROWS_AS(RunManifest::open(dir / "nohdr.jsonl"), DataError);
  io::write_file_atomic(dir / "mid.jsonl",
                        "{\"type\":\"header\",\"run_id\":\"r\",\"config_digest\":\"d\"}\nnot json\n{}\n");
  try {
    RunManifest::open(dir / "mid.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("item JSON round trip") {
  auto it = item("x", Strategy::specify, ItemStatus::evolved, 3);
  it.detail = json{{"candidate", {{"k", 1}}}};
  auto back = manifest_item_from_json(to_json(it));
  CHECK(back.round == 3);
  CHECK(back.sample_id == "x");
  CHECK(back.strategy == Strategy::specify);
  CHECK(back.status == ItemStatus::evolved);
  CHECK(back.detail == it.detail);
  CHECK_FALSE(back.child);
  for (auto s : {ItemStatus::pending, ItemStatus::evolved, ItemStatus::filtered_out, ItemStatus::accepted,
                 ItemStatus::failed})
    CHECK(parse_item_status(to_string(s)) == s);
}

TEST_CASE("run lock") {
  TempDir dir;
  auto run = dir / "run";
  {
    RunLock lock(run);
    CHECK(std::filesystem::exists(run / ".lock"));
    CHECK_THROWS_AS(RunLock{run}, ConfigError);
  }
  CHECK_FALSE(std::filesystem::exists(run / ".lock"));

  // A lock left by a process that has exited is taken over.
  pid_t child = ::fork();
  if (child == 0) ::_exit(0);
  int status = 0;
  ::waitpid(child, &status, 0);
  io::write_file_atomic(run / ".lock", std::to_string(child) + "\n");
  CHECK_NOTHROW(RunLock{run});

  // A lock held by a live process is respected.
  io::write_file_atomic(run / ".lock", std::to_string(::getppid()) + "\n");
  CHECK_THROWS_AS(RunLock{run}, ConfigError);
  std::filesystem::remove(run / ".lock");
}
