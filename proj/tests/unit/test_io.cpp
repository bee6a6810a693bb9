#include "doctest.h"

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"
#include "test_support.hpp"

using namespace cotforge;
using testing_support::TempDir;

TEST_CASE("append_line writes whole records and rejects embedded newlines") {
  TempDir dir;
  auto f = dir / "log.jsonl";
  io::append_line(f, "one");
  io::append_line(f, "two");
  CHECK(io::read_file(f) == "one\ntwo\n");
  CHECK_THROWS_AS(io::append_line(f, "a\nb"), InvariantViolation);
  CHECK(io::read_file(f) == "one\ntwo\n");
}

TEST_CASE("split_lines drops a torn tail only when asked") {
  CHECK(io::split_lines("a\nb\nc") == std::vector<std::string>{"a", "b", "c"});
  CHECK(io::split_lines("a\nb\nc", true) == std::vector<std::string>{"a", "b"});
  CHECK(io::split_lines("a\nb\n", true) == std::vector<std::string>{"a", "b"});
  CHECK(io::split_lines("", true).empty());
}

TEST_CASE("write_file_atomic replaces content and leaves no temp files") {
  TempDir dir;
  auto f = dir / "out.txt";
  io::write_file_atomic(f, "first");
  io::write_file_atomic(f, "second");
  CHECK(io::read_file(f) == "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("text helpers") {
  CHECK(io::normalize_whitespace("  a \t b\n\nc  ") == "a b c");
  CHECK(io::trim("\n x \t") == "x");
  CHECK(io::to_lower("AbC") == "abc");
  CHECK(io::istarts_with("Step 1", "step"));
  CHECK_FALSE(io::istarts_with("St", "step"));
}

TEST_CASE("sha256 matches the published test vectors") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("read_file on a missing path is a config error") {
  CHECK_THROWS_AS(io::read_file("/nonexistent/definitely/missing"), ConfigError);
}
