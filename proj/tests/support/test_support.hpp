#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cotforge/config.hpp"
#include "cotforge/dataset.hpp"
#include "cotforge/debate.hpp"
#include "cotforge/io.hpp"
#include "cotforge/scripted_backend.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using cotforge::json;

inline fs::path fixture(const std::string& name) { return fs::path(COTFORGE_FIXTURE_DIR) / name; }
inline fs::path template_dir() { return fs::path(COTFORGE_TEMPLATE_DIR); }

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("cotforge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline json scripted_config_json() {
  return json::parse(cotforge::io::read_file(fixture("scripted_config.json")));
}

inline cotforge::PipelineConfig scripted_config(const json& overrides = json::object()) {
  json j = scripted_config_json();
  j.merge_patch(overrides);
  return cotforge::config_from_json(j);
}

/// Config whose judges answer `verdict` to every ballot.
inline cotforge::PipelineConfig scripted_config_with_verdict(const std::string& verdict) {
  json j = scripted_config_json();
  for (auto& b : j["backends"])
    if (b["name"] != "writer") b["script"] = {{"rules", {{{"contains", "#Your Judgement#"}, {"response", verdict}}}}};
  return cotforge::config_from_json(j);
}

inline std::vector<cotforge::CoTSample> seeds() { return cotforge::load_dataset(fixture("seeds.jsonl")); }

/// Random valid samples with awkward text (unicode, quotes, escapes, blanks
/// inside steps) for property tests. Ids are unique.
class SampleGenerator {
 public:
  explicit SampleGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string text(std::size_t max_len = 40) {
    static const std::vector<std::string> atoms = {
        "a", "Z", "7", " ", "  ", "\t", "\"", "\\", "/", "{", "}", ",", ":", "é", "日本", "🙂", "\\n", "#", "'",
        "step", "answer", "0.50", "-3", " ", "\x01"};
    std::uniform_int_distribution<std::size_t> len(1, max_len), pick(0, atoms.size() - 1);
    std::string out;
    for (std::size_t i = 0, n = len(rng_); i < n; ++i) out += atoms[pick(rng_)];
    if (cotforge::io::trim(out).empty()) out += "x";
    return out;
  }

  cotforge::CoTSample sample(const std::string& id, int round, const std::vector<std::string>& parent_ids) {
    using namespace cotforge;
    CoTSample s;
    s.id = id;
    s.question = text(60);
    std::uniform_int_distribution<int> steps(1, 6), cat(0, 3), strat(0, 2), coin(0, 3);
    for (int i = 0, n = steps(rng_); i < n; ++i) s.rationale.push_back(text());
    s.final_answer = text(8);
    s.category = static_cast<TaskCategory>(cat(rng_));
    s.source_dataset = round == 0 ? "gsm8k" : "evolved";
    s.lineage.round = round;
    if (round > 0) {
      std::uniform_int_distribution<std::size_t> p(0, parent_ids.size() - 1);
      s.lineage.parent_id = parent_ids.empty() ? "seed" : parent_ids[p(rng_)];
      s.lineage.strategy = static_cast<Strategy>(strat(rng_));
    }
    if (coin(rng_) == 0) s.extra["annotator_note"] = text(10);
    if (coin(rng_) == 0) s.extra["scores"] = json::array({1, 2.5, nullptr, true});
    if (coin(rng_) == 0) s.lineage.extra["batch"] = static_cast<int>(coin(rng_));
    return s;
  }

  std::vector<cotforge::CoTSample> dataset(std::size_t max_size) {
    std::uniform_int_distribution<std::size_t> n(0, max_size);
    std::uniform_int_distribution<int> round(0, 4);
    std::vector<cotforge::CoTSample> out;
    std::vector<std::string> ids;
    for (std::size_t i = 0, count = n(rng_); i < count; ++i) {
      out.push_back(sample("s" + std::to_string(i) + "-" + text(4), round(rng_), ids));
      ids.push_back(out.back().id);
    }
    return out;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Four scripted agents replaying the worked vegetable-counting debate.
struct VegetableDebate {
  std::string question;
  std::shared_ptr<cotforge::ScriptedBackend> general_public, scientist, mathematician, judge;
  cotforge::DebateAgents agents;
  json script;
};

inline VegetableDebate vegetable_debate(const cotforge::RetryPolicy& policy = {}) {
  using namespace cotforge;
  VegetableDebate d;
  d.script = json::parse(io::read_file(fixture("debate_vegetables.json")));
  d.question = d.script["question"].get<std::string>();
  const json& s1 = d.script["steps"][0];
  const json& s2 = d.script["steps"][1];
  const std::string step2_marker = "I will count the three heads";

  auto two_step = [](const std::string& name, const std::string& when, const std::string& later,
                     const std::string& first) {
    ScriptRule r2 = ScriptRule::when_contains({when}, later);
    ScriptRule r1;
    r1.outcomes.push_back(ScriptOutcome::reply(first));
    return std::make_shared<ScriptedBackend>(name, std::vector<ScriptRule>{r2, r1});
  };
  d.general_public = two_step("general_public", "#Settled Steps#", s2["general_public"], s1["general_public"]);
  d.scientist = two_step("scientist", step2_marker, s2["scientist"], s1["scientist"]);
  d.mathematician = two_step("mathematician", step2_marker, s2["mathematician"], s1["mathematician"]);
  d.judge = two_step("judge", "#Settled Steps#", s2["judge"], s1["judge"]);
  auto client = [&](std::shared_ptr<ScriptedBackend> b) { return std::make_shared<LlmClient>(b, policy); };
  d.agents.general_public = client(d.general_public);
  d.agents.scientist = client(d.scientist);
  d.agents.mathematician = client(d.mathematician);
  d.agents.judge = client(d.judge);
  return d;
}

inline cotforge::RetryPolicy fast_retry(int attempts = 3) {
  cotforge::RetryPolicy p;
  p.max_attempts = attempts;
  p.base_backoff = std::chrono::milliseconds(0);
  return p;
}

}  // namespace testing_support
