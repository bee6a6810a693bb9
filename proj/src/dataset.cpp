#include "cotforge/dataset.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"

namespace cotforge {

namespace {

constexpr std::string_view kCategoryNames[] = {"commonsense", "math", "science", "symbolic"};
constexpr std::string_view kStrategyNames[] = {"complicate", "diversify", "specify"};

const std::set<std::string> kSampleKeys = {"id",           "question", "rationale",     "final_answer",
                                           "category",     "lineage",  "source_dataset"};
const std::set<std::string> kLineageKeys = {"parent_id", "strategy", "round"};

[[noreturn]] void fail(const std::string& what) { throw DataError(what); }

std::string require_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(std::string("missing field '") + key + "'");
  if (!it->is_string()) fail(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(TaskCategory c) { return kCategoryNames[static_cast<int>(c)]; }
std::string_view to_string(Strategy s) { return kStrategyNames[static_cast<int>(s)]; }

std::optional<TaskCategory> parse_category(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (kCategoryNames[i] == name) return static_cast<TaskCategory>(i);
  return std::nullopt;
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (int i = 0; i < 3; ++i)
    if (kStrategyNames[i] == name) return static_cast<Strategy>(i);
  return std::nullopt;
}

void validate(const CoTSample& s) {
  if (s.id.empty()) fail("invariant violated: id is empty");
  if (s.question.empty() || is_blank(s.question)) fail("invariant violated: question is empty");
  if (s.rationale.empty()) fail("invariant violated: rationale is empty");
  for (size_t i = 0; i < s.rationale.size(); ++i)
    if (is_blank(s.rationale[i]))
      fail("invariant violated: rationale step " + std::to_string(i + 1) + " is blank");
  if (is_blank(s.final_answer)) fail("invariant violated: final_answer is empty");
  const Lineage& l = s.lineage;
  if (l.round < 0) fail("invariant violated: lineage.round is negative");
  const bool seed = l.round == 0;
  if (seed == l.parent_id.has_value() || seed == l.strategy.has_value())
    fail("invariant violated: lineage round 0 iff parent_id and strategy are absent");
  if (l.parent_id && l.parent_id->empty()) fail("invariant violated: lineage.parent_id is empty");
}

json to_json(const CoTSample& s) {
  json j = s.extra.is_object() ? s.extra : json::object();
  j["id"] = s.id;
  j["question"] = s.question;
  j["rationale"] = s.rationale;
  j["final_answer"] = s.final_answer;
  j["category"] = std::string(to_string(s.category));
  json lineage = s.lineage.extra.is_object() ? s.lineage.extra : json::object();
  lineage["parent_id"] = s.lineage.parent_id ? json(*s.lineage.parent_id) : json(nullptr);
  lineage["strategy"] =
      s.lineage.strategy ? json(std::string(to_string(*s.lineage.strategy))) : json(nullptr);
  lineage["round"] = s.lineage.round;
  j["lineage"] = std::move(lineage);
  j["source_dataset"] = s.source_dataset;
  return j;
}

CoTSample sample_from_json(const json& j) {
  if (!j.is_object()) fail("record is not an object");
  CoTSample s;
  s.id = require_string(j, "id");
  s.question = require_string(j, "question");
  s.final_answer = require_string(j, "final_answer");
  s.source_dataset = require_string(j, "source_dataset");

  auto rat = j.find("rationale");
  if (rat == j.end() || !rat->is_array()) fail("field 'rationale' must be an array of strings");
  for (const auto& step : *rat) {
    if (!step.is_string()) fail("field 'rationale' must be an array of strings");
    s.rationale.push_back(step.get<std::string>());
  }

  auto cat = parse_category(require_string(j, "category"));
  if (!cat) fail("field 'category' is not one of commonsense|math|science|symbolic");
  s.category = *cat;

  auto lin = j.find("lineage");
  if (lin == j.end() || !lin->is_object()) fail("missing object field 'lineage'");
  if (auto p = lin->find("parent_id"); p != lin->end() && !p->is_null()) {
    if (!p->is_string()) fail("lineage.parent_id must be a string or null");
    s.lineage.parent_id = p->get<std::string>();
  }
  if (auto st = lin->find("strategy"); st != lin->end() && !st->is_null()) {
    auto parsed = st->is_string() ? parse_strategy(st->get<std::string>()) : std::nullopt;
    if (!parsed) fail("lineage.strategy is not one of complicate|diversify|specify");
    s.lineage.strategy = *parsed;
  }
  auto round = lin->find("round");
  if (round == lin->end() || !round->is_number_integer()) fail("lineage.round must be an integer");
  s.lineage.round = round->get<int>();
  for (auto it = lin->begin(); it != lin->end(); ++it)
    if (!kLineageKeys.count(it.key())) s.lineage.extra[it.key()] = it.value();

  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kSampleKeys.count(it.key())) s.extra[it.key()] = it.value();

  validate(s);
  return s;
}

std::string serialize_record(const CoTSample& s) { return to_json(s).dump(); }

std::vector<CoTSample> parse_dataset(std::string_view text, std::string_view origin) {
  std::vector<CoTSample> out;
  std::unordered_set<std::string> ids;
  size_t line_no = 0;
  for (const auto& line : io::split_lines(text)) {
    ++line_no;
    if (is_blank(line)) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    CoTSample s;
    try {
      s = sample_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(where + "malformed record: " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (!ids.insert(s.id).second) throw DataError(where + "duplicate id '" + s.id + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::string serialize_dataset(std::span<const CoTSample> samples) {
  std::unordered_set<std::string> ids;
  for (const auto& s : samples) {
    validate(s);
    if (!ids.insert(s.id).second) throw DataError("duplicate id '" + s.id + "'");
  }
  std::string out;
  for (const auto& s : samples) {
    out += serialize_record(s);
    out.push_back('\n');
  }
  return out;
}

std::vector<CoTSample> load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset not found: " + path.string());
  return parse_dataset(io::read_file(path), path.string());
}

void save_dataset(std::span<const CoTSample> samples, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_dataset(samples));
}

std::vector<CoTSample> finalize_dataset(std::span<const CoTSample> samples, std::uint64_t rng_seed,
                                        const FinalizeOptions& options) {
  std::vector<CoTSample> kept;
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (s.lineage.round < options.min_round) continue;
    if (options.max_round && s.lineage.round > *options.max_round) continue;
    if (!seen.insert(io::normalize_whitespace(s.question)).second) continue;
    kept.push_back(s);
  }
  std::sort(kept.begin(), kept.end(),
            [](const CoTSample& a, const CoTSample& b) { return a.id < b.id; });
  seeded_shuffle(kept, rng_seed);
  return kept;
}

DatasetStats compute_stats(std::span<const CoTSample> samples) {
  DatasetStats st;
  for (const auto& s : samples) {
    ++st.by_category[std::string(to_string(s.category))];
    ++st.by_strategy[s.lineage.strategy ? std::string(to_string(*s.lineage.strategy)) : "seed"];
    ++st.by_round[s.lineage.round];
    ++st.by_step_count[s.rationale.size()];
    ++st.total;
  }
  return st;
}

json to_json(const DatasetStats& st) {
  json rounds = json::object();
  for (auto [r, n] : st.by_round) rounds[std::to_string(r)] = n;
  json steps = json::object();
  for (auto [k, n] : st.by_step_count) steps[std::to_string(k)] = n;
  return json{{"total", st.total},
              {"by_category", st.by_category},
              {"by_strategy", st.by_strategy},
              {"by_round", rounds},
              {"by_step_count", steps}};
}

std::vector<std::string> check_lineage(std::span<const CoTSample> samples,
                                       std::span<const CoTSample> universe) {
  std::unordered_map<std::string, int> rounds;
  for (const auto& u : universe) rounds.emplace(u.id, u.lineage.round);
  std::vector<std::string> problems;
  for (const auto& s : samples) {
    if (s.lineage.round == 0) continue;
    auto it = rounds.find(s.lineage.parent_id.value_or(""));
    if (it == rounds.end())
      problems.push_back(s.id + ": parent '" + s.lineage.parent_id.value_or("") + "' not found");
    else if (it->second + 1 != s.lineage.round)
      problems.push_back(s.id + ": round " + std::to_string(s.lineage.round) +
                         " is not parent round + 1");
  }
  return problems;
}

std::string child_id(const CoTSample& parent, Strategy strategy, int round) {
  static constexpr char kTag[] = {'c', 'd', 's'};
  return parent.id + "/" + kTag[static_cast<int>(strategy)] + std::to_string(round);
}

std::string format_cot(std::span<const std::string> steps, std::string_view answer) {
  std::string out;
  for (size_t i = 0; i < steps.size(); ++i) {
    out += "Step " + std::to_string(i + 1) + ": " + steps[i] + "\n";
  }
  out += "The answer is ";
  out += answer;
  return out;
}

}  // namespace cotforge
