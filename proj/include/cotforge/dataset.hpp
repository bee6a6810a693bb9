#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cotforge {

using json = nlohmann::json;

enum class TaskCategory { commonsense, math, science, symbolic };
enum class Strategy { complicate, diversify, specify };

inline constexpr Strategy kAllStrategies[] = {Strategy::complicate, Strategy::diversify,
                                              Strategy::specify};

std::string_view to_string(TaskCategory c);
std::string_view to_string(Strategy s);
std::optional<TaskCategory> parse_category(std::string_view name);
std::optional<Strategy> parse_strategy(std::string_view name);

/// Where a sample came from. Seeds have round 0 and no parent; every evolved
/// sample sits exactly one round above its parent.
struct Lineage {
  std::optional<std::string> parent_id;
  std::optional<Strategy> strategy;
  int round = 0;
  json extra = json::object();

  bool operator==(const Lineage&) const = default;
};

/// A question, its ordered reasoning steps and the final answer.
struct CoTSample {
  std::string id;
  std::string question;
  std::vector<std::string> rationale;
  std::string final_answer;
  TaskCategory category = TaskCategory::math;
  Lineage lineage;
  std::string source_dataset;
  /// Fields this version does not know about; written back unchanged.
  json extra = json::object();

  bool operator==(const CoTSample&) const = default;
};

/// Throws DataError naming the first violated invariant.
void validate(const CoTSample& sample);

json to_json(const CoTSample& sample);
CoTSample sample_from_json(const json& record);

/// One dataset line. Keys are emitted in sorted order, so the encoding is a
/// pure function of the sample value.
std::string serialize_record(const CoTSample& sample);

std::vector<CoTSample> parse_dataset(std::string_view text, std::string_view origin = "<memory>");
std::string serialize_dataset(std::span<const CoTSample> samples);

std::vector<CoTSample> load_dataset(const std::filesystem::path& path);
/// Validates everything (including id uniqueness) before touching the file.
void save_dataset(std::span<const CoTSample> samples, const std::filesystem::path& path);

struct FinalizeOptions {
  int min_round = 1;
  std::optional<int> max_round;
};

/// Keeps evolved samples only, drops repeated questions (first occurrence
/// wins), then applies a seeded permutation of the id-sorted survivors.
/// Sorting first makes the output depend only on the surviving set, which is
/// what makes the operation idempotent.
std::vector<CoTSample> finalize_dataset(std::span<const CoTSample> samples, std::uint64_t rng_seed,
                                        const FinalizeOptions& options = {});

/// Fisher-Yates over mt19937_64 with rejection sampling. std::shuffle and
/// std::uniform_int_distribution are implementation-defined, this is not.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed);

struct DatasetStats {
  std::map<std::string, std::size_t> by_category;
  /// Seeds are counted under "seed" so the partition covers every sample.
  std::map<std::string, std::size_t> by_strategy;
  std::map<int, std::size_t> by_round;
  std::map<std::size_t, std::size_t> by_step_count;
  std::size_t total = 0;

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats compute_stats(std::span<const CoTSample> samples);
json to_json(const DatasetStats& stats);

/// Every evolved sample must name a parent present in `universe` whose round
/// is exactly one less. Returns the violations, empty when consistent.
std::vector<std::string> check_lineage(std::span<const CoTSample> samples,
                                       std::span<const CoTSample> universe);

/// Id of the child produced from `parent` by `strategy` in `round`.
std::string child_id(const CoTSample& parent, Strategy strategy, int round);

/// CoT text as shown to models: "Step k: ..." lines followed by the answer.
std::string format_cot(std::span<const std::string> steps, std::string_view answer);

}  // namespace cotforge

#include "cotforge/detail/shuffle.inl"
