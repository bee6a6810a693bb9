#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotforge/config.hpp"
#include "cotforge/dataset.hpp"
#include "cotforge/filter.hpp"
#include "cotforge/manifest.hpp"

namespace cotforge {

/// Raised by the commit budget to simulate the process dying right after a
/// given number of durable item commits.
class RunInterrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shared across the rounds of one process.
class CommitBudget {
 public:
  explicit CommitBudget(std::optional<std::size_t> limit = std::nullopt) : limit_(limit) {}
  /// Throws RunInterrupted once the limit has been spent.
  void before_commit();
  void after_commit() { ++used_; }
  bool exhausted() const { return limit_ && used_.load() >= *limit_; }
  std::size_t used() const { return used_.load(); }

 private:
  std::optional<std::size_t> limit_;
  std::atomic<std::size_t> used_{0};
};

struct RoundContext {
  ClientHandle generator;
  const JudgePanel* panel = nullptr;
  /// Falls back to `panel` when null.
  const JudgePanel* correctness_panel = nullptr;
  GenerationParams evolution{0.7, 1024, {}};
  FilterOptions filter;
  int max_in_flight = 8;
};

/// Where a round records its progress. Everything is optional.
struct RoundSinks {
  RunManifest* manifest = nullptr;
  std::optional<std::filesystem::path> ballots_file;
  CommitBudget* budget = nullptr;
};

struct RoundReport {
  /// Accepted children in (input order, strategy order).
  std::vector<CoTSample> accepted;
  std::size_t filtered_out = 0;
  std::size_t failed = 0;
  /// Terminal record per (input sample, strategy), same order as the work items.
  std::vector<ManifestItem> records;
};

/// Applies every strategy to every input sample, filters the candidates and
/// returns the survivors. Items already terminal in the manifest are reused;
/// items checkpointed as `evolved` skip generation. Per-sample failures are
/// recorded and skipped. A backend that stays unavailable aborts the round
/// with BackendError so the run can be resumed later.
RoundReport run_round(std::span<const CoTSample> input, std::span<const Strategy> strategies,
                      const RoundContext& ctx, int round, const RoundSinks& sinks = {});

struct PipelineOptions {
  std::filesystem::path run_dir;
  /// Crash injection: stop after this many item commits in this process.
  std::optional<std::size_t> stop_after_items;
};

struct PipelineResult {
  std::string run_id;
  bool resumed = false;
  std::vector<std::vector<CoTSample>> rounds;
  std::vector<CoTSample> final_dataset;
  DatasetStats stats;
};

/// Runs rounds 1..R in `options.run_dir`, resuming from an existing manifest
/// when present. Writes config.json, manifest.jsonl, round-<r>.jsonl,
/// ballots.jsonl, final.jsonl and stats.json.
PipelineResult run_pipeline(const PipelineConfig& config, const BackendSet& backends,
                            std::span<const CoTSample> seeds, const PipelineOptions& options);

/// Human-readable rendering of the same numbers as to_json(stats).
std::string stats_report_text(const DatasetStats& stats);

}  // namespace cotforge
