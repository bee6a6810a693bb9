#include "cotforge/pipeline.hpp"

#include <iomanip>
#include <mutex>
#include <sstream>

#include "cotforge/errors.hpp"
#include "cotforge/evolution.hpp"
#include "cotforge/io.hpp"
#include "cotforge/parallel.hpp"

namespace cotforge {

void CommitBudget::before_commit() {
  if (exhausted()) throw RunInterrupted("stopped after " + std::to_string(used_.load()) + " item commits");
}

namespace {

// Failures that describe the item rather than the backend's availability.
bool item_level(FailureClass f) { return f == FailureClass::bad_request || f == FailureClass::protocol_error; }

struct Recorder {
  const RoundSinks& sinks;
  std::mutex ballots_mu;

  void commit(const ManifestItem& item) {
    if (sinks.budget) sinks.budget->before_commit();
    if (sinks.manifest) sinks.manifest->commit(item);
    if (sinks.budget) sinks.budget->after_commit();
  }

  void ballots(int round, const CoTSample& parent, Strategy s, const FilterOutcome& outcome) {
    if (!sinks.ballots_file) return;
    std::lock_guard lock(ballots_mu);
    auto write = [&](const VerdictBallot& b) {
      io::append_line(*sinks.ballots_file, json{{"round", round},
                                                {"sample_id", parent.id},
                                                {"strategy", to_string(s)},
                                                {"ballot", to_json(b)}}
                                               .dump());
    };
    write(outcome.success);
    if (outcome.correctness) write(*outcome.correctness);
  }
};

json outcome_detail(const FilterOutcome& outcome, const EvolutionCandidate& c) {
  json d{{"success", to_json(outcome.success)}};
  if (outcome.correctness) d["correctness"] = to_json(*outcome.correctness);
  if (c.step_count_not_increased) d["flags"] = json::array({"step_count_not_increased"});
  return d;
}

}  // namespace

RoundReport run_round(std::span<const CoTSample> input, std::span<const Strategy> strategies,
                      const RoundContext& ctx, int round, const RoundSinks& sinks) {
  if (round < 1) throw ConfigError("round must be >= 1");
  if (!ctx.generator || !ctx.panel) throw ConfigError("run_round needs a generator and a panel");
  const JudgePanel& correctness = ctx.correctness_panel ? *ctx.correctness_panel : *ctx.panel;
  const std::size_t n_strategies = strategies.size();
  const std::size_t n = input.size() * n_strategies;

  std::vector<ManifestItem> records(n);
  Recorder recorder{sinks, {}};
  std::atomic<bool> stop{false};

  parallel_for(n, ctx.max_in_flight, [&](std::size_t k) {
    if (stop.load()) return;
    const CoTSample& parent = input[k / n_strategies];
    const Strategy strategy = strategies[k % n_strategies];
    ManifestItem& rec = records[k];
    rec.round = round;
    rec.sample_id = parent.id;
    rec.strategy = strategy;

    std::optional<ManifestItem> prior;
    if (sinks.manifest) prior = sinks.manifest->latest(round, parent.id, strategy);
    if (prior && prior->terminal()) {
      rec = *prior;
      return;
    }

    try {
      EvolutionCandidate candidate;
      if (prior && prior->status == ItemStatus::evolved) {
        candidate = candidate_from_json(prior->detail.at("candidate"));
      } else {
        try {
          candidate = make_candidate(parent, strategy, *ctx.generator, ctx.evolution);
        } catch (const SampleFailure& e) {
          rec.status = ItemStatus::failed;
          rec.reason = e.reason();
          rec.detail = json{{"error", e.what()}};
          recorder.commit(rec);
          return;
        } catch (const BackendError& e) {
          if (!item_level(e.failure())) throw;
          rec.status = ItemStatus::failed;
          rec.reason = "backend_" + std::string(to_string(e.failure()));
          rec.detail = json{{"error", e.what()}};
          recorder.commit(rec);
          return;
        }
        ManifestItem checkpoint = rec;
        checkpoint.status = ItemStatus::evolved;
        checkpoint.detail = json{{"candidate", to_json(candidate)}};
        recorder.commit(checkpoint);
      }

      FilterOutcome outcome = filter_candidate(candidate, *ctx.panel, ctx.filter, &correctness);
      recorder.ballots(round, parent, strategy, outcome);
      rec.detail = outcome_detail(outcome, candidate);
      if (outcome.decision == Decision::accepted) {
        rec.status = ItemStatus::accepted;
        rec.child = materialize(candidate, round);
      } else {
        rec.status = ItemStatus::filtered_out;
      }
      recorder.commit(rec);
    } catch (...) {
      stop = true;
      throw;
    }
  });

  RoundReport report;
  for (auto& rec : records) {
    if (!rec.terminal()) throw InvariantViolation("item " + rec.sample_id + " finished without a terminal status");
    if (rec.status == ItemStatus::accepted) {
      if (!rec.child) throw InvariantViolation("accepted item " + rec.sample_id + " has no child");
      report.accepted.push_back(*rec.child);
    } else if (rec.status == ItemStatus::filtered_out) {
      ++report.filtered_out;
    } else {
      ++report.failed;
    }
  }
  report.records = std::move(records);
  return report;
}

PipelineResult run_pipeline(const PipelineConfig& config, const BackendSet& backends,
                            std::span<const CoTSample> seeds, const PipelineOptions& options) {
  config.validate();
  if (config.generator.empty()) throw ConfigError("config names no generator backend");
  if (config.panel.empty()) throw ConfigError("config names no judge panel");
  const std::filesystem::path& dir = options.run_dir;
  RunLock lock(dir);

  const std::string digest = config_digest(config);
  const std::string seed_digest = io::sha256_hex(serialize_dataset(seeds));
  const auto manifest_path = dir / "manifest.jsonl";

  PipelineResult result;
  std::optional<RunManifest> manifest;
  if (std::filesystem::exists(manifest_path)) {
    manifest.emplace(RunManifest::open(manifest_path));
    if (manifest->header().config_digest != digest)
      throw ConfigError("config digest mismatch: run directory was started with " +
                        manifest->header().config_digest + ", current config is " + digest);
    if (manifest->header().seed_digest != seed_digest)
      throw ConfigError("seed dataset differs from the one this run was started with");
    result.resumed = true;
  } else {
    ManifestHeader header;
    header.run_id = "run-" + io::sha256_hex(digest + seed_digest).substr(0, 12);
    header.config_digest = digest;
    header.seed_digest = seed_digest;
    header.config = to_json(config);
    io::write_file_atomic(dir / "config.json", header.config.dump(2) + "\n");
    manifest.emplace(RunManifest::create(manifest_path, std::move(header)));
  }
  result.run_id = manifest->header().run_id;

  const JudgePanel panel = backends.panel(config.panel);
  std::optional<JudgePanel> correctness;
  if (!config.correctness_panel.empty()) correctness.emplace(backends.panel(config.correctness_panel));

  RoundContext ctx;
  ctx.generator = backends.client(config.generator);
  ctx.panel = &panel;
  ctx.correctness_panel = correctness ? &*correctness : nullptr;
  ctx.evolution = config.evolution;
  ctx.filter.judging = config.judging;
  ctx.filter.verify_specify = config.verify_specify;
  ctx.max_in_flight = config.max_in_flight;

  CommitBudget budget(options.stop_after_items);
  RoundSinks sinks{&*manifest, dir / "ballots.jsonl", &budget};

  std::vector<CoTSample> input(seeds.begin(), seeds.end());
  std::vector<CoTSample> produced;
  for (int r = 1; r <= config.rounds; ++r) {
    const bool was_sealed = manifest->sealed(r);
    RoundReport report = run_round(input, config.strategies, ctx, r, sinks);
    if (was_sealed) {
      if (manifest->sealed_count(r) != report.accepted.size())
        throw InvariantViolation("sealed round " + std::to_string(r) + " does not match its item records");
    } else {
      save_dataset(report.accepted, dir / ("round-" + std::to_string(r) + ".jsonl"));
      manifest->seal(r, report.accepted.size());
    }
    produced.insert(produced.end(), report.accepted.begin(), report.accepted.end());
    if (config.round_input == RoundInput::previous) {
      input = report.accepted;
    } else {
      input.insert(input.end(), report.accepted.begin(), report.accepted.end());
    }
    result.rounds.push_back(std::move(report.accepted));
  }

  std::vector<CoTSample> universe(seeds.begin(), seeds.end());
  universe.insert(universe.end(), produced.begin(), produced.end());
  if (auto problems = check_lineage(produced, universe); !problems.empty())
    throw InvariantViolation("lineage check failed: " + problems.front());

  result.final_dataset = finalize_dataset(produced, config.seed);
  result.stats = compute_stats(result.final_dataset);
  save_dataset(result.final_dataset, dir / "final.jsonl");
  json stats = to_json(result.stats);
  stats["items"] = manifest->status_counts();
  io::write_file_atomic(dir / "stats.json", stats.dump(2) + "\n");
  return result;
}

std::string stats_report_text(const DatasetStats& stats) {
  std::ostringstream out;
  out << "total: " << stats.total << "\n";
  auto section = [&](const char* title, const auto& counts) {
    out << title << ":\n";
    if (counts.empty()) out << "  (none)\n";
    for (const auto& [key, count] : counts) out << "  " << std::left << std::setw(14) << key << count << "\n";
  };
  section("by category", stats.by_category);
  section("by strategy", stats.by_strategy);
  section("by round", stats.by_round);
  section("rationale steps", stats.by_step_count);
  return out.str();
}

}  // namespace cotforge
