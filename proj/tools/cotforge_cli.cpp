// Command-line front end: evolve, filter, finalize, eval, debate, stats and
// templates check.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>

#include "cotforge/config.hpp"
#include "cotforge/dataset.hpp"
#include "cotforge/debate.hpp"
#include "cotforge/errors.hpp"
#include "cotforge/eval.hpp"
#include "cotforge/filter.hpp"
#include "cotforge/io.hpp"
#include "cotforge/parallel.hpp"
#include "cotforge/pipeline.hpp"
#include "cotforge/seed_adapters.hpp"
#include "cotforge/templates.hpp"

namespace cg = cotforge;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitBackend = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitInterrupted = 4;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    if (auto t = cg::io::trim(part); !t.empty()) out.push_back(t);
  return out;
}

std::shared_ptr<cg::ExchangeLog> make_log(const std::string& path) {
  return path.empty() ? std::make_shared<cg::ExchangeLog>() : std::make_shared<cg::ExchangeLog>(fs::path(path));
}

// ---------------------------------------------------------------------------

struct EvolveArgs {
  std::string input, corpus = "cot", config, run_dir, strategies;
  std::optional<int> rounds, max_in_flight;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stop_after;
};

int run_evolve(const EvolveArgs& a) {
  cg::PipelineConfig config = cg::load_config(a.config);
  if (a.rounds) config.rounds = *a.rounds;
  if (a.seed) config.seed = *a.seed;
  if (a.max_in_flight) config.max_in_flight = *a.max_in_flight;
  if (!a.strategies.empty()) {
    config.strategies.clear();
    for (const auto& name : split_csv(a.strategies)) {
      auto s = cg::parse_strategy(name);
      if (!s) throw cg::ConfigError("unknown strategy '" + name + "'");
      config.strategies.push_back(*s);
    }
  }
  config.validate();

  std::vector<cg::CoTSample> seeds =
      a.corpus == "cot" ? cg::load_dataset(a.input) : cg::ingest_seed_corpus(a.corpus, a.input);
  fs::create_directories(a.run_dir);
  cg::BackendSet backends(config, make_log((fs::path(a.run_dir) / "exchanges.jsonl").string()));
  cg::PipelineOptions options{a.run_dir, a.stop_after};
  auto result = cg::run_pipeline(config, backends, seeds, options);

  std::cout << result.run_id << (result.resumed ? " (resumed)" : "") << "\n";
  for (std::size_t r = 0; r < result.rounds.size(); ++r)
    std::cout << "round " << r + 1 << ": " << result.rounds[r].size() << " accepted\n";
  std::cout << "final: " << result.final_dataset.size() << " samples -> "
            << (fs::path(a.run_dir) / "final.jsonl").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FilterArgs {
  std::string input, config, panel, correctness_panel, out, ballots, exchanges;
  bool verify_specify = false;
  int max_in_flight = 8;
};

int run_filter(const FilterArgs& a) {
  cg::PipelineConfig config = cg::load_config(a.config);
  cg::BackendSet backends(config, make_log(a.exchanges));
  const auto panel_names = a.panel.empty() ? config.panel : split_csv(a.panel);
  const cg::JudgePanel panel = backends.panel(panel_names);
  std::optional<cg::JudgePanel> correctness;
  if (!a.correctness_panel.empty())
    correctness.emplace(backends.panel(split_csv(a.correctness_panel)));
  else if (!config.correctness_panel.empty())
    correctness.emplace(backends.panel(config.correctness_panel));

  std::vector<cg::EvolutionCandidate> candidates;
  std::size_t line_no = 0;
  for (const auto& line : cg::io::split_lines(cg::io::read_file(a.input))) {
    ++line_no;
    if (cg::io::trim(line).empty()) continue;
    try {
      candidates.push_back(cg::candidate_from_json(cg::json::parse(line)));
    } catch (const std::exception& e) {
      throw cg::DataError(a.input + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }

  cg::FilterOptions options;
  options.judging = config.judging;
  options.verify_specify = a.verify_specify || config.verify_specify;
  std::vector<cg::FilterOutcome> outcomes(candidates.size());
  cg::parallel_for(candidates.size(), a.max_in_flight, [&](std::size_t i) {
    outcomes[i] = cg::filter_candidate(candidates[i], panel, options, correctness ? &*correctness : nullptr);
  });

  std::vector<cg::CoTSample> survivors;
  std::string ballots;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    auto emit = [&](const cg::VerdictBallot& b) {
      ballots += cg::json{{"sample_id", c.parent.id}, {"strategy", cg::to_string(c.strategy)}, {"ballot", cg::to_json(b)}}
                     .dump() +
                 "\n";
    };
    emit(outcomes[i].success);
    if (outcomes[i].correctness) emit(*outcomes[i].correctness);
    if (outcomes[i].decision == cg::Decision::accepted)
      survivors.push_back(cg::materialize(c, c.parent.lineage.round + 1));
  }
  cg::save_dataset(survivors, a.out);
  cg::io::write_file_atomic(a.ballots.empty() ? a.out + ".ballots.jsonl" : a.ballots, ballots);
  std::cout << survivors.size() << " of " << candidates.size() << " candidates accepted\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FinalizeArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::uint64_t seed = 0;
  int min_round = 1;
  std::optional<int> max_round;
};

int run_finalize(const FinalizeArgs& a) {
  std::vector<cg::CoTSample> all;
  for (const auto& path : a.inputs) {
    auto part = cg::load_dataset(path);
    all.insert(all.end(), part.begin(), part.end());
  }
  auto final_set = cg::finalize_dataset(all, a.seed, cg::FinalizeOptions{a.min_round, a.max_round});
  cg::save_dataset(final_set, a.out);
  std::cout << final_set.size() << " samples -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string task, items, exemplars, strategy = "direct", out, config, backend, agents, probe, exchanges;
  std::string steps = "2,3,5", iterations = "0,1,2", positions = "front,behind";
  std::optional<int> shots;
  std::optional<std::size_t> limit;
  int paths = 10, max_rounds = 3, max_steps = 15;
  std::optional<int> max_in_flight;
};

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& p : split_csv(s)) {
    try {
      out.push_back(std::stoi(p));
    } catch (const std::exception&) {
      throw cg::ConfigError("'" + p + "' is not an integer");
    }
  }
  return out;
}

int run_eval(const EvalArgs& a) {
  cg::PipelineConfig config = cg::load_config(a.config);
  cg::BackendSet backends(config, make_log(a.exchanges));
  cg::EvalTask task = cg::load_eval_task(a.task, a.items,
                                         a.exemplars.empty() ? std::nullopt : std::optional<fs::path>(a.exemplars),
                                         a.shots, a.limit);
  cg::EvalOptions options;
  options.params = config.evaluation;
  options.sc_params.max_new_tokens = config.evaluation.max_new_tokens;
  options.paths = a.paths;
  options.max_in_flight = a.max_in_flight.value_or(config.max_in_flight);
  options.debate.max_rounds = a.max_rounds;
  options.debate.max_steps = a.max_steps;
  options.debate.params = config.evaluation;

  const std::string backend_name = a.backend.empty() ? config.generator : a.backend;
  std::vector<cg::EvalResult> results;
  if (a.probe.empty()) {
    auto strategy = cg::parse_eval_strategy(a.strategy);
    if (!strategy) throw cg::ConfigError("unknown strategy '" + a.strategy + "'");
    cg::EvalBackends eb;
    if (*strategy == cg::EvalStrategy::debate) {
      eb.debate = backends.debate_agents(a.agents.empty() ? config.debate_agents : cg::parse_agent_spec(a.agents));
    } else {
      if (backend_name.empty()) throw cg::ConfigError("no evaluation backend; pass --backend");
      eb.primary = backends.client(backend_name);
    }
    results.push_back(cg::evaluate(task, *strategy, eb, options));
  } else {
    if (backend_name.empty()) throw cg::ConfigError("no evaluation backend; pass --backend");
    auto client = backends.client(backend_name);
    if (a.probe == "step-count") {
      for (int k : parse_ints(a.steps)) results.push_back(cg::probe_step_count(task, client, k, options));
    } else if (a.probe == "specificity") {
      for (int i : parse_ints(a.iterations))
        results.push_back(cg::probe_specificity(task, client, i, options, config.evolution));
    } else if (a.probe == "answer-position") {
      for (const auto& p : split_csv(a.positions)) {
        if (p != "front" && p != "behind") throw cg::ConfigError("position must be front or behind");
        results.push_back(cg::probe_answer_position(
            task, client, p == "front" ? cg::AnswerPosition::front : cg::AnswerPosition::behind, options));
      }
    } else {
      throw cg::ConfigError("unknown probe '" + a.probe + "'");
    }
  }

  std::string lines;
  for (const auto& r : results) {
    lines += cg::to_json(r).dump() + "\n";
    std::size_t errors = 0;
    for (const auto& item : r.items) errors += item.error ? 1 : 0;
    std::printf("%-24s %-28s n=%zu correct=%zu accuracy=%.2f%%%s\n", r.task.c_str(), r.strategy.c_str(), r.n,
                r.correct, 100.0 * r.accuracy, errors ? (" errors=" + std::to_string(errors)).c_str() : "");
  }
  if (!a.out.empty()) cg::io::write_file_atomic(a.out, lines);
  return 0;
}

// ---------------------------------------------------------------------------

struct DebateArgs {
  std::string questions, config, agents, out, exchanges;
  std::optional<int> max_rounds, max_steps, max_in_flight;
};

int run_debate(const DebateArgs& a) {
  cg::PipelineConfig config = cg::load_config(a.config);
  cg::BackendSet backends(config, make_log(a.exchanges));
  auto agents = backends.debate_agents(a.agents.empty() ? config.debate_agents : cg::parse_agent_spec(a.agents));
  cg::DebateOptions options;
  options.max_rounds = a.max_rounds.value_or(config.debate_max_rounds);
  options.max_steps = a.max_steps.value_or(config.debate_max_steps);
  options.params = config.evaluation;

  struct Question {
    std::string id, text;
  };
  std::vector<Question> questions;
  std::size_t line_no = 0;
  for (const auto& line : cg::io::split_lines(cg::io::read_file(a.questions))) {
    ++line_no;
    const std::string t = cg::io::trim(line);
    if (t.empty()) continue;
    if (t.front() == '{') {
      try {
        auto j = cg::json::parse(t);
        questions.push_back({j.value("id", std::to_string(line_no)), j.at("question").get<std::string>()});
      } catch (const std::exception& e) {
        throw cg::DataError(a.questions + ":" + std::to_string(line_no) + ": " + e.what());
      }
    } else {
      questions.push_back({std::to_string(line_no), t});
    }
  }

  std::vector<cg::json> records(questions.size());
  std::atomic<std::size_t> aborted{0};
  cg::parallel_for(questions.size(), a.max_in_flight.value_or(config.max_in_flight), [&](std::size_t i) {
    cg::json rec;
    try {
      rec = cg::to_json(cg::debate(questions[i].text, agents, options));
    } catch (const cg::DebateAborted& e) {
      rec = cg::to_json(e.partial());
      rec["error"] = e.what();
      ++aborted;
    }
    rec["id"] = questions[i].id;
    records[i] = std::move(rec);
  });
  std::string lines;
  for (const auto& r : records) lines += r.dump() + "\n";
  cg::io::write_file_atomic(a.out, lines);
  std::cout << questions.size() << " debates, " << aborted.load() << " aborted -> " << a.out << "\n";
  return aborted.load() ? kExitBackend : 0;
}

// ---------------------------------------------------------------------------

int run_stats(const std::string& input, const std::string& json_out, bool json_only) {
  auto stats = cg::compute_stats(cg::load_dataset(input));
  const std::string j = cg::to_json(stats).dump(2);
  if (json_only)
    std::cout << j << "\n";
  else
    std::cout << cg::stats_report_text(stats);
  if (!json_out.empty()) cg::io::write_file_atomic(json_out, j + "\n");
  return 0;
}

int run_templates_check(const std::string& dir) {
  if (!fs::is_directory(dir)) throw cg::ConfigError("template directory not found: " + dir);
  auto problems = cg::templates::check_against(dir);
  for (const auto& p : problems) std::cerr << p << "\n";
  if (!problems.empty()) return kExitInvariant;
  std::cout << cg::templates::all().size() << " templates match " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain-of-thought dataset evolution, filtering, debate and evaluation"};
  app.require_subcommand(1);
  int rc = 0;

  EvolveArgs ev;
  auto* evolve = app.add_subcommand("evolve", "Run (or resume) the multi-round evolution pipeline");
  evolve->add_option("--input", ev.input, "Seed dataset")->required();
  evolve->add_option("--corpus", ev.corpus, "Seed adapter name, or 'cot' for the dataset layout");
  evolve->add_option("--config", ev.config, "Pipeline config")->required();
  evolve->add_option("--run-dir", ev.run_dir, "Run directory")->required();
  evolve->add_option("--rounds", ev.rounds);
  evolve->add_option("--strategies", ev.strategies, "Comma-separated strategies");
  evolve->add_option("--seed", ev.seed);
  evolve->add_option("--max-in-flight", ev.max_in_flight);
  evolve->add_option("--stop-after-items", ev.stop_after, "Stop after N item commits (crash testing)");
  evolve->callback([&] { rc = run_evolve(ev); });

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Judge evolution candidates with the panel");
  filter->add_option("--input", fa.input, "Candidates (one per line)")->required();
  filter->add_option("--config", fa.config)->required();
  filter->add_option("--panel", fa.panel, "Three comma-separated backend names");
  filter->add_option("--correctness-panel", fa.correctness_panel);
  filter->add_option("--out", fa.out)->required();
  filter->add_option("--ballots", fa.ballots, "Ballot audit file (default <out>.ballots.jsonl)");
  filter->add_option("--exchanges", fa.exchanges, "Exchange log file");
  filter->add_flag("--verify-specify", fa.verify_specify);
  filter->add_option("--max-in-flight", fa.max_in_flight);
  filter->callback([&] { rc = run_filter(fa); });

  FinalizeArgs fin;
  auto* finalize = app.add_subcommand("finalize", "Keep evolved samples, dedup and shuffle");
  finalize->add_option("--input", fin.inputs)->required();
  finalize->add_option("--out", fin.out)->required();
  finalize->add_option("--seed", fin.seed);
  finalize->add_option("--min-round", fin.min_round);
  finalize->add_option("--max-round", fin.max_round);
  finalize->callback([&] { rc = run_finalize(fin); });

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a backend on a reasoning task");
  eval->add_option("--task", ea.task)->required();
  eval->add_option("--items", ea.items, "Benchmark items file")->required();
  eval->add_option("--exemplars", ea.exemplars);
  eval->add_option("--strategy", ea.strategy, "direct, sc or debate");
  eval->add_option("--paths", ea.paths);
  eval->add_option("--shots", ea.shots);
  eval->add_option("--limit", ea.limit);
  eval->add_option("--out", ea.out);
  eval->add_option("--config", ea.config)->required();
  eval->add_option("--backend", ea.backend);
  eval->add_option("--agents", ea.agents, "role=backend,... for debate");
  eval->add_option("--max-rounds", ea.max_rounds);
  eval->add_option("--max-steps", ea.max_steps);
  eval->add_option("--max-in-flight", ea.max_in_flight);
  eval->add_option("--probe", ea.probe, "step-count, specificity or answer-position");
  eval->add_option("--steps", ea.steps);
  eval->add_option("--iterations", ea.iterations);
  eval->add_option("--positions", ea.positions);
  eval->add_option("--exchanges", ea.exchanges);
  eval->callback([&] { rc = run_eval(ea); });

  DebateArgs da;
  auto* debate = app.add_subcommand("debate", "Run step-level debates over a question file");
  debate->add_option("--questions", da.questions)->required();
  debate->add_option("--config", da.config)->required();
  debate->add_option("--agents", da.agents, "role=backend,... or all=backend");
  debate->add_option("--max-rounds", da.max_rounds);
  debate->add_option("--max-steps", da.max_steps);
  debate->add_option("--max-in-flight", da.max_in_flight);
  debate->add_option("--out", da.out)->required();
  debate->add_option("--exchanges", da.exchanges);
  debate->callback([&] { rc = run_debate(da); });

  std::string stats_input, stats_json;
  bool stats_json_only = false;
  auto* stats = app.add_subcommand("stats", "Dataset composition report");
  stats->add_option("--input", stats_input)->required();
  stats->add_option("--json", stats_json, "Also write the report as JSON");
  stats->add_flag("--json-only", stats_json_only, "Print JSON instead of text");
  stats->callback([&] { rc = run_stats(stats_input, stats_json, stats_json_only); });

  std::string template_dir = COTFORGE_TEMPLATE_DIR;
  auto* templates = app.add_subcommand("templates", "Prompt template utilities");
  templates->require_subcommand(1);
  auto* check = templates->add_subcommand("check", "Diff compiled templates against the text assets");
  check->add_option("--dir", template_dir);
  check->callback([&] { rc = run_templates_check(template_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const cg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cg::BackendError& e) {
    std::cerr << "backend error (" << cg::to_string(e.failure()) << ", " << e.attempts()
              << " attempts): " << e.what() << "\n";
    return kExitBackend;
  } catch (const cg::RunInterrupted& e) {
    std::cerr << "interrupted: " << e.what() << "\n";
    return kExitInterrupted;
  } catch (const cg::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return rc;
}
