#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cotforge/dataset.hpp"

namespace cotforge {

/// Maps one raw corpus record (already parsed JSON) to a round-0 sample.
/// `index` is the zero-based record position, used when the corpus has no ids.
using SeedAdapter = std::function<CoTSample(const json& record, std::size_t index)>;

/// Adapters for the seed corpora, keyed by corpus name:
/// strategyqa, date_understanding, aqua_rat, gsm8k, arc_challenge, openbookqa,
/// worldtree, colored_objects, tracking_shuffled_objects, word_sorting, plus a
/// pass-through "cot" adapter for records already in the dataset layout.
const std::map<std::string, SeedAdapter>& seed_adapters();

std::vector<std::string> seed_adapter_names();

/// Reads a JSON-lines file or a JSON array (optionally wrapped as
/// {"examples": [...]}) and converts every record. Errors carry the record
/// number.
std::vector<CoTSample> ingest_seed_corpus(const std::string& corpus,
                                          const std::filesystem::path& path);

/// Splits free-form rationale text into steps: one step per non-blank line.
std::vector<std::string> split_rationale(std::string_view text);

}  // namespace cotforge
