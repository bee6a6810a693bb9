#include "cotforge/seed_adapters.hpp"

#include <regex>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"

namespace cotforge {

namespace {

std::string str_field(const json& r, const char* key) {
  auto it = r.find(key);
  if (it == r.end() || it->is_null()) throw DataError(std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_boolean()) return it->get<bool>() ? "yes" : "no";
  return it->dump();
}

std::vector<std::string> steps_field(const json& r, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = r.find(key);
    if (it == r.end() || it->is_null()) continue;
    std::vector<std::string> steps;
    if (it->is_array()) {
      for (const auto& e : *it) {
        auto t = io::trim(e.is_string() ? e.get<std::string>() : e.dump());
        if (!t.empty()) steps.push_back(std::move(t));
      }
    } else if (it->is_string()) {
      steps = split_rationale(it->get<std::string>());
    }
    if (!steps.empty()) return steps;
  }
  std::string names;
  for (const char* key : keys) names += std::string(names.empty() ? "" : "/") + key;
  throw DataError("record has no rationale (looked for " + names + ")");
}

std::string record_id(const json& r, const std::string& corpus, std::size_t index) {
  for (const char* key : {"id", "qid"}) {
    auto it = r.find(key);
    if (it != r.end() && (it->is_string() || it->is_number()))
      return corpus + "-" + (it->is_string() ? it->get<std::string>() : it->dump());
  }
  return corpus + "-" + std::to_string(index);
}

CoTSample make_seed(std::string id, std::string question, std::vector<std::string> steps,
                    std::string answer, TaskCategory category, const std::string& corpus) {
  CoTSample s;
  s.id = std::move(id);
  s.question = io::trim(question);
  s.rationale = std::move(steps);
  s.final_answer = io::trim(answer);
  s.category = category;
  s.source_dataset = corpus;
  validate(s);
  return s;
}

// "#### 72" terminates a GSM8K answer; "<<48/2=24>>" are calculator annotations.
CoTSample gsm8k(const json& r, std::size_t i) {
  static const std::regex kCalc("<<[^>]*>>");
  std::string raw = str_field(r, "answer");
  auto pos = raw.rfind("####");
  if (pos == std::string::npos) throw DataError("gsm8k answer has no '####' terminator");
  std::string answer = io::trim(raw.substr(pos + 4));
  std::string rationale = std::regex_replace(raw.substr(0, pos), kCalc, "");
  return make_seed(record_id(r, "gsm8k", i), str_field(r, "question"), split_rationale(rationale),
                   answer, TaskCategory::math, "gsm8k");
}

CoTSample aqua_rat(const json& r, std::size_t i) {
  std::string q = str_field(r, "question");
  if (auto it = r.find("options"); it != r.end() && it->is_array() && !it->empty()) {
    q += "\nAnswer Choices:";
    for (const auto& o : *it) {
      std::string opt = o.get<std::string>();
      // "A)21" -> "(A) 21"
      if (opt.size() >= 2 && opt[1] == ')') opt = "(" + opt.substr(0, 1) + ") " + io::trim(opt.substr(2));
      q += " " + opt;
    }
  }
  return make_seed(record_id(r, "aqua_rat", i), q, steps_field(r, {"rationale"}),
                   str_field(r, "correct"), TaskCategory::math, "aqua_rat");
}

CoTSample strategyqa(const json& r, std::size_t i) {
  return make_seed(record_id(r, "strategyqa", i), str_field(r, "question"),
                   steps_field(r, {"rationale", "facts", "decomposition"}), str_field(r, "answer"),
                   TaskCategory::commonsense, "strategyqa");
}

// ARC and OpenBookQA share the {question: {stem, choices}, answerKey} layout.
SeedAdapter multiple_choice_science(std::string corpus) {
  return [corpus](const json& r, std::size_t i) {
    const json& q = r.at("question");
    std::string text;
    if (q.is_object()) {
      text = str_field(q, "stem");
      if (auto c = q.find("choices"); c != q.end() && c->is_array()) {
        text += "\nAnswer Choices:";
        for (const auto& ch : *c)
          text += " (" + str_field(ch, "label") + ") " + str_field(ch, "text");
      }
    } else {
      text = str_field(r, "question");
    }
    return make_seed(record_id(r, corpus, i), text,
                     steps_field(r, {"rationale", "explanation", "fact1"}), str_field(r, "answerKey"),
                     TaskCategory::science, corpus);
  };
}

CoTSample worldtree(const json& r, std::size_t i) {
  return make_seed(record_id(r, "worldtree", i), str_field(r, "question"),
                   steps_field(r, {"rationale", "explanation"}), str_field(r, "answer"),
                   TaskCategory::science, "worldtree");
}

// BIG-bench style {input, target} records carrying an annotated rationale.
SeedAdapter bigbench(std::string corpus, TaskCategory category) {
  return [corpus, category](const json& r, std::size_t i) {
    std::string target;
    auto t = r.find("target");
    if (t != r.end() && t->is_array() && !t->empty())
      target = (*t)[0].is_string() ? (*t)[0].get<std::string>() : (*t)[0].dump();
    else
      target = str_field(r, "target");
    return make_seed(record_id(r, corpus, i), str_field(r, "input"),
                     steps_field(r, {"rationale", "cot"}), target, category, corpus);
  };
}

CoTSample passthrough(const json& r, std::size_t i) {
  if (r.contains("lineage")) return sample_from_json(r);
  auto cat = parse_category(str_field(r, "category"));
  if (!cat) throw DataError("field 'category' is not a known task category");
  std::string corpus = r.contains("source_dataset") ? str_field(r, "source_dataset") : "cot";
  return make_seed(record_id(r, corpus, i), str_field(r, "question"),
                   steps_field(r, {"rationale"}),
                   r.contains("final_answer") ? str_field(r, "final_answer") : str_field(r, "answer"),
                   *cat, corpus);
}

}  // namespace

std::vector<std::string> split_rationale(std::string_view text) {
  std::vector<std::string> steps;
  for (const auto& line : io::split_lines(text)) {
    auto t = io::trim(line);
    if (!t.empty()) steps.push_back(std::move(t));
  }
  return steps;
}

const std::map<std::string, SeedAdapter>& seed_adapters() {
  static const std::map<std::string, SeedAdapter> registry = {
      {"strategyqa", strategyqa},
      {"date_understanding", bigbench("date_understanding", TaskCategory::commonsense)},
      {"aqua_rat", aqua_rat},
      {"gsm8k", gsm8k},
      {"arc_challenge", multiple_choice_science("arc_challenge")},
      {"openbookqa", multiple_choice_science("openbookqa")},
      {"worldtree", worldtree},
      {"colored_objects", bigbench("colored_objects", TaskCategory::symbolic)},
      {"tracking_shuffled_objects", bigbench("tracking_shuffled_objects", TaskCategory::symbolic)},
      {"word_sorting", bigbench("word_sorting", TaskCategory::symbolic)},
      {"cot", passthrough},
  };
  return registry;
}

std::vector<std::string> seed_adapter_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : seed_adapters()) names.push_back(name);
  return names;
}

std::vector<CoTSample> ingest_seed_corpus(const std::string& corpus,
                                          const std::filesystem::path& path) {
  auto it = seed_adapters().find(corpus);
  if (it == seed_adapters().end()) throw ConfigError("unknown seed corpus '" + corpus + "'");
  const std::string text = io::read_file(path);

  std::vector<json> records;
  bool wrapped = false;
  auto first = text.find_first_not_of(" \t\r\n");
  bool whole_document = first != std::string::npos && (text[first] == '[');
  if (!whole_document && first != std::string::npos && text[first] == '{') {
    // A single JSON object spanning the file (BIG-bench task.json) vs JSON lines.
    try {
      json doc = json::parse(text);
      if (doc.contains("examples")) {
        for (auto& e : doc["examples"]) records.push_back(e);
        whole_document = wrapped = true;
      }
    } catch (const json::exception&) {
    }
  }
  if (whole_document && !wrapped) {
    try {
      for (auto& e : json::parse(text)) records.push_back(e);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  } else if (!whole_document) {
    size_t line_no = 0;
    for (const auto& line : io::split_lines(text)) {
      ++line_no;
      if (io::trim(line).empty()) continue;
      try {
        records.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  std::vector<CoTSample> out;
  for (size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(it->second(records[i], i));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cotforge
