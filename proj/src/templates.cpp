#include "cotforge/templates.hpp"

#include <filesystem>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"

namespace cotforge::templates {

const PromptTemplate kComplicate{"complicate", R"(I want you to act as a Question Rewriter. Your objective is to rewrite a given question into a more complex version to make it require more reasoning steps. But the rewritten question must be reasonable, understandable, and answerable by humans.

You SHOULD complicate the given question using the following methods:
1. Add some more constraints/requirements into #Given Question#.
2. Increase the depth of the #Given Question#.

#Rewritten Question# must be a solvable problem independent of the #Given Question#.

#Given Question#:
#Rewritten Question#:)"};

const PromptTemplate kDiversify{"diversify", R"(I want you to act as a Question Rewriter. Your objective is to rewrite a given question into a more diverse version. But the rewritten question must be reasonable, understandable, and answerable by humans.

You SHOULD diversify the given question using the following methods:
1. Replace problem scenarios.
2. Draw inspiration from the #Given Question# to create a brand new question.

#Rewritten Question# must be a solvable problem independent of the #Given Question#.

#Given Question#:
#Rewritten Question#:)"};

const PromptTemplate kSpecify{"specify", R"(I want you to act as a Chain-of-Thought Rewriter. Given a question and its Chain-of-Thought answer, your objective is to rewrite the given Chain-of-Thought answer into a more specific version. But the rewritten CoT must be reasonable and have the same answer as the given CoT.

You SHOULD specify the given CoT using the following methods:
1. Add more reasoning steps to make the reasoning progress more detailed.
2. Rewrite existing reasoning steps to make them more standardized.

#Given Question#:
#Given CoT#:
#Rewritten CoT#:)"};

const PromptTemplate kRegenerate{"regenerate", R"(Solve the following question step by step. Write one reasoning step per line in the form "Step k: ...". Reason first and state the result only after the reasoning. End with a final line of the form "The answer is <answer>".

#Question#:
#Solution#:)"};

const PromptTemplate kSuccessComplicate{"success_complicate", R"(Given two questions, try your best to judge whether #Question 2# is more difficult than #Question 1#. If #Question 1# is more difficult, write 'No'. If #Question 2# is more difficult, write 'Yes'.

#Question 1#:
#Question 2#:
#Your Judgement#:)"};

const PromptTemplate kSuccessDiversify{"success_diversify", R"(Given two questions, try your best to judge whether #Question 2# is different from #Question 1#. If the two questions are different, write 'Yes'. Otherwise, write 'No'.

#Question 1#:
#Question 2#:
#Your Judgement#:)"};

const PromptTemplate kSuccessSpecify{"success_specify", R"(Given a question and two Chain-of-Thought answers to the question, try your best to judge whether #CoT 2# is better than #CoT 1#. If #CoT 2# is better than #CoT 1#, write 'Yes'. If #CoT 1# is better than #CoT 2#, write 'No'.

#Question#:
#CoT 1#:
#CoT 2#:
#Your Judgement#:)"};

const PromptTemplate kCorrectness{"correctness", R"(Given a question and an answer to the question, try your best to judge whether the answer is right or wrong. If it's right, write 'Yes'. If it's wrong, write 'No'.

#Question#:
#Answer#:
#Your Judgement#:)"};

const PromptTemplate kRoleGeneralPublic{"role_general_public", R"(You are the general public. Given a problem, you should give one step of your Chain-of-Thought answer. For each step, we will have a debating and the judge will decide the final answer for this step. You need to give the next step based on the previous steps until the judge gives the final answer. It must be noted that you can only give one step at a time.)"};

const PromptTemplate kRoleScientist{"role_scientist", R"(You are the scientist. Given a problem and one solving step, you should judge whether the step and discussion are correct. If they are not correct, you should give your reason and your opinion of the correct step.)"};

const PromptTemplate kRoleMathematician{"role_mathematician", R"(You are the mathematician. Given a problem and one solving step, you should judge whether the step and discussion are correct. If they are not correct, you should give your reason and your opinion of the correct step.)"};

const PromptTemplate kRoleJudge{"role_judge", R"(You are the judge. Given a problem and the debating process of one solving step, you should judge which opinion is correct and give the answer of the very step. If you can conclude the final answer directly, repeat the final answer with 'Debate ended.' in the end. If there are choices in the question, give the right choice.)"};

namespace {

const PromptTemplate kAll[] = {kComplicate,        kDiversify,         kSpecify,
                               kRegenerate,        kSuccessComplicate, kSuccessDiversify,
                               kSuccessSpecify,    kCorrectness,       kRoleGeneralPublic,
                               kRoleScientist,     kRoleMathematician, kRoleJudge};

bool is_slot_line(std::string_view line) {
  return line.size() >= 4 && line.front() == '#' && line.substr(line.size() - 2) == "#:" &&
         line.substr(1, line.size() - 3).find('#') == std::string_view::npos;
}

std::string_view slot_label(std::string_view line) { return line.substr(1, line.size() - 3); }

}  // namespace

std::span<const PromptTemplate> all() { return kAll; }

const PromptTemplate* find(std::string_view name) {
  for (const auto& t : kAll)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<std::string> slot_labels(std::string_view tmpl) {
  std::vector<std::string> labels;
  for (const auto& line : io::split_lines(tmpl))
    if (is_slot_line(line)) labels.emplace_back(slot_label(line));
  return labels;
}

std::string render(std::string_view tmpl, const Slots& slots) {
  std::vector<bool> used(slots.size(), false);
  std::string out;
  out.reserve(tmpl.size() + 256);
  size_t pos = 0;
  while (pos <= tmpl.size()) {
    size_t nl = tmpl.find('\n', pos);
    std::string_view line = tmpl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    out.append(line);
    if (is_slot_line(line)) {
      auto label = slot_label(line);
      for (size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].first != label) continue;
        used[i] = true;
        if (!slots[i].second.empty()) {
          out.push_back(' ');
          out.append(slots[i].second);
        }
        break;
      }
    }
    if (nl == std::string_view::npos) break;
    out.push_back('\n');
    pos = nl + 1;
  }
  for (size_t i = 0; i < slots.size(); ++i)
    if (!used[i]) throw InvariantViolation("template has no slot '#" + slots[i].first + "#:'");
  return out;
}

std::vector<std::string> check_against(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> problems;
  for (const auto& t : kAll) {
    fs::path file = fs::path(dir) / (std::string(t.name) + ".txt");
    if (!fs::exists(file)) {
      problems.push_back(std::string(t.name) + ": missing " + file.string());
      continue;
    }
    std::string expected = io::read_file(file);
    if (expected == t.text) continue;
    size_t at = 0;
    while (at < expected.size() && at < t.text.size() && expected[at] == t.text[at]) ++at;
    size_t line = 1;
    for (size_t i = 0; i < at && i < expected.size(); ++i)
      if (expected[i] == '\n') ++line;
    problems.push_back(std::string(t.name) + ": differs from " + file.string() + " at byte " +
                       std::to_string(at) + " (line " + std::to_string(line) + ")");
  }
  return problems;
}

}  // namespace cotforge::templates
