#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cotforge::templates {

inline constexpr std::string_view kVersion = "1";

struct PromptTemplate {
  std::string_view name;
  std::string_view text;
};

// Evolution instructions.
extern const PromptTemplate kComplicate;
extern const PromptTemplate kDiversify;
extern const PromptTemplate kSpecify;
// Rationale regeneration for rewritten questions.
extern const PromptTemplate kRegenerate;
// Evolutionary success judgement, one per strategy, and correctness verification.
extern const PromptTemplate kSuccessComplicate;
extern const PromptTemplate kSuccessDiversify;
extern const PromptTemplate kSuccessSpecify;
extern const PromptTemplate kCorrectness;
// Debate role descriptions.
extern const PromptTemplate kRoleGeneralPublic;
extern const PromptTemplate kRoleScientist;
extern const PromptTemplate kRoleMathematician;
extern const PromptTemplate kRoleJudge;

std::span<const PromptTemplate> all();
const PromptTemplate* find(std::string_view name);

using Slots = std::vector<std::pair<std::string, std::string>>;

/// A slot is a line consisting solely of "#Label#:". Filling it turns the line
/// into "#Label#: value"; an empty value leaves the line untouched. Every
/// label in `slots` must exist in the template (InvariantViolation otherwise).
std::string render(std::string_view tmpl, const Slots& slots);

/// Labels of every slot line, in template order.
std::vector<std::string> slot_labels(std::string_view tmpl);

/// Compares compiled-in templates with the transcriptions stored as
/// "<name>.txt" in `dir`. Returns one message per mismatch or missing file.
std::vector<std::string> check_against(const std::string& dir);

}  // namespace cotforge::templates
