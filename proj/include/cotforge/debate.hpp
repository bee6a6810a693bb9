#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cotforge/gateway.hpp"

namespace cotforge {

enum class Role { general_public, scientist, mathematician, judge };
enum class TerminationReason { debate_ended_marker, max_steps, max_rounds_exhausted };

std::string_view to_string(Role r);
std::string_view to_string(TerminationReason r);
std::optional<Role> parse_role(std::string_view name);

inline constexpr std::string_view kDebateEndedMarker = "Debate ended.";

struct DebateTurn {
  Role role = Role::general_public;
  std::string content;
  int step_index = 1;
  int round_index = 1;

  bool operator==(const DebateTurn&) const = default;
};

struct DebateTranscript {
  std::string question;
  std::vector<DebateTurn> turns;
  /// One entry per judge ruling, the terminating one included (marker stripped).
  std::vector<std::string> settled_steps;
  /// Set only when the judge ended the debate with the marker.
  std::optional<std::string> final_answer;
  bool terminated = false;
  std::optional<TerminationReason> termination_reason;
  /// Whether the most recent ruling was forced after the critics used up every round.
  bool last_step_contested = false;
};

json to_json(const DebateTranscript& t);
DebateTranscript transcript_from_json(const json& j);

/// One backend per role; roles may share a backend.
struct DebateAgents {
  ClientHandle general_public;
  ClientHandle scientist;
  ClientHandle mathematician;
  ClientHandle judge;

  ClientHandle& for_role(Role r);
  const ClientHandle& for_role(Role r) const;
};

struct DebateOptions {
  int max_steps = 15;
  int max_rounds = 3;
  GenerationParams params{0.1, 512, {}};
};

/// Role description followed by the question, the settled steps and the
/// current step's turns in order. Throws InvariantViolation when `role` is not
/// allowed to speak next or the transcript breaks the turn order.
std::string render_role_prompt(Role role, const DebateTranscript& context);

/// Pure check of the turn-order invariants. Empty result means valid. The
/// final step may be open (no judge turn yet) when `allow_open_step` is set.
std::vector<std::string> validate_turn_order(const DebateTranscript& t, bool allow_open_step = false);

/// Roles allowed to speak next.
std::vector<Role> next_roles(const DebateTranscript& t);

/// Critic consensus heuristic: the leading sentence contains "agree" or
/// "correct" as a word with no negation before it.
bool signals_agreement(std::string_view critic_turn);

/// Thrown when a role's backend fails hard; carries the partial transcript.
class DebateAborted : public std::runtime_error {
 public:
  DebateAborted(DebateTranscript partial, const std::string& what)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const DebateTranscript& partial() const { return partial_; }

 private:
  DebateTranscript partial_;
};

/// One reasoning step: proposal, up to `max_rounds` critique rounds (fewer if
/// both critics agree), then the judge's ruling.
void run_step(DebateTranscript& transcript, const DebateAgents& agents, int max_rounds,
              const GenerationParams& params);

DebateTranscript debate(std::string_view question, const DebateAgents& agents,
                        const DebateOptions& options = {});

}  // namespace cotforge
