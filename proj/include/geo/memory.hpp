#pragma once

#include <string>
#include <vector>

#include "geo/engine.hpp"

namespace geo {

/// One elapsed agent turn: opaque thinking text, the raw action text, and the
/// engine's feedback.
struct Turn {
  std::string think;
  std::string action_text;
  Feedback feedback;

  nlohmann::ordered_json to_json() const;
};

struct SummaryRow {
  int turn = 0;
  std::string action;  // canonical form, or the raw text when unparsable
  std::string status;
  std::string key_result;
};

/// Compressed history: one row per elapsed turn except the last, which is
/// kept verbatim.
struct CompressedHistory {
  std::vector<SummaryRow> summary_rows;
  Turn last_turn;

  nlohmann::ordered_json to_json() const;
};

CompressedHistory compress(const std::vector<Turn>& history);

struct PassCheckLimits {
  std::size_t max_think_chars = 32768;
  int max_same_kind = 8;
};

enum class RejectReason {
  none,
  overlong_think,
  malformed_action,
  repeated_action,
  kind_streak,
};
const char* reject_reason_name(RejectReason r);

struct PassCheckResult {
  bool accept = true;
  RejectReason reason = RejectReason::none;
};

/// Rule-based rejection gate for a drafted turn. Conditions, in order:
/// overlong thinking, no parsable action, action canonically equal to any
/// prior action, and too many consecutive turns of one action kind.
PassCheckResult pass_check(const Turn& candidate, const std::vector<Turn>& history,
                           const PassCheckLimits& limits = {});

/// Canonical comparable form of an action text (modulo predicate symmetry);
/// unparsable text canonicalizes to itself trimmed.
std::string canonical_action_form(const std::string& action_text);

}  // namespace geo
