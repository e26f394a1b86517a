#include "geo/memory.hpp"

#include <algorithm>

namespace geo {

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::none: return "none";
    case RejectReason::overlong_think: return "overlong_think";
    case RejectReason::malformed_action: return "malformed_action";
    case RejectReason::repeated_action: return "repeated_action";
    case RejectReason::kind_streak: return "kind_streak";
  }
  return "?";
}

nlohmann::ordered_json Turn::to_json() const {
  nlohmann::ordered_json j;
  j["think"] = think;
  j["action"] = action_text;
  j["feedback"] = feedback.to_json();
  return j;
}

nlohmann::ordered_json CompressedHistory::to_json() const {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const SummaryRow& r : summary_rows)
    rows.push_back({r.turn, r.action, r.status, r.key_result});
  nlohmann::ordered_json j;
  j["rows"] = rows;
  j["last_turn"] = last_turn.to_json();
  return j;
}

namespace {

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<Action> try_parse(const std::string& text) {
  try {
    return parse_action(text);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Canonical map of an action for repeat detection: predicates get their
// symmetry-canonical form, constructions their normalized serialization.
std::string canonical_of(const Action& a) {
  if (const auto* b = std::get_if<BuildAction>(&a)) return "build " + serialize(b->problem);
  if (const auto* ad = std::get_if<AddAction>(&a)) {
    std::string out = "add ";
    for (std::size_t i = 0; i < ad->stmts.size(); ++i) {
      if (i) out += "; ";
      out += serialize(ad->stmts[i]);
    }
    return out;
  }
  return "propose " + serialize(canonical(std::get<ProposeAction>(a).goal));
}

std::string key_result_of(const Feedback& fb) {
  const auto& d = fb.detail;
  switch (fb.status) {
    case FeedbackStatus::proven:
    case FeedbackStatus::not_proven:
      if (d.contains("proposition")) {
        std::string out = d.at("proposition").get<std::string>();
        if (d.contains("proof_length"))
          out += " (len " + std::to_string(d.at("proof_length").get<int>()) + ")";
        if (d.contains("reason")) out += " [" + d.at("reason").get<std::string>() + "]";
        return out;
      }
      break;
    case FeedbackStatus::ok:
    case FeedbackStatus::session_solved:
      if (d.contains("new_facts"))
        return "+" + std::to_string(d.at("new_facts").get<long>()) + " facts";
      if (d.contains("facts")) return std::to_string(d.at("facts").get<long>()) + " facts";
      break;
    case FeedbackStatus::construction_failed:
    case FeedbackStatus::error:
      if (d.contains("error")) return d.at("error").get<std::string>();
      break;
  }
  return {};
}

}  // namespace

std::string canonical_action_form(const std::string& action_text) {
  if (auto a = try_parse(action_text)) return canonical_of(*a);
  return trimmed(action_text);
}

CompressedHistory compress(const std::vector<Turn>& history) {
  if (history.empty())
    throw Error(Errc::invariant_violation, "cannot compress an empty history");
  CompressedHistory out;
  for (std::size_t i = 0; i + 1 < history.size(); ++i) {
    SummaryRow row;
    row.turn = int(i) + 1;
    row.action = canonical_action_form(history[i].action_text);
    row.status = feedback_status_name(history[i].feedback.status);
    row.key_result = key_result_of(history[i].feedback);
    out.summary_rows.push_back(std::move(row));
  }
  out.last_turn = history.back();
  return out;
}

PassCheckResult pass_check(const Turn& candidate, const std::vector<Turn>& history,
                           const PassCheckLimits& limits) {
  if (candidate.think.size() > limits.max_think_chars)
    return {false, RejectReason::overlong_think};

  auto parsed = try_parse(candidate.action_text);
  if (!parsed) return {false, RejectReason::malformed_action};

  std::string form = canonical_of(*parsed);
  for (const Turn& t : history)
    if (canonical_action_form(t.action_text) == form)
      return {false, RejectReason::repeated_action};

  ActionKind kind = action_kind(*parsed);
  int streak = 0;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    auto prev = try_parse(it->action_text);
    if (!prev || action_kind(*prev) != kind) break;
    ++streak;
  }
  if (streak >= limits.max_same_kind) return {false, RejectReason::kind_streak};

  return {true, RejectReason::none};
}

}  // namespace geo
