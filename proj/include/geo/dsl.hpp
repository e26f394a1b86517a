#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "geo/common.hpp"

namespace geo {

// ---------------------------------------------------------------------------
// Predicates

enum class PredKind {
  coll,
  para,
  perp,
  cong,
  eqangle,
  eqratio,
  cyclic,
  circle,
  midp,
  simtri,
  contri,
  idc,
};

const char* pred_name(PredKind k);
std::optional<PredKind> pred_from_name(std::string_view s);

struct Predicate {
  PredKind kind = PredKind::coll;
  std::vector<std::string> args;

  bool operator==(const Predicate& o) const = default;
};

/// Throws ArityError / InvariantViolation when the argument list does not fit
/// the predicate kind (arity, per-slot distinctness).
void validate_predicate(const Predicate& p);

bool valid_point_name(std::string_view s);

// ---------------------------------------------------------------------------
// Constructions

enum class Ctor {
  triangle,
  free,
  on_line,
  on_circle,
  midpoint,
  foot,
  angle_bisector,
  perp_bisector,
  circumcenter,
  incenter,
  centroid,
  reflect,
  intersection_ll,
  intersection_lc,
  intersection_cc,
  on_segment,
};

const char* ctor_name(Ctor c);
std::optional<Ctor> ctor_from_name(std::string_view s);

/// One constraint applied to the new point(s): a constructor with its
/// arguments. Arguments are point names except for `free`, which optionally
/// takes two numeric literals pinning explicit coordinates.
struct CtorCall {
  Ctor fn = Ctor::free;
  std::vector<std::string> points;
  std::vector<double> numbers;

  bool operator==(const CtorCall& o) const = default;
};

/// `!`-prefixed statements may land on (or redefine, see README) an existing
/// point; a statement may carry several comma-separated constraint parts,
/// e.g. "t = on_segment a c, angle_bisector a b c".
struct ConstructionStmt {
  std::vector<std::string> new_points;
  std::vector<CtorCall> parts;
  bool allow_double = false;

  bool operator==(const ConstructionStmt& o) const = default;
};

struct Problem {
  std::vector<ConstructionStmt> constructions;
  std::vector<Predicate> goals;

  bool operator==(const Problem& o) const = default;
};

// ---------------------------------------------------------------------------
// Actions (one agent turn)

struct BuildAction {
  Problem problem;
  bool operator==(const BuildAction&) const = default;
};
struct AddAction {
  std::vector<ConstructionStmt> stmts;
  bool operator==(const AddAction&) const = default;
};
struct ProposeAction {
  Predicate goal;
  bool operator==(const ProposeAction&) const = default;
};

using Action = std::variant<BuildAction, AddAction, ProposeAction>;

enum class ActionKind { build, add, propose };
const char* action_kind_name(ActionKind k);
ActionKind action_kind(const Action& a);

// ---------------------------------------------------------------------------
// Parsing / serialization

Problem parse_problem(std::string_view text);

/// Parses a `;`-separated statement list (the payload of an <add> action).
/// `defined` holds the point names already known to the session.
std::vector<ConstructionStmt> parse_stmts(std::string_view text,
                                          const std::vector<std::string>& defined);

/// Parses a single predicate (the payload of a <propose> action).
Predicate parse_predicate(std::string_view text);

Action parse_action(std::string_view text);

std::string serialize(const Predicate& p);
std::string serialize(const CtorCall& c);
std::string serialize(const ConstructionStmt& s);
std::string serialize(const Problem& p);
std::string serialize_action(const Action& a);

}  // namespace geo
