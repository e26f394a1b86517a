#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "geo/algebra.hpp"
#include "geo/diagram.hpp"

namespace geo {

using FactId = int;

struct PremiseSrc {};
struct RuleSrc {
  std::string rule_id;
  std::vector<FactId> antecedents;
};
struct AlgebraSrc {
  Certificate cert;
  std::vector<FactId> antecedents;
};
struct MergeSrc {
  std::vector<FactId> antecedents;  // the idc fact and the substituted origin
};
using Source = std::variant<PremiseSrc, RuleSrc, AlgebraSrc, MergeSrc>;

struct Fact {
  Predicate pred;  // canonical form
  Source source;
};

/// A forward-chaining rule; antecedent/consequent args are variables.
/// Guards are patterns that must NOT hold in the diagram. A rule whose
/// consequent head is `ratio_product` injects a length-product relation into
/// the ratio system instead of producing a predicate.
struct Rule {
  std::string id;
  std::vector<Predicate> antecedents;
  Predicate consequent;
  std::vector<std::string> schema_args;  // ratio_product segments (paired points)
  bool relation_schema = false;
  std::vector<Predicate> guards;
};

std::vector<Rule> parse_rules(std::string_view text);
const std::vector<Rule>& default_rules();
const char* embedded_rules_text();

/// Canonical form under the predicate's symmetry group (e.g. cong(a,b,c,d)
/// == cong(b,a,d,c)); the key is its serialization.
Predicate canonical(const Predicate& p);
std::string canonical_key(const Predicate& p);

/// All argument arrangements equivalent to p under its symmetry group.
std::vector<std::vector<std::string>> symmetry_orbit(const Predicate& p);

struct SaturateOptions {
  long budget = 100000;  // rule firings
  double tol_check = 1e-8;
  int max_candidates_per_bucket = 80;
};

class FactBase {
 public:
  const std::vector<Fact>& facts() const { return facts_; }
  const Fact& fact(FactId id) const { return facts_[std::size_t(id)]; }
  bool budget_exhausted() const { return budget_exhausted_; }
  long firings() const { return firings_; }

  /// Canonical membership; para/perp/eqangle are additionally matched modulo
  /// the final collinearity partition (any point pair naming a line works).
  std::optional<FactId> find(const Predicate& p) const;

  /// Derive a linear-kind predicate from the saturated relation system
  /// (covers tautologies and representative mismatches not stored as facts).
  std::optional<Certificate> algebra_derive(const Predicate& p) const;

  std::vector<FactId> relation_antecedents(const std::string& rel_id) const;

  const SymbolTable& symbols() const { return syms_; }
  std::vector<std::pair<std::string, std::string>> merged_pairs() const;

 private:
  friend struct FactBaseBuilder;
  std::vector<Fact> facts_;
  std::map<std::string, FactId> index_;       // canonical key -> earliest id
  std::map<std::string, FactId> line_index_;  // line-partition key -> earliest id
  std::map<std::string, std::vector<FactId>> rel_antecedents_;
  std::vector<std::pair<std::string, LinearRelation>> relations_;
  SymbolTable syms_;
  bool budget_exhausted_ = false;
  long firings_ = 0;
};

FactBase saturate(const std::vector<Predicate>& premises, const Diagram& d,
                  const SaturateOptions& opt = {},
                  const std::vector<Rule>& rules = default_rules());

enum class StepKind { premise, rule, algebra, merge };
const char* step_kind_name(StepKind k);

struct ProofNode {
  Predicate pred;
  StepKind kind = StepKind::premise;
  std::string rule_id;
  std::vector<FactId> antecedents;
  std::optional<Certificate> cert;
};

/// Self-contained derivation subgraph: every antecedent id is a node.
struct ProofDag {
  std::map<FactId, ProofNode> nodes;
  std::vector<FactId> goal_roots;
};

std::optional<ProofDag> prove(const FactBase& fb, const Predicate& goal);

/// Non-premise, non-merge node count (the complexity measure).
int proof_length(const ProofDag& dag);

}  // namespace geo
