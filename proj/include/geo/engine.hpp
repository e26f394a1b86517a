#pragma once

#include <string>
#include <utility>
#include <vector>

#include "geo/deduct.hpp"

namespace geo {

struct EngineOptions {
  BuildOptions build;
  SaturateOptions saturate;
  int max_turns = 200;
  const std::vector<Rule>* rules = nullptr;  // default library when null

  const std::vector<Rule>& rule_set() const { return rules ? *rules : default_rules(); }
};

enum class FeedbackStatus { ok, proven, construction_failed, not_proven, session_solved, error };
const char* feedback_status_name(FeedbackStatus s);

struct Feedback {
  FeedbackStatus status = FeedbackStatus::ok;
  nlohmann::ordered_json detail = nlohmann::ordered_json::object();
  std::vector<std::string> known_summary;  // currently proven propositions

  nlohmann::ordered_json to_json() const;
};

struct SessionState {
  Problem problem;
  Diagram diagram;
  FactBase factbase;
  std::vector<ConstructionStmt> aux;
  std::vector<std::pair<Predicate, ProofDag>> proven;  // proposition, derivation
  std::vector<Predicate> goals_remaining;
  int turn = 0;
  int max_turns = 200;
  std::uint64_t seed = 0;

  bool solved() const { return goals_remaining.empty(); }
};

std::pair<SessionState, Feedback> start_session(const BuildAction& a, std::uint64_t seed,
                                                const EngineOptions& opt = {});

std::pair<SessionState, Feedback> step(const SessionState& s, const Action& a,
                                       const EngineOptions& opt = {});

struct ProofStep {
  FactId id;
  Predicate fact;
  StepKind kind;
  std::string rule_id;
  std::vector<FactId> antecedents;
  std::optional<Certificate> cert;
};

struct ProofDocument {
  Problem problem;
  std::vector<ConstructionStmt> aux_used;
  std::vector<ConstructionStmt> aux_unused;
  std::vector<ProofStep> steps;  // topologically ordered, premises included
  std::vector<Predicate> goals;
  int length = 0;  // rule + algebra steps

  nlohmann::ordered_json to_json() const;
};

/// Merges the goal derivations of a solved session into one ordered proof.
/// Throws NotSolved while goals remain.
ProofDocument extract_proof(const SessionState& s);

struct SolveResult {
  std::optional<ProofDocument> proof;
  bool budget_exhausted = false;
};

/// Build, saturate and prove every goal without agent interaction.
SolveResult exhaust_solve(const Problem& p, std::uint64_t seed, const EngineOptions& opt = {});

/// Derivable state (diagram, factbase) is recomputed on resume.
nlohmann::ordered_json checkpoint(const SessionState& s);
SessionState resume(const nlohmann::ordered_json& snapshot, const EngineOptions& opt = {});

}  // namespace geo
