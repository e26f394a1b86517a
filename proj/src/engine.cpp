#include "geo/engine.hpp"

#include <algorithm>
#include <set>

namespace geo {

const char* feedback_status_name(FeedbackStatus s) {
  switch (s) {
    case FeedbackStatus::ok: return "ok";
    case FeedbackStatus::proven: return "proven";
    case FeedbackStatus::construction_failed: return "construction_failed";
    case FeedbackStatus::not_proven: return "not_proven";
    case FeedbackStatus::session_solved: return "session_solved";
    case FeedbackStatus::error: return "error";
  }
  return "?";
}

nlohmann::ordered_json Feedback::to_json() const {
  nlohmann::ordered_json j;
  j["status"] = feedback_status_name(status);
  j["detail"] = detail;
  j["known_summary"] = known_summary;
  return j;
}

namespace {

std::vector<std::string> summary_of(const SessionState& s) {
  std::vector<std::string> out;
  out.reserve(s.proven.size());
  for (const auto& [pred, dag] : s.proven) out.push_back(serialize(canonical(pred)));
  return out;
}

bool append_proven(SessionState& s, const Predicate& pred, ProofDag dag) {
  std::string key = canonical_key(pred);
  for (const auto& [p, d] : s.proven)
    if (canonical_key(p) == key) return false;
  s.proven.emplace_back(canonical(pred), std::move(dag));
  return true;
}

/// Moves every already-derivable goal into the proven list.
void harvest_goals(SessionState& s) {
  std::vector<Predicate> still;
  for (const Predicate& g : s.goals_remaining) {
    if (auto dag = prove(s.factbase, g))
      append_proven(s, g, std::move(*dag));
    else
      still.push_back(g);
  }
  s.goals_remaining = std::move(still);
}

FactBase saturate_plan(const Diagram& d, const EngineOptions& opt) {
  return saturate(construction_premises(d.plan), d, opt.saturate, opt.rule_set());
}

nlohmann::ordered_json merged_json(const Diagram& d) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& [a, b] : d.merged) out.push_back({a, b});
  return out;
}

Feedback error_feedback(const Error& e) {
  Feedback fb;
  fb.status = FeedbackStatus::error;
  fb.detail["error"] = errc_name(e.code());
  fb.detail["message"] = e.what();
  return fb;
}

constexpr std::size_t kFactListCap = 64;

nlohmann::ordered_json fact_list(const FactBase& fb) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  std::size_t n = std::min(fb.facts().size(), kFactListCap);
  for (std::size_t i = 0; i < n; ++i) out.push_back(serialize(fb.facts()[i].pred));
  return out;
}

}  // namespace

std::pair<SessionState, Feedback> start_session(const BuildAction& a, std::uint64_t seed,
                                                const EngineOptions& opt) {
  SessionState s;
  s.problem = a.problem;
  s.seed = seed;
  s.max_turns = opt.max_turns;
  try {
    if (a.problem.goals.empty())
      throw Error(Errc::invariant_violation, "problem has no goals");
    s.diagram = build_diagram(a.problem, seed, opt.build);
    s.factbase = saturate_plan(s.diagram, opt);
  } catch (const Error& e) {
    return {s, error_feedback(e)};
  }
  s.goals_remaining = a.problem.goals;
  harvest_goals(s);
  s.turn = 1;

  Feedback fb;
  fb.status = s.solved() ? FeedbackStatus::session_solved : FeedbackStatus::ok;
  fb.detail["facts"] = s.factbase.facts().size();
  fb.detail["initial_relations"] = fact_list(s.factbase);
  fb.detail["merged"] = merged_json(s.diagram);
  fb.detail["budget_exhausted"] = s.factbase.budget_exhausted();
  if (s.solved()) fb.detail["solved_goals"] = s.problem.goals.size();
  fb.known_summary = summary_of(s);
  return {s, fb};
}

std::pair<SessionState, Feedback> step(const SessionState& s, const Action& a,
                                       const EngineOptions& opt) {
  if (s.solved()) {
    Feedback fb;
    fb.status = FeedbackStatus::error;
    fb.detail["error"] = "SessionSolved";
    fb.detail["message"] = "session is already solved";
    fb.known_summary = summary_of(s);
    return {s, fb};
  }
  if (s.turn >= s.max_turns) {
    Feedback fb;
    fb.status = FeedbackStatus::error;
    fb.detail["error"] = errc_name(Errc::turn_limit_exceeded);
    fb.detail["message"] = "turn limit reached";
    fb.known_summary = summary_of(s);
    return {s, fb};
  }

  SessionState ns = s;
  ns.turn = s.turn + 1;
  Feedback fb;

  if (std::holds_alternative<BuildAction>(a)) {
    fb.status = FeedbackStatus::error;
    fb.detail["error"] = "BuildAfterStart";
    fb.detail["message"] = "<build> is only valid as the first action of a session";
    fb.known_summary = summary_of(ns);
    return {ns, fb};
  }

  if (const auto* add = std::get_if<AddAction>(&a)) {
    Diagram nd = ns.diagram;
    std::size_t facts_before = ns.factbase.facts().size();
    try {
      for (const ConstructionStmt& stmt : add->stmts) {
        for (const CtorCall& part : stmt.parts)
          for (const std::string& p : part.points)
            if (!nd.has(p)) throw Error(Errc::undefined_point, "undefined point '" + p + "'");
        for (const std::string& n : stmt.new_points)
          if (nd.has(n) && !stmt.allow_double)
            throw Error(Errc::duplicate_point, "point '" + n + "' already defined");
        nd = add_point(nd, stmt, opt.build);
      }
    } catch (const Error& e) {
      fb = error_feedback(e);
      fb.status = FeedbackStatus::construction_failed;
      fb.known_summary = summary_of(ns);
      return {ns, fb};
    }
    // a global adjustment may have moved earlier points; the knowledge base
    // must stay numerically valid or the action is rejected
    bool moved = false;
    for (const auto& [name, v] : s.diagram.coords)
      if (dist(v, nd.at(name)) > 1e-12) {
        moved = true;
        break;
      }
    if (moved) {
      for (const Fact& f : ns.factbase.facts())
        if (!check_predicate(nd, f.pred, opt.saturate.tol_check)) {
          fb.status = FeedbackStatus::construction_failed;
          fb.detail["error"] = "AdjustmentInvalidatesFacts";
          fb.detail["message"] = "global adjustment contradicts " + serialize(f.pred);
          fb.known_summary = summary_of(ns);
          return {ns, fb};
        }
    }
    try {
      ns.factbase = saturate_plan(nd, opt);
    } catch (const Error& e) {
      fb = error_feedback(e);
      fb.status = FeedbackStatus::construction_failed;
      fb.known_summary = summary_of(ns);
      return {ns, fb};
    }
    ns.diagram = nd;
    for (const ConstructionStmt& stmt : add->stmts) ns.aux.push_back(stmt);
    harvest_goals(ns);

    nlohmann::ordered_json added = nlohmann::ordered_json::array();
    for (const ConstructionStmt& stmt : add->stmts) added.push_back(serialize(stmt));
    fb.status = ns.solved() ? FeedbackStatus::session_solved : FeedbackStatus::ok;
    fb.detail["added"] = added;
    long delta = long(ns.factbase.facts().size()) - long(facts_before);
    fb.detail["new_facts"] = delta;
    fb.detail["adjusted"] = moved;
    nlohmann::ordered_json idc = nlohmann::ordered_json::array();
    for (const auto& [x, e] : ns.diagram.merged) {
      bool old = false;
      for (const auto& [ox, oe] : s.diagram.merged)
        if (ox == x && oe == e) old = true;
      if (!old) idc.push_back("idc " + x + " " + e);
    }
    fb.detail["idc"] = idc;
    fb.known_summary = summary_of(ns);
    return {ns, fb};
  }

  const auto& prop = std::get<ProposeAction>(a);
  try {
    validate_predicate(prop.goal);
    for (const std::string& n : prop.goal.args)
      if (!ns.diagram.has(n)) throw Error(Errc::unknown_point, "unknown point '" + n + "'");
  } catch (const Error& e) {
    fb = error_feedback(e);
    fb.known_summary = summary_of(ns);
    return {ns, fb};
  }
  auto dag = prove(ns.factbase, prop.goal);
  if (dag) {
    int len = proof_length(*dag);
    append_proven(ns, prop.goal, std::move(*dag));
    // a proposed remaining goal is cleared, and other goals may have become
    // derivable through earlier adds
    harvest_goals(ns);
    fb.status = ns.solved() ? FeedbackStatus::session_solved : FeedbackStatus::proven;
    fb.detail["proposition"] = serialize(canonical(prop.goal));
    fb.detail["proof_length"] = len;
  } else {
    fb.status = FeedbackStatus::not_proven;
    fb.detail["proposition"] = serialize(canonical(prop.goal));
    bool numerically_true = check_predicate(ns.diagram, prop.goal, opt.saturate.tol_check);
    fb.detail["reason"] = numerically_true ? "not_derived" : "numerically_false";
  }
  fb.known_summary = summary_of(ns);
  return {ns, fb};
}

// ---------------------------------------------------------------------------
// Proof extraction

nlohmann::ordered_json ProofDocument::to_json() const {
  nlohmann::ordered_json j;
  j["problem"] = serialize(problem);
  nlohmann::ordered_json used = nlohmann::ordered_json::array();
  for (const auto& s : aux_used) used.push_back(serialize(s));
  j["aux_used"] = used;
  nlohmann::ordered_json unused = nlohmann::ordered_json::array();
  for (const auto& s : aux_unused) unused.push_back(serialize(s));
  j["aux_unused"] = unused;
  nlohmann::ordered_json gs = nlohmann::ordered_json::array();
  for (const auto& g : goals) gs.push_back(serialize(g));
  j["goals"] = gs;
  j["length"] = length;
  nlohmann::ordered_json steps_json = nlohmann::ordered_json::array();
  for (const ProofStep& st : steps) {
    nlohmann::ordered_json sj;
    sj["id"] = st.id;
    sj["fact"] = serialize(st.fact);
    sj["kind"] = step_kind_name(st.kind);
    if (!st.rule_id.empty()) sj["rule"] = st.rule_id;
    if (!st.antecedents.empty()) sj["from"] = st.antecedents;
    if (st.cert) sj["certificate"] = st.cert->to_json();
    steps_json.push_back(std::move(sj));
  }
  j["steps"] = steps_json;
  return j;
}

ProofDocument extract_proof(const SessionState& s) {
  if (!s.solved()) throw Error(Errc::not_solved, "goals remain unproven");

  // re-derive every goal against the final factbase so node ids are shared
  ProofDag merged;
  for (const Predicate& g : s.problem.goals) {
    auto dag = prove(s.factbase, g);
    if (!dag) throw Error(Errc::not_solved, "goal lost after resaturation: " + serialize(g));
    for (auto& [id, node] : dag->nodes) merged.nodes.emplace(id, std::move(node));
    for (FactId r : dag->goal_roots) merged.goal_roots.push_back(r);
  }
  std::sort(merged.goal_roots.begin(), merged.goal_roots.end());
  merged.goal_roots.erase(std::unique(merged.goal_roots.begin(), merged.goal_roots.end()),
                          merged.goal_roots.end());

  ProofDocument doc;
  doc.problem = s.problem;
  doc.goals = s.problem.goals;
  doc.length = proof_length(merged);

  std::set<std::string> needed_points;
  for (const auto& [id, node] : merged.nodes)
    for (const std::string& p : node.pred.args) needed_points.insert(p);

  // aux statements whose points feed the proof, closed under argument use
  std::vector<bool> used(s.aux.size(), false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = s.aux.size(); i-- > 0;) {
      if (used[i]) continue;
      bool hit = std::any_of(s.aux[i].new_points.begin(), s.aux[i].new_points.end(),
                             [&](const std::string& n) { return needed_points.count(n) > 0; });
      if (!hit) continue;
      used[i] = true;
      changed = true;
      for (const CtorCall& part : s.aux[i].parts)
        for (const std::string& p : part.points) needed_points.insert(p);
    }
  }
  for (std::size_t i = 0; i < s.aux.size(); ++i)
    (used[i] ? doc.aux_used : doc.aux_unused).push_back(s.aux[i]);

  for (const auto& [id, node] : merged.nodes)
    doc.steps.push_back(ProofStep{id, node.pred, node.kind, node.rule_id, node.antecedents,
                                  node.cert});
  std::sort(doc.steps.begin(), doc.steps.end(),
            [](const ProofStep& a, const ProofStep& b) { return a.id < b.id; });
  return doc;
}

SolveResult exhaust_solve(const Problem& p, std::uint64_t seed, const EngineOptions& opt) {
  SessionState s;
  s.problem = p;
  s.seed = seed;
  s.max_turns = opt.max_turns;
  s.diagram = build_diagram(p, seed, opt.build);
  s.factbase = saturate_plan(s.diagram, opt);
  s.goals_remaining = p.goals;
  harvest_goals(s);
  s.turn = 1;
  SolveResult out;
  out.budget_exhausted = s.factbase.budget_exhausted();
  if (!s.solved()) return out;
  out.proof = extract_proof(s);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::ordered_json checkpoint(const SessionState& s) {
  nlohmann::ordered_json j;
  j["problem"] = serialize(s.problem);
  j["seed"] = s.seed;
  j["max_turns"] = s.max_turns;
  j["turn"] = s.turn;
  nlohmann::ordered_json aux = nlohmann::ordered_json::array();
  for (const auto& st : s.aux) aux.push_back(serialize(st));
  j["aux"] = aux;
  nlohmann::ordered_json proven = nlohmann::ordered_json::array();
  for (const auto& [pred, dag] : s.proven) proven.push_back(serialize(pred));
  j["proven"] = proven;
  return j;
}

SessionState resume(const nlohmann::ordered_json& snapshot, const EngineOptions& opt) {
  SessionState s;
  s.problem = parse_problem(snapshot.at("problem").get<std::string>());
  s.seed = snapshot.at("seed").get<std::uint64_t>();
  s.max_turns = snapshot.at("max_turns").get<int>();
  s.diagram = build_diagram(s.problem, s.seed, opt.build);
  for (const auto& line : snapshot.at("aux")) {
    std::vector<std::string> known;
    for (const auto& [name, v] : s.diagram.coords) known.push_back(name);
    auto stmts = parse_stmts(line.get<std::string>(), known);
    for (const ConstructionStmt& st : stmts) {
      s.diagram = add_point(s.diagram, st, opt.build);
      s.aux.push_back(st);
    }
  }
  s.factbase = saturate_plan(s.diagram, opt);
  for (const auto& line : snapshot.at("proven")) {
    Predicate pred = parse_predicate(line.get<std::string>());
    auto dag = prove(s.factbase, pred);
    if (!dag)
      throw Error(Errc::invariant_violation,
                  "checkpointed proposition no longer derivable: " + serialize(pred));
    append_proven(s, pred, std::move(*dag));
  }
  std::set<std::string> proven_keys;
  for (const auto& [pred, dag] : s.proven) proven_keys.insert(canonical_key(pred));
  for (const Predicate& g : s.problem.goals)
    if (!proven_keys.count(canonical_key(g))) s.goals_remaining.push_back(g);
  harvest_goals(s);
  s.turn = snapshot.at("turn").get<int>();
  return s;
}

}  // namespace geo
