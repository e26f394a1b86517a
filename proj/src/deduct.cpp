#include "geo/deduct.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace geo {

const char* step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::premise: return "premise";
    case StepKind::rule: return "rule";
    case StepKind::algebra: return "algebra";
    case StepKind::merge: return "merge";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Symmetry groups

namespace {

using Perm = std::vector<int>;

std::vector<Perm> all_perms(int n) {
  Perm p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[std::size_t(i)] = i;
  std::vector<Perm> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

// The four slots of eqangle/eqratio may be rearranged in the eight ways that
// preserve  s1 - s2 = s3 - s4, and each slot's two points are unordered.
std::vector<Perm> quad_slot_perms() {
  static const int kSlotOrders[8][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0},
                                        {0, 2, 1, 3}, {2, 0, 3, 1}, {1, 3, 0, 2}, {3, 1, 2, 0}};
  std::vector<Perm> out;
  for (const auto& order : kSlotOrders)
    for (int mask = 0; mask < 16; ++mask) {
      Perm p;
      for (int s = 0; s < 4; ++s) {
        int slot = order[s];
        bool flip = (mask >> s) & 1;
        p.push_back(2 * slot + (flip ? 1 : 0));
        p.push_back(2 * slot + (flip ? 0 : 1));
      }
      out.push_back(p);
    }
  return out;
}

std::vector<Perm> pair_slot_perms() {
  static const int kSlotOrders[2][2] = {{0, 1}, {1, 0}};
  std::vector<Perm> out;
  for (const auto& order : kSlotOrders)
    for (int mask = 0; mask < 4; ++mask) {
      Perm p;
      for (int s = 0; s < 2; ++s) {
        int slot = order[s];
        bool flip = (mask >> s) & 1;
        p.push_back(2 * slot + (flip ? 1 : 0));
        p.push_back(2 * slot + (flip ? 0 : 1));
      }
      out.push_back(p);
    }
  return out;
}

std::vector<Perm> tri_pair_perms() {
  std::vector<Perm> out;
  for (const Perm& p : all_perms(3)) {
    Perm a, b;
    for (int i : p) a.push_back(i);
    for (int i : p) a.push_back(3 + i);
    for (int i : p) b.push_back(3 + i);
    for (int i : p) b.push_back(i);
    out.push_back(a);
    out.push_back(b);
  }
  return out;
}

std::vector<Perm> circle_perms() {
  std::vector<Perm> out;
  for (const Perm& p : all_perms(3)) {
    Perm q{0};
    for (int i : p) q.push_back(1 + i);
    out.push_back(q);
  }
  return out;
}

std::vector<Perm> midp_perms() { return {{0, 1, 2}, {0, 2, 1}}; }

const std::vector<Perm>& perms_for(PredKind kind, int n) {
  static const std::vector<Perm> quad = quad_slot_perms();
  static const std::vector<Perm> pair = pair_slot_perms();
  static const std::vector<Perm> tript = tri_pair_perms();
  static const std::vector<Perm> circ = circle_perms();
  static const std::vector<Perm> midp = midp_perms();
  static const std::vector<Perm> two = all_perms(2);
  static std::map<int, std::vector<Perm>> full;  // by arity
  switch (kind) {
    case PredKind::eqangle:
    case PredKind::eqratio:
      return quad;
    case PredKind::para:
    case PredKind::perp:
    case PredKind::cong:
      return pair;
    case PredKind::simtri:
    case PredKind::contri:
      return tript;
    case PredKind::circle:
      return circ;
    case PredKind::midp:
      return midp;
    case PredKind::idc:
      return two;
    case PredKind::coll:
    case PredKind::cyclic: {
      auto it = full.find(n);
      if (it == full.end()) it = full.emplace(n, all_perms(n)).first;
      return it->second;
    }
  }
  return pair;
}

bool predicate_well_formed(const Predicate& p) noexcept {
  try {
    validate_predicate(p);
    return true;
  } catch (...) {
    return false;
  }
}

// Instances carrying no information (cong a b a b, the zero angle equal to
// itself, a triangle similar to itself under the identity). They are valid
// and true, so they may serve as matched antecedents, but rules and merges
// never store them as conclusions.
bool predicate_tautological(const Predicate& p) {
  auto seg = [&](int i) {
    const std::string& a = p.args[std::size_t(2 * i)];
    const std::string& b = p.args[std::size_t(2 * i + 1)];
    return a < b ? a + ":" + b : b + ":" + a;
  };
  switch (p.kind) {
    case PredKind::cong:
    case PredKind::para:
      return seg(0) == seg(1);
    case PredKind::eqangle:
    case PredKind::eqratio: {
      std::string s1 = seg(0), s2 = seg(1), s3 = seg(2), s4 = seg(3);
      return (s1 == s3 && s2 == s4) || (s1 == s2 && s3 == s4);
    }
    case PredKind::simtri:
    case PredKind::contri:
      return p.args[0] == p.args[3] && p.args[1] == p.args[4] && p.args[2] == p.args[5];
    default:
      return false;
  }
}

}  // namespace

std::vector<std::vector<std::string>> symmetry_orbit(const Predicate& p) {
  const auto& perms = perms_for(p.kind, int(p.args.size()));
  std::vector<std::vector<std::string>> out;
  out.reserve(perms.size());
  for (const Perm& perm : perms) {
    std::vector<std::string> args;
    args.reserve(p.args.size());
    for (int i : perm) args.push_back(p.args[std::size_t(i)]);
    out.push_back(std::move(args));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Predicate canonical(const Predicate& p) {
  Predicate q = p;
  auto orbit = symmetry_orbit(p);
  q.args = orbit.front();
  return q;
}

std::string canonical_key(const Predicate& p) { return serialize(canonical(p)); }

// ---------------------------------------------------------------------------
// Rule parsing

std::vector<Rule> parse_rules(std::string_view text) {
  std::vector<Rule> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (auto h = sv.find('#'); h != std::string_view::npos) sv = sv.substr(0, h);
    while (!sv.empty() && std::isspace(static_cast<unsigned char>(sv.back()))) sv.remove_suffix(1);
    while (!sv.empty() && std::isspace(static_cast<unsigned char>(sv.front()))) sv.remove_prefix(1);
    if (sv.empty()) continue;

    auto arrow = sv.find("=>");
    if (arrow == std::string_view::npos)
      throw Error(Errc::config_error, "rule line " + std::to_string(lineno) + ": missing '=>'");
    std::string lhs(sv.substr(0, arrow));
    std::string rhs(sv.substr(arrow + 2));
    std::string guards;
    if (auto bang = rhs.find('!'); bang != std::string::npos) {
      guards = rhs.substr(bang + 1);
      rhs = rhs.substr(0, bang);
    }

    Rule rule;
    rule.id = "r" + std::to_string(rules.size() + 1);
    auto split = [](const std::string& s) {
      std::vector<std::string> parts;
      std::size_t from = 0;
      while (from <= s.size()) {
        std::size_t semi = s.find(';', from);
        if (semi == std::string::npos) semi = s.size();
        std::string piece = s.substr(from, semi - from);
        if (piece.find_first_not_of(" \t") != std::string::npos) parts.push_back(piece);
        from = semi + 1;
      }
      return parts;
    };
    std::set<std::string> vars;
    for (const std::string& piece : split(lhs)) {
      Predicate a = parse_predicate(piece);
      for (const std::string& v : a.args) vars.insert(v);
      rule.antecedents.push_back(std::move(a));
    }
    if (rule.antecedents.empty())
      throw Error(Errc::config_error, "rule line " + std::to_string(lineno) + ": no antecedents");

    // consequent: a predicate or a ratio_product relation schema
    {
      std::istringstream hs(rhs);
      std::string head;
      hs >> head;
      if (head == "ratio_product") {
        rule.relation_schema = true;
        std::string tok;
        while (hs >> tok) rule.schema_args.push_back(tok);
        if (rule.schema_args.size() != 12)
          throw Error(Errc::config_error,
                      "rule line " + std::to_string(lineno) + ": ratio_product needs 12 points");
        for (const std::string& v : rule.schema_args)
          if (!vars.count(v))
            throw Error(Errc::config_error, "rule line " + std::to_string(lineno) +
                                                ": unbound variable '" + v + "'");
      } else {
        rule.consequent = parse_predicate(rhs);
        for (const std::string& v : rule.consequent.args)
          if (!vars.count(v))
            throw Error(Errc::config_error, "rule line " + std::to_string(lineno) +
                                                ": unbound variable '" + v + "'");
      }
    }
    for (const std::string& piece : split(guards)) {
      Predicate g = parse_predicate(piece);
      for (const std::string& v : g.args)
        if (!vars.count(v))
          throw Error(Errc::config_error,
                      "rule line " + std::to_string(lineno) + ": unbound guard variable '" + v + "'");
      rule.guards.push_back(std::move(g));
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

const std::vector<Rule>& default_rules() {
  static const std::vector<Rule> rules = parse_rules(embedded_rules_text());
  return rules;
}

// ---------------------------------------------------------------------------
// Collinearity partitions

namespace {

std::vector<std::vector<std::string>> merge_groups(std::vector<std::set<std::string>> groups) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < groups.size() && !changed; ++i)
      for (std::size_t j = i + 1; j < groups.size() && !changed; ++j) {
        int shared = 0;
        for (const std::string& n : groups[j])
          if (groups[i].count(n)) ++shared;
        if (shared >= 2) {
          groups[i].insert(groups[j].begin(), groups[j].end());
          groups.erase(groups.begin() + long(j));
          changed = true;
        }
      }
  }
  std::vector<std::vector<std::string>> out;
  for (auto& g : groups) out.emplace_back(g.begin(), g.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::string line_partition_key(const Predicate& p, const SymbolTable& syms) {
  const auto& a = p.args;
  if (p.kind == PredKind::para || p.kind == PredKind::perp) {
    std::string v1 = syms.dir_var(a[0], a[1]);
    std::string v2 = syms.dir_var(a[2], a[3]);
    if (v1 > v2) std::swap(v1, v2);
    return std::string(pred_name(p.kind)) + "|" + v1 + "|" + v2;
  }
  if (p.kind == PredKind::eqangle) {
    std::string v[4];
    for (int s = 0; s < 4; ++s) v[s] = syms.dir_var(a[std::size_t(2 * s)], a[std::size_t(2 * s + 1)]);
    static const int orders[8][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0},
                                     {0, 2, 1, 3}, {2, 0, 3, 1}, {1, 3, 0, 2}, {3, 1, 2, 0}};
    std::string best;
    for (const auto& ord : orders) {
      std::string k = "eqangle";
      for (int s = 0; s < 4; ++s) k += "|" + v[ord[s]];
      if (best.empty() || k < best) best = k;
    }
    return best;
  }
  return {};
}

}  // namespace

// Assembles FactBase instances from the saturation internals.
struct FactBaseBuilder {
  static FactBase build(std::vector<Fact> facts, std::map<std::string, FactId> index,
                        std::map<std::string, FactId> line_index,
                        std::map<std::string, std::vector<FactId>> rel_antecedents,
                        std::vector<std::pair<std::string, LinearRelation>> relations,
                        SymbolTable syms, bool exhausted, long firings) {
    FactBase fb;
    fb.facts_ = std::move(facts);
    fb.index_ = std::move(index);
    fb.line_index_ = std::move(line_index);
    fb.rel_antecedents_ = std::move(rel_antecedents);
    fb.relations_ = std::move(relations);
    fb.syms_ = std::move(syms);
    fb.budget_exhausted_ = exhausted;
    fb.firings_ = firings;
    return fb;
  }
};

namespace {

// ---------------------------------------------------------------------------
// Saturator

struct SchemaInstance {
  std::vector<std::string> args;  // 12 points, 6 alternating-sign segments
  std::vector<FactId> antecedents;
};

class Saturator {
 public:
  Saturator(const std::vector<Predicate>& premises, const Diagram& d,
            const SaturateOptions& opt, const std::vector<Rule>& rules)
      : d_(d), opt_(opt), rules_(rules) {
    seed(premises);
  }

  FactBase run() {
    for (int pass = 0; pass < 64; ++pass) {
      std::size_t before = facts_.size();
      merge_closure();
      line_closure();
      algebra_pass();
      rebuild_line_index();
      if (!budget_exhausted_) rule_pass();
      if (facts_.size() == before || budget_exhausted_) break;
    }
    return FactBaseBuilder::build(facts_, index_, line_index_, rel_antecedents_, relations_,
                                  make_symbols(), budget_exhausted_, firings_);
  }

 private:
  void seed(const std::vector<Predicate>& premises) {
    for (const auto& [a, b] : d_.merged) {
      Predicate p{PredKind::idc, {a, b}};
      insert(canonical(p), PremiseSrc{});
    }
    for (const Predicate& p : premises) {
      validate_predicate(p);
      Predicate c = canonical(p);
      if (index_.count(serialize(c))) continue;
      if (!check_predicate(d_, c, opt_.tol_check)) {
        if (involves_merged(c)) continue;  // degenerate under double points
        throw Error(Errc::invariant_violation,
                    "premise numerically false: " + serialize(c));
      }
      insert(std::move(c), PremiseSrc{});
    }
  }

  bool involves_merged(const Predicate& p) const {
    double D = d_.diameter();
    for (std::size_t i = 0; i < p.args.size(); ++i)
      for (std::size_t j = i + 1; j < p.args.size(); ++j)
        if (dist(d_.at(p.args[i]), d_.at(p.args[j])) < 1e-6 * D) return true;
    return false;
  }

  std::optional<FactId> insert(Predicate p, Source src) {
    // wide coll/cyclic facts are normalized to minimal arity
    if (p.kind == PredKind::coll && p.args.size() > 3)
      return insert_subsets(p, std::move(src), 3);
    if (p.kind == PredKind::cyclic && p.args.size() > 4)
      return insert_subsets(p, std::move(src), 4);
    p = canonical(p);
    std::string key = serialize(p);
    auto it = index_.find(key);
    if (it != index_.end()) return std::nullopt;
    FactId id = FactId(facts_.size());
    facts_.push_back(Fact{p, std::move(src)});
    index_.emplace(std::move(key), id);
    by_kind_[p.kind].push_back(id);
    return id;
  }

  std::optional<FactId> insert_subsets(const Predicate& p, Source src, std::size_t k) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    std::optional<FactId> first;
    while (true) {
      Predicate sub{p.kind, {}};
      for (std::size_t i : idx) sub.args.push_back(p.args[i]);
      auto id = insert(sub, src);
      if (!first) first = id;
      // next combination
      std::size_t i = k;
      while (i > 0) {
        --i;
        if (idx[i] != i + p.args.size() - k) {
          ++idx[i];
          for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
          break;
        }
        if (i == 0) return first;
      }
      if (idx[0] > p.args.size() - k) return first;
    }
  }

  // --- double-point bookkeeping --------------------------------------------

  std::map<std::string, std::vector<std::string>> idc_classes(
      std::map<std::string, FactId>* pair_fact = nullptr) const {
    std::map<std::string, std::string> parent;
    std::function<std::string(const std::string&)> find = [&](const std::string& x) {
      auto it = parent.find(x);
      if (it == parent.end() || it->second == x) return x;
      std::string r = find(it->second);
      parent[x] = r;
      return r;
    };
    auto it = by_kind_.find(PredKind::idc);
    if (it != by_kind_.end())
      for (FactId id : it->second) {
        const Predicate& p = facts_[std::size_t(id)].pred;
        std::string ra = find(p.args[0]), rb = find(p.args[1]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        if (pair_fact) {
          std::string key = p.args[0] < p.args[1] ? p.args[0] + ":" + p.args[1]
                                                  : p.args[1] + ":" + p.args[0];
          pair_fact->emplace(key, id);
        }
      }
    std::map<std::string, std::vector<std::string>> classes;
    if (it != by_kind_.end())
      for (FactId id : it->second)
        for (const std::string& n : facts_[std::size_t(id)].pred.args)
          classes[find(n)].push_back(n);
    for (auto& [rep, members] : classes) {
      members.push_back(rep);
      std::sort(members.begin(), members.end());
      members.erase(std::unique(members.begin(), members.end()), members.end());
    }
    return classes;
  }

  FactId idc_fact_between(const std::string& x, const std::string& y) const {
    Predicate p{PredKind::idc, {x, y}};
    auto it = index_.find(canonical_key(p));
    if (it != index_.end()) return it->second;
    // linked through a chain; any idc fact naming x works for attribution
    for (FactId id : by_kind_.at(PredKind::idc)) {
      const auto& args = facts_[std::size_t(id)].pred.args;
      if (args[0] == x || args[1] == x || args[0] == y || args[1] == y) return id;
    }
    return 0;
  }

  void merge_closure() {
    auto classes = idc_classes();
    if (classes.empty()) return;
    std::map<std::string, std::vector<std::string>> member_class;
    for (const auto& [rep, members] : classes)
      for (const std::string& m : members) member_class[m] = members;

    std::size_t n = facts_.size();
    for (std::size_t fid = 0; fid < n; ++fid) {
      Predicate p = facts_[fid].pred;
      if (p.kind == PredKind::idc) continue;
      for (std::size_t ai = 0; ai < p.args.size(); ++ai) {
        auto mc = member_class.find(p.args[ai]);
        if (mc == member_class.end()) continue;
        const std::string x = p.args[ai];
        for (const std::string& y : mc->second) {
          if (y == x) continue;
          Predicate q = p;
          for (std::string& arg : q.args)
            if (arg == x) arg = y;
          if (!predicate_well_formed(q) || predicate_tautological(q)) continue;
          if (index_.count(canonical_key(q))) continue;
          if (!check_predicate(d_, q, opt_.tol_check)) continue;
          insert(q, MergeSrc{{idc_fact_between(x, y), FactId(fid)}});
        }
      }
    }
  }

  // Materialize every triple inside a collinearity group so that coll facts
  // about merged lines are directly addressable.
  void line_closure() {
    std::vector<std::set<std::string>> raw;
    auto it = by_kind_.find(PredKind::coll);
    if (it == by_kind_.end()) return;
    std::map<std::string, std::vector<FactId>> fact_of_group;
    for (FactId id : it->second)
      raw.push_back({facts_[std::size_t(id)].pred.args.begin(),
                     facts_[std::size_t(id)].pred.args.end()});
    auto groups = merge_groups(raw);
    for (const auto& g : groups) {
      if (g.size() < 4) continue;
      std::vector<FactId> sources;
      for (FactId id : it->second) {
        const auto& args = facts_[std::size_t(id)].pred.args;
        if (std::all_of(args.begin(), args.end(),
                        [&](const std::string& n) {
                          return std::find(g.begin(), g.end(), n) != g.end();
                        }))
          sources.push_back(id);
      }
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j)
          for (std::size_t k = j + 1; k < g.size(); ++k) {
            Predicate q{PredKind::coll, {g[i], g[j], g[k]}};
            if (index_.count(canonical_key(q))) continue;
            if (!check_predicate(d_, q, opt_.tol_check)) continue;
            insert(q, MergeSrc{sources});
          }
    }
  }

  // --- rule matching ---------------------------------------------------------

  struct Binding {
    std::map<std::string, std::string> var2pt;
  };

  // Variables may bind the same point (shared-vertex configurations need it);
  // instantiations that collapse a slot are rejected by well-formedness.
  bool unify(const Predicate& pattern, const std::vector<std::string>& fact_args,
             Binding& b, std::vector<std::string>& trail) const {
    for (std::size_t i = 0; i < pattern.args.size(); ++i) {
      const std::string& var = pattern.args[i];
      const std::string& pt = fact_args[i];
      auto it = b.var2pt.find(var);
      if (it != b.var2pt.end()) {
        if (it->second != pt) return false;
      } else {
        b.var2pt.emplace(var, pt);
        trail.push_back(var);
      }
    }
    return true;
  }

  void undo(Binding& b, const std::vector<std::string>& trail) const {
    for (const std::string& var : trail) b.var2pt.erase(var);
  }

  bool fully_bound(const Predicate& pattern, const Binding& b) const {
    return std::all_of(pattern.args.begin(), pattern.args.end(),
                       [&](const std::string& v) { return b.var2pt.count(v) > 0; });
  }

  Predicate instantiate(const Predicate& pattern, const Binding& b) const {
    Predicate out{pattern.kind, {}};
    out.args.reserve(pattern.args.size());
    for (const std::string& v : pattern.args) out.args.push_back(b.var2pt.at(v));
    return out;
  }

  void rule_pass() {
    std::size_t limit = facts_.size();
    for (const Rule& rule : rules_) {
      if (budget_exhausted_) return;
      Binding b;
      match_from(rule, 0, b, {}, limit);
    }
  }

  void match_from(const Rule& rule, std::size_t ai, Binding& b, std::vector<FactId> ids,
                  std::size_t limit) {
    if (budget_exhausted_) return;
    if (ai == rule.antecedents.size()) {
      fire(rule, b, ids);
      return;
    }
    const Predicate& pattern = rule.antecedents[ai];
    if (fully_bound(pattern, b)) {
      Predicate inst = instantiate(pattern, b);
      if (!predicate_well_formed(inst)) return;
      auto found = lookup_or_derive(inst);
      if (!found) return;
      ids.push_back(*found);
      match_from(rule, ai + 1, b, std::move(ids), limit);
      return;
    }
    // one unbound variable left: enumerate points instead of iterating facts,
    // so instances that exist only modulo the line partition (a right angle
    // anchored at its vertex, say) are still reachable
    {
      std::vector<std::string> unbound;
      for (const std::string& v : pattern.args)
        if (!b.var2pt.count(v) &&
            std::find(unbound.begin(), unbound.end(), v) == unbound.end())
          unbound.push_back(v);
      if (unbound.size() == 1) {
        const std::string var = unbound[0];
        for (const auto& [pt, xy] : d_.coords) {
          b.var2pt[var] = pt;
          Predicate inst = instantiate(pattern, b);
          if (predicate_well_formed(inst)) {
            if (auto found = lookup_or_derive(inst)) {
              auto ids2 = ids;
              ids2.push_back(*found);
              match_from(rule, ai + 1, b, std::move(ids2), limit);
            }
          }
          b.var2pt.erase(var);
          if (budget_exhausted_) return;
        }
        return;
      }
    }
    auto kind_it = by_kind_.find(pattern.kind);
    if (kind_it == by_kind_.end()) return;
    for (std::size_t ki = 0; ki < kind_it->second.size(); ++ki) {
      FactId id = kind_it->second[ki];
      if (std::size_t(id) >= limit) break;
      const Predicate& fact = facts_[std::size_t(id)].pred;
      if (fact.args.size() != pattern.args.size()) continue;
      for (const auto& arrangement : symmetry_orbit(fact)) {
        std::vector<std::string> trail;
        if (unify(pattern, arrangement, b, trail)) {
          auto ids2 = ids;
          ids2.push_back(id);
          match_from(rule, ai + 1, b, std::move(ids2), limit);
        }
        undo(b, trail);
        if (budget_exhausted_) return;
      }
    }
  }

  // Ground antecedents fall back to the current relation system: facts that
  // are consequences of the collinearity partition (same-line angles and the
  // like) are derivable without ever being enumerated as candidates.
  std::optional<FactId> lookup_or_derive(const Predicate& ground) {
    auto it = index_.find(canonical_key(ground));
    if (it != index_.end()) return it->second;
    if (ground.kind == PredKind::para || ground.kind == PredKind::perp ||
        ground.kind == PredKind::eqangle) {
      std::string key = line_partition_key(ground, syms_cur_);
      auto lit = line_index_.find(key);
      if (lit != line_index_.end()) return lit->second;
    }
    if (!sys_cur_) return std::nullopt;
    switch (ground.kind) {
      case PredKind::para:
      case PredKind::perp:
      case PredKind::eqangle:
      case PredKind::cong:
      case PredKind::eqratio:
        break;
      default:
        return std::nullopt;
    }
    if (!check_predicate(d_, ground, opt_.tol_check)) return std::nullopt;
    auto cert = sys_cur_->derive(ground, syms_cur_);
    if (!cert) return std::nullopt;
    std::vector<FactId> ante;
    for (const auto& [rid, m] : cert->combination)
      for (FactId f : rel_antecedents_.at(rid)) ante.push_back(f);
    std::sort(ante.begin(), ante.end());
    ante.erase(std::unique(ante.begin(), ante.end()), ante.end());
    return insert(ground, AlgebraSrc{std::move(*cert), std::move(ante)});
  }

  void fire(const Rule& rule, const Binding& b, std::vector<FactId>& ids) {
    if (++firings_ > opt_.budget) {
      budget_exhausted_ = true;
      return;
    }
    for (const Predicate& guard : rule.guards) {
      Predicate g = instantiate(guard, b);
      // a guard collapsed by repeated points (e.g. idc x x) holds vacuously
      if (!predicate_well_formed(g)) return;
      if (check_predicate(d_, g, opt_.tol_check)) return;
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (rule.relation_schema) {
      std::vector<std::string> args;
      args.reserve(rule.schema_args.size());
      for (const std::string& v : rule.schema_args) args.push_back(b.var2pt.at(v));
      // numeric guard: the length product must be 1
      double D = d_.diameter();
      double lhs = 1.0, rhs = 1.0;
      for (int s = 0; s < 6; ++s) {
        double len = dist(d_.at(args[std::size_t(2 * s)]), d_.at(args[std::size_t(2 * s + 1)])) / D;
        if (s % 2 == 0)
          lhs *= len;
        else
          rhs *= len;
      }
      if (std::abs(lhs - rhs) > opt_.tol_check * 10) return;
      std::string key = "rp";
      for (const std::string& a : args) key += ":" + a;
      if (schema_seen_.count(key)) return;
      schema_seen_.insert(key);
      schemas_.push_back(SchemaInstance{std::move(args), ids});
      return;
    }
    Predicate q = instantiate(rule.consequent, b);
    if (!predicate_well_formed(q) || predicate_tautological(q)) return;
    if (index_.count(canonical_key(q))) return;
    if (!check_predicate(d_, q, opt_.tol_check)) return;
    insert(std::move(q), RuleSrc{rule.id, ids});
  }

  // --- algebra ----------------------------------------------------------------

  SymbolTable make_symbols() const {
    std::vector<std::set<std::string>> raw;
    auto it = by_kind_.find(PredKind::coll);
    if (it != by_kind_.end())
      for (FactId id : it->second)
        raw.push_back({facts_[std::size_t(id)].pred.args.begin(),
                       facts_[std::size_t(id)].pred.args.end()});
    auto mid = by_kind_.find(PredKind::midp);
    if (mid != by_kind_.end())
      for (FactId id : mid->second)
        raw.push_back({facts_[std::size_t(id)].pred.args.begin(),
                       facts_[std::size_t(id)].pred.args.end()});
    std::vector<std::pair<std::string, std::string>> coincident;
    auto idc = by_kind_.find(PredKind::idc);
    if (idc != by_kind_.end())
      for (FactId id : idc->second)
        coincident.emplace_back(facts_[std::size_t(id)].pred.args[0],
                                facts_[std::size_t(id)].pred.args[1]);
    return SymbolTable(merge_groups(std::move(raw)), std::move(coincident));
  }

  static bool linear_kind(PredKind k) {
    switch (k) {
      case PredKind::para:
      case PredKind::perp:
      case PredKind::eqangle:
      case PredKind::cong:
      case PredKind::eqratio:
      case PredKind::midp:
      case PredKind::coll:
        return true;
      default:
        return false;
    }
  }

  void algebra_pass() {
    SymbolTable syms = make_symbols();
    relations_.clear();
    rel_antecedents_.clear();
    for (std::size_t fid = 0; fid < facts_.size(); ++fid) {
      const Predicate& p = facts_[fid].pred;
      if (!linear_kind(p.kind)) continue;
      auto encs = encode(p, syms);
      for (std::size_t k = 0; k < encs.size(); ++k) {
        std::string id = "f" + std::to_string(fid) + "#" + std::to_string(k);
        rel_antecedents_[id] = {FactId(fid)};
        relations_.emplace_back(std::move(id), std::move(encs[k]));
      }
    }
    for (std::size_t si = 0; si < schemas_.size(); ++si) {
      const SchemaInstance& inst = schemas_[si];
      LinearRelation rel;
      rel.space = VarSpace::logratio;
      for (int s = 0; s < 6; ++s) {
        std::string var = syms.len_var(inst.args[std::size_t(2 * s)], inst.args[std::size_t(2 * s + 1)]);
        if (var.empty()) continue;
        Rat& slot = rel.terms[var];
        slot += (s % 2 == 0) ? 1 : -1;
        if (slot == 0) rel.terms.erase(var);
      }
      if (rel.trivial()) continue;
      std::string id = "m" + std::to_string(si);
      rel_antecedents_[id] = inst.antecedents;
      relations_.emplace_back(std::move(id), std::move(rel));
    }

    syms_cur_ = syms;
    sys_cur_.emplace(relations_, /*tolerate_inconsistent=*/true);
    for (const Predicate& q : enumerate_candidates(syms)) {
      if (auto cert = sys_cur_->derive(q, syms)) {
        std::vector<FactId> ante;
        for (const auto& [rid, m] : cert->combination)
          for (FactId f : rel_antecedents_.at(rid)) ante.push_back(f);
        std::sort(ante.begin(), ante.end());
        ante.erase(std::unique(ante.begin(), ante.end()), ante.end());
        insert(q, AlgebraSrc{std::move(*cert), std::move(ante)});
      }
    }
  }

  std::vector<Predicate> enumerate_candidates(const SymbolTable& syms) {
    double D = d_.diameter();
    double tol = opt_.tol_check;
    constexpr double kPi = 3.14159265358979323846;

    std::vector<std::string> reps;
    for (const auto& [name, v] : d_.coords)
      if (syms.rep(name) == name) reps.push_back(name);

    struct Line {
      std::string var, a, b;
      double theta;
    };
    std::map<std::string, Line> line_map;
    for (std::size_t i = 0; i < reps.size(); ++i)
      for (std::size_t j = i + 1; j < reps.size(); ++j) {
        std::string var = syms.dir_var(reps[i], reps[j]);
        if (var.empty() || line_map.count(var)) continue;
        Vec2 u = d_.at(reps[j]) - d_.at(reps[i]);
        double t = std::atan2(u.y, u.x);
        while (t < 0) t += kPi;
        while (t >= kPi) t -= kPi;
        line_map.emplace(var, Line{var, reps[i], reps[j], t});
      }
    std::vector<Line> lines;
    for (auto& [var, l] : line_map) lines.push_back(l);
    std::map<std::string, std::vector<std::string>> line_points;
    for (const std::string& p : reps)
      for (const std::string& q : reps) {
        if (p >= q) continue;
        std::string var = syms.dir_var(p, q);
        if (var.empty()) continue;
        auto& pts = line_points[var];
        if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
        if (std::find(pts.begin(), pts.end(), q) == pts.end()) pts.push_back(q);
      }

    std::vector<Predicate> out;
    auto maybe = [&](Predicate q) {
      if (index_.count(canonical_key(q))) return;
      std::string lk = line_partition_key(q, syms);
      if (!lk.empty() && line_index_.count(lk)) return;
      out.push_back(std::move(q));
    };

    auto angdiff = [&](double x, double y) {
      double dv = std::fmod(std::abs(x - y), kPi);
      return std::min(dv, kPi - dv);
    };

    // para / perp over line pairs; right angles also anchored at the common
    // point so vertex-shaped rule antecedents can iterate over them
    for (std::size_t i = 0; i < lines.size(); ++i)
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        double dv = angdiff(lines[i].theta, lines[j].theta);
        if (dv < tol) {
          maybe({PredKind::para, {lines[i].a, lines[i].b, lines[j].a, lines[j].b}});
        } else if (std::abs(dv - kPi / 2) < tol) {
          maybe({PredKind::perp, {lines[i].a, lines[i].b, lines[j].a, lines[j].b}});
          const auto& p1 = line_points[lines[i].var];
          const auto& p2 = line_points[lines[j].var];
          for (const std::string& shared : p1) {
            if (std::find(p2.begin(), p2.end(), shared) == p2.end()) continue;
            for (const std::string& x : p1)
              for (const std::string& y : p2) {
                if (x == shared || y == shared) continue;
                maybe({PredKind::perp, {x, shared, y, shared}});
              }
          }
        }
      }

    // eqangle: directed differences between line pairs, bucketed
    {
      struct Entry {
        double delta;
        std::size_t i, j;
      };
      std::vector<Entry> entries;
      for (std::size_t i = 0; i < lines.size(); ++i)
        for (std::size_t j = 0; j < lines.size(); ++j) {
          if (i == j) continue;
          double dv = lines[j].theta - lines[i].theta;
          while (dv < 0) dv += kPi;
          while (dv >= kPi) dv -= kPi;
          if (dv < tol || kPi - dv < tol) continue;  // parallel: covered by para
          if (i < j) entries.push_back({dv, i, j});
        }
      std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        if (x.delta != y.delta) return x.delta < y.delta;
        if (x.i != y.i) return x.i < y.i;
        return x.j < y.j;
      });
      std::size_t lo = 0;
      while (lo < entries.size()) {
        std::size_t hi = lo + 1;
        while (hi < entries.size() && entries[hi].delta - entries[lo].delta < tol) ++hi;
        std::size_t cap = std::min<std::size_t>(hi, lo + std::size_t(opt_.max_candidates_per_bucket));
        if (cap < hi) budget_exhausted_ = true;
        for (std::size_t x = lo; x < cap; ++x)
          for (std::size_t y = x + 1; y < cap; ++y) {
            const Line& l1 = lines[entries[x].i];
            const Line& l2 = lines[entries[x].j];
            const Line& l3 = lines[entries[y].i];
            const Line& l4 = lines[entries[y].j];
            if (entries[x].i == entries[y].i || entries[x].j == entries[y].j) continue;
            maybe({PredKind::eqangle, {l1.a, l1.b, l2.a, l2.b, l3.a, l3.b, l4.a, l4.b}});
          }
        lo = hi;
      }
    }

    // segments: cong and eqratio
    struct Seg {
      std::string a, b;
      double len;
    };
    std::vector<Seg> segs;
    for (std::size_t i = 0; i < reps.size(); ++i)
      for (std::size_t j = i + 1; j < reps.size(); ++j) {
        double l = dist(d_.at(reps[i]), d_.at(reps[j]));
        if (l < 1e-12 * D) continue;
        segs.push_back({reps[i], reps[j], l});
      }
    {
      std::vector<std::size_t> order(segs.size());
      for (std::size_t i = 0; i < segs.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](std::size_t x, std::size_t y) { return segs[x].len < segs[y].len; });
      std::size_t lo = 0;
      while (lo < order.size()) {
        std::size_t hi = lo + 1;
        while (hi < order.size() &&
               (segs[order[hi]].len - segs[order[lo]].len) / D < tol)
          ++hi;
        std::size_t cap = std::min<std::size_t>(hi, lo + std::size_t(opt_.max_candidates_per_bucket));
        if (cap < hi) budget_exhausted_ = true;
        for (std::size_t x = lo; x < cap; ++x)
          for (std::size_t y = x + 1; y < cap; ++y) {
            const Seg& s1 = segs[order[x]];
            const Seg& s2 = segs[order[y]];
            maybe({PredKind::cong, {s1.a, s1.b, s2.a, s2.b}});
          }
        lo = hi;
      }
    }
    {
      struct RatioEntry {
        double ratio;
        std::size_t i, j;  // len_i <= len_j
      };
      std::vector<RatioEntry> entries;
      for (std::size_t i = 0; i < segs.size(); ++i)
        for (std::size_t j = 0; j < segs.size(); ++j) {
          if (i == j) continue;
          if (segs[i].len > segs[j].len) continue;
          double r = segs[i].len / segs[j].len;
          if (r > 1 - tol) continue;  // ratio 1 is cong territory
          entries.push_back({r, i, j});
        }
      std::sort(entries.begin(), entries.end(), [](const RatioEntry& x, const RatioEntry& y) {
        if (x.ratio != y.ratio) return x.ratio < y.ratio;
        if (x.i != y.i) return x.i < y.i;
        return x.j < y.j;
      });
      std::size_t lo = 0;
      while (lo < entries.size()) {
        std::size_t hi = lo + 1;
        while (hi < entries.size() && entries[hi].ratio - entries[lo].ratio < tol) ++hi;
        std::size_t cap = std::min<std::size_t>(hi, lo + std::size_t(opt_.max_candidates_per_bucket));
        if (cap < hi) budget_exhausted_ = true;
        for (std::size_t x = lo; x < cap; ++x)
          for (std::size_t y = x + 1; y < cap; ++y) {
            const RatioEntry& e1 = entries[x];
            const RatioEntry& e2 = entries[y];
            if (e1.i == e2.i || e1.j == e2.j) continue;  // shared segment: cong covers
            maybe({PredKind::eqratio,
                   {segs[e1.i].a, segs[e1.i].b, segs[e1.j].a, segs[e1.j].b, segs[e2.i].a,
                    segs[e2.i].b, segs[e2.j].a, segs[e2.j].b}});
          }
        lo = hi;
      }
    }
    return out;
  }

  void rebuild_line_index() {
    SymbolTable syms = make_symbols();
    line_index_.clear();
    for (std::size_t fid = 0; fid < facts_.size(); ++fid) {
      const Predicate& p = facts_[fid].pred;
      if (p.kind != PredKind::para && p.kind != PredKind::perp && p.kind != PredKind::eqangle)
        continue;
      std::string key = line_partition_key(p, syms);
      if (key.empty()) continue;
      if (!line_index_.count(key)) line_index_.emplace(std::move(key), FactId(fid));
    }
  }

  const Diagram& d_;
  SaturateOptions opt_;
  const std::vector<Rule>& rules_;
  std::vector<Fact> facts_;
  std::map<std::string, FactId> index_;
  std::map<std::string, FactId> line_index_;
  std::map<PredKind, std::vector<FactId>> by_kind_;
  std::vector<SchemaInstance> schemas_;
  std::set<std::string> schema_seen_;
  std::vector<std::pair<std::string, LinearRelation>> relations_;
  std::map<std::string, std::vector<FactId>> rel_antecedents_;
  SymbolTable syms_cur_;
  std::optional<LinearSystem> sys_cur_;
  bool budget_exhausted_ = false;
  long firings_ = 0;
};

}  // namespace

FactBase saturate(const std::vector<Predicate>& premises, const Diagram& d,
                  const SaturateOptions& opt, const std::vector<Rule>& rules) {
  Saturator s(premises, d, opt, rules);
  return s.run();
}

// ---------------------------------------------------------------------------
// FactBase queries and proofs

std::optional<FactId> FactBase::find(const Predicate& p) const {
  auto it = index_.find(canonical_key(p));
  if (it != index_.end()) return it->second;
  if (p.kind == PredKind::para || p.kind == PredKind::perp || p.kind == PredKind::eqangle) {
    std::string key = line_partition_key(p, syms_);
    auto lit = line_index_.find(key);
    if (lit != line_index_.end()) return lit->second;
  }
  return std::nullopt;
}

std::optional<Certificate> FactBase::algebra_derive(const Predicate& p) const {
  switch (p.kind) {
    case PredKind::para:
    case PredKind::perp:
    case PredKind::eqangle:
    case PredKind::cong:
    case PredKind::eqratio:
    case PredKind::midp:
    case PredKind::coll:
      break;
    default:
      return std::nullopt;
  }
  LinearSystem sys(relations_, /*tolerate_inconsistent=*/true);
  return sys.derive(p, syms_);
}

std::vector<FactId> FactBase::relation_antecedents(const std::string& rel_id) const {
  auto it = rel_antecedents_.find(rel_id);
  if (it == rel_antecedents_.end()) return {};
  return it->second;
}

std::vector<std::pair<std::string, std::string>> FactBase::merged_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Fact& f : facts_)
    if (f.pred.kind == PredKind::idc) out.emplace_back(f.pred.args[0], f.pred.args[1]);
  return out;
}

namespace {

ProofNode node_of(const Fact& f) {
  ProofNode n;
  n.pred = f.pred;
  if (std::holds_alternative<PremiseSrc>(f.source)) {
    n.kind = StepKind::premise;
  } else if (const auto* r = std::get_if<RuleSrc>(&f.source)) {
    n.kind = StepKind::rule;
    n.rule_id = r->rule_id;
    n.antecedents = r->antecedents;
  } else if (const auto* a = std::get_if<AlgebraSrc>(&f.source)) {
    n.kind = StepKind::algebra;
    n.antecedents = a->antecedents;
    n.cert = a->cert;
  } else if (const auto* m = std::get_if<MergeSrc>(&f.source)) {
    n.kind = StepKind::merge;
    n.antecedents = m->antecedents;
  }
  return n;
}

void traceback(const FactBase& fb, ProofDag& dag, const std::vector<FactId>& roots) {
  std::vector<FactId> stack = roots;
  while (!stack.empty()) {
    FactId id = stack.back();
    stack.pop_back();
    if (dag.nodes.count(id)) continue;
    ProofNode n = node_of(fb.fact(id));
    for (FactId a : n.antecedents) stack.push_back(a);
    dag.nodes.emplace(id, std::move(n));
  }
}

}  // namespace

std::optional<ProofDag> prove(const FactBase& fb, const Predicate& goal) {
  validate_predicate(goal);
  ProofDag dag;

  // wide coll/cyclic goals hold iff every minimal-arity subset is proven
  std::size_t min_arity = goal.kind == PredKind::coll ? 3 : goal.kind == PredKind::cyclic ? 4 : 0;
  if (min_arity > 0 && goal.args.size() > min_arity) {
    std::vector<FactId> roots;
    std::vector<std::size_t> idx(min_arity);
    for (std::size_t i = 0; i < min_arity; ++i) idx[i] = i;
    while (true) {
      Predicate sub{goal.kind, {}};
      for (std::size_t i : idx) sub.args.push_back(goal.args[i]);
      auto id = fb.find(sub);
      if (!id) return std::nullopt;
      roots.push_back(*id);
      std::size_t i = min_arity;
      bool done = true;
      while (i > 0) {
        --i;
        if (idx[i] != i + goal.args.size() - min_arity) {
          ++idx[i];
          for (std::size_t j = i + 1; j < min_arity; ++j) idx[j] = idx[j - 1] + 1;
          done = false;
          break;
        }
      }
      if (done) break;
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
    dag.goal_roots = roots;
    traceback(fb, dag, roots);
    return dag;
  }

  if (auto id = fb.find(goal)) {
    dag.goal_roots = {*id};
    traceback(fb, dag, dag.goal_roots);
    return dag;
  }

  // linear-kind fallback: tautologies and representative mismatches
  if (auto cert = fb.algebra_derive(goal)) {
    std::vector<FactId> ante;
    for (const auto& [rid, m] : cert->combination)
      for (FactId f : fb.relation_antecedents(rid)) ante.push_back(f);
    std::sort(ante.begin(), ante.end());
    ante.erase(std::unique(ante.begin(), ante.end()), ante.end());
    FactId synthetic = FactId(fb.facts().size());
    ProofNode n;
    n.pred = canonical(goal);
    n.kind = StepKind::algebra;
    n.antecedents = ante;
    n.cert = *cert;
    dag.goal_roots = {synthetic};
    traceback(fb, dag, ante);
    dag.nodes.emplace(synthetic, std::move(n));
    return dag;
  }
  return std::nullopt;
}

int proof_length(const ProofDag& dag) {
  int n = 0;
  for (const auto& [id, node] : dag.nodes)
    if (node.kind == StepKind::rule || node.kind == StepKind::algebra) ++n;
  return n;
}

}  // namespace geo
