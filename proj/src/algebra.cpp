#include "geo/algebra.hpp"

#include <algorithm>
#include <functional>

namespace geo {

std::string rat_str(const Rat& r) { return r.get_str(); }

nlohmann::ordered_json Certificate::to_json() const {
  nlohmann::ordered_json combo = nlohmann::ordered_json::object();
  for (const auto& [id, m] : combination) combo[id] = rat_str(m);
  return nlohmann::ordered_json{{"derived", serialize(derived)}, {"combination", combo}};
}

// ---------------------------------------------------------------------------
// SymbolTable

namespace {

std::string pair_key(const std::string& a, const std::string& b) {
  return a < b ? a + ":" + b : b + ":" + a;
}

bool is_integer(const Rat& r) { return r.get_den() == 1; }

}  // namespace

SymbolTable::SymbolTable(std::vector<std::vector<std::string>> collinear_groups,
                         std::vector<std::pair<std::string, std::string>> coincident) {
  // union-find over coincident names; representative = lexicographic min
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) return x;
    std::string r = find(it->second);
    parent[x] = r;
    return r;
  };
  for (const auto& [a, b] : coincident) {
    std::string ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  for (const auto& [a, b] : coincident) {
    point_rep_[a] = find(a);
    point_rep_[b] = find(b);
  }

  // line id per collinearity group: every pair of points in a group maps to
  // the group's canonical key
  for (auto& g : collinear_groups) {
    std::vector<std::string> pts;
    for (const std::string& p : g) pts.push_back(rep(p));
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 2) continue;
    std::string id = pts[0];
    for (std::size_t i = 1; i < pts.size(); ++i) id += ":" + pts[i];
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        std::string key = pair_key(pts[i], pts[j]);
        auto it = pair_line_.find(key);
        if (it == pair_line_.end() || id < it->second) pair_line_[key] = id;
      }
  }
}

std::string SymbolTable::rep(const std::string& point) const {
  auto it = point_rep_.find(point);
  return it == point_rep_.end() ? point : it->second;
}

std::string SymbolTable::dir_var(const std::string& a, const std::string& b) const {
  std::string ra = rep(a), rb = rep(b);
  if (ra == rb) return {};
  std::string key = pair_key(ra, rb);
  auto it = pair_line_.find(key);
  return "d:" + (it == pair_line_.end() ? key : it->second);
}

std::string SymbolTable::len_var(const std::string& a, const std::string& b) const {
  std::string ra = rep(a), rb = rep(b);
  if (ra == rb) return {};
  return "l:" + pair_key(ra, rb);
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

void add_term(std::map<std::string, Rat>& terms, const std::string& var, const Rat& c) {
  if (var.empty()) return;
  Rat& slot = terms[var];
  slot += c;
  if (slot == 0) terms.erase(var);
}

LinearRelation dir_difference(const SymbolTable& syms, const std::string& a1,
                              const std::string& a2, const std::string& b1,
                              const std::string& b2, const Rat& constant) {
  LinearRelation rel;
  rel.space = VarSpace::angle;
  add_term(rel.terms, syms.dir_var(a1, a2), 1);
  add_term(rel.terms, syms.dir_var(b1, b2), -1);
  rel.constant = constant;
  return rel;
}

}  // namespace

std::vector<LinearRelation> encode(const Predicate& p, const SymbolTable& syms) {
  const auto& a = p.args;
  std::vector<LinearRelation> out;
  auto push = [&](LinearRelation rel) {
    // tautologies (0 = 0) are dropped; 0 = c is kept so inconsistencies surface
    if (rel.trivial() && rel.constant == 0) return;
    out.push_back(std::move(rel));
  };
  switch (p.kind) {
    case PredKind::para:
      push(dir_difference(syms, a[0], a[1], a[2], a[3], 0));
      return out;
    case PredKind::perp: {
      LinearRelation rel = dir_difference(syms, a[0], a[1], a[2], a[3], Rat(1, 2));
      out.push_back(std::move(rel));  // constant 1/2: never trivial
      return out;
    }
    case PredKind::eqangle: {
      LinearRelation rel;
      rel.space = VarSpace::angle;
      add_term(rel.terms, syms.dir_var(a[2], a[3]), 1);
      add_term(rel.terms, syms.dir_var(a[0], a[1]), -1);
      add_term(rel.terms, syms.dir_var(a[6], a[7]), -1);
      add_term(rel.terms, syms.dir_var(a[4], a[5]), 1);
      rel.constant = 0;
      push(std::move(rel));
      return out;
    }
    case PredKind::coll: {
      for (std::size_t k = 2; k < a.size(); ++k)
        push(dir_difference(syms, a[0], a[1], a[0], a[k], 0));
      return out;
    }
    case PredKind::cong: {
      LinearRelation rel;
      rel.space = VarSpace::logratio;
      add_term(rel.terms, syms.len_var(a[0], a[1]), 1);
      add_term(rel.terms, syms.len_var(a[2], a[3]), -1);
      rel.constant = 0;
      push(std::move(rel));
      return out;
    }
    case PredKind::eqratio: {
      LinearRelation rel;
      rel.space = VarSpace::logratio;
      add_term(rel.terms, syms.len_var(a[0], a[1]), 1);
      add_term(rel.terms, syms.len_var(a[2], a[3]), -1);
      add_term(rel.terms, syms.len_var(a[4], a[5]), -1);
      add_term(rel.terms, syms.len_var(a[6], a[7]), 1);
      rel.constant = 0;
      push(std::move(rel));
      return out;
    }
    case PredKind::midp: {
      LinearRelation rel;
      rel.space = VarSpace::logratio;
      add_term(rel.terms, syms.len_var(a[0], a[1]), 1);
      add_term(rel.terms, syms.len_var(a[0], a[2]), -1);
      rel.constant = 0;
      push(std::move(rel));
      push(dir_difference(syms, a[0], a[1], a[0], a[2], 0));
      return out;
    }
    case PredKind::cyclic:
    case PredKind::circle:
    case PredKind::simtri:
    case PredKind::contri:
    case PredKind::idc:
      throw Error(Errc::not_linearizable,
                  std::string(pred_name(p.kind)) + " has no linear encoding");
  }
  return out;
}

// ---------------------------------------------------------------------------
// LinearSystem

LinearSystem::LinearSystem(
    const std::vector<std::pair<std::string, LinearRelation>>& relations,
    bool tolerate_inconsistent) {
  for (const auto& [id, rel] : relations) sources_.emplace(id, rel);
  for (const auto& [id, rel] : relations) {
    Row row;
    row.terms = rel.terms;
    row.constant = rel.constant;
    row.space = rel.space;
    row.combo[id] = 1;
    // reduce against the existing basis (same space only)
    for (const Row& b : basis_) {
      if (b.space != row.space) continue;
      auto pivot = b.terms.begin();
      auto it = row.terms.find(pivot->first);
      if (it == row.terms.end()) continue;
      Rat f = it->second / pivot->second;
      for (const auto& [v, c] : b.terms) add_term(row.terms, v, -f * c);
      row.constant -= f * b.constant;
      for (const auto& [rid, m] : b.combo) {
        Rat& slot = row.combo[rid];
        slot -= f * m;
        if (slot == 0) row.combo.erase(rid);
      }
    }
    if (row.terms.empty()) {
      bool zero = row.space == VarSpace::angle ? is_integer(row.constant) : row.constant == 0;
      if (!zero) {
        if (tolerate_inconsistent) continue;  // drop the contradicting row
        std::string witness;
        for (const auto& [rid, m] : row.combo) witness += " " + rid + "*" + rat_str(m);
        throw Error(Errc::inconsistent_system,
                    "relation set is inconsistent: 0 = " + rat_str(row.constant) +
                        " from combination" + witness);
      }
      continue;  // redundant
    }
    basis_.push_back(std::move(row));
    // keep basis ordered by pivot variable for deterministic reduction
    std::sort(basis_.begin(), basis_.end(), [](const Row& x, const Row& y) {
      if (x.space != y.space) return x.space < y.space;
      return x.terms.begin()->first < y.terms.begin()->first;
    });
  }
}

std::optional<std::pair<std::map<std::string, Rat>, bool>> LinearSystem::reduce(
    const LinearRelation& rel) const {
  std::map<std::string, Rat> terms = rel.terms;
  Rat constant = rel.constant;
  std::map<std::string, Rat> combo;
  for (const Row& b : basis_) {
    if (b.space != rel.space) continue;
    auto it = terms.find(b.terms.begin()->first);
    if (it == terms.end()) continue;
    Rat f = it->second / b.terms.begin()->second;
    for (const auto& [v, c] : b.terms) add_term(terms, v, -f * c);
    constant -= f * b.constant;
    for (const auto& [rid, m] : b.combo) {
      Rat& slot = combo[rid];
      slot += f * m;
      if (slot == 0) combo.erase(rid);
    }
  }
  if (!terms.empty()) return std::nullopt;
  bool ok = rel.space == VarSpace::angle ? is_integer(constant) : constant == 0;
  if (!ok) return std::nullopt;
  return std::make_pair(combo, true);
}

std::optional<Certificate> LinearSystem::derive(const Predicate& query,
                                                const SymbolTable& syms) const {
  std::vector<LinearRelation> encs = encode(query, syms);
  Certificate cert;
  cert.derived = query;
  for (const LinearRelation& rel : encs) {
    auto red = reduce(rel);
    if (!red) return std::nullopt;
    for (const auto& [rid, m] : red->first) {
      Rat& slot = cert.combination[rid];
      slot += m;
      if (slot == 0) cert.combination.erase(rid);
    }
  }
  return cert;
}

bool LinearSystem::certificate_valid(const Certificate& cert,
                                     const std::map<std::string, LinearRelation>& sources,
                                     const SymbolTable& syms) {
  std::map<std::string, Rat> terms[2];
  Rat constant[2] = {0, 0};
  for (const auto& [rid, m] : cert.combination) {
    auto it = sources.find(rid);
    if (it == sources.end()) return false;
    int s = it->second.space == VarSpace::angle ? 0 : 1;
    for (const auto& [v, c] : it->second.terms) add_term(terms[s], v, m * c);
    constant[s] += m * it->second.constant;
  }
  std::map<std::string, Rat> want[2];
  Rat want_const[2] = {0, 0};
  for (const LinearRelation& rel : encode(cert.derived, syms)) {
    int s = rel.space == VarSpace::angle ? 0 : 1;
    for (const auto& [v, c] : rel.terms) add_term(want[s], v, c);
    want_const[s] += rel.constant;
  }
  if (terms[0] != want[0] || terms[1] != want[1]) return false;
  if (!is_integer(constant[0] - want_const[0])) return false;
  return constant[1] == want_const[1];
}

std::vector<std::pair<Predicate, Certificate>> close(
    const std::vector<std::pair<std::string, LinearRelation>>& relations,
    const std::vector<Predicate>& queries, const SymbolTable& syms) {
  LinearSystem sys(relations);
  std::vector<std::pair<Predicate, Certificate>> out;
  for (const Predicate& q : queries)
    if (auto cert = sys.derive(q, syms)) out.emplace_back(q, *cert);
  return out;
}

}  // namespace geo
