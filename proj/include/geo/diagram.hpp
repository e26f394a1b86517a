#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "geo/dsl.hpp"

#include "json.hpp"

namespace geo {

struct BuildOptions {
  double tol_construct = 1e-8;   // max per-constraint residual, diameter-normalized
  double tol_check = 1e-8;       // predicate check tolerance, diameter-normalized
  double coincidence_tol = 1e-6; // below this two points are "the same"
  double nondegen_tol = 1e-4;    // unconstrained triples must clear this
  int max_restarts = 32;
  int solver_max_iters = 400;
};

/// Numeric model of a problem: named coordinates plus the construction plan
/// that produced them. `merged` lists double points (distinct names proven
/// coincident at build time). Only points/merged/seed are part of the JSON
/// export; `plan` is provenance used for re-solving and global adjustment.
struct Diagram {
  std::map<std::string, Vec2> coords;
  std::vector<std::pair<std::string, std::string>> merged;
  std::uint64_t seed = 0;
  std::vector<ConstructionStmt> plan;

  bool has(const std::string& name) const { return coords.count(name) != 0; }
  Vec2 at(const std::string& name) const;
  double diameter() const;

  nlohmann::ordered_json to_json() const;
};

struct Residual {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> per_constraint;
};

Diagram build_diagram(const Problem& p, std::uint64_t seed, const BuildOptions& opt = {});

/// Places the statement's new point(s) on an existing diagram. Coincidence
/// with an existing point is recorded in `merged` when the statement carries
/// `!`, and rejected otherwise. Over-constrained statements that cannot be
/// met pointwise fall back to global adjustment.
Diagram add_point(const Diagram& d, const ConstructionStmt& s, const BuildOptions& opt = {});

/// Moves the sampled (non-closed-form) points so that the plan's constraints
/// plus `extra` all hold; exact constructions are recomputed from their
/// parents at every evaluation.
Diagram adjust_globally(const Diagram& d, const std::vector<Predicate>& extra,
                        const BuildOptions& opt = {});

bool check_predicate(const Diagram& d, const Predicate& q, double tol = 1e-8);

/// Residuals of every construction constraint in the plan (plus `extra`
/// predicates), normalized by the diagram diameter.
Residual residuals(const Diagram& d, const std::vector<Predicate>& extra = {});

/// The symbolic facts a construction plan asserts (midp, coll, perp, cong,
/// eqangle...). These are the premises fed to saturation.
std::vector<Predicate> construction_premises(const std::vector<ConstructionStmt>& plan);

/// Groups of points made collinear by construction; triples inside one group
/// are exempt from the nondegeneracy check.
std::vector<std::set<std::string>> constructed_collinear_groups(
    const std::vector<ConstructionStmt>& plan);

/// Points placed by sampling (free, on_line, ...) rather than closed form;
/// these are the points global adjustment may move. `free` statements with
/// explicit coordinates are pinned and excluded.
std::set<std::string> movable_points(const std::vector<ConstructionStmt>& plan);

}  // namespace geo
