#pragma once

#include <map>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "geo/dsl.hpp"

#include "json.hpp"

namespace geo {

using Rat = mpq_class;

enum class VarSpace { angle, logratio };

/// One exact linear equation  sum(coeff * var) = constant. Angle-space
/// variables are line directions in units of pi and equations hold mod 1;
/// logratio variables are formal log segment lengths and equations are exact.
struct LinearRelation {
  VarSpace space = VarSpace::angle;
  std::map<std::string, Rat> terms;
  Rat constant = 0;

  bool trivial() const { return terms.empty(); }
};

/// Witness that `derived` is a rational combination of source relations.
struct Certificate {
  Predicate derived;
  std::map<std::string, Rat> combination;  // relation-id -> multiplier

  nlohmann::ordered_json to_json() const;
};

/// Maps point pairs to direction/length variable names. Line identity comes
/// from the caller-provided collinearity partition: pairs on one line share a
/// direction variable. Coincident (idc) points are folded to a representative.
class SymbolTable {
 public:
  SymbolTable() = default;
  SymbolTable(std::vector<std::vector<std::string>> collinear_groups,
              std::vector<std::pair<std::string, std::string>> coincident);

  std::string rep(const std::string& point) const;
  /// Direction variable of line(a, b); empty when a and b coincide.
  std::string dir_var(const std::string& a, const std::string& b) const;
  /// Log-length variable of segment {a, b}; empty when a and b coincide.
  std::string len_var(const std::string& a, const std::string& b) const;

 private:
  std::map<std::string, std::string> point_rep_;
  std::map<std::string, std::string> pair_line_;  // canonical pair key -> line id
};

/// Standard linear encodings (para, perp, eqangle, cong, eqratio, midp, coll).
/// Tautologies encode to the empty list. Throws NotLinearizable for kinds
/// with no linear form (cyclic, circle, simtri, contri, idc).
std::vector<LinearRelation> encode(const Predicate& p, const SymbolTable& syms);

/// Reduced system over one or both spaces with combination tracking. Queries
/// are answered exactly: a predicate is derived iff its encoding lies in the
/// rational row space (angle constants compared mod 1).
class LinearSystem {
 public:
  /// `tolerate_inconsistent` drops contradicting rows instead of throwing;
  /// saturation uses it since numerically-filtered fact sets can contain
  /// exact contradictions only through borderline tolerance artifacts.
  explicit LinearSystem(const std::vector<std::pair<std::string, LinearRelation>>& relations,
                        bool tolerate_inconsistent = false);

  std::optional<Certificate> derive(const Predicate& query, const SymbolTable& syms) const;

  /// Check a certificate by recomputing the combination; exact, no tolerance.
  static bool certificate_valid(const Certificate& cert,
                                const std::map<std::string, LinearRelation>& sources,
                                const SymbolTable& syms);

 private:
  struct Row {
    std::map<std::string, Rat> terms;
    Rat constant;
    std::map<std::string, Rat> combo;
    VarSpace space;
  };
  std::optional<std::pair<std::map<std::string, Rat>, bool>> reduce(
      const LinearRelation& rel) const;

  std::vector<Row> basis_;
  std::map<std::string, LinearRelation> sources_;
};

std::vector<std::pair<Predicate, Certificate>> close(
    const std::vector<std::pair<std::string, LinearRelation>>& relations,
    const std::vector<Predicate>& queries, const SymbolTable& syms);

std::string rat_str(const Rat& r);

}  // namespace geo
