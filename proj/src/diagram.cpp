#include "geo/diagram.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace geo {

namespace {

constexpr double kPi = 3.14159265358979323846;

double theta_mod_pi(Vec2 u) {
  double t = std::atan2(u.y, u.x);
  while (t < 0) t += kPi;
  while (t >= kPi) t -= kPi;
  return t;
}

std::optional<Vec2> circumcenter_of(Vec2 a, Vec2 b, Vec2 c) {
  double d = 2.0 * ((b - a).cross(c - a));
  if (std::abs(d) < 1e-14 * ((b - a).norm2() + (c - a).norm2())) return std::nullopt;
  double a2 = a.norm2(), b2 = b.norm2(), c2 = c.norm2();
  double ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
  double uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
  return Vec2{ux, uy};
}

Vec2 project_onto_line(Vec2 p, Vec2 base, Vec2 dir) {
  Vec2 u = dir.normalized();
  return base + u * (p - base).dot(u);
}

Vec2 reflect_over_line(Vec2 p, Vec2 base, Vec2 dir) {
  Vec2 f = project_onto_line(p, base, dir);
  return f * 2.0 - p;
}

// ---------------------------------------------------------------------------
// Placement specs (loci for a new point)

struct Spec {
  enum Kind { points, line, segment, circle, plane } kind = plane;
  std::vector<Vec2> cands;  // points
  Vec2 base, dir;           // line
  Vec2 a, b;                // segment endpoints
  Vec2 center;              // circle
  double radius = 0;
};

std::vector<Vec2> line_line(Vec2 p1, Vec2 d1, Vec2 p2, Vec2 d2) {
  double den = d1.cross(d2);
  double scale = d1.norm() * d2.norm();
  if (std::abs(den) < 1e-12 * std::max(scale, 1e-30)) return {};
  double t = (p2 - p1).cross(d2) / den;
  return {p1 + d1 * t};
}

std::vector<Vec2> line_circle(Vec2 p, Vec2 d, Vec2 c, double r) {
  Vec2 u = d.normalized();
  if (u.norm2() == 0) return {};
  double tm = (c - p).dot(u);
  Vec2 m = p + u * tm;
  double h2 = r * r - (m - c).norm2();
  if (h2 < -1e-12 * std::max(r * r, 1e-30)) return {};
  double h = std::sqrt(std::max(0.0, h2));
  if (h == 0) return {m};
  return {m - u * h, m + u * h};
}

std::vector<Vec2> circle_circle(Vec2 c1, double r1, Vec2 c2, double r2) {
  Vec2 d = c2 - c1;
  double l = d.norm();
  if (l < 1e-14) return {};
  double x = (l * l + r1 * r1 - r2 * r2) / (2 * l);
  double h2 = r1 * r1 - x * x;
  if (h2 < -1e-12 * std::max(r1 * r1, 1e-30)) return {};
  double h = std::sqrt(std::max(0.0, h2));
  Vec2 u = d / l;
  Vec2 m = c1 + u * x;
  if (h == 0) return {m};
  return {m + u.perp() * h, m - u.perp() * h};
}

Vec2 bisector_dir(Vec2 a, Vec2 b, Vec2 c) {
  Vec2 u = (a - b).normalized();
  Vec2 v = (c - b).normalized();
  Vec2 s = u + v;
  if (s.norm() < 1e-9) return u.perp();  // straight angle: bisector is perpendicular
  return s.normalized();
}

Spec spec_of(const CtorCall& call, const std::map<std::string, Vec2>& coords) {
  auto at = [&](int i) { return coords.at(call.points[i]); };
  Spec s;
  switch (call.fn) {
    case Ctor::free:
      if (call.numbers.size() == 2) {
        s.kind = Spec::points;
        s.cands = {Vec2{call.numbers[0], call.numbers[1]}};
      } else {
        s.kind = Spec::plane;
      }
      return s;
    case Ctor::triangle:
      s.kind = Spec::plane;  // handled specially
      return s;
    case Ctor::on_line:
      s.kind = Spec::line;
      s.base = at(0);
      s.dir = at(1) - at(0);
      return s;
    case Ctor::on_segment:
      s.kind = Spec::segment;
      s.a = at(0);
      s.b = at(1);
      return s;
    case Ctor::on_circle:
      s.kind = Spec::circle;
      s.center = at(0);
      s.radius = dist(at(0), at(1));
      return s;
    case Ctor::midpoint:
      s.kind = Spec::points;
      s.cands = {(at(0) + at(1)) * 0.5};
      return s;
    case Ctor::foot:
      s.kind = Spec::points;
      s.cands = {project_onto_line(at(0), at(1), at(2) - at(1))};
      return s;
    case Ctor::angle_bisector:
      s.kind = Spec::line;
      s.base = at(1);
      s.dir = bisector_dir(at(0), at(1), at(2));
      return s;
    case Ctor::perp_bisector:
      s.kind = Spec::line;
      s.base = (at(0) + at(1)) * 0.5;
      s.dir = (at(1) - at(0)).perp();
      return s;
    case Ctor::circumcenter: {
      auto o = circumcenter_of(at(0), at(1), at(2));
      if (!o)
        throw Error(Errc::infeasible_configuration,
                    "circumcenter of (nearly) collinear points");
      s.kind = Spec::points;
      s.cands = {*o};
      return s;
    }
    case Ctor::incenter: {
      Vec2 a = at(0), b = at(1), c = at(2);
      double la = dist(b, c), lb = dist(c, a), lc = dist(a, b);
      double sum = la + lb + lc;
      if (sum < 1e-14) throw Error(Errc::infeasible_configuration, "degenerate incenter");
      s.kind = Spec::points;
      s.cands = {(a * la + b * lb + c * lc) / sum};
      return s;
    }
    case Ctor::centroid:
      s.kind = Spec::points;
      s.cands = {(at(0) + at(1) + at(2)) / 3.0};
      return s;
    case Ctor::reflect:
      s.kind = Spec::points;
      s.cands = {reflect_over_line(at(0), at(1), at(2) - at(1))};
      return s;
    case Ctor::intersection_ll: {
      auto v = line_line(at(0), at(1) - at(0), at(2), at(3) - at(2));
      if (v.empty())
        throw Error(Errc::infeasible_configuration, "intersection_ll of parallel lines");
      s.kind = Spec::points;
      s.cands = v;
      return s;
    }
    case Ctor::intersection_lc: {
      auto v = line_circle(at(0), at(1) - at(0), at(2), dist(at(2), at(3)));
      if (v.empty())
        throw Error(Errc::infeasible_configuration, "line misses circle");
      s.kind = Spec::points;
      s.cands = v;
      return s;
    }
    case Ctor::intersection_cc: {
      auto v = circle_circle(at(0), dist(at(0), at(1)), at(2), dist(at(2), at(3)));
      if (v.empty())
        throw Error(Errc::infeasible_configuration, "circles do not intersect");
      s.kind = Spec::points;
      s.cands = v;
      return s;
    }
  }
  return s;
}

bool on_spec(const Spec& s, Vec2 x, double tol) {
  switch (s.kind) {
    case Spec::points: {
      for (Vec2 c : s.cands)
        if (dist(c, x) <= tol) return true;
      return false;
    }
    case Spec::line:
      return std::abs((x - s.base).cross(s.dir.normalized())) <= tol;
    case Spec::segment: {
      Vec2 d = s.b - s.a;
      if (std::abs((x - s.a).cross(d.normalized())) > tol) return false;
      double t = (x - s.a).dot(d) / d.norm2();
      return t >= -1e-9 && t <= 1.0 + 1e-9;
    }
    case Spec::circle:
      return std::abs(dist(x, s.center) - s.radius) <= tol;
    case Spec::plane:
      return true;
  }
  return false;
}

Vec2 sample_spec(const Spec& s, Rng& rng) {
  switch (s.kind) {
    case Spec::plane:
      return Vec2{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    case Spec::line: {
      double scale = std::max(s.dir.norm(), 1e-9);
      double t = rng.uniform(-1.4, 1.6);
      return s.base + s.dir.normalized() * (t * scale);
    }
    case Spec::segment: {
      double t = rng.uniform(0.15, 0.85);
      return s.a + (s.b - s.a) * t;
    }
    case Spec::circle: {
      double ang = rng.uniform(0, 2 * kPi);
      return s.center + Vec2{std::cos(ang), std::sin(ang)} * s.radius;
    }
    case Spec::points:
      return s.cands.front();
  }
  return {};
}

// ---------------------------------------------------------------------------
// Constraint residuals

using Coords = std::map<std::string, Vec2>;

struct ResidualTerm {
  std::string id;
  std::function<double(const Coords&, double D)> eval;
};

void predicate_residuals(const Predicate& q, std::vector<ResidualTerm>& out,
                         const std::string& tag) {
  auto pt = [](const Coords& c, const std::string& n) { return c.at(n); };
  auto seglen = [pt](const Coords& c, const std::string& u, const std::string& v) {
    return dist(pt(c, u), pt(c, v));
  };
  const auto& a = q.args;
  switch (q.kind) {
    case PredKind::coll:
      for (std::size_t k = 2; k < a.size(); ++k)
        out.push_back({tag + ":coll" + std::to_string(k),
                       [a, k, pt](const Coords& c, double D) {
                         Vec2 u = pt(c, a[1]) - pt(c, a[0]);
                         Vec2 v = pt(c, a[k]) - pt(c, a[0]);
                         return u.cross(v) / (D * D);
                       }});
      break;
    case PredKind::para:
      out.push_back({tag + ":para", [a, pt](const Coords& c, double) {
                       Vec2 u = pt(c, a[1]) - pt(c, a[0]);
                       Vec2 v = pt(c, a[3]) - pt(c, a[2]);
                       return u.cross(v) / std::max(u.norm() * v.norm(), 1e-30);
                     }});
      break;
    case PredKind::perp:
      out.push_back({tag + ":perp", [a, pt](const Coords& c, double) {
                       Vec2 u = pt(c, a[1]) - pt(c, a[0]);
                       Vec2 v = pt(c, a[3]) - pt(c, a[2]);
                       return u.dot(v) / std::max(u.norm() * v.norm(), 1e-30);
                     }});
      break;
    case PredKind::cong:
      out.push_back({tag + ":cong", [a, seglen](const Coords& c, double D) {
                       return (seglen(c, a[0], a[1]) - seglen(c, a[2], a[3])) / D;
                     }});
      break;
    case PredKind::midp:
      for (int comp = 0; comp < 2; ++comp)
        out.push_back({tag + ":midp" + (comp ? "y" : "x"),
                       [a, pt, comp](const Coords& c, double D) {
                         Vec2 m = pt(c, a[0]);
                         Vec2 t = (pt(c, a[1]) + pt(c, a[2])) * 0.5;
                         return (comp ? m.y - t.y : m.x - t.x) / D;
                       }});
      break;
    case PredKind::eqangle:
      out.push_back({tag + ":eqangle", [a, pt](const Coords& c, double) {
                       auto th = [&](int i, int j) {
                         Vec2 u = pt(c, a[j]) - pt(c, a[i]);
                         return std::atan2(u.y, u.x);
                       };
                       double d1 = th(2, 3) - th(0, 1);
                       double d2 = th(6, 7) - th(4, 5);
                       return std::sin(d1 - d2);
                     }});
      break;
    case PredKind::eqratio:
      out.push_back({tag + ":eqratio", [a, seglen](const Coords& c, double D) {
                       double l1 = seglen(c, a[0], a[1]), l2 = seglen(c, a[2], a[3]);
                       double l3 = seglen(c, a[4], a[5]), l4 = seglen(c, a[6], a[7]);
                       return (l1 * l4 - l2 * l3) / (D * D);
                     }});
      break;
    case PredKind::cyclic:
      // circumcircle of the first three; remaining points pinned to it
      for (std::size_t k = 3; k < a.size(); ++k)
        out.push_back({tag + ":cyclic" + std::to_string(k),
                       [a, k, pt](const Coords& c, double D) {
                         auto o = circumcenter_of(pt(c, a[0]), pt(c, a[1]), pt(c, a[2]));
                         if (!o) return 1.0;
                         double r = dist(*o, pt(c, a[0]));
                         return (dist(*o, pt(c, a[k])) - r) / D;
                       }});
      break;
    case PredKind::circle:
      for (int k = 2; k <= 3; ++k)
        out.push_back({tag + ":circle" + std::to_string(k),
                       [a, k, seglen](const Coords& c, double D) {
                         return (seglen(c, a[0], a[std::size_t(k)]) - seglen(c, a[0], a[1])) / D;
                       }});
      break;
    case PredKind::simtri:
      out.push_back({tag + ":simtri1", [a, seglen](const Coords& c, double D) {
                       return (seglen(c, a[0], a[1]) * seglen(c, a[4], a[5]) -
                               seglen(c, a[1], a[2]) * seglen(c, a[3], a[4])) /
                              (D * D);
                     }});
      out.push_back({tag + ":simtri2", [a, seglen](const Coords& c, double D) {
                       return (seglen(c, a[1], a[2]) * seglen(c, a[5], a[3]) -
                               seglen(c, a[2], a[0]) * seglen(c, a[4], a[5])) /
                              (D * D);
                     }});
      break;
    case PredKind::contri:
      for (int i = 0; i < 3; ++i)
        out.push_back({tag + ":contri" + std::to_string(i),
                       [a, i, seglen](const Coords& c, double D) {
                         return (seglen(c, a[std::size_t(i)], a[std::size_t((i + 1) % 3)]) -
                                 seglen(c, a[std::size_t(3 + i)], a[std::size_t(3 + (i + 1) % 3)])) /
                                D;
                       }});
      break;
    case PredKind::idc:
      for (int comp = 0; comp < 2; ++comp)
        out.push_back({tag + ":idc" + (comp ? "y" : "x"),
                       [a, pt, comp](const Coords& c, double D) {
                         Vec2 u = pt(c, a[0]) - pt(c, a[1]);
                         return (comp ? u.y : u.x) / D;
                       }});
      break;
  }
}

void part_residuals(const ConstructionStmt& stmt, std::size_t stmt_idx,
                    std::vector<ResidualTerm>& out) {
  if (stmt.parts.empty() || stmt.new_points.empty()) return;
  const std::string x = stmt.new_points[0];
  for (std::size_t pi = 0; pi < stmt.parts.size(); ++pi) {
    const CtorCall& part = stmt.parts[pi];
    std::string tag = "s" + std::to_string(stmt_idx) + "." + std::to_string(pi);
    const auto& ps = part.points;
    auto emit = [&](const Predicate& q) { predicate_residuals(q, out, tag); };
    switch (part.fn) {
      case Ctor::free:
        if (part.numbers.size() == 2) {
          Vec2 pin{part.numbers[0], part.numbers[1]};
          for (int comp = 0; comp < 2; ++comp)
            out.push_back({tag + ":pin" + (comp ? "y" : "x"),
                           [x, pin, comp](const Coords& c, double D) {
                             Vec2 u = c.at(x) - pin;
                             return (comp ? u.y : u.x) / D;
                           }});
        }
        break;
      case Ctor::triangle:
        break;
      case Ctor::on_line:
        emit({PredKind::coll, {x, ps[0], ps[1]}});
        break;
      case Ctor::on_segment: {
        emit({PredKind::coll, {x, ps[0], ps[1]}});
        std::string a = ps[0], b = ps[1];
        out.push_back({tag + ":range", [x, a, b](const Coords& c, double) {
                         Vec2 d = c.at(b) - c.at(a);
                         double t = (c.at(x) - c.at(a)).dot(d) / std::max(d.norm2(), 1e-30);
                         double lo = 0.02, hi = 0.98;
                         return std::max(0.0, lo - t) + std::max(0.0, t - hi);
                       }});
        break;
      }
      case Ctor::on_circle:
        emit({PredKind::cong, {ps[0], x, ps[0], ps[1]}});
        break;
      case Ctor::midpoint:
        emit({PredKind::midp, {x, ps[0], ps[1]}});
        break;
      case Ctor::foot:
        emit({PredKind::coll, {x, ps[1], ps[2]}});
        emit({PredKind::perp, {ps[0], x, ps[1], ps[2]}});
        break;
      case Ctor::angle_bisector:
        emit({PredKind::eqangle, {ps[1], ps[0], ps[1], x, ps[1], x, ps[1], ps[2]}});
        break;
      case Ctor::perp_bisector:
        emit({PredKind::cong, {x, ps[0], x, ps[1]}});
        break;
      case Ctor::circumcenter:
        emit({PredKind::cong, {x, ps[0], x, ps[1]}});
        emit({PredKind::cong, {x, ps[1], x, ps[2]}});
        break;
      case Ctor::incenter:
        emit({PredKind::eqangle, {ps[0], ps[1], ps[0], x, ps[0], x, ps[0], ps[2]}});
        emit({PredKind::eqangle, {ps[1], ps[0], ps[1], x, ps[1], x, ps[1], ps[2]}});
        break;
      case Ctor::centroid:
        for (int comp = 0; comp < 2; ++comp)
          out.push_back({tag + ":centroid" + (comp ? "y" : "x"),
                         [x, ps, comp](const Coords& c, double D) {
                           Vec2 g = (c.at(ps[0]) + c.at(ps[1]) + c.at(ps[2])) / 3.0;
                           Vec2 u = c.at(x) - g;
                           return (comp ? u.y : u.x) / D;
                         }});
        break;
      case Ctor::reflect:
        for (int comp = 0; comp < 2; ++comp)
          out.push_back({tag + ":reflect" + (comp ? "y" : "x"),
                         [x, ps, comp](const Coords& c, double D) {
                           Vec2 r = reflect_over_line(c.at(ps[0]), c.at(ps[1]),
                                                      c.at(ps[2]) - c.at(ps[1]));
                           Vec2 u = c.at(x) - r;
                           return (comp ? u.y : u.x) / D;
                         }});
        break;
      case Ctor::intersection_ll:
        emit({PredKind::coll, {x, ps[0], ps[1]}});
        emit({PredKind::coll, {x, ps[2], ps[3]}});
        break;
      case Ctor::intersection_lc:
        emit({PredKind::coll, {x, ps[0], ps[1]}});
        emit({PredKind::cong, {ps[2], x, ps[2], ps[3]}});
        break;
      case Ctor::intersection_cc:
        emit({PredKind::cong, {ps[0], x, ps[0], ps[1]}});
        emit({PredKind::cong, {ps[2], x, ps[2], ps[3]}});
        break;
    }
  }
}

std::vector<ResidualTerm> plan_residual_terms(const std::vector<ConstructionStmt>& plan,
                                              const std::vector<Predicate>& extra) {
  std::vector<ResidualTerm> out;
  for (std::size_t i = 0; i < plan.size(); ++i) part_residuals(plan[i], i, out);
  for (std::size_t i = 0; i < extra.size(); ++i)
    predicate_residuals(extra[i], out, "x" + std::to_string(i));
  return out;
}

// ---------------------------------------------------------------------------
// Plan metadata

bool stmt_is_sampled(const ConstructionStmt& s) {
  if (s.parts.size() > 1) return true;  // solved/adjusted, hence movable
  const CtorCall& c = s.parts[0];
  switch (c.fn) {
    case Ctor::free:
      return c.numbers.empty();
    case Ctor::triangle:
    case Ctor::on_line:
    case Ctor::on_circle:
    case Ctor::on_segment:
    case Ctor::angle_bisector:
    case Ctor::perp_bisector:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::set<std::string> movable_points(const std::vector<ConstructionStmt>& plan) {
  std::set<std::string> out, seen;
  for (const ConstructionStmt& s : plan) {
    bool redefinition = std::any_of(s.new_points.begin(), s.new_points.end(),
                                    [&](const std::string& n) { return seen.count(n) > 0; });
    if (!redefinition && stmt_is_sampled(s))
      for (const std::string& n : s.new_points) out.insert(n);
    for (const std::string& n : s.new_points) seen.insert(n);
  }
  return out;
}

std::vector<Predicate> construction_premises(const std::vector<ConstructionStmt>& plan) {
  std::vector<Predicate> out;
  auto push = [&](Predicate p) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(std::move(p));
  };
  for (const ConstructionStmt& s : plan) {
    if (s.new_points.empty()) continue;
    const std::string& x = s.new_points[0];
    for (const CtorCall& part : s.parts) {
      const auto& ps = part.points;
      switch (part.fn) {
        case Ctor::free:
        case Ctor::triangle:
        case Ctor::centroid:
          break;
        case Ctor::on_line:
        case Ctor::on_segment:
          push({PredKind::coll, {x, ps[0], ps[1]}});
          break;
        case Ctor::on_circle:
          push({PredKind::cong, {ps[0], x, ps[0], ps[1]}});
          break;
        case Ctor::midpoint:
          push({PredKind::midp, {x, ps[0], ps[1]}});
          break;
        case Ctor::foot:
          push({PredKind::coll, {x, ps[1], ps[2]}});
          push({PredKind::perp, {ps[0], x, ps[1], ps[2]}});
          break;
        case Ctor::angle_bisector:
          push({PredKind::eqangle, {ps[1], ps[0], ps[1], x, ps[1], x, ps[1], ps[2]}});
          break;
        case Ctor::perp_bisector:
          push({PredKind::cong, {x, ps[0], x, ps[1]}});
          break;
        case Ctor::circumcenter:
          push({PredKind::cong, {x, ps[0], x, ps[1]}});
          push({PredKind::cong, {x, ps[1], x, ps[2]}});
          break;
        case Ctor::incenter:
          push({PredKind::eqangle, {ps[0], ps[1], ps[0], x, ps[0], x, ps[0], ps[2]}});
          push({PredKind::eqangle, {ps[1], ps[0], ps[1], x, ps[1], x, ps[1], ps[2]}});
          push({PredKind::eqangle, {ps[2], ps[0], ps[2], x, ps[2], x, ps[2], ps[1]}});
          break;
        case Ctor::reflect:
          push({PredKind::perp, {ps[0], x, ps[1], ps[2]}});
          push({PredKind::cong, {ps[1], ps[0], ps[1], x}});
          push({PredKind::cong, {ps[2], ps[0], ps[2], x}});
          break;
        case Ctor::intersection_ll:
          push({PredKind::coll, {x, ps[0], ps[1]}});
          push({PredKind::coll, {x, ps[2], ps[3]}});
          break;
        case Ctor::intersection_lc:
          push({PredKind::coll, {x, ps[0], ps[1]}});
          push({PredKind::cong, {ps[2], x, ps[2], ps[3]}});
          break;
        case Ctor::intersection_cc:
          push({PredKind::cong, {ps[0], x, ps[0], ps[1]}});
          push({PredKind::cong, {ps[2], x, ps[2], ps[3]}});
          break;
      }
    }
  }
  return out;
}

std::vector<std::set<std::string>> constructed_collinear_groups(
    const std::vector<ConstructionStmt>& plan) {
  std::vector<std::set<std::string>> groups;
  for (const Predicate& p : construction_premises(plan)) {
    if (p.kind == PredKind::coll)
      groups.push_back({p.args.begin(), p.args.end()});
    else if (p.kind == PredKind::midp)
      groups.push_back({p.args.begin(), p.args.end()});
  }
  // merge groups sharing two or more points (same geometric line)
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
  return groups;
}

Vec2 Diagram::at(const std::string& name) const {
  auto it = coords.find(name);
  if (it == coords.end()) throw Error(Errc::unknown_point, "unknown point '" + name + "'");
  return it->second;
}

double Diagram::diameter() const {
  double d = 0;
  for (auto i = coords.begin(); i != coords.end(); ++i)
    for (auto j = std::next(i); j != coords.end(); ++j)
      d = std::max(d, dist(i->second, j->second));
  return d > 0 ? d : 1.0;
}

nlohmann::ordered_json Diagram::to_json() const {
  nlohmann::ordered_json pts = nlohmann::ordered_json::object();
  for (const auto& [name, v] : coords) pts[name] = {v.x, v.y};
  nlohmann::ordered_json m = nlohmann::ordered_json::array();
  for (const auto& [a, b] : merged) m.push_back({a, b});
  return nlohmann::ordered_json{{"points", pts}, {"merged", m}, {"seed", seed}};
}

Residual residuals(const Diagram& d, const std::vector<Predicate>& extra) {
  Residual res;
  double D = d.diameter();
  for (const ResidualTerm& t : plan_residual_terms(d.plan, extra)) {
    double v = std::abs(t.eval(d.coords, D));
    res.per_constraint.emplace_back(t.id, v);
    res.value = std::max(res.value, v);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Predicate checking

bool check_predicate(const Diagram& d, const Predicate& q, double tol) {
  validate_predicate(q);
  for (const std::string& n : q.args)
    if (!d.has(n)) throw Error(Errc::unknown_point, "unknown point '" + n + "'");
  double D = d.diameter();
  if (q.kind == PredKind::idc)
    return dist(d.at(q.args[0]), d.at(q.args[1])) <= std::max(tol, 1e-6) * D;
  // degenerate slots (zero-length direction segments) never satisfy a predicate
  auto zero_seg = [&](const std::string& u, const std::string& v) {
    return dist(d.at(u), d.at(v)) < 1e-12 * D;
  };
  switch (q.kind) {
    case PredKind::para:
    case PredKind::perp:
    case PredKind::eqangle:
      for (std::size_t i = 0; i + 1 < q.args.size(); i += 2)
        if (zero_seg(q.args[i], q.args[i + 1])) return false;
      break;
    case PredKind::eqratio:
      for (std::size_t i = 0; i + 1 < q.args.size(); i += 2)
        if (zero_seg(q.args[i], q.args[i + 1])) return false;
      break;
    default:
      break;
  }
  std::vector<ResidualTerm> terms;
  predicate_residuals(q, terms, "q");
  for (const ResidualTerm& t : terms)
    if (std::abs(t.eval(d.coords, D)) > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Least-squares solver (damped Gauss-Newton over the movable points)

namespace {

// Solves A x = b in place; A symmetric positive-ish, small and dense.
bool solve_dense(std::vector<std::vector<double>>& A, std::vector<double>& b) {
  int n = int(b.size());
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(A[std::size_t(i)][std::size_t(k)]) >
          std::abs(A[std::size_t(piv)][std::size_t(k)]))
        piv = i;
    if (std::abs(A[std::size_t(piv)][std::size_t(k)]) < 1e-300) return false;
    std::swap(A[std::size_t(k)], A[std::size_t(piv)]);
    std::swap(b[std::size_t(k)], b[std::size_t(piv)]);
    for (int i = k + 1; i < n; ++i) {
      double f = A[std::size_t(i)][std::size_t(k)] / A[std::size_t(k)][std::size_t(k)];
      for (int j = k; j < n; ++j)
        A[std::size_t(i)][std::size_t(j)] -= f * A[std::size_t(k)][std::size_t(j)];
      b[std::size_t(i)] -= f * b[std::size_t(k)];
    }
  }
  for (int k = n - 1; k >= 0; --k) {
    double s = b[std::size_t(k)];
    for (int j = k + 1; j < n; ++j) s -= A[std::size_t(k)][std::size_t(j)] * b[std::size_t(j)];
    b[std::size_t(k)] = s / A[std::size_t(k)][std::size_t(k)];
  }
  return true;
}

struct ExactStep {
  std::string name;
  CtorCall call;
};

// Exact (closed-form) points are recomputed from their parents whenever the
// movable points shift; two-branch intersections keep the branch nearest to
// the current value.
std::vector<ExactStep> exact_steps(const std::vector<ConstructionStmt>& plan) {
  std::vector<ExactStep> steps;
  std::set<std::string> seen;
  for (const ConstructionStmt& s : plan) {
    bool redef = std::any_of(s.new_points.begin(), s.new_points.end(),
                             [&](const std::string& n) { return seen.count(n) > 0; });
    if (!redef && !stmt_is_sampled(s) && s.parts.size() == 1 && s.new_points.size() == 1 &&
        !(s.parts[0].fn == Ctor::free))
      steps.push_back({s.new_points[0], s.parts[0]});
    for (const std::string& n : s.new_points) seen.insert(n);
  }
  return steps;
}

void recompute_exact(const std::vector<ExactStep>& steps, Coords& coords) {
  for (const ExactStep& st : steps) {
    Spec sp = spec_of(st.call, coords);
    if (sp.kind != Spec::points || sp.cands.empty()) continue;
    Vec2 cur = coords.at(st.name);
    Vec2 best = sp.cands[0];
    for (Vec2 c : sp.cands)
      if (dist(c, cur) < dist(best, cur)) best = c;
    coords[st.name] = best;
  }
}

struct SolveOutcome {
  bool converged = false;
  double max_residual = 0;
};

SolveOutcome least_squares_solve(Coords& coords, const std::vector<std::string>& vars,
                                 const std::vector<ResidualTerm>& terms,
                                 const std::vector<ExactStep>& exacts, double D,
                                 const BuildOptions& opt) {
  int n = int(vars.size()) * 2;
  int m = int(terms.size());
  if (m == 0) return {true, 0.0};

  auto set_vars = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < vars.size(); ++i) coords[vars[i]] = {v[2 * i], v[2 * i + 1]};
    recompute_exact(exacts, coords);
  };
  auto eval = [&](std::vector<double>& r) {
    double mx = 0;
    for (int i = 0; i < m; ++i) {
      r[std::size_t(i)] = terms[std::size_t(i)].eval(coords, D);
      mx = std::max(mx, std::abs(r[std::size_t(i)]));
    }
    return mx;
  };

  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < vars.size(); ++i) {
    v[2 * i] = coords.at(vars[i]).x;
    v[2 * i + 1] = coords.at(vars[i]).y;
  }
  set_vars(v);

  std::vector<double> r(static_cast<std::size_t>(m)), r2(static_cast<std::size_t>(m));
  double maxr = eval(r);
  double lambda = 1e-4;
  double stop = opt.tol_construct * 1e-2;

  for (int iter = 0; iter < opt.solver_max_iters && maxr > stop; ++iter) {
    // numeric Jacobian of the residual vector
    std::vector<std::vector<double>> J(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n)));
    double h = 1e-7 * std::max(1.0, D);
    for (int j = 0; j < n; ++j) {
      double save = v[std::size_t(j)];
      v[std::size_t(j)] = save + h;
      set_vars(v);
      eval(r2);
      for (int i = 0; i < m; ++i)
        J[std::size_t(i)][std::size_t(j)] = (r2[std::size_t(i)] - r[std::size_t(i)]) / h;
      v[std::size_t(j)] = save;
    }
    set_vars(v);

    double F = 0;
    for (double x : r) F += x * x;

    bool stepped = false;
    for (int tries = 0; tries < 12 && !stepped; ++tries) {
      std::vector<std::vector<double>> A(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
      std::vector<double> g(static_cast<std::size_t>(n), 0.0);
      for (int i = 0; i < m; ++i)
        for (int a = 0; a < n; ++a) {
          g[std::size_t(a)] += J[std::size_t(i)][std::size_t(a)] * r[std::size_t(i)];
          for (int b = a; b < n; ++b)
            A[std::size_t(a)][std::size_t(b)] +=
                J[std::size_t(i)][std::size_t(a)] * J[std::size_t(i)][std::size_t(b)];
        }
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < a; ++b) A[std::size_t(a)][std::size_t(b)] = A[std::size_t(b)][std::size_t(a)];
        A[std::size_t(a)][std::size_t(a)] += lambda * (A[std::size_t(a)][std::size_t(a)] + 1e-12);
        g[std::size_t(a)] = -g[std::size_t(a)];
      }
      if (!solve_dense(A, g)) {
        lambda *= 10;
        continue;
      }
      std::vector<double> v2 = v;
      for (int a = 0; a < n; ++a) v2[std::size_t(a)] += g[std::size_t(a)];
      set_vars(v2);
      double mx2 = eval(r2);
      double F2 = 0;
      for (double x : r2) F2 += x * x;
      if (F2 < F || mx2 < maxr) {
        v = v2;
        r = r2;
        maxr = mx2;
        lambda = std::max(lambda * 0.35, 1e-12);
        stepped = true;
      } else {
        lambda *= 6;
        if (lambda > 1e14) break;
      }
    }
    if (!stepped) break;
  }
  set_vars(v);
  return {maxr <= opt.tol_construct, maxr};
}

double plan_diameter_hint(const Coords& coords) {
  double d = 0;
  for (auto i = coords.begin(); i != coords.end(); ++i)
    for (auto j = std::next(i); j != coords.end(); ++j)
      d = std::max(d, dist(i->second, j->second));
  return d > 0 ? d : 1.0;
}

Diagram solve_plan(const Diagram& in, const std::vector<Predicate>& extra,
                   const BuildOptions& opt, Rng& rng,
                   const std::set<std::string>* focus = nullptr,
                   bool separation = false) {
  Diagram d = in;
  std::set<std::string> mov = movable_points(d.plan);
  std::vector<std::string> vars;
  for (const ConstructionStmt& s : d.plan)
    for (const std::string& n : s.new_points)
      if (mov.count(n) && (!focus || focus->count(n)) &&
          std::find(vars.begin(), vars.end(), n) == vars.end())
        vars.push_back(n);

  std::vector<ResidualTerm> terms = plan_residual_terms(d.plan, extra);
  std::vector<ExactStep> exacts = exact_steps(d.plan);
  double D = plan_diameter_hint(d.coords);

  if (separation) {
    // hinge terms repel the solver from collapse basins (coincident points
    // trivially satisfying angle constraints); zero at any honest solution
    std::set<std::string> doubles;
    for (const ConstructionStmt& s : d.plan)
      if (s.allow_double)
        for (const std::string& n : s.new_points) doubles.insert(n);
    std::vector<std::string> names;
    for (const auto& [n, v] : d.coords) names.push_back(n);
    double sep = 0.03 * D;
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        if (doubles.count(names[i]) || doubles.count(names[j])) continue;
        std::string a = names[i], b = names[j];
        terms.push_back({"sep:" + a + ":" + b, [a, b, sep](const Coords& c, double) {
                           double g = sep - dist(c.at(a), c.at(b));
                           return g > 0 ? g / sep : 0.0;
                         }});
      }
  }

  Coords best = d.coords;
  double best_res = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 8; ++attempt) {
    Coords work = d.coords;
    if (attempt > 0) {
      double jitter = 0.05 * attempt * D;
      for (const std::string& n : vars)
        work[n] = work[n] + Vec2{rng.uniform(-jitter, jitter), rng.uniform(-jitter, jitter)};
      recompute_exact(exacts, work);
    }
    SolveOutcome out = least_squares_solve(work, vars, terms, exacts, D, opt);
    if (out.max_residual < best_res) {
      best_res = out.max_residual;
      best = work;
    }
    if (out.converged) break;
  }
  if (best_res > opt.tol_construct)
    throw Error(Errc::infeasible_configuration,
                "constraints not satisfiable (residual " + format_double(best_res) + ")");
  d.coords = best;
  return d;
}

// ---------------------------------------------------------------------------
// Point placement

bool triple_exempt(const std::vector<std::set<std::string>>& groups, const std::string& a,
                   const std::string& b, const std::string& c) {
  for (const auto& g : groups)
    if (g.count(a) && g.count(b) && g.count(c)) return true;
  return false;
}

// Collinearity degeneracy applies to triples of sampled points only: exact
// constructions (feet, intersections...) may be forcedly collinear, as on a
// Simson line. Exempt are triples collinear by construction and pairs of
// merged (double) points.
void check_diagram_sane(const Diagram& d, const BuildOptions& opt,
                        const std::set<std::string>& may_merge);

bool degenerate_with(const Diagram& d, const std::string& x, Vec2 px,
                     const std::vector<std::set<std::string>>& groups,
                     const BuildOptions& opt, const std::set<std::string>& sampled) {
  if (!sampled.count(x)) return false;
  double D = std::max(d.diameter(), 1e-9);
  auto merged_pair = [&](const std::string& a, const std::string& b) {
    for (const auto& [u, v] : d.merged)
      if ((u == a && v == b) || (u == b && v == a)) return true;
    return false;
  };
  for (auto i = d.coords.begin(); i != d.coords.end(); ++i) {
    if (i->first == x || !sampled.count(i->first)) continue;
    if (dist(i->second, px) <= opt.coincidence_tol * D) continue;  // double-point pair
    for (auto j = std::next(i); j != d.coords.end(); ++j) {
      if (j->first == x || !sampled.count(j->first)) continue;
      if (dist(j->second, px) <= opt.coincidence_tol * D) continue;
      if (merged_pair(i->first, j->first)) continue;
      if (triple_exempt(groups, x, i->first, j->first)) continue;
      Vec2 u = i->second - px, v = j->second - px;
      if (std::abs(u.cross(v)) / (D * D) < opt.nondegen_tol &&
          dist(i->second, j->second) > opt.coincidence_tol * D)
        return true;
    }
  }
  return false;
}

std::vector<std::string> coincident_points(const Diagram& d, Vec2 px, double D,
                                           const BuildOptions& opt,
                                           const std::string& exclude = {}) {
  std::vector<std::string> out;
  for (const auto& [name, v] : d.coords)
    if (name != exclude && dist(v, px) <= opt.coincidence_tol * D) out.push_back(name);
  return out;
}

// Full-diagram recheck after a global adjustment: moved points must not have
// collapsed onto each other or into a collinear unconstrained triple.
void check_diagram_sane(const Diagram& d, const BuildOptions& opt,
                        const std::set<std::string>& may_merge) {
  double D = std::max(d.diameter(), 1e-9);
  auto merged_pair = [&](const std::string& a, const std::string& b) {
    for (const auto& [u, v] : d.merged)
      if ((u == a && v == b) || (u == b && v == a)) return true;
    return false;
  };
  for (auto i = d.coords.begin(); i != d.coords.end(); ++i)
    for (auto j = std::next(i); j != d.coords.end(); ++j) {
      if (dist(i->second, j->second) > opt.coincidence_tol * D) continue;
      if (merged_pair(i->first, j->first)) continue;
      if (may_merge.count(i->first) || may_merge.count(j->first)) continue;
      throw Error(Errc::degenerate_configuration,
                  "adjustment collapses '" + i->first + "' onto '" + j->first + "'");
    }
  auto groups = constructed_collinear_groups(d.plan);
  std::set<std::string> sampled = movable_points(d.plan);
  for (const auto& [name, v] : d.coords)
    if (degenerate_with(d, name, v, groups, opt, sampled))
      throw Error(Errc::degenerate_configuration, "adjustment flattens the configuration");
}

std::optional<Vec2> pointwise_candidates(const std::vector<Spec>& specs, const Diagram& d,
                                         const ConstructionStmt& stmt, Rng& rng,
                                         const BuildOptions& opt, bool& sampled) {
  double D = std::max(d.diameter(), 1e-9);
  double fit = 1e-9 * std::max(D, 1.0);
  sampled = false;

  std::vector<Vec2> cands;
  int first_point_spec = -1;
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].kind == Spec::points) {
      first_point_spec = int(i);
      break;
    }
  if (first_point_spec >= 0) {
    cands = specs[std::size_t(first_point_spec)].cands;
  } else {
    // collect the geometric loci; two of them intersect in closed form
    std::vector<int> curves;
    for (std::size_t i = 0; i < specs.size(); ++i)
      if (specs[i].kind != Spec::plane) curves.push_back(int(i));
    if (curves.size() >= 2) {
      const Spec& s1 = specs[std::size_t(curves[0])];
      const Spec& s2 = specs[std::size_t(curves[1])];
      auto as_line = [](const Spec& s, Vec2& p, Vec2& dir) {
        if (s.kind == Spec::line) {
          p = s.base;
          dir = s.dir;
          return true;
        }
        if (s.kind == Spec::segment) {
          p = s.a;
          dir = s.b - s.a;
          return true;
        }
        return false;
      };
      Vec2 p1, d1, p2, d2;
      bool l1 = as_line(s1, p1, d1), l2 = as_line(s2, p2, d2);
      if (l1 && l2)
        cands = line_line(p1, d1, p2, d2);
      else if (l1 && s2.kind == Spec::circle)
        cands = line_circle(p1, d1, s2.center, s2.radius);
      else if (l2 && s1.kind == Spec::circle)
        cands = line_circle(p2, d2, s1.center, s1.radius);
      else
        cands = circle_circle(s1.center, s1.radius, s2.center, s2.radius);
    } else if (curves.size() == 1) {
      sampled = true;
      cands = {sample_spec(specs[std::size_t(curves[0])], rng)};
    } else {
      sampled = true;
      cands = {sample_spec(Spec{}, rng)};
    }
  }

  // every candidate must satisfy all specs
  std::vector<Vec2> ok;
  for (Vec2 c : cands) {
    bool good = true;
    for (const Spec& s : specs)
      if (!on_spec(s, c, sampled ? opt.coincidence_tol * D : fit)) {
        good = false;
        break;
      }
    if (good) ok.push_back(c);
  }
  if (ok.empty()) return std::nullopt;

  // branch preference: avoid the trivial solutions sitting on argument points,
  // then avoid existing points unless `!` allows landing on them
  std::set<std::string> argpts;
  for (const CtorCall& part : stmt.parts)
    for (const std::string& p : part.points) argpts.insert(p);
  auto coincides_arg = [&](Vec2 c) {
    for (const std::string& p : argpts)
      if (d.has(p) && dist(d.at(p), c) <= opt.coincidence_tol * D) return true;
    return false;
  };
  std::vector<Vec2> pref;
  for (Vec2 c : ok)
    if (!coincides_arg(c)) pref.push_back(c);
  if (pref.empty()) pref = ok;
  if (!stmt.allow_double) {
    std::vector<Vec2> clean;
    for (Vec2 c : pref)
      if (coincident_points(d, c, D, opt).empty()) clean.push_back(c);
    if (!clean.empty()) pref = clean;
  }
  Vec2 bestc = pref[0];
  for (Vec2 c : pref)
    if (c.x < bestc.x - 1e-12 || (std::abs(c.x - bestc.x) <= 1e-12 && c.y < bestc.y)) bestc = c;
  return bestc;
}

void place_triangle(Diagram& d, const ConstructionStmt& stmt, Rng& rng,
                    const std::vector<std::set<std::string>>& groups, const BuildOptions& opt) {
  for (int tries = 0; tries < 256; ++tries) {
    Vec2 a{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    double ang = rng.uniform(0, 2 * kPi);
    double len = rng.uniform(0.8, 1.5);
    Vec2 bb = a + Vec2{std::cos(ang), std::sin(ang)} * len;
    double ang2 = ang + rng.uniform(0.5, kPi - 0.5) * (rng.u01() < 0.5 ? 1.0 : -1.0);
    double len2 = rng.uniform(0.8, 1.5);
    Vec2 cc = a + Vec2{std::cos(ang2), std::sin(ang2)} * len2;
    if (std::abs((bb - a).cross(cc - a)) < 0.15) continue;
    Diagram probe = d;
    probe.coords[stmt.new_points[0]] = a;
    probe.coords[stmt.new_points[1]] = bb;
    probe.coords[stmt.new_points[2]] = cc;
    double D = std::max(probe.diameter(), 1e-9);
    std::set<std::string> sampled = movable_points(d.plan);
    for (const std::string& n : stmt.new_points) sampled.insert(n);
    bool bad = false;
    for (const std::string& n : stmt.new_points) {
      if (!coincident_points(d, probe.coords[n], D, opt).empty() ||
          degenerate_with(probe, n, probe.coords[n], groups, opt, sampled)) {
        bad = true;
        break;
      }
    }
    if (bad) continue;
    d.coords = probe.coords;
    return;
  }
  throw Error(Errc::degenerate_configuration, "could not sample a nondegenerate triangle");
}

void place_stmt(Diagram& d, const ConstructionStmt& stmt, Rng& rng, const BuildOptions& opt,
                bool in_build) {
  std::vector<std::set<std::string>> groups;
  {
    auto plan2 = d.plan;
    plan2.push_back(stmt);
    groups = constructed_collinear_groups(plan2);
  }
  for (const CtorCall& part : stmt.parts)
    for (const std::string& p : part.points)
      if (!d.has(p)) throw Error(Errc::undefined_point, "undefined point '" + p + "'");

  if (stmt.parts.size() == 1 && stmt.parts[0].fn == Ctor::triangle) {
    place_triangle(d, stmt, rng, groups, opt);
    d.plan.push_back(stmt);
    return;
  }

  const std::string x = stmt.new_points[0];
  bool redefinition = d.has(x);
  double D = std::max(d.diameter(), 1e-9);
  std::set<std::string> sampled_pts = movable_points(d.plan);
  if (!redefinition && stmt_is_sampled(stmt)) sampled_pts.insert(x);

  std::vector<Spec> specs;
  for (const CtorCall& part : stmt.parts) specs.push_back(spec_of(part, d.coords));

  std::optional<Vec2> px;
  bool sampled = false;
  for (int tries = 0; tries < 64; ++tries) {
    px = pointwise_candidates(specs, d, stmt, rng, opt, sampled);
    if (!px) break;
    if (redefinition) break;
    bool coincide = !coincident_points(d, *px, D, opt).empty();
    bool degen = degenerate_with(d, x, *px, groups, opt, sampled_pts);
    if ((coincide && !stmt.allow_double) || degen) {
      if (sampled) continue;  // resample the free parameter
      if (coincide && !stmt.allow_double)
        throw Error(Errc::coincides_with_existing,
                    "point '" + x + "' coincides with an existing point");
      throw Error(Errc::degenerate_configuration, "construction degenerates");
    }
    break;
  }

  if (redefinition) {
    // `!name` with an existing name asserts the construction lands on it.
    if (!stmt.allow_double)
      throw Error(Errc::duplicate_point, "point '" + x + "' already defined");
    if (px && dist(*px, d.at(x)) <= opt.coincidence_tol * D) {
      d.plan.push_back(stmt);
      return;
    }
    Diagram trial = d;
    trial.plan.push_back(stmt);
    Rng sub(mix_seed(d.seed, fnv1a64(serialize(stmt))));
    trial = solve_plan(trial, {}, opt, sub);
    check_diagram_sane(trial, opt, {});
    d = trial;
    return;
  }

  if (!px) {
    // over-constrained: seed a guess and adjust the statement's sampled
    // argument points (plus the new point) globally
    Diagram trial = d;
    Vec2 guess{};
    int nguess = 0;
    for (const Spec& s : specs) {
      if (s.kind == Spec::points && !s.cands.empty()) {
        guess = guess + s.cands[0];
        ++nguess;
      } else if (s.kind != Spec::plane) {
        guess = guess + sample_spec(s, rng);
        ++nguess;
      }
    }
    guess = nguess ? guess / double(nguess) : Vec2{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::set<std::string> focus{x};
    {
      std::set<std::string> sampled = movable_points(d.plan);
      for (const CtorCall& part : stmt.parts)
        for (const std::string& p : part.points)
          if (sampled.count(p)) focus.insert(p);
    }
    // local ladder: the same deterministic attempt sequence whether the
    // statement arrives through build_diagram or through add_point
    Error last(Errc::infeasible_configuration, "adjustment failed");
    for (int local = 0; local < 4; ++local) {
      Diagram trial = d;
      trial.coords[x] = guess;
      trial.plan.push_back(stmt);
      Rng sub(mix_seed(d.seed,
                       fnv1a64(serialize(stmt)) ^ (trial.plan.size() * 31 + std::size_t(local))));
      if (local > 0) {
        double j = 0.15 * local;
        trial.coords[x] = guess + Vec2{sub.uniform(-j, j), sub.uniform(-j, j)};
      }
      try {
        trial = solve_plan(trial, {}, opt, sub, &focus, /*separation=*/true);
        double D2 = std::max(trial.diameter(), 1e-9);
        auto co = coincident_points(trial, trial.at(x), D2, opt, x);
        if (!co.empty()) {
          if (!stmt.allow_double)
            throw Error(Errc::coincides_with_existing,
                        "point '" + x + "' coincides with '" + co[0] + "'");
          for (const std::string& e : co)
            trial.merged.push_back({std::min(x, e), std::max(x, e)});
        }
        check_diagram_sane(trial, opt, {x});
        d = trial;
        return;
      } catch (const Error& e) {
        switch (e.code()) {
          case Errc::infeasible_configuration:
          case Errc::degenerate_configuration:
            last = e;
            continue;
          default:
            throw;
        }
      }
    }
    throw last;
  }

  auto co = coincident_points(d, *px, D, opt);
  d.coords[x] = *px;
  d.plan.push_back(stmt);
  if (!co.empty()) {
    if (!stmt.allow_double) {
      throw Error(Errc::coincides_with_existing,
                  "point '" + x + "' coincides with '" + co[0] + "'");
    }
    for (const std::string& e : co) d.merged.push_back({std::min(x, e), std::max(x, e)});
  }
  (void)in_build;
}

void verify_build(const Diagram& d, const BuildOptions& opt) {
  Residual r = residuals(d);
  if (r.value > opt.tol_construct)
    throw Error(Errc::infeasible_configuration,
                "construction residual " + format_double(r.value));
  auto groups = constructed_collinear_groups(d.plan);
  std::set<std::string> sampled = movable_points(d.plan);
  for (const auto& [name, v] : d.coords)
    if (degenerate_with(d, name, v, groups, opt, sampled))
      throw Error(Errc::degenerate_configuration, "collinear unconstrained triple");
}

}  // namespace

Diagram build_diagram(const Problem& p, std::uint64_t seed, const BuildOptions& opt) {
  Error last(Errc::infeasible_configuration, "no attempts made");
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    try {
      Diagram d;
      d.seed = seed;
      for (std::size_t i = 0; i < p.constructions.size(); ++i) {
        // restart 0 matches the add_point stream, so a built prefix extended
        // by add_point reproduces the same placements
        Rng rng(mix_seed(seed, std::uint64_t(restart) * 7919 + i));
        place_stmt(d, p.constructions[i], rng, opt, true);
      }
      verify_build(d, opt);
      return d;
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::infeasible_configuration:
        case Errc::degenerate_configuration:
        case Errc::coincides_with_existing:
          last = e;
          continue;
        default:
          throw;
      }
    }
  }
  throw last;
}

Diagram add_point(const Diagram& d, const ConstructionStmt& s, const BuildOptions& opt) {
  Diagram out = d;
  Rng rng(mix_seed(d.seed, d.plan.size()));
  place_stmt(out, s, rng, opt, false);
  Residual r = residuals(out);
  if (r.value > opt.tol_construct)
    throw Error(Errc::infeasible_configuration,
                "construction residual " + format_double(r.value));
  return out;
}

Diagram adjust_globally(const Diagram& d, const std::vector<Predicate>& extra,
                        const BuildOptions& opt) {
  if (extra.empty()) return d;
  for (const Predicate& q : extra) {
    validate_predicate(q);
    for (const std::string& n : q.args)
      if (!d.has(n)) throw Error(Errc::unknown_point, "unknown point '" + n + "'");
  }
  Rng rng(mix_seed(d.seed, 0xADED));
  Diagram out = solve_plan(d, extra, opt, rng);
  auto groups = constructed_collinear_groups(out.plan);
  for (const Predicate& q : extra)
    if (q.kind == PredKind::coll) groups.push_back({q.args.begin(), q.args.end()});
  std::set<std::string> sampled = movable_points(out.plan);
  for (const auto& [name, v] : out.coords)
    if (degenerate_with(out, name, v, groups, opt, sampled))
      throw Error(Errc::degenerate_configuration,
                  "adjustment forces a degenerate configuration");
  return out;
}

}  // namespace geo
