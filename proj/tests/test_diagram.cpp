#include "doctest.h"

#include "geo/diagram.hpp"

using namespace geo;

TEST_SUITE("diagram") {

TEST_CASE("midpoint formula with pinned coordinates") {
  Problem p = parse_problem("a = free 0 0; b = free 2 0; m = midpoint a b ? midp m a b");
  Diagram d = build_diagram(p, 1);
  CHECK(d.at("m").x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.at("m").y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("seed determinism is bit exact") {
  Problem p = parse_problem(
      "a b c = triangle; d = foot a b c; e = on_circle a b; m = midpoint d e ? coll d b c");
  Diagram d1 = build_diagram(p, 42);
  Diagram d2 = build_diagram(p, 42);
  for (const auto& [name, v] : d1.coords) {
    CHECK(v.x == d2.at(name).x);
    CHECK(v.y == d2.at(name).y);
  }
  Diagram d3 = build_diagram(p, 43);
  bool same = true;
  for (const auto& [name, v] : d1.coords)
    if (v.x != d3.at(name).x || v.y != d3.at(name).y) same = false;
  CHECK_FALSE(same);
}

TEST_CASE("construction residuals stay below tolerance") {
  const char* texts[] = {
      "a b c = triangle; o = circumcenter a b c; i = incenter a b c; g = centroid a b c ? coll a b c",
      "a = free; b = free; x = perp_bisector a b; f = foot x a b; r = reflect a x f ? coll a b f",
      "a b c = triangle; t = on_segment b c, angle_bisector b a c ? coll t b c",
  };
  for (const char* text : texts) {
    Diagram d = build_diagram(parse_problem(text), 5);
    Residual r = residuals(d);
    CAPTURE(text);
    CHECK(r.value < 1e-8);
    for (const auto& [id, v] : r.per_constraint) CHECK(v < 1e-8);
  }
}

TEST_CASE("check_predicate basics") {
  Diagram d;
  d.coords = {{"a", {0, 0}}, {"b", {1, 1}}, {"c", {2, 2}}, {"p", {1, 0}}, {"q", {0, 1}}};
  d.seed = 0;
  CHECK(check_predicate(d, parse_predicate("coll a b c")));
  CHECK(check_predicate(d, parse_predicate("perp a p a q")));
  CHECK_FALSE(check_predicate(d, parse_predicate("perp a b a c")));
  // cong within 1e-3 relative is false at the default tolerance
  Diagram e;
  e.coords = {{"a", {0, 0}}, {"b", {1, 0}}, {"c", {0, 1}}, {"d", {1.001, 1}}};
  CHECK_FALSE(check_predicate(e, parse_predicate("cong a b c d")));
  CHECK(check_predicate(e, parse_predicate("cong a b a b")));
  CHECK_THROWS_AS((void)check_predicate(e, parse_predicate("cong a b c z")), Error);
}

TEST_CASE("an infeasible conjunction is reported") {
  // the midpoint of ab sits at half the radius of circle(a, through b)
  Problem p = parse_problem("a = free; b = free; m = midpoint a b, on_circle a b ? coll a m b");
  CHECK_THROWS_WITH_AS((void)build_diagram(p, 3), doctest::Contains("residual"), Error);
}

TEST_CASE("adjust_globally identity and satisfiable extras") {
  Problem p = parse_problem("a b c = triangle ? coll a b c");
  Diagram d = build_diagram(p, 7);
  Diagram same = adjust_globally(d, {});
  CHECK(same.coords.at("a").x == d.at("a").x);

  std::vector<Predicate> extra = {parse_predicate("cong a b a c"),
                                  parse_predicate("perp a b a c")};
  Diagram adj = adjust_globally(d, extra);
  Residual r = residuals(adj, extra);
  CHECK(r.value < 1e-8);
  for (const Predicate& q : extra) CHECK(check_predicate(adj, q));
}

TEST_CASE("adjust_globally rejects forced degeneracy") {
  Problem p = parse_problem("a b c = triangle ? cong a b a c");
  Diagram d = build_diagram(p, 7);
  CHECK_THROWS_AS((void)adjust_globally(d, {parse_predicate("coll a b c")}), Error);
  try {
    (void)adjust_globally(d, {parse_predicate("coll a b c")});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_configuration);
  }
}

TEST_CASE("double points: landing on an existing point") {
  // intersect the same two lines twice: the second intersection lands on e
  const char* base =
      "a = free 0 0; b = free 2 1; c = free 0 1; d = free 2 0; e = intersection_ll a b c d";
  Problem with_bang = parse_problem(std::string(base) + "; ! x = intersection_ll a b c d ? idc x e");
  Diagram d1 = build_diagram(with_bang, 5);
  REQUIRE(d1.merged.size() == 1);
  CHECK(d1.merged[0] == std::pair<std::string, std::string>{"e", "x"});
  CHECK(check_predicate(d1, parse_predicate("idc x e")));

  Problem without = parse_problem(std::string(base) + "; x = intersection_ll a b c d ? idc x e");
  try {
    (void)build_diagram(without, 5);
    FAIL("expected CoincidesWithExisting");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::coincides_with_existing);
  }
}

TEST_CASE("a foot on a generic triangle is a fresh exact point") {
  Problem p = parse_problem("a b c = triangle; d = foot a b c ? coll d b c");
  Diagram d = build_diagram(p, 11);
  CHECK(d.merged.empty());
  Vec2 A = d.at("a"), B = d.at("b"), C = d.at("c"), D = d.at("d");
  CHECK(std::abs((D - B).cross(C - B)) < 1e-9 * d.diameter() * d.diameter());
  CHECK(std::abs((D - A).dot(C - B)) < 1e-9 * d.diameter() * d.diameter());
}

TEST_CASE("add_point continues a diagram deterministically") {
  Problem p = parse_problem("a b c = triangle ? cong a b a c");
  Diagram d = build_diagram(p, 2);
  auto stmts = parse_stmts("m = midpoint a b", {"a", "b", "c"});
  Diagram d1 = add_point(d, stmts[0]);
  Diagram d2 = add_point(d, stmts[0]);
  CHECK(d1.at("m").x == d2.at("m").x);
  CHECK(d1.at("m").y == d2.at("m").y);
  CHECK(d1.plan.size() == 2);
}

TEST_CASE("sampled points avoid unconstrained collinearity") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Problem p = parse_problem("a b c = triangle; d = free; e = free ? cong a b a c");
    Diagram d = build_diagram(p, seed);
    std::vector<std::string> names = {"a", "b", "c", "d", "e"};
    double D = d.diameter();
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j)
        for (std::size_t k = j + 1; k < names.size(); ++k) {
          Vec2 u = d.at(names[j]) - d.at(names[i]);
          Vec2 v = d.at(names[k]) - d.at(names[i]);
          CHECK(std::abs(u.cross(v)) / (D * D) >= 1e-4);
        }
  }
}

TEST_CASE("json export shape") {
  Problem p = parse_problem("a = free 0 0; b = free 1 0 ? cong a b a b");
  Diagram d = build_diagram(p, 9);
  auto j = d.to_json();
  CHECK(j.contains("points"));
  CHECK(j.contains("merged"));
  CHECK(j.contains("seed"));
  CHECK(j["points"]["a"][0] == 0.0);
  CHECK(j["seed"] == 9);
}

}  // TEST_SUITE
