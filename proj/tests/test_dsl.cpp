#include "doctest.h"

#include "geo/dsl.hpp"

using namespace geo;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::syntax_error;
}

// Purely syntactic random problem generator for round-trip properties.
Problem random_problem(Rng& rng) {
  static const Ctor pool[] = {Ctor::on_line, Ctor::on_circle, Ctor::midpoint,
                              Ctor::foot,    Ctor::reflect,   Ctor::intersection_ll,
                              Ctor::on_segment};
  static const int arity[] = {2, 2, 2, 3, 3, 4, 2};
  Problem p;
  std::vector<std::string> pts = {"a", "b", "c"};
  ConstructionStmt tri;
  tri.new_points = pts;
  tri.parts.push_back({Ctor::triangle, {}, {}});
  p.constructions.push_back(tri);
  int extra = 1 + int(rng.below(4));
  for (int i = 0; i < extra; ++i) {
    std::size_t k = rng.below(std::size(pool));
    ConstructionStmt s;
    s.new_points = {std::string(1, char('d' + i))};
    s.allow_double = rng.u01() < 0.2;
    CtorCall call;
    call.fn = pool[k];
    for (int j = 0; j < arity[k]; ++j) {
      std::string q;
      do {
        q = pts[rng.below(pts.size())];
      } while (std::find(call.points.begin(), call.points.end(), q) != call.points.end());
      call.points.push_back(q);
    }
    s.parts.push_back(call);
    if (rng.u01() < 0.25) {
      CtorCall extra_part;
      extra_part.fn = Ctor::on_line;
      extra_part.points = {pts[0], pts[1]};
      s.parts.push_back(extra_part);
    }
    p.constructions.push_back(s);
    pts.push_back(s.new_points[0]);
  }
  Predicate g;
  g.kind = PredKind::cong;
  g.args = {pts[0], pts[1], pts[0], pts[2]};
  p.goals.push_back(g);
  return p;
}

}  // namespace

TEST_SUITE("dsl") {

TEST_CASE("parses a one-statement problem") {
  Problem p = parse_problem("a b c = triangle ? cong a b a c");
  REQUIRE(p.constructions.size() == 1);
  REQUIRE(p.goals.size() == 1);
  CHECK(p.constructions[0].new_points == std::vector<std::string>{"a", "b", "c"});
  CHECK(p.constructions[0].parts[0].fn == Ctor::triangle);
  CHECK(p.goals[0] == Predicate{PredKind::cong, {"a", "b", "a", "c"}});
}

TEST_CASE("parses multiple statements and goals") {
  Problem p = parse_problem("a b c = triangle; m = midpoint a b ? coll a m b; cong m a m b");
  CHECK(p.constructions.size() == 2);
  CHECK(p.goals.size() == 2);
}

TEST_CASE("forward references are rejected") {
  CHECK(code_of([] { parse_problem("m = midpoint a b ? coll a m b"); }) ==
        Errc::undefined_point);
}

TEST_CASE("duplicate names need the double-point prefix") {
  CHECK(code_of([] {
          parse_problem("a b c = triangle; a = midpoint b c ? coll a b c");
        }) == Errc::duplicate_point);
  // with ! the statement reads as an assertion about the existing point
  Problem p = parse_problem("a b c = triangle; m = midpoint b c; ! m = foot a b c ? coll a b c");
  CHECK(p.constructions.size() == 3);
  CHECK(p.constructions[2].allow_double);
}

TEST_CASE("arity errors") {
  CHECK(code_of([] { parse_problem("a b c = triangle ? cong a b a"); }) == Errc::arity_error);
  CHECK(code_of([] { parse_problem("a b = triangle ? cong a b b a"); }) == Errc::arity_error);
  CHECK(code_of([] {
          parse_problem("a b c = triangle; m = midpoint a ? coll a m b");
        }) == Errc::arity_error);
}

TEST_CASE("slot distinctness within a predicate") {
  CHECK_THROWS_AS((void)parse_problem("a b c = triangle ? cong a a b c"), Error);
  CHECK_NOTHROW((void)parse_problem("a b c = triangle ? cong a b a c"));
}

TEST_CASE("syntax error reports a position inside the offending statement") {
  std::string text = "a b c = triangle; m = midpointt a b ? coll a m b";
  std::size_t stmt2 = text.find("m =");
  try {
    parse_problem(text);
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::syntax_error);
    CHECK(e.position() >= stmt2);
    CHECK(e.position() < text.size());
  }
}

TEST_CASE("input is case folded") {
  Problem p = parse_problem("A B C = Triangle ? Cong A b a C");
  CHECK(p.goals[0].args == std::vector<std::string>{"a", "b", "a", "c"});
}

TEST_CASE("comments are skipped") {
  Problem p = parse_problem("# header\na b c = triangle # trailing\n? cong a b a c");
  CHECK(p.constructions.size() == 1);
}

TEST_CASE("explicit coordinates on free points round-trip") {
  Problem p = parse_problem("a = free 0 0; b = free 2 0; m = midpoint a b ? midp m a b");
  CHECK(p.constructions[1].parts[0].numbers == std::vector<double>{2.0, 0.0});
  CHECK(parse_problem(serialize(p)) == p);
}

TEST_CASE("multi-part statements round-trip") {
  Problem p = parse_problem(
      "a b c = triangle; d = free; t = on_segment a c, angle_bisector a b c, "
      "angle_bisector a d c ? coll t a c");
  CHECK(p.constructions[2].parts.size() == 3);
  CHECK(parse_problem(serialize(p)) == p);
}

TEST_CASE("double-point prefix is retained by serialization") {
  Problem p = parse_problem("a b c = triangle; d = free; ! x = intersection_ll a b c d ? coll x a b");
  CHECK(serialize(p).find("! x =") != std::string::npos);
  CHECK(parse_problem(serialize(p)) == p);
}

TEST_CASE("serialization of invalid problems is rejected") {
  Problem p = parse_problem("a b c = triangle ? cong a b a c");
  p.goals.clear();
  CHECK(code_of([&] { (void)serialize(p); }) == Errc::invariant_violation);
}

TEST_CASE("round-trip property over random problems") {
  Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    Problem p = random_problem(rng);
    CAPTURE(serialize(p));
    CHECK(parse_problem(serialize(p)) == p);
  }
}

TEST_CASE("identical bytes produce identical trees") {
  std::string text = "a b c = triangle; m = midpoint a b ? coll a m b";
  CHECK(parse_problem(text) == parse_problem(text));
}

TEST_CASE("action tags") {
  Action a = parse_action("thinking text <add> d = foot a b c </add> more text");
  REQUIRE(std::holds_alternative<AddAction>(a));
  CHECK(std::get<AddAction>(a).stmts.size() == 1);
  CHECK(action_kind(a) == ActionKind::add);

  Action b = parse_action("<propose> eqangle a b a c d b d c </propose>");
  REQUIRE(std::holds_alternative<ProposeAction>(b));
  CHECK(std::get<ProposeAction>(b).goal.kind == PredKind::eqangle);

  Action c = parse_action("<build> a b c = triangle ? cong a b a c </build>");
  CHECK(std::holds_alternative<BuildAction>(c));
}

TEST_CASE("action tag errors") {
  CHECK(code_of([] { (void)parse_action("no tag here"); }) == Errc::missing_tag);
  CHECK(code_of([] {
          (void)parse_action("<add> d = foot a b c </add> <propose> coll a b c </propose>");
        }) == Errc::multiple_tags);
  CHECK(code_of([] { (void)parse_action("<add> d = foot a b c"); }) == Errc::syntax_error);
  CHECK(code_of([] { (void)parse_action("<propose> cong a b </propose>"); }) ==
        Errc::arity_error);
}

TEST_CASE("action serialization round-trips") {
  for (const char* text :
       {"<add> d = foot a b c; e = midpoint a b </add>", "<propose> cong a b a c </propose>",
        "<build> a b c = triangle ? cong a b a c </build>"}) {
    Action a = parse_action(text);
    CHECK(parse_action(serialize_action(a)) == a);
  }
}

}  // TEST_SUITE
