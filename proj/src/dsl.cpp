#include "geo/dsl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

namespace geo {

std::string format_double(double v) {
  std::array<char, 40> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

namespace {

struct PredInfo {
  const char* name;
  int min_arity;
  int max_arity;  // -1 = unbounded
};

// Order matches PredKind.
constexpr PredInfo kPredInfo[] = {
    {"coll", 3, -1}, {"para", 4, 4},    {"perp", 4, 4},    {"cong", 4, 4},
    {"eqangle", 8, 8}, {"eqratio", 8, 8}, {"cyclic", 4, -1}, {"circle", 4, 4},
    {"midp", 3, 3},  {"simtri", 6, 6},  {"contri", 6, 6},  {"idc", 2, 2},
};

struct CtorInfo {
  const char* name;
  int new_points;
  int point_args;
  int number_args;     // only `free` takes numbers (optional coordinates)
  bool standalone;     // cannot be combined with other parts
};

constexpr CtorInfo kCtorInfo[] = {
    {"triangle", 3, 0, 0, true},
    {"free", 1, 0, 2, true},  // 0 or 2 numbers
    {"on_line", 1, 2, 0, false},
    {"on_circle", 1, 2, 0, false},
    {"midpoint", 1, 2, 0, false},
    {"foot", 1, 3, 0, false},
    {"angle_bisector", 1, 3, 0, false},
    {"perp_bisector", 1, 2, 0, false},
    {"circumcenter", 1, 3, 0, false},
    {"incenter", 1, 3, 0, false},
    {"centroid", 1, 3, 0, false},
    {"reflect", 1, 3, 0, false},
    {"intersection_ll", 1, 4, 0, false},
    {"intersection_lc", 1, 4, 0, false},
    {"intersection_cc", 1, 4, 0, false},
    {"on_segment", 1, 2, 0, false},
};

}  // namespace

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::syntax_error: return "SyntaxError";
    case Errc::undefined_point: return "UndefinedPoint";
    case Errc::arity_error: return "ArityError";
    case Errc::duplicate_point: return "DuplicatePoint";
    case Errc::missing_tag: return "MissingTag";
    case Errc::multiple_tags: return "MultipleTags";
    case Errc::invariant_violation: return "InvariantViolation";
    case Errc::infeasible_configuration: return "InfeasibleConfiguration";
    case Errc::degenerate_configuration: return "DegenerateConfiguration";
    case Errc::unknown_point: return "UnknownPoint";
    case Errc::coincides_with_existing: return "CoincidesWithExisting";
    case Errc::not_linearizable: return "NotLinearizable";
    case Errc::inconsistent_system: return "InconsistentSystem";
    case Errc::turn_limit_exceeded: return "TurnLimitExceeded";
    case Errc::not_solved: return "NotSolved";
    case Errc::exhausted_retries: return "ExhaustedRetries";
    case Errc::timeout: return "Timeout";
    case Errc::config_error: return "ConfigError";
    case Errc::io_error: return "IoError";
  }
  return "Error";
}

const char* pred_name(PredKind k) { return kPredInfo[int(k)].name; }

std::optional<PredKind> pred_from_name(std::string_view s) {
  for (int i = 0; i < int(std::size(kPredInfo)); ++i)
    if (s == kPredInfo[i].name) return PredKind(i);
  return std::nullopt;
}

const char* ctor_name(Ctor c) { return kCtorInfo[int(c)].name; }

std::optional<Ctor> ctor_from_name(std::string_view s) {
  for (int i = 0; i < int(std::size(kCtorInfo)); ++i)
    if (s == kCtorInfo[i].name) return Ctor(i);
  return std::nullopt;
}

const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::build: return "build";
    case ActionKind::add: return "add";
    case ActionKind::propose: return "propose";
  }
  return "?";
}

ActionKind action_kind(const Action& a) {
  if (std::holds_alternative<BuildAction>(a)) return ActionKind::build;
  if (std::holds_alternative<AddAction>(a)) return ActionKind::add;
  return ActionKind::propose;
}

bool valid_point_name(std::string_view s) {
  if (s.empty() || !std::islower(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::islower(c) || std::isdigit(c) || c == '_';
  });
}

// Distinctness is required within each line/segment/triangle slot; repeats
// across slots are legal (e.g. cong a b a c).
void validate_predicate(const Predicate& p) {
  const PredInfo& info = kPredInfo[int(p.kind)];
  int n = int(p.args.size());
  if (n < info.min_arity || (info.max_arity >= 0 && n > info.max_arity))
    throw Error(Errc::arity_error,
                std::string(info.name) + " expects " + std::to_string(info.min_arity) +
                    (info.max_arity < 0 ? "+" : info.max_arity == info.min_arity
                                                    ? ""
                                                    : ".." + std::to_string(info.max_arity)) +
                    " points, got " + std::to_string(n));
  auto slot_distinct = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i)
      for (int j = i + 1; j < hi; ++j)
        if (p.args[i] == p.args[j])
          throw Error(Errc::arity_error, std::string(info.name) + ": repeated point '" +
                                             p.args[i] + "' within one slot");
  };
  switch (p.kind) {
    case PredKind::coll:
    case PredKind::cyclic:
    case PredKind::circle:
    case PredKind::idc:
      slot_distinct(0, n);
      break;
    case PredKind::para:
    case PredKind::perp:
    case PredKind::cong:
    case PredKind::eqangle:
    case PredKind::eqratio:
      for (int i = 0; i + 1 < n; i += 2) slot_distinct(i, i + 2);
      break;
    case PredKind::midp:
      slot_distinct(1, 3);
      break;
    case PredKind::simtri:
    case PredKind::contri:
      slot_distinct(0, 3);
      slot_distinct(3, 6);
      break;
  }
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

struct Token {
  enum Kind { ident, number, punct, end } kind = end;
  std::string text;
  double value = 0;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& expected) const {
    throw Error(Errc::syntax_error,
                "expected " + expected + " at offset " + std::to_string(tok_.pos) +
                    (tok_.kind == Token::end ? " (end of input)" : ", got '" + tok_.text + "'"),
                tok_.pos);
  }

 private:
  void advance() {
    while (i_ < src_.size()) {
      char c = src_[i_];
      if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') ++i_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++i_;
      } else {
        break;
      }
    }
    tok_ = Token{};
    tok_.pos = i_;
    if (i_ >= src_.size()) {
      tok_.kind = Token::end;
      return;
    }
    char c = src_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
        ++j;
      tok_.kind = Token::ident;
      tok_.text = std::string(src_.substr(i_, j - i_));
      for (char& ch : tok_.text) ch = char(std::tolower(static_cast<unsigned char>(ch)));
      i_ = j;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' ||
        (c == '.' && i_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      const char* begin = src_.data() + i_;
      const char* end = src_.data() + src_.size();
      double v = 0;
      auto [p, ec] = std::from_chars(begin, end, v);
      if (ec == std::errc() && p != begin) {
        tok_.kind = Token::number;
        tok_.text = std::string(begin, p);
        tok_.value = v;
        i_ += std::size_t(p - begin);
        return;
      }
    }
    tok_.kind = Token::punct;
    tok_.text = std::string(1, c);
    ++i_;
  }

  std::string_view src_;
  std::size_t i_ = 0;
  Token tok_;
};

bool is_punct(const Token& t, char c) { return t.kind == Token::punct && t.text[0] == c; }

std::string take_point(Lexer& lx) {
  if (lx.peek().kind != Token::ident) lx.fail("point name");
  Token t = lx.take();
  if (!valid_point_name(t.text))
    throw Error(Errc::syntax_error, "invalid point name '" + t.text + "'", t.pos);
  return t.text;
}

Predicate parse_predicate_tokens(Lexer& lx, const std::set<std::string>* defined) {
  if (lx.peek().kind != Token::ident) lx.fail("predicate name");
  Token head = lx.take();
  auto kind = pred_from_name(head.text);
  if (!kind) throw Error(Errc::syntax_error, "unknown predicate '" + head.text + "'", head.pos);
  Predicate p;
  p.kind = *kind;
  while (lx.peek().kind == Token::ident) {
    Token t = lx.take();
    if (!valid_point_name(t.text))
      throw Error(Errc::syntax_error, "invalid point name '" + t.text + "'", t.pos);
    if (defined && !defined->count(t.text))
      throw Error(Errc::undefined_point, "undefined point '" + t.text + "'", t.pos);
    p.args.push_back(t.text);
  }
  validate_predicate(p);
  return p;
}

CtorCall parse_ctor_call(Lexer& lx, const std::set<std::string>* defined) {
  if (lx.peek().kind != Token::ident) lx.fail("constructor name");
  Token head = lx.take();
  auto fn = ctor_from_name(head.text);
  if (!fn) throw Error(Errc::syntax_error, "unknown constructor '" + head.text + "'", head.pos);
  CtorCall call;
  call.fn = *fn;
  const CtorInfo& info = kCtorInfo[int(*fn)];
  while (lx.peek().kind == Token::ident || lx.peek().kind == Token::number) {
    Token t = lx.take();
    if (t.kind == Token::number) {
      call.numbers.push_back(t.value);
    } else {
      if (!valid_point_name(t.text))
        throw Error(Errc::syntax_error, "invalid point name '" + t.text + "'", t.pos);
      if (defined && !defined->count(t.text))
        throw Error(Errc::undefined_point, "undefined point '" + t.text + "'", t.pos);
      if (!call.numbers.empty())
        throw Error(Errc::syntax_error, "point argument after numeric argument", t.pos);
      call.points.push_back(t.text);
    }
  }
  if (int(call.points.size()) != info.point_args)
    throw Error(Errc::arity_error, std::string(info.name) + " expects " +
                                       std::to_string(info.point_args) + " point args, got " +
                                       std::to_string(call.points.size()),
                head.pos);
  if (!(call.numbers.empty() ||
        (int(call.numbers.size()) == info.number_args && info.number_args > 0)))
    throw Error(Errc::arity_error,
                std::string(info.name) + ": unexpected numeric arguments", head.pos);
  return call;
}

// `defined` == nullptr defers point-scope checking to the caller (used for
// <add> payloads, where argument points live in the session, not the text).
ConstructionStmt parse_stmt(Lexer& lx, std::set<std::string>* defined) {
  ConstructionStmt stmt;
  if (is_punct(lx.peek(), '!')) {
    lx.take();
    stmt.allow_double = true;
  }
  std::vector<std::pair<std::string, std::size_t>> names;
  while (lx.peek().kind == Token::ident) {
    Token t = lx.take();
    if (!valid_point_name(t.text))
      throw Error(Errc::syntax_error, "invalid point name '" + t.text + "'", t.pos);
    names.emplace_back(t.text, t.pos);
  }
  if (names.empty()) lx.fail("point name");
  if (!is_punct(lx.peek(), '=')) lx.fail("'='");
  lx.take();
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i].first == names[j].first)
        throw Error(Errc::duplicate_point, "point '" + names[i].first + "' declared twice",
                    names[j].second);
  for (auto& [name, pos] : names) {
    if (defined && defined->count(name) && !stmt.allow_double)
      throw Error(Errc::duplicate_point, "point '" + name + "' already defined", pos);
    stmt.new_points.push_back(name);
  }
  stmt.parts.push_back(parse_ctor_call(lx, defined));
  while (is_punct(lx.peek(), ',')) {
    lx.take();
    stmt.parts.push_back(parse_ctor_call(lx, defined));
  }
  for (const CtorCall& part : stmt.parts) {
    const CtorInfo& info = kCtorInfo[int(part.fn)];
    if (int(stmt.new_points.size()) != info.new_points)
      throw Error(Errc::arity_error, std::string(info.name) + " defines " +
                                         std::to_string(info.new_points) + " point(s), got " +
                                         std::to_string(stmt.new_points.size()));
    if (stmt.parts.size() > 1 && info.standalone)
      throw Error(Errc::syntax_error,
                  std::string(info.name) + " cannot be combined with other constraints");
  }
  if (defined)
    for (auto& [name, pos] : names) defined->insert(name);
  return stmt;
}

}  // namespace

Problem parse_problem(std::string_view text) {
  Lexer lx(text);
  Problem p;
  std::set<std::string> defined;
  p.constructions.push_back(parse_stmt(lx, &defined));
  while (is_punct(lx.peek(), ';')) {
    lx.take();
    p.constructions.push_back(parse_stmt(lx, &defined));
  }
  if (!is_punct(lx.peek(), '?')) lx.fail("'?'");
  lx.take();
  p.goals.push_back(parse_predicate_tokens(lx, &defined));
  while (is_punct(lx.peek(), ';')) {
    lx.take();
    p.goals.push_back(parse_predicate_tokens(lx, &defined));
  }
  if (lx.peek().kind != Token::end) lx.fail("end of input");
  return p;
}

std::vector<ConstructionStmt> parse_stmts(std::string_view text,
                                          const std::vector<std::string>& known) {
  Lexer lx(text);
  std::set<std::string> defined(known.begin(), known.end());
  std::vector<ConstructionStmt> out;
  out.push_back(parse_stmt(lx, &defined));
  while (is_punct(lx.peek(), ';')) {
    lx.take();
    out.push_back(parse_stmt(lx, &defined));
  }
  if (lx.peek().kind != Token::end) lx.fail("end of input");
  return out;
}

Predicate parse_predicate(std::string_view text) {
  Lexer lx(text);
  Predicate p = parse_predicate_tokens(lx, nullptr);
  if (lx.peek().kind != Token::end) lx.fail("end of input");
  return p;
}

// ---------------------------------------------------------------------------
// Actions

Action parse_action(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = char(std::tolower(static_cast<unsigned char>(c)));

  struct TagHit {
    ActionKind kind;
    std::size_t open_pos, payload_begin, payload_end;
  };
  std::vector<TagHit> hits;
  const std::pair<ActionKind, const char*> tags[] = {
      {ActionKind::build, "build"}, {ActionKind::add, "add"}, {ActionKind::propose, "propose"}};
  for (auto [kind, name] : tags) {
    std::string open = std::string("<") + name + ">";
    std::string close = std::string("</") + name + ">";
    std::size_t from = 0;
    while (true) {
      std::size_t o = lower.find(open, from);
      if (o == std::string::npos) break;
      std::size_t c = lower.find(close, o + open.size());
      if (c == std::string::npos)
        throw Error(Errc::syntax_error, "unclosed tag <" + std::string(name) + ">", o);
      hits.push_back({kind, o, o + open.size(), c});
      from = c + close.size();
    }
  }
  if (hits.empty()) throw Error(Errc::missing_tag, "no <build>/<add>/<propose> tag found");
  if (hits.size() > 1) throw Error(Errc::multiple_tags, "more than one action tag found");

  const TagHit& h = hits[0];
  std::string payload = lower.substr(h.payload_begin, h.payload_end - h.payload_begin);
  switch (h.kind) {
    case ActionKind::build:
      return BuildAction{parse_problem(payload)};
    case ActionKind::add: {
      // Argument points live in the session, so scope checking is deferred
      // to the engine when the action is applied.
      Lexer lx(payload);
      AddAction a;
      a.stmts.push_back(parse_stmt(lx, nullptr));
      while (is_punct(lx.peek(), ';')) {
        lx.take();
        a.stmts.push_back(parse_stmt(lx, nullptr));
      }
      if (lx.peek().kind != Token::end) lx.fail("end of input");
      return a;
    }
    case ActionKind::propose:
      return ProposeAction{parse_predicate(payload)};
  }
  throw Error(Errc::missing_tag, "unreachable");
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize(const Predicate& p) {
  std::string out = pred_name(p.kind);
  for (const std::string& a : p.args) {
    out += ' ';
    out += a;
  }
  return out;
}

std::string serialize(const CtorCall& c) {
  std::string out = ctor_name(c.fn);
  for (const std::string& a : c.points) {
    out += ' ';
    out += a;
  }
  for (double v : c.numbers) {
    out += ' ';
    out += format_double(v);
  }
  return out;
}

std::string serialize(const ConstructionStmt& s) {
  if (s.new_points.empty() || s.parts.empty())
    throw Error(Errc::invariant_violation, "empty construction statement");
  std::string out;
  if (s.allow_double) out += "! ";
  for (std::size_t i = 0; i < s.new_points.size(); ++i) {
    if (i) out += ' ';
    out += s.new_points[i];
  }
  out += " = ";
  for (std::size_t i = 0; i < s.parts.size(); ++i) {
    if (i) out += ", ";
    out += serialize(s.parts[i]);
  }
  return out;
}

std::string serialize(const Problem& p) {
  if (p.constructions.empty())
    throw Error(Errc::invariant_violation, "problem without constructions is unserializable");
  if (p.goals.empty())
    throw Error(Errc::invariant_violation, "problem without goals is unserializable");
  std::string out;
  for (std::size_t i = 0; i < p.constructions.size(); ++i) {
    if (i) out += "; ";
    out += serialize(p.constructions[i]);
  }
  out += " ? ";
  for (std::size_t i = 0; i < p.goals.size(); ++i) {
    if (i) out += "; ";
    out += serialize(p.goals[i]);
  }
  return out;
}

std::string serialize_action(const Action& a) {
  if (const auto* b = std::get_if<BuildAction>(&a))
    return "<build> " + serialize(b->problem) + " </build>";
  if (const auto* ad = std::get_if<AddAction>(&a)) {
    std::string payload;
    for (std::size_t i = 0; i < ad->stmts.size(); ++i) {
      if (i) payload += "; ";
      payload += serialize(ad->stmts[i]);
    }
    return "<add> " + payload + " </add>";
  }
  return "<propose> " + serialize(std::get<ProposeAction>(a).goal) + " </propose>";
}

}  // namespace geo
