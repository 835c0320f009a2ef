#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netmo/common.hpp"
#include "netmo/csv.hpp"
#include "netmo/gtypes.hpp"
#include "netmo/motion.hpp"
#include "netmo/network.hpp"
#include "netmo/routing.hpp"
#include "netmo/store.hpp"
#include "netmo/timeutil.hpp"
#include "netmo/wkt.hpp"

namespace netmo::moql {

// ---- lexer ------------------------------------------------------------------

struct Token {
  enum Kind { kIdent, kInt, kFloat, kString, kLParen, kRParen, kComma, kEnd };
  Kind kind = kEnd;
  std::string text;
  long long ival = 0;
  double fval = 0.0;
  int line = 1;
  int col = 1;
};

[[noreturn]] inline void syntax_error(int line, int col, const std::string& msg) {
  fail(Err::kSyntaxError,
       "line " + std::to_string(line) + " col " + std::to_string(col) + ": " + msg);
}

[[noreturn]] inline void type_error(int line, int col, const std::string& msg) {
  fail(Err::kTypeError,
       "line " + std::to_string(line) + " col " + std::to_string(col) + ": " + msg);
}

inline std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  const auto peek = [&](std::size_t k = 0) -> char {
    return i + k < text.size() ? text[i + k] : '\0';
  };
  const auto advance = [&]() {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance();
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string s;
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                                 text[i] == '_')) {
        s += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
        advance();
      }
      t.kind = Token::kIdent;
      t.text = std::move(s);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      std::string s;
      bool is_float = false;
      if (c == '-') {
        s += '-';
        advance();
      }
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        s += peek();
        advance();
      }
      if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
        is_float = true;
        s += '.';
        advance();
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
          s += peek();
          advance();
        }
      }
      if (peek() == 'e' || peek() == 'E') {
        std::size_t save = i;
        std::string exp;
        exp += peek();
        advance();
        if (peek() == '+' || peek() == '-') {
          exp += peek();
          advance();
        }
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
          while (std::isdigit(static_cast<unsigned char>(peek()))) {
            exp += peek();
            advance();
          }
          s += exp;
          is_float = true;
        } else {
          // not an exponent after all; rewind is safe because only
          // column state moved within one line
          col -= static_cast<int>(i - save);
          i = save;
        }
      }
      t.text = s;
      try {
        if (is_float) {
          t.kind = Token::kFloat;
          t.fval = parse_double(s);
        } else {
          t.kind = Token::kInt;
          t.ival = parse_int(s);
        }
      } catch (const EngineError&) {
        syntax_error(t.line, t.col, "malformed number '" + s + "'");
      }
    } else if (c == '"') {
      advance();
      std::string s;
      bool closed = false;
      while (i < text.size()) {
        if (text[i] == '"') {
          if (peek(1) == '"') {
            s += '"';
            advance();
            advance();
            continue;
          }
          advance();
          closed = true;
          break;
        }
        s += text[i];
        advance();
      }
      if (!closed) syntax_error(t.line, t.col, "unterminated string literal");
      t.kind = Token::kString;
      t.text = std::move(s);
    } else if (c == '(') {
      t.kind = Token::kLParen;
      t.text = "(";
      advance();
    } else if (c == ')') {
      t.kind = Token::kRParen;
      t.text = ")";
      advance();
    } else if (c == ',') {
      t.kind = Token::kComma;
      t.text = ",";
      advance();
    } else {
      syntax_error(line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Token::kEnd;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

// ---- AST --------------------------------------------------------------------

struct Expr {
  enum Kind { kCall, kInt, kFloat, kString };
  Kind kind = kInt;
  std::string name;  ///< call name, lowercased
  std::vector<Expr> args;
  long long ival = 0;
  double fval = 0.0;
  std::string sval;
  int line = 1;
  int col = 1;

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case kCall:
        return a.name == b.name && a.args == b.args;
      case kInt:
        return a.ival == b.ival;
      case kFloat:
        return a.fval == b.fval;
      case kString:
        return a.sval == b.sval;
    }
    return false;
  }
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Expr parse_query() {
    Expr e = parse_expr();
    if (cur().kind != Token::kEnd) {
      syntax_error(cur().line, cur().col, "expected end of query, got '" + cur().text + "'");
    }
    return e;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  void next() { ++pos_; }

  Expr parse_expr() {
    const Token& t = cur();
    Expr e;
    e.line = t.line;
    e.col = t.col;
    switch (t.kind) {
      case Token::kInt:
        e.kind = Expr::kInt;
        e.ival = t.ival;
        next();
        return e;
      case Token::kFloat:
        e.kind = Expr::kFloat;
        e.fval = t.fval;
        next();
        return e;
      case Token::kString:
        e.kind = Expr::kString;
        e.sval = t.text;
        next();
        return e;
      case Token::kIdent: {
        e.kind = Expr::kCall;
        e.name = t.text;
        next();
        if (cur().kind != Token::kLParen) {
          syntax_error(cur().line, cur().col, "expected '(' after '" + e.name + "'");
        }
        next();
        if (cur().kind != Token::kRParen) {
          e.args.push_back(parse_expr());
          while (cur().kind == Token::kComma) {
            next();
            e.args.push_back(parse_expr());
          }
        }
        if (cur().kind != Token::kRParen) {
          syntax_error(cur().line, cur().col,
                       "expected ',' or ')', got '" + cur().text + "'");
        }
        next();
        return e;
      }
      default:
        syntax_error(t.line, t.col,
                     "expected a function call or literal" +
                         (t.kind == Token::kEnd ? std::string(", got end of input")
                                                : ", got '" + t.text + "'"));
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline Expr parse(const std::string& text) { return Parser(lex(text)).parse_query(); }

inline std::string quote_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';  // escape by doubling
    out += c;
  }
  out += '"';
  return out;
}

/// Canonical pretty-print: lowercase names, ", " separators, shortest
/// round-trip numbers.
inline std::string print(const Expr& e) {
  switch (e.kind) {
    case Expr::kInt:
      return std::to_string(e.ival);
    case Expr::kFloat: {
      // Keep the literal lexing as a float when the shortest form looks
      // integral, so printing is a parser fixpoint.
      std::string s = fmt_double(e.fval);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
    case Expr::kString:
      return quote_string(e.sval);
    case Expr::kCall: {
      std::string out = e.name + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += print(e.args[i]);
      }
      out += ')';
      return out;
    }
  }
  return {};
}

// ---- type checking ----------------------------------------------------------

enum class Ty {
  kInt,
  kFloat,
  kBool,
  kString,
  kInstant,
  kPoint,
  kLines,
  kGPoint,
  kGLine,
  kPeriods,
  kIntime,
  kMGPoint,
};

inline const char* ty_name(Ty t) {
  switch (t) {
    case Ty::kInt: return "int";
    case Ty::kFloat: return "float";
    case Ty::kBool: return "bool";
    case Ty::kString: return "string";
    case Ty::kInstant: return "instant";
    case Ty::kPoint: return "point";
    case Ty::kLines: return "lines";
    case Ty::kGPoint: return "gpoint";
    case Ty::kGLine: return "gline";
    case Ty::kPeriods: return "periods";
    case Ty::kIntime: return "intime";
    case Ty::kMGPoint: return "mgpoint";
  }
  return "?";
}

struct Sig {
  std::vector<Ty> args;
  Ty ret;
};

/// Every network-algebra operation plus the value constructors, keyed by the
/// lowercase MOQL name.
inline const std::map<std::string, std::vector<Sig>>& function_table() {
  static const std::map<std::string, std::vector<Sig>> table = {
      {"mo", {{{Ty::kInt}, Ty::kMGPoint}}},
      {"gline_named", {{{Ty::kString}, Ty::kGLine}}},
      {"gpoint_named", {{{Ty::kString}, Ty::kGPoint}}},
      {"periods", {{{Ty::kInstant, Ty::kInstant}, Ty::kPeriods}}},
      {"point", {{{Ty::kFloat, Ty::kFloat}, Ty::kPoint}}},
      {"in_space", {{{Ty::kGPoint}, Ty::kPoint}}},
      {"in_space_line", {{{Ty::kGLine}, Ty::kLines}}},
      {"in_network", {{{Ty::kPoint}, Ty::kGPoint}, {{Ty::kPoint, Ty::kFloat}, Ty::kGPoint}}},
      {"deftime", {{{Ty::kMGPoint}, Ty::kPeriods}}},
      {"trajectory", {{{Ty::kMGPoint}, Ty::kGLine}}},
      {"atinstant", {{{Ty::kMGPoint, Ty::kInstant}, Ty::kIntime}}},
      {"atperiods", {{{Ty::kMGPoint, Ty::kPeriods}, Ty::kMGPoint}}},
      {"at", {{{Ty::kMGPoint, Ty::kGLine}, Ty::kMGPoint}}},
      {"inside", {{{Ty::kMGPoint, Ty::kGLine, Ty::kInstant}, Ty::kBool}}},
      {"direction", {{{Ty::kMGPoint, Ty::kMGPoint, Ty::kInstant}, Ty::kFloat}}},
      {"shortest_path",
       {{{Ty::kGPoint, Ty::kGPoint}, Ty::kGLine},
        {{Ty::kMGPoint, Ty::kMGPoint, Ty::kInstant}, Ty::kGLine}}},
      {"shortest_path_mo", {{{Ty::kMGPoint, Ty::kMGPoint, Ty::kInstant}, Ty::kGLine}}},
      {"network_distance", {{{Ty::kGPoint, Ty::kGPoint}, Ty::kFloat}}},
      {"size", {{{Ty::kGLine}, Ty::kFloat}}},
      {"duration", {{{Ty::kMGPoint}, Ty::kFloat}}},
      {"now", {{{Ty::kMGPoint}, Ty::kInstant}}},
      {"current", {{{Ty::kMGPoint}, Ty::kGPoint}}},
  };
  return table;
}

inline bool coercible(Ty from, Ty to) {
  if (from == to) return true;
  if (from == Ty::kInt && to == Ty::kFloat) return true;
  if (from == Ty::kString && to == Ty::kInstant) return true;
  return false;
}

inline std::string sig_text(const std::string& name, const Sig& sig) {
  std::string out = name + "(";
  for (std::size_t i = 0; i < sig.args.size(); ++i) {
    if (i) out += ", ";
    out += ty_name(sig.args[i]);
  }
  out += ')';
  return out;
}

/// Infers the type of an expression, selecting the matching overload.
/// Throws TypeError with the offending position when nothing matches.
inline Ty typecheck(const Expr& e, const Sig** chosen = nullptr) {
  switch (e.kind) {
    case Expr::kInt:
      return Ty::kInt;
    case Expr::kFloat:
      return Ty::kFloat;
    case Expr::kString:
      return Ty::kString;
    case Expr::kCall:
      break;
  }
  const auto& table = function_table();
  auto it = table.find(e.name);
  if (it == table.end()) {
    type_error(e.line, e.col, "unknown function '" + e.name + "'");
  }
  std::vector<Ty> arg_tys;
  arg_tys.reserve(e.args.size());
  for (const auto& a : e.args) arg_tys.push_back(typecheck(a));
  for (const auto& sig : it->second) {
    if (sig.args.size() != arg_tys.size()) continue;
    bool ok = true;
    for (std::size_t i = 0; i < arg_tys.size(); ++i) {
      if (!coercible(arg_tys[i], sig.args[i])) {
        ok = false;
        break;
      }
    }
    if (ok) {
      if (chosen != nullptr) *chosen = &sig;
      return sig.ret;
    }
  }
  std::string got = e.name + "(";
  for (std::size_t i = 0; i < arg_tys.size(); ++i) {
    if (i) got += ", ";
    got += ty_name(arg_tys[i]);
  }
  got += ')';
  std::string expected;
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    if (i) expected += " or ";
    expected += sig_text(e.name, it->second[i]);
  }
  type_error(e.line, e.col, "no match for " + got + "; expected " + expected);
}

// ---- evaluation -------------------------------------------------------------

struct Value {
  Ty ty = Ty::kInt;
  long long i = 0;
  double f = 0.0;
  bool b = false;
  std::string s;
  TimestampMs t = 0;
  PlanarPoint pt;
  std::vector<MeasuredPolyline> lines;
  GPoint gp;
  GLine gl;
  Periods ps;
  Intime itv;
  UGPoint mo;
};

namespace eval_detail {

inline Value coerce(Value v, Ty want, int line, int col) {
  if (v.ty == want) return v;
  if (v.ty == Ty::kInt && want == Ty::kFloat) {
    v.f = static_cast<double>(v.i);
    v.ty = Ty::kFloat;
    return v;
  }
  if (v.ty == Ty::kString && want == Ty::kInstant) {
    const auto t = try_parse_iso8601(v.s);
    if (!t) {
      type_error(line, col, "'" + v.s + "' is not an ISO-8601 timestamp");
    }
    v.t = *t;
    v.ty = Ty::kInstant;
    return v;
  }
  type_error(line, col, std::string("cannot use ") + ty_name(v.ty) + " as " + ty_name(want));
}

}  // namespace eval_detail

inline Value eval(const Expr& e, const Network& net, const Stores& stores) {
  Value out;
  switch (e.kind) {
    case Expr::kInt:
      out.ty = Ty::kInt;
      out.i = e.ival;
      return out;
    case Expr::kFloat:
      out.ty = Ty::kFloat;
      out.f = e.fval;
      return out;
    case Expr::kString:
      out.ty = Ty::kString;
      out.s = e.sval;
      return out;
    case Expr::kCall:
      break;
  }

  const Sig* sig = nullptr;
  out.ty = typecheck(e, &sig);
  std::vector<Value> args;
  args.reserve(e.args.size());
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    args.push_back(
        eval_detail::coerce(eval(e.args[i], net, stores), sig->args[i], e.args[i].line,
                            e.args[i].col));
  }

  try {
    if (e.name == "mo") {
      out.mo = stores.ugpoint(static_cast<int>(args[0].i));
    } else if (e.name == "gline_named") {
      const GLineRecord* r = stores.find_gline(args[0].s);
      if (r == nullptr) fail(Err::kUnknownName, "no gline named '" + args[0].s + "'");
      out.gl = r->geom;
    } else if (e.name == "gpoint_named") {
      const GPointRecord* r = stores.find_gpoint(args[0].s);
      if (r == nullptr) fail(Err::kUnknownName, "no gpoint named '" + args[0].s + "'");
      out.gp = r->geom;
    } else if (e.name == "periods") {
      out.ps = Periods::of({Period{args[0].t, args[1].t}});
    } else if (e.name == "point") {
      out.pt = PlanarPoint{args[0].f, args[1].f};
    } else if (e.name == "in_space") {
      out.pt = in_space(net, args[0].gp);
    } else if (e.name == "in_space_line") {
      out.lines = in_space_line(net, args[0].gl);
    } else if (e.name == "in_network") {
      out.gp = args.size() == 2 ? in_network(net, args[0].pt, args[1].f)
                                : in_network(net, args[0].pt);
    } else if (e.name == "deftime") {
      out.ps = deftime(args[0].mo);
    } else if (e.name == "trajectory") {
      out.gl = trajectory(args[0].mo);
    } else if (e.name == "atinstant") {
      out.itv = atinstant(args[0].mo, args[1].t);
    } else if (e.name == "atperiods") {
      out.mo = atperiods(args[0].mo, args[1].ps);
    } else if (e.name == "at") {
      out.mo = at_gline(args[0].mo, args[1].gl);
    } else if (e.name == "inside") {
      out.b = inside(args[0].mo, args[1].gl, args[2].t);
    } else if (e.name == "direction") {
      out.f = direction(net, args[0].mo, args[1].mo, args[2].t);
    } else if (e.name == "shortest_path") {
      out.gl = args.size() == 2 ? shortest_path(net, args[0].gp, args[1].gp)
                                : shortest_path_mo(net, args[0].mo, args[1].mo, args[2].t);
    } else if (e.name == "shortest_path_mo") {
      out.gl = shortest_path_mo(net, args[0].mo, args[1].mo, args[2].t);
    } else if (e.name == "network_distance") {
      out.f = network_distance(net, args[0].gp, args[1].gp);
    } else if (e.name == "size") {
      out.f = gline_size(args[0].gl);
    } else if (e.name == "duration") {
      out.f = duration(args[0].mo);
    } else if (e.name == "now") {
      out.t = now_of(args[0].mo);
    } else if (e.name == "current") {
      out.gp = current_of(args[0].mo);
    } else {
      type_error(e.line, e.col, "unknown function '" + e.name + "'");
    }
  } catch (const EngineError& err) {
    if (err.code() == Err::kSyntaxError || err.code() == Err::kTypeError) throw;
    fail(err.code(), "line " + std::to_string(e.line) + " col " + std::to_string(e.col) +
                         ": " + err.what());
  }
  return out;
}

/// Result lines for printing; container values emit one element per line.
inline std::vector<std::string> print_value(const Value& v) {
  switch (v.ty) {
    case Ty::kInt:
      return {std::to_string(v.i)};
    case Ty::kFloat:
      return {fmt_double(v.f)};
    case Ty::kBool:
      return {v.b ? "true" : "false"};
    case Ty::kString:
      return {v.s};
    case Ty::kInstant:
      return {format_iso8601(v.t)};
    case Ty::kPoint:
      return {format_wkt_point(v.pt)};
    case Ty::kLines: {
      std::vector<std::string> out;
      for (const auto& line : v.lines) out.push_back(format_wkt_linestring(line.points()));
      if (out.empty()) out.push_back("LINESTRING EMPTY");
      return out;
    }
    case Ty::kGPoint:
      return {format_gpoint(v.gp)};
    case Ty::kGLine: {
      if (v.gl.empty()) return {"GLINE()"};
      std::vector<std::string> out;
      for (const auto& iv : v.gl.intervals) out.push_back(format_route_interval(v.gl, iv));
      return out;
    }
    case Ty::kPeriods:
      return {format_periods(v.ps)};
    case Ty::kIntime:
      return {format_intime(v.itv)};
    case Ty::kMGPoint: {
      if (v.mo.units.empty()) return {"MGPOINT()"};
      std::vector<std::string> out;
      for (const auto& u : v.mo.units) {
        out.push_back("MGPOINT(" + std::to_string(u.moid) + "," + std::to_string(u.netid) +
                      "," + std::to_string(u.rid) + "," + std::to_string(u.side) + "," +
                      format_iso8601(u.t1) + "," + format_iso8601(u.t2) + "," +
                      fmt_double(u.pos1) + "," + fmt_double(u.pos2) + "," + fmt_double(u.v0) +
                      "," + fmt_double(u.a) + ")");
      }
      return out;
    }
  }
  return {};
}

/// Parse, type-check, evaluate, print.
inline std::vector<std::string> run_query(const std::string& text, const Network& net,
                                          const Stores& stores) {
  const Expr ast = parse(text);
  typecheck(ast);
  return print_value(eval(ast, net, stores));
}

}  // namespace netmo::moql
