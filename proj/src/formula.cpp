#include "logicloss/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "logicloss/errors.hpp"

namespace logicloss {

SyntaxError::SyntaxError(std::size_t line, std::size_t column, std::vector<std::string> expected,
                         const std::string& found)
    : InputError(fmt::format("{}:{}: syntax error: expected {}, found {}", line, column,
                             fmt::join(expected, " or "), found)),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

TermExpr TermExpr::negated() const {
  TermExpr out = *this;
  for (auto& r : out.refs) r.coefficient = -r.coefficient;
  out.offset = -offset;
  return out;
}

TermExpr TermExpr::normalized() const {
  TermExpr out;
  out.offset = offset;
  for (const auto& r : refs) {
    auto it = std::find_if(out.refs.begin(), out.refs.end(), [&](const OutputRef& o) {
      return o.slot == r.slot && o.index == r.index;
    });
    if (it == out.refs.end()) {
      out.refs.push_back(r);
    } else {
      it->coefficient += r.coefficient;
    }
  }
  std::erase_if(out.refs, [](const OutputRef& r) { return r.coefficient == 0.0; });
  return out;
}

Atom Atom::negated(double strict_margin) const {
  // not(t <= c) is -t < -c; not(t < c) is -t <= -c.
  Atom out;
  out.term = term.negated();
  out.bound = -bound;
  out.strict = !strict;
  out.margin = out.strict ? strict_margin : 0.0;
  out.tag = tag;
  return out;
}

Formula Formula::leaf(Atom a) {
  Formula f;
  f.kind = FormulaKind::kAtom;
  f.atom = std::move(a);
  return f;
}

Formula Formula::negation(Formula child) {
  Formula f;
  f.kind = FormulaKind::kNot;
  f.children.push_back(std::move(child));
  return f;
}

Formula Formula::conjunction(std::vector<Formula> children) {
  Formula f;
  f.kind = FormulaKind::kAnd;
  f.children = std::move(children);
  return f;
}

Formula Formula::disjunction(std::vector<Formula> children) {
  Formula f;
  f.kind = FormulaKind::kOr;
  f.children = std::move(children);
  return f;
}

Formula Formula::implication(Formula lhs, Formula rhs) {
  Formula f;
  f.kind = FormulaKind::kImplies;
  f.children.push_back(std::move(lhs));
  f.children.push_back(std::move(rhs));
  return f;
}

Formula Formula::equal(TermExpr term, double bound) {
  Formula f;
  f.kind = FormulaKind::kEq;
  f.atom.term = std::move(term);
  f.atom.bound = bound;
  return f;
}

Formula Formula::not_equal(TermExpr term, double bound) {
  Formula f;
  f.kind = FormulaKind::kNeq;
  f.atom.term = std::move(term);
  f.atom.bound = bound;
  return f;
}

std::size_t CnfTemplate::num_atoms() const {
  std::size_t n = 0;
  for (const auto& c : clauses) n += c.size();
  return n;
}

std::size_t CnfTemplate::atom_offset(std::size_t clause) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < clause; ++i) n += clauses[i].size();
  return n;
}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class Tok {
  kIdent, kNumber, kDot, kLBracket, kRBracket, kLParen, kRParen, kBang, kAmp, kPipe,
  kArrow, kLe, kLt, kGe, kGt, kEq, kNe, kPlus, kMinus, kStar, kEnd,
};

std::string tok_name(Tok t) {
  switch (t) {
    case Tok::kIdent: return "identifier";
    case Tok::kNumber: return "number";
    case Tok::kDot: return "'.'";
    case Tok::kLBracket: return "'['";
    case Tok::kRBracket: return "']'";
    case Tok::kLParen: return "'('";
    case Tok::kRParen: return "')'";
    case Tok::kBang: return "'!'";
    case Tok::kAmp: return "'&'";
    case Tok::kPipe: return "'|'";
    case Tok::kArrow: return "'->'";
    case Tok::kLe: return "'<='";
    case Tok::kLt: return "'<'";
    case Tok::kGe: return "'>='";
    case Tok::kGt: return "'>'";
    case Tok::kEq: return "'=='";
    case Tok::kNe: return "'!='";
    case Tok::kPlus: return "'+'";
    case Tok::kMinus: return "'-'";
    case Tok::kStar: return "'*'";
    case Tok::kEnd: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {  // comment to end of line
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t{Tok::kEnd, "", 0.0, line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::kIdent;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j < src.size() && src[j] == '.') {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
          j = k;
        }
      }
      t.kind = Tok::kNumber;
      t.text = std::string(src.substr(i, j - i));
      t.number = std::strtod(t.text.c_str(), nullptr);
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    auto two = [&](char a, char b) { return c == a && i + 1 < src.size() && src[i + 1] == b; };
    std::size_t len = 1;
    if (two('-', '>')) {
      t.kind = Tok::kArrow, len = 2;
    } else if (two('<', '=')) {
      t.kind = Tok::kLe, len = 2;
    } else if (two('>', '=')) {
      t.kind = Tok::kGe, len = 2;
    } else if (two('=', '=')) {
      t.kind = Tok::kEq, len = 2;
    } else if (two('!', '=')) {
      t.kind = Tok::kNe, len = 2;
    } else {
      switch (c) {
        case '.': t.kind = Tok::kDot; break;
        case '[': t.kind = Tok::kLBracket; break;
        case ']': t.kind = Tok::kRBracket; break;
        case '(': t.kind = Tok::kLParen; break;
        case ')': t.kind = Tok::kRParen; break;
        case '!': t.kind = Tok::kBang; break;
        case '&': t.kind = Tok::kAmp; break;
        case '|': t.kind = Tok::kPipe; break;
        case '<': t.kind = Tok::kLt; break;
        case '>': t.kind = Tok::kGt; break;
        case '+': t.kind = Tok::kPlus; break;
        case '-': t.kind = Tok::kMinus; break;
        case '*': t.kind = Tok::kStar; break;
        default:
          throw SyntaxError(line, col, {"a token"}, fmt::format("'{}'", c));
      }
    }
    t.text = std::string(src.substr(i, len));
    advance(len);
    out.push_back(std::move(t));
  }
  out.push_back(Token{Tok::kEnd, "", 0.0, line, col});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Formula parse_all() {
    Formula f = implication();
    if (peek().kind != Tok::kEnd) fail({Tok::kArrow, Tok::kPipe, Tok::kAmp, Tok::kEnd});
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok k) {
    if (peek().kind != k) fail({k});
    return take();
  }

  [[noreturn]] void fail(std::initializer_list<Tok> expected) const {
    std::vector<std::string> names;
    for (Tok k : expected) names.push_back(tok_name(k));
    const Token& t = peek();
    const std::string found = t.kind == Tok::kEnd ? "end of input" : fmt::format("'{}'", t.text);
    throw SyntaxError(t.line, t.column, std::move(names), found);
  }

  Formula implication() {
    Formula lhs = disjunction();
    if (accept(Tok::kArrow)) return Formula::implication(std::move(lhs), implication());
    return lhs;
  }

  Formula disjunction() {
    std::vector<Formula> parts;
    parts.push_back(conjunction());
    while (accept(Tok::kPipe)) parts.push_back(conjunction());
    if (parts.size() == 1) return std::move(parts.front());
    return Formula::disjunction(std::move(parts));
  }

  Formula conjunction() {
    std::vector<Formula> parts;
    parts.push_back(literal());
    while (accept(Tok::kAmp)) parts.push_back(literal());
    if (parts.size() == 1) return std::move(parts.front());
    return Formula::conjunction(std::move(parts));
  }

  Formula literal() {
    if (accept(Tok::kBang)) return Formula::negation(literal());
    if (accept(Tok::kLParen)) {
      Formula f = implication();
      if (peek().kind != Tok::kRParen) fail({Tok::kArrow, Tok::kPipe, Tok::kAmp, Tok::kRParen});
      take();
      return f;
    }
    if (peek().kind != Tok::kIdent && peek().kind != Tok::kNumber && peek().kind != Tok::kMinus)
      fail({Tok::kBang, Tok::kLParen, Tok::kIdent, Tok::kNumber});
    return atom();
  }

  Formula atom() {
    TermExpr lhs = term();
    const Tok op = peek().kind;
    switch (op) {
      case Tok::kLe: case Tok::kLt: case Tok::kGe: case Tok::kGt: case Tok::kEq: case Tok::kNe:
        take();
        break;
      default:
        fail({Tok::kPlus, Tok::kMinus, Tok::kLe, Tok::kLt, Tok::kGe, Tok::kGt, Tok::kEq, Tok::kNe});
    }
    TermExpr rhs = term();

    // Move everything to one side, constants to the bound.
    const bool flip = op == Tok::kGe || op == Tok::kGt;
    TermExpr diff = flip ? rhs : lhs;
    const TermExpr& sub = flip ? lhs : rhs;
    for (const auto& r : sub.refs) diff.refs.push_back({r.slot, r.index, -r.coefficient});
    diff.offset -= sub.offset;
    diff = diff.normalized();
    const double bound = -diff.offset;
    diff.offset = 0.0;

    if (op == Tok::kEq) return Formula::equal(std::move(diff), bound);
    if (op == Tok::kNe) return Formula::not_equal(std::move(diff), bound);
    Atom a;
    a.term = std::move(diff);
    a.bound = bound;
    a.strict = op == Tok::kLt || op == Tok::kGt;
    return Formula::leaf(std::move(a));
  }

  TermExpr term() {
    TermExpr t;
    double sign = accept(Tok::kMinus) ? -1.0 : 1.0;
    addend(t, sign);
    while (true) {
      if (accept(Tok::kPlus)) {
        addend(t, 1.0);
      } else if (accept(Tok::kMinus)) {
        addend(t, -1.0);
      } else {
        break;
      }
    }
    return t;
  }

  void addend(TermExpr& t, double sign) {
    if (peek().kind == Tok::kNumber) {
      const double value = take().number;
      if (accept(Tok::kStar)) {
        t.refs.push_back(slotref(sign * value));
      } else {
        t.offset += sign * value;
      }
      return;
    }
    if (peek().kind == Tok::kIdent) {
      t.refs.push_back(slotref(sign));
      return;
    }
    fail({Tok::kNumber, Tok::kIdent});
  }

  OutputRef slotref(double coefficient) {
    OutputRef r;
    r.slot = expect(Tok::kIdent).text;
    r.coefficient = coefficient;
    expect(Tok::kDot);
    const Token& head = peek();
    if (head.kind != Tok::kIdent || (head.text != "out" && head.text != "p" && head.text != "d")) {
      const std::string found = head.kind == Tok::kEnd ? "end of input" : fmt::format("'{}'", head.text);
      throw SyntaxError(head.line, head.column, {"'out'", "'p'", "'d'"}, found);
    }
    take();
    expect(Tok::kLBracket);
    const Token& idx = peek();
    if (idx.kind != Tok::kNumber || idx.text.find_first_not_of("0123456789") != std::string::npos) {
      const std::string found = idx.kind == Tok::kEnd ? "end of input" : fmt::format("'{}'", idx.text);
      throw SyntaxError(idx.line, idx.column, {"non-negative integer"}, found);
    }
    take();
    std::size_t value = 0;
    std::from_chars(idx.text.data(), idx.text.data() + idx.text.size(), value);
    r.index = value;
    expect(Tok::kRBracket);
    return r;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Formula parse(std::string_view text) { return Parser(lex(text)).parse_all(); }

// ---------------------------------------------------------------------------
// Normalization

Formula desugar(const Formula& f) {
  switch (f.kind) {
    case FormulaKind::kAtom:
      return f;
    case FormulaKind::kImplies:
      return Formula::disjunction(
          {Formula::negation(desugar(f.children[0])), desugar(f.children[1])});
    case FormulaKind::kEq: {
      Atom le{f.atom.term, f.atom.bound, false, 0.0, f.atom.tag};
      Atom ge{f.atom.term.negated(), -f.atom.bound, false, 0.0, f.atom.tag};
      return Formula::conjunction({Formula::leaf(std::move(le)), Formula::leaf(std::move(ge))});
    }
    case FormulaKind::kNeq: {
      Atom lt{f.atom.term, f.atom.bound, true, 0.0, f.atom.tag};
      Atom gt{f.atom.term.negated(), -f.atom.bound, true, 0.0, f.atom.tag};
      return Formula::disjunction({Formula::leaf(std::move(lt)), Formula::leaf(std::move(gt))});
    }
    case FormulaKind::kNot:
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      Formula out = f;
      for (auto& c : out.children) c = desugar(c);
      return out;
    }
  }
  return f;
}

namespace {

Formula nnf(const Formula& f, bool negate, double margin) {
  switch (f.kind) {
    case FormulaKind::kAtom: {
      if (negate) return Formula::leaf(f.atom.negated(margin));
      Atom a = f.atom;
      a.margin = a.strict ? margin : 0.0;
      return Formula::leaf(std::move(a));
    }
    case FormulaKind::kNot:
      return nnf(f.children[0], !negate, margin);
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      std::vector<Formula> kids;
      kids.reserve(f.children.size());
      for (const auto& c : f.children) kids.push_back(nnf(c, negate, margin));
      const bool is_and = (f.kind == FormulaKind::kAnd) != negate;
      return is_and ? Formula::conjunction(std::move(kids)) : Formula::disjunction(std::move(kids));
    }
    case FormulaKind::kImplies:
    case FormulaKind::kEq:
    case FormulaKind::kNeq:
      return nnf(desugar(f), negate, margin);
  }
  return f;
}

using ClauseSet = std::vector<Clause>;  // empty set: true; contains an empty clause: false

ClauseSet cnf_of(const Formula& f, std::size_t cap) {
  switch (f.kind) {
    case FormulaKind::kAtom: {
      const Atom& a = f.atom;
      if (a.term.normalized().is_constant()) {
        if (a.term.offset <= a.cost_bound()) return {};
        return {Clause{}};
      }
      return {Clause{a}};
    }
    case FormulaKind::kAnd: {
      ClauseSet out;
      for (const auto& c : f.children) {
        ClauseSet part = cnf_of(c, cap);
        if (out.size() + part.size() > cap)
          throw BlowupError(fmt::format("CNF exceeds the clause cap of {}", cap));
        for (auto& cl : part) out.push_back(std::move(cl));
      }
      return out;
    }
    case FormulaKind::kOr: {
      ClauseSet acc{Clause{}};  // false
      for (const auto& c : f.children) {
        ClauseSet part = cnf_of(c, cap);
        if (acc.size() * part.size() > cap)
          throw BlowupError(fmt::format("CNF exceeds the clause cap of {}", cap));
        ClauseSet next;
        next.reserve(acc.size() * part.size());
        for (const auto& a : acc) {
          for (const auto& b : part) {
            Clause merged = a;
            merged.insert(merged.end(), b.begin(), b.end());
            next.push_back(std::move(merged));
          }
        }
        acc = std::move(next);
      }
      return acc;
    }
    default:
      throw InputError("to_cnf expects a formula in negation normal form");
  }
}

bool same_refs(const TermExpr& a, const TermExpr& b) { return a.refs == b.refs && a.offset == b.offset; }

// True when `a` makes `b` redundant inside a disjunction over the same term.
bool dominates(const Atom& a, const Atom& b) {
  if (a.bound < b.bound || a.cost_bound() < b.cost_bound()) return false;
  return a.bound > b.bound || !a.strict || b.strict;
}

// t <= a  or  -t <= b  covers the real line iff -b <= a (with strictness at equality).
bool complementary_cover(const Atom& a, const Atom& b) {
  if (!same_refs(a.term, b.term.negated())) return false;
  const double lo = -b.bound, hi = a.bound;
  const bool raw = lo < hi || (lo == hi && !a.strict && !b.strict);
  return raw && -b.cost_bound() <= a.cost_bound();
}

// Returns nullopt when the clause is a tautology.
std::optional<Clause> simplify_clause(const Clause& in) {
  Clause out;
  for (const Atom& lit : in) {
    bool redundant = false;
    for (const Atom& kept : out) {
      if (same_refs(kept.term, lit.term) && dominates(kept, lit)) {
        redundant = true;
        break;
      }
    }
    if (redundant) continue;
    std::erase_if(out, [&](const Atom& kept) {
      return same_refs(kept.term, lit.term) && dominates(lit, kept);
    });
    out.push_back(lit);
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < out.size(); ++j)
      if (i != j && complementary_cover(out[i], out[j])) return std::nullopt;
  return out;
}

bool same_literal_set(const Clause& a, const Clause& b) {
  if (a.size() != b.size()) return false;
  return std::all_of(a.begin(), a.end(), [&](const Atom& x) {
    return std::find(b.begin(), b.end(), x) != b.end();
  });
}

void flatten_and(const Formula& f, std::vector<const Formula*>& out) {
  if (f.kind == FormulaKind::kAnd) {
    for (const auto& c : f.children) flatten_and(c, out);
  } else {
    out.push_back(&f);
  }
}

}  // namespace

Formula to_nnf(const Formula& f, double margin) {
  if (!(margin > 0.0) || !std::isfinite(margin))
    throw InputError(fmt::format("strict-inequality margin must be positive, got {}", margin));
  return nnf(f, false, margin);
}

CnfTemplate to_cnf(const Formula& f, const CnfOptions& options) {
  std::vector<const Formula*> conjuncts;
  flatten_and(f, conjuncts);

  CnfTemplate out;
  for (std::size_t k = 0; k < conjuncts.size(); ++k) {
    ClauseSet part = cnf_of(*conjuncts[k], options.clause_cap);
    for (auto& cl : part) {
      if (cl.empty())
        throw UnsatisfiableConstant("constant folding produced an empty clause");
      std::optional<Clause> kept = options.simplify ? simplify_clause(cl) : std::optional(cl);
      if (!kept) continue;
      if (options.simplify &&
          std::any_of(out.clauses.begin(), out.clauses.end(),
                      [&](const Clause& c) { return same_literal_set(c, *kept); }))
        continue;
      out.clauses.push_back(std::move(*kept));
      out.conjunct_map.push_back(k);
      if (out.clauses.size() > options.clause_cap)
        throw BlowupError(fmt::format("CNF exceeds the clause cap of {}", options.clause_cap));
    }
  }

  std::set<std::string> slots;
  for (const auto& cl : out.clauses)
    for (const auto& a : cl)
      for (const auto& r : a.term.refs) slots.insert(r.slot);
  out.slot_names.assign(slots.begin(), slots.end());
  regroup(out, options.grouping);
  return out;
}

void regroup(CnfTemplate& cnf, GroupStrategy strategy) {
  const std::size_t n = cnf.clauses.size();
  cnf.group_map.assign(n, 0);
  if (n == 0) {
    cnf.num_groups = 0;
    return;
  }
  switch (strategy) {
    case GroupStrategy::kPerClause:
      for (std::size_t i = 0; i < n; ++i) cnf.group_map[i] = i;
      cnf.num_groups = n;
      break;
    case GroupStrategy::kSingle:
      cnf.num_groups = 1;
      break;
    case GroupStrategy::kPerConjunct: {
      if (cnf.conjunct_map.size() != n) {
        regroup(cnf, GroupStrategy::kPerClause);
        return;
      }
      std::map<std::size_t, std::size_t> dense;
      for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = dense.try_emplace(cnf.conjunct_map[i], dense.size());
        cnf.group_map[i] = it->second;
      }
      cnf.num_groups = dense.size();
      break;
    }
  }
}

CnfTemplate compile(std::string_view text, const CompileOptions& options) {
  return to_cnf(to_nnf(desugar(parse(text)), options.margin), options.cnf);
}

// ---------------------------------------------------------------------------
// Semantics

bool atom_holds(const Atom& atom, double value, double tol, TolMode mode) {
  double threshold = atom.bound - tol;
  if (!atom.strict) {
    if (mode == TolMode::kStrictOnly) threshold = atom.bound;
    if (mode == TolMode::kBand) threshold = atom.bound + tol;
  }
  return value <= threshold;
}

bool eval_bool(const CnfTemplate& cnf, const std::vector<double>& values, double tol, TolMode mode) {
  if (values.size() != cnf.num_atoms())
    throw ArityMismatch(fmt::format("state has {} values for {} atoms", values.size(), cnf.num_atoms()));
  std::size_t k = 0;
  bool all = true;
  for (const auto& clause : cnf.clauses) {
    bool any = false;
    for (const auto& atom : clause) any = atom_holds(atom, values[k++], tol, mode) || any;
    all = all && any;
  }
  return all;
}

namespace {

double output_at(const OutputRef& r, const SlotBindings& bindings) {
  auto it = bindings.find(r.slot);
  if (it == bindings.end()) throw UnknownSlot(fmt::format("no binding for slot '{}'", r.slot));
  if (r.index >= it->second.size())
    throw IndexOutOfRange(fmt::format("{}.out[{}] is out of range (arity {})", r.slot, r.index,
                                      it->second.size()));
  return it->second[r.index];
}

}  // namespace

double evaluate_term(const TermExpr& term, const SlotBindings& bindings) {
  double v = term.offset;
  for (const auto& r : term.refs) v += r.coefficient * output_at(r, bindings);
  return v;
}

Grounding ground(const CnfTemplate& cnf, const SlotBindings& bindings) {
  Grounding g;
  std::size_t offset = 0;
  for (const auto& name : cnf.slot_names) {
    auto it = bindings.find(name);
    if (it == bindings.end()) throw UnknownSlot(fmt::format("no binding for slot '{}'", name));
    g.slot_offsets.push_back(offset);
    g.slot_sizes.push_back(it->second.size());
    offset += it->second.size();
  }
  g.num_outputs = offset;

  auto slot_offset = [&](const std::string& slot) {
    auto pos = std::lower_bound(cnf.slot_names.begin(), cnf.slot_names.end(), slot);
    return g.slot_offsets[static_cast<std::size_t>(pos - cnf.slot_names.begin())];
  };

  const std::size_t n = cnf.num_atoms();
  g.values.reserve(n);
  g.rows.reserve(n);
  for (const auto& clause : cnf.clauses) {
    for (const auto& atom : clause) {
      g.values.push_back(evaluate_term(atom.term, bindings));
      std::vector<std::pair<std::size_t, double>> row;
      row.reserve(atom.term.refs.size());
      for (const auto& r : atom.term.refs) row.emplace_back(slot_offset(r.slot) + r.index, r.coefficient);
      g.rows.push_back(std::move(row));
    }
  }
  return g;
}

bool holds(const Formula& f, const SlotBindings& bindings) {
  switch (f.kind) {
    case FormulaKind::kAtom: {
      const double v = evaluate_term(f.atom.term, bindings);
      return f.atom.strict ? v < f.atom.bound : v <= f.atom.bound;
    }
    case FormulaKind::kNot:
      return !holds(f.children[0], bindings);
    case FormulaKind::kAnd:
      return std::all_of(f.children.begin(), f.children.end(),
                         [&](const Formula& c) { return holds(c, bindings); });
    case FormulaKind::kOr:
      return std::any_of(f.children.begin(), f.children.end(),
                         [&](const Formula& c) { return holds(c, bindings); });
    case FormulaKind::kImplies:
      return !holds(f.children[0], bindings) || holds(f.children[1], bindings);
    case FormulaKind::kEq:
      return evaluate_term(f.atom.term, bindings) == f.atom.bound;
    case FormulaKind::kNeq:
      return evaluate_term(f.atom.term, bindings) != f.atom.bound;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Printing (output re-parses to the same tree, modulo margins and tags)

std::string to_string(const TermExpr& term) {
  std::string s;
  for (const auto& r : term.refs) {
    const double c = r.coefficient;
    const double mag = std::abs(c);
    if (s.empty()) {
      if (c < 0) s += "-";
    } else {
      s += c < 0 ? " - " : " + ";
    }
    if (mag != 1.0) s += fmt::format("{}*", mag);
    s += fmt::format("{}.out[{}]", r.slot, r.index);
  }
  if (term.offset != 0.0 || s.empty()) {
    if (s.empty()) {
      s = fmt::format("{}", term.offset);
    } else {
      s += fmt::format(" {} {}", term.offset < 0 ? "-" : "+", std::abs(term.offset));
    }
  }
  return s;
}

std::string to_string(const Atom& atom) {
  return fmt::format("{} {} {}", to_string(atom.term), atom.strict ? "<" : "<=", atom.bound);
}

std::string to_string(const Formula& f) {
  auto child = [](const Formula& c) {
    return c.kind == FormulaKind::kAtom ? to_string(c) : "(" + to_string(c) + ")";
  };
  switch (f.kind) {
    case FormulaKind::kAtom:
      return to_string(f.atom);
    case FormulaKind::kNot:
      return "!" + child(f.children[0]);
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      std::vector<std::string> parts;
      for (const auto& c : f.children) parts.push_back(child(c));
      return fmt::format("{}", fmt::join(parts, f.kind == FormulaKind::kAnd ? " & " : " | "));
    }
    case FormulaKind::kImplies:
      return child(f.children[0]) + " -> " + child(f.children[1]);
    case FormulaKind::kEq:
      return fmt::format("{} == {}", to_string(f.atom.term), f.atom.bound);
    case FormulaKind::kNeq:
      return fmt::format("{} != {}", to_string(f.atom.term), f.atom.bound);
  }
  return {};
}

std::string to_string(const CnfTemplate& cnf) {
  if (cnf.clauses.empty()) return "0 <= 1";
  std::vector<std::string> parts;
  for (const auto& clause : cnf.clauses) {
    std::vector<std::string> lits;
    for (const auto& a : clause) lits.push_back(to_string(a));
    parts.push_back(clause.size() == 1 ? lits.front() : fmt::format("({})", fmt::join(lits, " | ")));
  }
  return fmt::format("{}", fmt::join(parts, " & "));
}

}  // namespace logicloss
