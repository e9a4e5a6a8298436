#pragma once

// Constraint language: parsing, normalization to CNF over atoms `term <= bound`,
// grounding against model outputs and boolean satisfaction checks.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace logicloss {

struct OutputRef {
  std::string slot;
  std::size_t index = 0;
  double coefficient = 1.0;

  bool operator==(const OutputRef&) const = default;
};

// Linear expression sum_k coefficient_k * slot_k.out[index_k] + offset.
struct TermExpr {
  std::vector<OutputRef> refs;
  double offset = 0.0;

  bool is_constant() const { return refs.empty(); }
  TermExpr negated() const;
  // Merges repeated references and drops zero coefficients.
  TermExpr normalized() const;

  bool operator==(const TermExpr&) const = default;
};

// Canonical atom `term <= bound` (or `term < bound` when strict). Strict atoms carry the
// margin used by the cost encoding: their cost threshold is `bound - margin`.
struct Atom {
  TermExpr term;
  double bound = 0.0;
  bool strict = false;
  double margin = 0.0;
  std::string tag;

  double cost_bound() const { return bound - margin; }
  Atom negated(double strict_margin) const;

  bool operator==(const Atom&) const = default;
};

enum class FormulaKind { kAtom, kNot, kAnd, kOr, kImplies, kEq, kNeq };

// Formula tree with value semantics. kEq/kNeq store `term` and `bound` in `atom`.
struct Formula {
  FormulaKind kind = FormulaKind::kAtom;
  Atom atom;
  std::vector<Formula> children;

  static Formula leaf(Atom a);
  static Formula negation(Formula child);
  static Formula conjunction(std::vector<Formula> children);
  static Formula disjunction(std::vector<Formula> children);
  static Formula implication(Formula lhs, Formula rhs);
  static Formula equal(TermExpr term, double bound);
  static Formula not_equal(TermExpr term, double bound);

  bool operator==(const Formula&) const = default;
};

using Clause = std::vector<Atom>;

enum class GroupStrategy {
  kPerClause,    // one output dimension per clause
  kSingle,       // a single scalar dimension
  kPerConjunct,  // one dimension per top-level conjunct of the source formula
};

struct CnfTemplate {
  std::vector<Clause> clauses;
  std::vector<std::string> slot_names;  // sorted, unique
  std::vector<std::size_t> group_map;   // clause -> dimension
  std::size_t num_groups = 0;
  std::vector<std::size_t> conjunct_map;  // clause -> top-level conjunct of the source

  std::size_t num_atoms() const;
  // Flat (clause-major) position of the first literal of `clause`.
  std::size_t atom_offset(std::size_t clause) const;
};

struct CnfOptions {
  std::size_t clause_cap = 4096;
  // Merge literals over an identical term, drop tautological and duplicate clauses.
  bool simplify = true;
  GroupStrategy grouping = GroupStrategy::kPerClause;
};

struct CompileOptions {
  double margin = 0.01;
  CnfOptions cnf;
};

using SlotBindings = std::map<std::string, std::vector<double>, std::less<>>;

// How the satisfaction tolerance is applied to an atom with bound c.
enum class TolMode {
  kUniform,     // every atom: v <= c - tol
  kStrictOnly,  // strict atoms: v <= c - tol; non-strict: v <= c
  kBand,        // strict atoms: v <= c - tol; non-strict: v <= c + tol
};

struct Grounding {
  std::vector<double> values;  // one per atom, clause-major
  // Sparse rows d(value)/d(flat outputs); flat layout is template slots in order.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<std::size_t> slot_offsets;
  std::vector<std::size_t> slot_sizes;
  std::size_t num_outputs = 0;
};

Formula parse(std::string_view text);
Formula desugar(const Formula& f);
Formula to_nnf(const Formula& f, double margin);
CnfTemplate to_cnf(const Formula& f, const CnfOptions& options = {});
CnfTemplate compile(std::string_view text, const CompileOptions& options = {});

// Reassigns clauses to output dimensions; clauses themselves are untouched.
void regroup(CnfTemplate& cnf, GroupStrategy strategy);

bool atom_holds(const Atom& atom, double value, double tol, TolMode mode = TolMode::kUniform);
bool eval_bool(const CnfTemplate& cnf, const std::vector<double>& values, double tol,
               TolMode mode = TolMode::kUniform);

double evaluate_term(const TermExpr& term, const SlotBindings& bindings);
Grounding ground(const CnfTemplate& cnf, const SlotBindings& bindings);

// Reference semantics on the source tree: atoms compare exactly (strict as <).
bool holds(const Formula& f, const SlotBindings& bindings);

std::string to_string(const TermExpr& term);
std::string to_string(const Atom& atom);
std::string to_string(const Formula& f);
std::string to_string(const CnfTemplate& cnf);

}  // namespace logicloss
