#pragma once

// Dual-variable cost of a grounded CNF:
//
//   S(v) = max_mu min_nu  sum_i sum_j mu_i * nu_ij * max(v_ij - c_ij, 0)
//
// with mu on the simplex over clauses and each nu_i on the simplex over the literals of
// clause i. At the saddle point this equals max_i min_j S_ij.

#include <cstddef>
#include <vector>

#include "logicloss/formula.hpp"

namespace logicloss {

using SparseRow = std::vector<std::pair<std::size_t, double>>;

struct CostMatrix {
  std::vector<std::vector<double>> costs;     // S_ij >= 0
  std::vector<std::vector<SparseRow>> grads;  // dS_ij / d(flat outputs)
  std::size_t num_outputs = 0;

  std::size_t num_clauses() const { return costs.size(); }
  std::size_t num_literals() const;
};

struct DualState {
  std::vector<double> conj;               // mu, one entry per clause
  std::vector<std::vector<double>> disj;  // nu_i, one vector per clause

  // Uniform weights matching the shape of `m`.
  static DualState uniform(const CostMatrix& m);
  bool on_simplex(double tol = 1e-12) const;
};

struct DualGradient {
  std::vector<double> conj;
  std::vector<std::vector<double>> disj;
};

enum class EncoderKind { kDualVariable, kFuzzyMinMax, kDL2Baseline };

struct ClosedForm {
  double value = 0.0;
  std::vector<std::size_t> argmax_clauses;
  std::vector<std::vector<std::size_t>> argmin_literals;  // per clause
};

double atom_cost(double v, double c);

// Hinge costs of the grounded atoms; strict atoms use their margin-shifted bound.
CostMatrix encode(const CnfTemplate& cnf, const Grounding& g);

double cnf_cost(const CostMatrix& m, const DualState& d);
ClosedForm closed_form_cost(const CostMatrix& m);
DualState optimal_duals(const CostMatrix& m);

// d cnf_cost / d outputs. Hinges at the kink contribute zero.
std::vector<double> grad_outputs(const CostMatrix& m, const DualState& d);
// Same, with clause i additionally scaled by clause_scale[i].
std::vector<double> grad_outputs(const CostMatrix& m, const DualState& d,
                                 const std::vector<double>& clause_scale);
DualGradient grad_duals(const CostMatrix& m, const DualState& d);

// Per-group partial costs z_k = sum_{i in group k} mu_i sum_j nu_ij S_ij. They sum to
// cnf_cost.
std::vector<double> group_costs(const CostMatrix& m, const DualState& d,
                                const std::vector<std::size_t>& group_map, std::size_t num_groups);

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(const std::vector<double>& x);

double baseline_cost(const CostMatrix& m, EncoderKind kind);
std::vector<double> baseline_grad(const CostMatrix& m, EncoderKind kind);

}  // namespace logicloss
