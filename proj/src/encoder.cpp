#include "logicloss/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "logicloss/errors.hpp"

namespace logicloss {

std::size_t CostMatrix::num_literals() const {
  std::size_t n = 0;
  for (const auto& c : costs) n += c.size();
  return n;
}

DualState DualState::uniform(const CostMatrix& m) {
  DualState d;
  const std::size_t n = m.num_clauses();
  d.conj.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  for (const auto& clause : m.costs) {
    const std::size_t k = clause.size();
    d.disj.emplace_back(k, k == 0 ? 0.0 : 1.0 / static_cast<double>(k));
  }
  return d;
}

namespace {

bool simplex_ok(const std::vector<double>& x, double tol) {
  if (x.empty()) return true;
  double sum = 0.0;
  for (double v : x) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

void check_shape(const CostMatrix& m, const DualState& d) {
  if (d.conj.size() != m.num_clauses() || d.disj.size() != m.num_clauses())
    throw ShapeMismatch(fmt::format("duals cover {} clauses, costs have {}", d.conj.size(),
                                    m.num_clauses()));
  for (std::size_t i = 0; i < m.num_clauses(); ++i)
    if (d.disj[i].size() != m.costs[i].size())
      throw ShapeMismatch(fmt::format("clause {}: {} disjunction weights for {} literals", i,
                                      d.disj[i].size(), m.costs[i].size()));
}

}  // namespace

bool DualState::on_simplex(double tol) const {
  if (!simplex_ok(conj, tol)) return false;
  return std::all_of(disj.begin(), disj.end(), [&](const auto& v) { return simplex_ok(v, tol); });
}

double atom_cost(double v, double c) {
  if (!std::isfinite(v) || !std::isfinite(c))
    throw NonFinite(fmt::format("atom_cost({}, {})", v, c));
  return std::max(v - c, 0.0);
}

CostMatrix encode(const CnfTemplate& cnf, const Grounding& g) {
  if (g.values.size() != cnf.num_atoms())
    throw ArityMismatch(fmt::format("grounding has {} values for {} atoms", g.values.size(),
                                    cnf.num_atoms()));
  CostMatrix m;
  m.num_outputs = g.num_outputs;
  std::size_t k = 0;
  for (const auto& clause : cnf.clauses) {
    std::vector<double> row;
    std::vector<SparseRow> grads;
    for (const auto& atom : clause) {
      const double s = atom_cost(g.values[k], atom.cost_bound());
      row.push_back(s);
      // zero subgradient at and below the kink
      grads.push_back(s > 0.0 ? g.rows[k] : SparseRow{});
      ++k;
    }
    m.costs.push_back(std::move(row));
    m.grads.push_back(std::move(grads));
  }
  return m;
}

double cnf_cost(const CostMatrix& m, const DualState& d) {
  check_shape(m, d);
  double total = 0.0;
  for (std::size_t i = 0; i < m.num_clauses(); ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < m.costs[i].size(); ++j) inner += d.disj[i][j] * m.costs[i][j];
    total += d.conj[i] * inner;
  }
  return total;
}

ClosedForm closed_form_cost(const CostMatrix& m) {
  ClosedForm out;
  if (m.costs.empty()) return out;
  std::vector<double> mins;
  for (std::size_t i = 0; i < m.num_clauses(); ++i) {
    const auto& row = m.costs[i];
    if (row.empty()) throw EmptyClause(fmt::format("clause {} has no literals", i));
    const double lo = *std::min_element(row.begin(), row.end());
    std::vector<std::size_t> arg;
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] == lo) arg.push_back(j);
    mins.push_back(lo);
    out.argmin_literals.push_back(std::move(arg));
  }
  out.value = *std::max_element(mins.begin(), mins.end());
  for (std::size_t i = 0; i < mins.size(); ++i)
    if (mins[i] == out.value) out.argmax_clauses.push_back(i);
  return out;
}

DualState optimal_duals(const CostMatrix& m) {
  const ClosedForm cf = closed_form_cost(m);
  DualState d;
  d.conj.assign(m.num_clauses(), 0.0);
  for (std::size_t i : cf.argmax_clauses)
    d.conj[i] = 1.0 / static_cast<double>(cf.argmax_clauses.size());
  for (std::size_t i = 0; i < m.num_clauses(); ++i) {
    std::vector<double> nu(m.costs[i].size(), 0.0);
    for (std::size_t j : cf.argmin_literals[i])
      nu[j] = 1.0 / static_cast<double>(cf.argmin_literals[i].size());
    d.disj.push_back(std::move(nu));
  }
  return d;
}

std::vector<double> grad_outputs(const CostMatrix& m, const DualState& d,
                                 const std::vector<double>& clause_scale) {
  check_shape(m, d);
  if (clause_scale.size() != m.num_clauses())
    throw ShapeMismatch("clause_scale must have one entry per clause");
  std::vector<double> g(m.num_outputs, 0.0);
  for (std::size_t i = 0; i < m.num_clauses(); ++i) {
    const double wi = d.conj[i] * clause_scale[i];
    if (wi == 0.0) continue;
    for (std::size_t j = 0; j < m.costs[i].size(); ++j) {
      const double w = wi * d.disj[i][j];
      if (w == 0.0) continue;
      for (const auto& [idx, coef] : m.grads[i][j]) g[idx] += w * coef;
    }
  }
  return g;
}

std::vector<double> grad_outputs(const CostMatrix& m, const DualState& d) {
  return grad_outputs(m, d, std::vector<double>(m.num_clauses(), 1.0));
}

DualGradient grad_duals(const CostMatrix& m, const DualState& d) {
  check_shape(m, d);
  DualGradient g;
  g.conj.assign(m.num_clauses(), 0.0);
  for (std::size_t i = 0; i < m.num_clauses(); ++i) {
    std::vector<double> gn(m.costs[i].size());
    for (std::size_t j = 0; j < m.costs[i].size(); ++j) {
      g.conj[i] += d.disj[i][j] * m.costs[i][j];
      gn[j] = d.conj[i] * m.costs[i][j];
    }
    g.disj.push_back(std::move(gn));
  }
  return g;
}

std::vector<double> group_costs(const CostMatrix& m, const DualState& d,
                                const std::vector<std::size_t>& group_map, std::size_t num_groups) {
  check_shape(m, d);
  if (group_map.size() != m.num_clauses())
    throw ShapeMismatch("group_map must have one entry per clause");
  std::vector<double> z(num_groups, 0.0);
  for (std::size_t i = 0; i < m.num_clauses(); ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < m.costs[i].size(); ++j) inner += d.disj[i][j] * m.costs[i][j];
    z.at(group_map[i]) += d.conj[i] * inner;
  }
  return z;
}

std::vector<double> project_simplex(const std::vector<double>& x) {
  if (x.empty()) return {};
  for (double v : x)
    if (!std::isfinite(v)) throw NonFinite("project_simplex: non-finite input");

  // Sort descending, find the largest k with u_k - (sum_{i<=k} u_i - 1)/k > 0.
  std::vector<double> u = x;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::max(x[i] - theta, 0.0);
    sum += out[i];
  }
  // absorb rounding so the result sums to one
  if (sum > 0.0 && sum != 1.0)
    for (double& v : out) v /= sum;
  return out;
}

double baseline_cost(const CostMatrix& m, EncoderKind kind) {
  for (std::size_t i = 0; i < m.num_clauses(); ++i)
    if (m.costs[i].empty()) throw EmptyClause(fmt::format("clause {} has no literals", i));
  switch (kind) {
    case EncoderKind::kFuzzyMinMax:
    case EncoderKind::kDualVariable:
      return closed_form_cost(m).value;
    case EncoderKind::kDL2Baseline: {
      double total = 0.0;
      for (const auto& row : m.costs) {
        double prod = 1.0;
        for (double s : row) prod *= s;
        total += prod;
      }
      return total;
    }
  }
  return 0.0;
}

std::vector<double> baseline_grad(const CostMatrix& m, EncoderKind kind) {
  std::vector<double> g(m.num_outputs, 0.0);
  if (m.costs.empty()) return g;
  if (kind == EncoderKind::kDL2Baseline) {
    for (std::size_t i = 0; i < m.num_clauses(); ++i) {
      const auto& row = m.costs[i];
      if (row.empty()) throw EmptyClause(fmt::format("clause {} has no literals", i));
      for (std::size_t j = 0; j < row.size(); ++j) {
        double others = 1.0;
        for (std::size_t k = 0; k < row.size(); ++k)
          if (k != j) others *= row[k];
        if (others == 0.0) continue;
        for (const auto& [idx, coef] : m.grads[i][j]) g[idx] += others * coef;
      }
    }
    return g;
  }
  // max-min: route the subgradient through the first extremal clause and literal
  const ClosedForm cf = closed_form_cost(m);
  const std::size_t i = cf.argmax_clauses.front();
  const std::size_t j = cf.argmin_literals[i].front();
  for (const auto& [idx, coef] : m.grads[i][j]) g[idx] += coef;
  return g;
}

}  // namespace logicloss
