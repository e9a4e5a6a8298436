#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "logicloss/errors.hpp"
#include "logicloss/harness/diagnostics.hpp"
#include "logicloss/trainer.hpp"

namespace logicloss::harness {

CostMatrix example1_costs(double v) {
  CostMatrix m;
  m.num_outputs = 1;
  const double hinge = std::max(2.0 - 3.0 * v, 0.0);
  m.costs = {{v * v + 1.0, hinge}};
  m.grads = {{SparseRow{{0, 2.0 * v}}, hinge > 0.0 ? SparseRow{{0, -3.0}} : SparseRow{}}};
  return m;
}

double example1_cost(double v) { return closed_form_cost(example1_costs(v)).value; }

DemoRun example1_dual(double v0, std::size_t max_steps, double eta_v, double eta_disj, double stop) {
  DemoRun run{"dual", v0, 0.0, v0, 0.0, 0};
  DualState d;
  d.conj = {1.0};
  d.disj = {{0.5, 0.5}};
  run.start_grad = grad_outputs(example1_costs(v0), d)[0];
  double v = v0;
  while (run.steps < max_steps && example1_cost(v) >= stop) {
    const CostMatrix m = example1_costs(v);
    const double g = grad_outputs(m, d)[0];
    const DualGradient gd = grad_duals(m, d);
    v -= eta_v * g;
    for (std::size_t j = 0; j < 2; ++j) d.disj[0][j] -= eta_disj * gd.disj[0][j];
    d.disj[0] = project_simplex(d.disj[0]);
    ++run.steps;
  }
  run.final_v = v;
  run.final_cost = example1_cost(v);
  return run;
}

DemoRun example1_fuzzy(double v0, std::size_t max_steps, double eta_v) {
  DemoRun run{"fuzzy", v0, 0.0, v0, 0.0, 0};
  run.start_grad = baseline_grad(example1_costs(v0), EncoderKind::kFuzzyMinMax)[0];
  double v = v0;
  for (; run.steps < max_steps && example1_cost(v) > 0.0; ++run.steps)
    v -= eta_v * baseline_grad(example1_costs(v), EncoderKind::kFuzzyMinMax)[0];
  run.final_v = v;
  run.final_cost = example1_cost(v);
  return run;
}

namespace {

DemoRun example1_dl2(double v0, std::size_t max_steps, double eta_v) {
  DemoRun run{"dl2", v0, 0.0, v0, 0.0, 0};
  run.start_grad = baseline_grad(example1_costs(v0), EncoderKind::kDL2Baseline)[0];
  double v = v0;
  for (; run.steps < max_steps && example1_cost(v) > 0.0; ++run.steps)
    v -= eta_v * baseline_grad(example1_costs(v), EncoderKind::kDL2Baseline)[0];
  run.final_v = v;
  run.final_cost = example1_cost(v);
  return run;
}

}  // namespace

CnfTemplate example2_cnf() { return compile("v.out[0] == 1 | v.out[0] == 2 | v.out[0] == 3"); }

CostMatrix example2_costs(const CnfTemplate& cnf, double v) {
  return encode(cnf, ground(cnf, SlotBindings{{"v", {v}}}));
}

double example2_cost(double v) {
  static const CnfTemplate cnf = example2_cnf();
  return closed_form_cost(example2_costs(cnf, v)).value;
}

double example2_dl2_grad(double v) {
  static const CnfTemplate cnf = example2_cnf();
  return baseline_grad(example2_costs(cnf, v), EncoderKind::kDL2Baseline)[0];
}

DemoRun example2_dl2(double v0, std::size_t max_steps, double eta_v) {
  DemoRun run{"dl2", v0, example2_dl2_grad(v0), v0, 0.0, 0};
  double v = v0;
  for (; run.steps < max_steps && example2_cost(v) > 0.0; ++run.steps) v -= eta_v * example2_dl2_grad(v);
  run.final_v = v;
  run.final_cost = example2_cost(v);
  return run;
}

DemoRun example2_dual(double v0, std::size_t max_rounds, double eta_conj, double eta_disj, double stop) {
  const CnfTemplate cnf = example2_cnf();
  DualState d = uniform_duals(cnf);
  DemoRun run{"dual", v0, grad_outputs(example2_costs(cnf, v0), d)[0], v0, 0.0, 0};

  // the dual-weighted cost is convex piecewise linear in v, so a breakpoint minimizes it
  std::vector<double> kinks;
  for (const auto& clause : cnf.clauses)
    for (const auto& atom : clause) {
      if (atom.term.refs.size() != 1) throw InputError("expected atoms over a single output");
      kinks.push_back((atom.cost_bound() - atom.term.offset) / atom.term.refs.front().coefficient);
    }

  TrainConfig cfg;
  cfg.eta_conj = eta_conj;
  cfg.eta_disj = eta_disj;
  double v = v0;
  while (run.steps < max_rounds && example2_cost(v) >= stop) {
    double best = std::numeric_limits<double>::infinity(), arg = v;
    for (double k : kinks) {
      const double c = cnf_cost(example2_costs(cnf, k), d);
      if (c < best || (c == best && std::abs(k - v) < std::abs(arg - v))) {
        best = c;
        arg = k;
      }
    }
    v = arg;
    const CostMatrix m = example2_costs(cnf, v);
    std::vector<DualState*> ds{&d};
    std::vector<const CostMatrix*> cs{&m};
    update_duals(ds, cs, cfg);
    ++run.steps;
  }
  run.final_v = v;
  run.final_cost = example2_cost(v);
  return run;
}

std::vector<DemoRun> bench_encoders(const std::string& example) {
  if (example == "appendix-c-1") return {example1_dual(), example1_fuzzy(), example1_dl2(0.0, 2000, 0.05)};
  if (example == "appendix-c-2") return {example2_dual(), example2_dl2()};
  throw ConfigError(fmt::format("unknown example '{}' (appendix-c-1 or appendix-c-2)", example));
}

}  // namespace logicloss::harness
