#include <cmath>
#include <random>

#include "logicloss/harness/diagnostics.hpp"
#include "logicloss/model.hpp"
#include "logicloss/trainer.hpp"
#include "logicloss/variational.hpp"

namespace logicloss::harness {

double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

namespace {

constexpr double kKinkClearance = 1e-3;

std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(n);
  double s = 0.0;
  for (double& v : x) s += (v = e(rng) + 1e-3);
  for (double& v : x) v /= s;
  return x;
}

DualState random_duals(const CnfTemplate& cnf, std::mt19937_64& rng) {
  DualState d;
  d.conj = random_simplex(cnf.clauses.size(), rng);
  for (const auto& c : cnf.clauses) d.disj.push_back(random_simplex(c.size(), rng));
  return d;
}

// Random linear CNF over slots a and b (three outputs each).
CnfTemplate random_cnf(std::mt19937_64& rng, std::size_t max_clauses, std::size_t max_literals,
                       const std::vector<std::string>& slots, std::size_t width) {
  std::uniform_int_distribution<std::size_t> n_clauses(1, max_clauses), n_lits(1, max_literals),
      n_refs(1, 3), slot(0, slots.size() - 1), index(0, width - 1);
  std::uniform_real_distribution<double> coef(-2.0, 2.0), bound(-1.0, 1.0);
  std::bernoulli_distribution strict(0.3);
  CnfTemplate cnf;
  const std::size_t nc = n_clauses(rng);
  for (std::size_t i = 0; i < nc; ++i) {
    Clause clause;
    const std::size_t nl = n_lits(rng);
    for (std::size_t j = 0; j < nl; ++j) {
      Atom a;
      const std::size_t nr = n_refs(rng);
      for (std::size_t r = 0; r < nr; ++r) a.term.refs.push_back({slots[slot(rng)], index(rng), coef(rng)});
      a.bound = bound(rng);
      a.strict = strict(rng);
      a.margin = a.strict ? 0.01 : 0.0;
      clause.push_back(std::move(a));
    }
    cnf.clauses.push_back(std::move(clause));
    cnf.conjunct_map.push_back(i);
  }
  cnf.slot_names = slots;
  regroup(cnf, GroupStrategy::kPerClause);
  return cnf;
}

bool clear_of_kinks(const CnfTemplate& cnf, const Grounding& g) {
  std::size_t k = 0;
  for (const auto& clause : cnf.clauses)
    for (const auto& atom : clause)
      if (std::abs(g.values[k++] - atom.cost_bound()) < kKinkClearance) return false;
  return true;
}

bool any_active(const CostMatrix& m) {
  for (const auto& row : m.costs)
    for (double s : row)
      if (s > 0.0) return true;
  return false;
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    flat.insert(flat.end(), g.weight[l].data(), g.weight[l].data() + g.weight[l].size());
    flat.insert(flat.end(), g.bias[l].data(), g.bias[l].data() + g.bias[l].size());
  }
  return flat;
}

}  // namespace

SuiteResult check_encoder_gradients(std::size_t points, std::uint64_t seed) {
  SuiteResult res{"encoder.grad_outputs", 0, 0.0, 1e-5};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> out(-1.0, 1.0);
  const std::vector<std::string> slots{"a", "b"};
  const std::size_t width = 3;
  while (res.points < points) {
    const CnfTemplate cnf = random_cnf(rng, 3, 3, slots, width);
    SlotBindings b;
    for (const auto& s : slots) {
      std::vector<double> v(width);
      for (double& x : v) x = out(rng);
      b[s] = v;
    }
    const Grounding g = ground(cnf, b);
    const CostMatrix m = encode(cnf, g);
    if (!clear_of_kinks(cnf, g) || !any_active(m)) continue;
    const DualState d = random_duals(cnf, rng);
    const std::vector<double> analytic = grad_outputs(m, d);

    std::vector<double> numeric(g.num_outputs);
    for (std::size_t k = 0; k < slots.size(); ++k)
      for (std::size_t j = 0; j < width; ++j) {
        SlotBindings plus = b, minus = b;
        plus[slots[k]][j] += kFiniteDiffStep;
        minus[slots[k]][j] -= kFiniteDiffStep;
        numeric[g.slot_offsets[k] + j] =
            (cnf_cost(encode(cnf, ground(cnf, plus)), d) - cnf_cost(encode(cnf, ground(cnf, minus)), d)) /
            (2.0 * kFiniteDiffStep);
      }
    res.max_rel_err = std::max(res.max_rel_err, relative_error(analytic, numeric));
    ++res.points;
  }
  return res;
}

SuiteResult check_variational_gradients(std::size_t points, std::uint64_t seed) {
  SuiteResult res{"variational.logic_loss_grad", 0, 0.0, 1e-5};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mu_dist(1e-3, 5.0), delta_dist(0.1, 3.0);
  const std::size_t m = 3;
  for (; res.points < points; ++res.points) {
    std::vector<double> mu(m);
    DeltaState d = DeltaState::ones(m);
    for (double& v : mu) v = mu_dist(rng);
    for (double& v : d.delta) v = delta_dist(rng);
    const LogicLossGrad lg = logic_loss_grad(mu, d);
    std::vector<double> analytic = lg.d_mu, numeric;
    analytic.insert(analytic.end(), lg.d_delta.begin(), lg.d_delta.end());
    for (std::size_t k = 0; k < m; ++k) {
      auto plus = mu, minus = mu;
      plus[k] += kFiniteDiffStep;
      minus[k] -= kFiniteDiffStep;
      numeric.push_back((logic_loss(plus, d).total() - logic_loss(minus, d).total()) / (2.0 * kFiniteDiffStep));
    }
    for (std::size_t k = 0; k < m; ++k) {
      DeltaState plus = d, minus = d;
      plus.delta[k] += kFiniteDiffStep;
      minus.delta[k] -= kFiniteDiffStep;
      numeric.push_back((logic_loss(mu, plus).total() - logic_loss(mu, minus).total()) / (2.0 * kFiniteDiffStep));
    }
    res.max_rel_err = std::max(res.max_rel_err, relative_error(analytic, numeric));
  }
  return res;
}

SuiteResult check_model_gradients(std::size_t points, std::uint64_t seed) {
  SuiteResult res{"model.end_to_end", 0, 0.0, 1e-4};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> in(-1.0, 1.0), delta_dist(0.3, 2.0);
  std::uniform_int_distribution<std::size_t> label(0, 1);
  TrainConfig cfg;
  const std::vector<std::string> slots{"x", "y"};

  while (res.points < points) {
    MlpSpec spec{{3, 3, 2}, Head::kSoftmax, rng()};
    ModelParameters model = init(spec);
    Dataset data;
    data.constraints.push_back(random_cnf(rng, 2, 2, slots, 2));
    Sample s;
    for (const auto& name : slots) s.inputs[name] = {in(rng), in(rng), in(rng)};
    s.label = label(rng);
    data.samples.push_back(s);

    const CnfTemplate& cnf = data.constraints.front();
    const DualState duals = random_duals(cnf, rng);
    DeltaState delta = DeltaState::ones(cnf.num_groups);
    for (double& v : delta.delta) v = delta_dist(rng);

    // stay away from ReLU and hinge kinks
    bool clear = true;
    SlotBindings b;
    for (const auto& name : slots) {
      const ForwardTrace t = forward(model, s.inputs[name]);
      for (Eigen::Index i = 0; i < t.pre.front().size(); ++i)
        clear = clear && std::abs(t.pre.front()[i]) > kKinkClearance;
      b[name] = std::vector<double>(t.output.data(), t.output.data() + t.output.size());
    }
    const Grounding g = ground(cnf, b);
    if (!clear || !clear_of_kinks(cnf, g) || !any_active(encode(cnf, g))) continue;

    const SampleGradient sg = sample_gradient(model, data, data.samples.front(), &duals, delta, cfg, 1.0);
    const std::vector<double> analytic = flatten(sg.grad);
    const std::vector<double> base = model.flatten();
    std::vector<double> numeric(base.size());
    auto loss_at = [&](const std::vector<double>& w) {
      model.assign(w);
      const SampleGradient r = sample_gradient(model, data, data.samples.front(), &duals, delta, cfg, 1.0);
      return r.task_loss + r.logic_loss;
    };
    for (std::size_t k = 0; k < base.size(); ++k) {
      auto plus = base, minus = base;
      plus[k] += kFiniteDiffStep;
      minus[k] -= kFiniteDiffStep;
      numeric[k] = (loss_at(plus) - loss_at(minus)) / (2.0 * kFiniteDiffStep);
    }
    res.max_rel_err = std::max(res.max_rel_err, relative_error(analytic, numeric));
    ++res.points;
  }
  return res;
}

std::vector<SuiteResult> run_gradient_suites(std::size_t points, std::uint64_t seed) {
  return {check_encoder_gradients(points, seed), check_variational_gradients(points, seed + 1),
          check_model_gradients(points, seed + 2)};
}

}  // namespace logicloss::harness
