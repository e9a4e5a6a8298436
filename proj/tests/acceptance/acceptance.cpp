// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "logicloss/encoder.hpp"
#include "logicloss/formula.hpp"
#include "logicloss/harness/cli.hpp"
#include "logicloss/harness/diagnostics.hpp"
#include "logicloss/harness/experiment.hpp"
#include "logicloss/trainer.hpp"
#include "logicloss/variational.hpp"

using namespace logicloss;
using namespace logicloss::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path source_dir() {
  if (const char* d = std::getenv("LOGICLOSS_SOURCE_DIR")) return d;
  return LOGICLOSS_SOURCE_DIR;
}

// Random atom over v.out[0..3]: one or two references, bound and state on a quarter grid so
// that ties with the bound occur.
Atom random_atom(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> idx(0, 3), refs(1, 2);
  Atom a;
  const int n = refs(rng);
  for (int r = 0; r < n; ++r) a.term.refs.push_back({"v", static_cast<std::size_t>(idx(rng)), u(rng) < 0 ? -1.0 : 1.0});
  a.term = a.term.normalized();
  if (a.term.refs.empty()) a.term.refs.push_back({"v", 0, 1.0});
  a.bound = std::round(u(rng) * 4) / 4;
  return a;
}

Clause random_clause(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nl(1, 3);
  Clause c;
  const int n = nl(rng);
  for (int j = 0; j < n; ++j) c.push_back(random_atom(rng));
  return c;
}

CnfTemplate random_cnf(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nc(1, 3);
  CnfTemplate c;
  const int n = nc(rng);
  for (int i = 0; i < n; ++i) c.clauses.push_back(random_clause(rng));
  c.slot_names = {"v"};
  regroup(c, GroupStrategy::kPerClause);
  return c;
}

std::vector<double> random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(4);
  for (auto& x : v) x = std::round(u(rng) * 4) / 4;
  return v;
}

double cost_of(const CnfTemplate& c, const std::vector<double>& v) {
  return closed_form_cost(encode(c, ground(c, {{"v", v}}))).value;
}

// ---------------------------------------------------------------------------

Outcome zero_cost_iff_satisfied() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0, satisfied = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const CnfTemplate c = random_cnf(rng);
    const Grounding g = ground(c, {{"v", random_state(rng)}});
    const bool sat = eval_bool(c, g.values, 0.0);
    satisfied += sat;
    mismatches += (closed_form_cost(encode(c, g)).value == 0.0) != sat;
  }
  return {mismatches == 0 && satisfied > 0 && satisfied < 500,
          fmt::format("500 CNFs, {} satisfied, {} mismatches", satisfied, mismatches)};
}

Outcome dual_convergence() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> s(0.0, 5.0);
  std::uniform_int_distribution<int> n(1, 5);
  TrainConfig cfg;
  cfg.eta_conj = 1.0;
  cfg.eta_disj = 1.0;
  std::size_t converged = 0, worst_iters = 0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    CostMatrix m;
    m.costs.resize(n(rng));
    for (auto& row : m.costs) {
      row.resize(n(rng));
      for (auto& v : row) v = s(rng);
      m.grads.emplace_back(row.size());
    }
    const double target = closed_form_cost(m).value;
    DualState d = DualState::uniform(m);
    std::vector<DualState*> ds{&d};
    std::vector<const CostMatrix*> cs{&m};
    double gap = std::abs(cnf_cost(m, d) - target);
    std::size_t it = 0;
    for (; it < 5000 && gap > 1e-4; ++it) {
      update_duals(ds, cs, cfg);
      gap = std::abs(cnf_cost(m, d) - target);
    }
    converged += gap <= 1e-4;
    worst_gap = std::max(worst_gap, gap);
    worst_iters = std::max(worst_iters, it);
  }
  return {converged == 100, fmt::format("{}/100 converged, slowest {} iterations, worst gap {:.2e}", converged,
                                        worst_iters, worst_gap)};
}

Outcome gradient_suites() {
  bool ok = true;
  std::string detail;
  for (const auto& s : run_gradient_suites(100, 0)) {
    const double limit = s.name == "model.end_to_end" ? 1e-4 : 1e-5;
    ok = ok && s.passed() && s.points >= 100 && s.tolerance <= limit;
    detail += fmt::format("{}{} {:.1e} ({} pts)", detail.empty() ? "" : "; ", s.name, s.max_rel_err, s.points);
  }
  return {ok, detail};
}

Outcome kl_consistency() {
  std::vector<std::pair<double, double>> grid;
  for (int i = 0; i <= 10; ++i)
    for (double d : {0.1, 0.5, 1.0, 2.0}) grid.emplace_back(0.5 * i, d);
  auto ll = [](double mu, double delta) { return logic_loss({mu}, DeltaState{{delta}, 0.01}).total(); };
  double worst = 0.0;
  for (const auto& [ma, da] : grid)
    for (const auto& [mb, db] : grid)
      worst = std::max(worst, std::abs((ll(ma, da) - ll(mb, db)) -
                                       (dirac_limit_kl(ma, da) - dirac_limit_kl(mb, db))));
  // the narrow divergence carries the entropy term -log(s1) - 1/2 of the point mass
  const double s1 = 1e-6;
  double worst_limit = 0.0;
  for (double mu2 : {0.0, 0.25, 0.5, 1.0})
    for (double s2 : {1.0, 1.5, 2.0})
      worst_limit = std::max(worst_limit, std::abs(truncated_kl(0.0, s1, mu2, s2) + std::log(s1) + 0.5 -
                                                   dirac_limit_kl(mu2, s2)));
  return {worst <= 1e-8 && worst_limit <= 1e-6,
          fmt::format("grid max diff {:.2e}; sigma1=1e-6 limit max diff {:.2e}", worst, worst_limit)};
}

Outcome example_one() {
  const DemoRun dual = example1_dual(0.0, 2000);
  // fuzzy: gradient at v0 and every iterate
  double v = 0.0;
  const double g0 = baseline_grad(example1_costs(v), EncoderKind::kFuzzyMinMax)[0];
  bool moved = false;
  for (int t = 0; t < 2000; ++t) {
    const double next = v - 0.05 * baseline_grad(example1_costs(v), EncoderKind::kFuzzyMinMax)[0];
    moved = moved || next != 0.0;
    v = next;
  }
  const DemoRun fuzzy = example1_fuzzy(0.0, 2000);
  const bool ok = dual.final_cost < 1e-6 && dual.steps <= 2000 && g0 == 0.0 && !moved &&
                  fuzzy.start_grad == 0.0 && fuzzy.final_v == 0.0;
  return {ok, fmt::format("dual cost {:.2e} at v={:.6g} after {} steps; fuzzy grad {} and {}", dual.final_cost,
                          dual.final_v, dual.steps, g0, moved ? "moved" : "never moved")};
}

Outcome example_two() {
  const double g15 = example2_dl2_grad(1.5), g25 = example2_dl2_grad(2.5);
  const DemoRun dual = example2_dual(1.5);
  const bool ok = std::abs(g15) < 1e-9 && std::abs(g25) < 1e-9 && dual.final_cost < 1e-6;
  return {ok, fmt::format("dl2 |grad| {:.1e} at 1.5, {:.1e} at 2.5; dual reaches v={:.6g} with cost {:.2e}",
                          std::abs(g15), std::abs(g25), dual.final_v, dual.final_cost)};
}

Outcome delta_oracle_check() {
  // delta is what the oracle stores; compare it to the correctly rounded square roots
  const double a = delta_oracle({{1.0}, {3.0}}).delta[0];
  const double b = delta_oracle({{0.004}, {0.008}}).delta[0];
  const double c = delta_oracle({{0.0}, {0.0}}, 0.01).delta[0];
  const bool ok = a == std::sqrt(2.0) && b == std::sqrt(0.01) && c == std::sqrt(0.01);
  return {ok, fmt::format("delta({{1,3}}) = {:.17g}; delta({{.004,.008}}) = {:.17g}; delta({{0,0}}) = {:.17g}", a, b, c)};
}

struct ArmResult {
  double sat, metric, q_sat;
};

ArmResult run_arm(ExperimentConfig cfg, std::uint64_t seed, ConstraintEncoder enc) {
  cfg.model.seed = cfg.train.seed = cfg.data.seed = seed;
  cfg.train.encoder = enc;
  const RunOutcome r = run_experiment(cfg, false);
  const MetricsRow& last = r.result.rows.back();
  ArmResult a{last.sat, last.acc_or_mse, 0.0};
  const auto& tags = r.result.tags;
  const auto q = std::find(tags.begin(), tags.end(), "q");
  if (q != tags.end()) a.q_sat = last.lit_sat[static_cast<std::size_t>(q - tags.begin())];
  return a;
}

Outcome shortcut_demo() {
  const ExperimentConfig cfg = load_config(source_dir() / "configs" / "shortcut.json");
  std::vector<double> q_dual, q_dl2, sat_dual, sat_dl2;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ArmResult d = run_arm(cfg, seed, ConstraintEncoder::kDualVariational);
    const ArmResult b = run_arm(cfg, seed, ConstraintEncoder::kDL2);
    q_dual.push_back(d.q_sat);
    q_dl2.push_back(b.q_sat);
    sat_dual.push_back(d.sat);
    sat_dl2.push_back(b.sat);
    per_seed += fmt::format(" s{}:{:.3f}/{:.3f}", seed, d.q_sat, b.q_sat);
  }
  const double qd = median(q_dual), qb = median(q_dl2), sd = median(sat_dual), sb = median(sat_dl2);
  return {qd >= 0.5 && qb <= 0.05 && sd >= sb,
          fmt::format("median Q-Sat dual {:.3f} vs dl2 {:.3f}; median Sat {:.3f} vs {:.3f};{}", qd, qb, sd, sb,
                      per_seed)};
}

Outcome shortest_path_demo() {
  const ExperimentConfig cfg = load_config(source_dir() / "configs" / "shortest_path.json");
  std::vector<double> sat_dual, sat_none, mse_dual, mse_none;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ArmResult d = run_arm(cfg, seed, ConstraintEncoder::kDualVariational);
    const ArmResult n = run_arm(cfg, seed, ConstraintEncoder::kNone);
    sat_dual.push_back(d.sat);
    sat_none.push_back(n.sat);
    mse_dual.push_back(d.metric);
    mse_none.push_back(n.metric);
    per_seed += fmt::format(" s{}:sat {:.3f}/{:.3f} mse {:.2f}/{:.2f}", seed, d.sat, n.sat, d.metric, n.metric);
  }
  const double sd = median(sat_dual), sn = median(sat_none), md = median(mse_dual), mn = median(mse_none);
  return {sd - sn >= 0.10 && md <= 1.5 * mn,
          fmt::format("median Sat {:.3f} vs {:.3f} (+{:.1f} pp); median MSE {:.3f} vs {:.3f} ({:.2f}x);{}", sd, sn,
                      100.0 * (sd - sn), md, mn, md / mn, per_seed)};
}

Outcome monotonicity() {
  std::mt19937_64 rng(99);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const CnfTemplate c = random_cnf(rng);
    const auto v = random_state(rng);
    const double before = cost_of(c, v);

    CnfTemplate more = c;
    more.clauses.push_back(random_clause(rng));
    regroup(more, GroupStrategy::kPerClause);
    violations += cost_of(more, v) < before;

    CnfTemplate wider = c;
    std::uniform_int_distribution<std::size_t> pick(0, c.clauses.size() - 1);
    const std::size_t i = pick(rng);
    wider.clauses[i].push_back(random_atom(rng));
    const CostMatrix a = encode(c, ground(c, {{"v", v}})), b = encode(wider, ground(wider, {{"v", v}}));
    const double clause_before = *std::min_element(a.costs[i].begin(), a.costs[i].end());
    const double clause_after = *std::min_element(b.costs[i].begin(), b.costs[i].end());
    violations += clause_after > clause_before;
    violations += cost_of(wider, v) > before;
  }
  return {violations == 0, fmt::format("1000 cases, {} violations", violations)};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  unsetenv("LOGICLOSS_THREADS");
  const fs::path tmp = fs::temp_directory_path() / "logicloss_acceptance_determinism";
  fs::remove_all(tmp);
  const std::string config = (source_dir() / "configs" / "shortcut.json").string();
  const char* bin = std::getenv("LOGICLOSS_BIN");
  std::vector<std::string> csv;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = tmp / fmt::format("run{}", run);
    int code = 0;
    if (bin != nullptr) {
      code = std::system(fmt::format("'{}' train --config '{}' --out-dir '{}' --seed 3 >/dev/null", bin, config,
                                     out.string())
                             .c_str());
    } else {
      const std::string o = out.string();
      const char* argv[] = {"logicloss", "train", "--config", config.c_str(), "--out-dir", o.c_str(), "--seed", "3"};
      std::ostringstream sink;
      code = run_cli(8, argv, sink, sink);
    }
    if (code != 0) return {false, fmt::format("train exited with {}", code)};
    csv.push_back(read_bytes(out / "metrics.csv"));
  }
  fs::remove_all(tmp);
  const bool ok = !csv[0].empty() && csv[0] == csv[1];
  return {ok, fmt::format("two runs via {}, {} bytes each, {}", bin ? "binary" : "in-process", csv[0].size(),
                          ok ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "zero closed-form cost iff satisfied", 1.0, zero_cost_iff_satisfied},
      {2, "projected dual descent-ascent convergence", 10.0, dual_convergence},
      {3, "gradient suites", 30.0, gradient_suites},
      {4, "divergence consistency", 1.0, kl_consistency},
      {5, "robustness example 1", 5.0, example_one},
      {6, "robustness example 2", 5.0, example_two},
      {7, "delta oracle", 1.0, delta_oracle_check},
      {8, "shortcut satisfaction", 300.0, shortcut_demo},
      {9, "shortest distance", 600.0, shortest_path_demo},
      {10, "monotonicity", 1.0, monotonicity},
      {11, "determinism", 120.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = o.ok && secs <= c.budget_s;
    failed += !ok;
    fmt::print("{} [{}] {}: {} ({:.2f} s, budget {:.0f} s)\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail, secs,
               c.budget_s);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
