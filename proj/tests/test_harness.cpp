#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "logicloss/encoder.hpp"
#include "logicloss/errors.hpp"
#include "logicloss/harness/diagnostics.hpp"
#include "logicloss/harness/experiment.hpp"
#include "logicloss/harness/tasks.hpp"

using namespace logicloss;
using namespace logicloss::harness;
using nlohmann::json;

namespace {

std::vector<double> bellman_ford(const std::vector<std::vector<int>>& adj, std::size_t src) {
  const std::size_t n = adj.size();
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  d[src] = 0.0;
  for (std::size_t round = 0; round + 1 < n; ++round)
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        if (adj[u][v] > 0 && d[u] + adj[u][v] < d[v]) d[v] = d[u] + adj[u][v];
  return d;
}

// Bindings of a shortest-path sample where every slot outputs its true distances.
SlotBindings true_bindings(const GraphInstance& g, const CnfTemplate& cnf) {
  SlotBindings b;
  b["x"] = g.labels;
  for (const auto& slot : cnf.slot_names)
    if (slot != "x") b[slot] = dijkstra(swap_vertices(g.adjacency, std::stoul(slot.substr(1))), 0);
  return b;
}

std::size_t nearest_centroid(const std::vector<double>& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < kShortcutClasses; ++c) {
    const auto m = shortcut_centroid(c);
    double d = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) d += (x[i] - m[i]) * (x[i] - m[i]);
    if (d < best_d) best_d = d, best = c;
  }
  return best;
}

}  // namespace

TEST_CASE("dijkstra agrees with bellman-ford") {
  const auto graphs = gen_graphs(8, 200, 11);
  for (const auto& g : graphs) {
    CHECK(g.labels == bellman_ford(g.adjacency, 0));
    for (std::size_t s = 1; s < g.n; ++s) CHECK(dijkstra(g.adjacency, s) == bellman_ford(g.adjacency, s));
    for (double d : g.labels) CHECK(std::isfinite(d));
    for (std::size_t u = 0; u < g.n; ++u) {
      CHECK(g.adjacency[u][u] == 0);
      for (std::size_t v = 0; v < g.n; ++v) {
        CHECK(g.adjacency[u][v] == g.adjacency[v][u]);
        CHECK(g.adjacency[u][v] <= kMaxEdgeWeight);
      }
    }
  }
  CHECK(dijkstra({{0, 5}, {5, 0}}, 0) == std::vector<double>{0.0, 5.0});
  CHECK_THROWS_AS(dijkstra({{0}}, 1), IndexOutOfRange);
  CHECK_THROWS_AS(gen_graphs(1, 3, 0), ConfigError);
}

TEST_CASE("graph generation is deterministic") {
  const auto a = gen_graphs(6, 20, 3), b = gen_graphs(6, 20, 3), c = gen_graphs(6, 20, 4);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].adjacency == b[i].adjacency);
    differs = differs || a[i].adjacency != c[i].adjacency;
  }
  CHECK(differs);
}

TEST_CASE("vertex swap and features") {
  const std::vector<std::vector<int>> adj{{0, 2, 0}, {2, 0, 7}, {0, 7, 0}};
  const auto s = swap_vertices(adj, 2);
  CHECK(s == std::vector<std::vector<int>>{{0, 7, 0}, {7, 0, 2}, {0, 2, 0}});
  CHECK(swap_vertices(adj, 0) == adj);
  CHECK(swap_vertices(s, 2) == adj);
  CHECK(dijkstra(s, 0) == std::vector<double>{0.0, 7.0, 9.0});
  const auto f = graph_features(adj);
  REQUIRE(f.size() == 9);
  CHECK(f[1] == doctest::Approx(2.0 / 9.0));
  CHECK(f[5] == doctest::Approx(7.0 / 9.0));
}

TEST_CASE("vertex pairs") {
  std::mt19937_64 rng(1);
  const auto pairs = sample_pairs(8, 10, rng);
  CHECK(pairs.size() == 10);
  CHECK(std::set<VertexPair>(pairs.begin(), pairs.end()).size() == 10);
  for (const auto& [j, k] : pairs) {
    CHECK(j != k);
    CHECK(j > 0);
    CHECK(k > 0);
  }
  CHECK(sample_pairs(3, 100, rng).size() == 2);
  CHECK_THROWS_AS(sample_pairs(2, 1, rng), ConfigError);
}

TEST_CASE("shortest-path constraints hold on true distances") {
  const auto graphs = gen_graphs(8, 100, 5);
  std::mt19937_64 rng(2);
  for (const auto& g : graphs) {
    const auto pairs = sample_pairs(g.n, 10, rng);
    const ShortestPathConstraint c = shortest_path_constraints(g.n, pairs);
    std::set<std::size_t> ks;
    for (const auto& p : pairs) ks.insert(p.second);
    CHECK(c.sources == std::vector<std::size_t>(ks.begin(), ks.end()));
    CHECK(c.cnf.clauses.size() == 2 * ks.size() + pairs.size());
    CHECK(c.cnf.num_groups == 1);
    const Grounding gr = ground(c.cnf, true_bindings(g, c.cnf));
    CHECK(eval_bool(c.cnf, gr.values, 1.0, TolMode::kBand));
    CHECK(eval_bool(c.cnf, gr.values, 0.0, TolMode::kBand));
    CHECK(closed_form_cost(encode(c.cnf, gr)).value == 0.0);
  }
  CHECK_THROWS_AS(shortest_path_constraints(8, {{0, 2}}), IndexOutOfRange);
  CHECK_THROWS_AS(shortest_path_constraints(8, {{3, 3}}), IndexOutOfRange);
}

TEST_CASE("perturbed distances break symmetry and triangles") {
  const auto graphs = gen_graphs(8, 50, 6);
  std::mt19937_64 rng(3);
  std::size_t broken = 0;
  for (const auto& g : graphs) {
    const auto pairs = sample_pairs(g.n, 10, rng);
    const ShortestPathConstraint c = shortest_path_constraints(g.n, pairs);
    SlotBindings b = true_bindings(g, c.cnf);
    const std::size_t k = pairs.front().second;
    b["x"][k] += 5.0;  // breaks x.d[k] == s_k.d[k] outside the band
    const Grounding gr = ground(c.cnf, b);
    broken += !eval_bool(c.cnf, gr.values, 1.0, TolMode::kBand);
    CHECK(closed_form_cost(encode(c.cnf, gr)).value > 0.0);
  }
  CHECK(broken == graphs.size());
}

TEST_CASE("shortest-path dataset layout") {
  const auto graphs = gen_graphs(8, 10, 7);
  const Dataset ds = make_shortest_path_dataset(graphs, 10, 8);
  REQUIRE(ds.samples.size() == 10);
  CHECK(ds.constraints.size() == 10);
  CHECK(ds.logic_dims() == 1);
  CHECK(ds.literal_tags() == std::vector<std::string>{"sym", "tri"});
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    CHECK(s.constraint == i);
    CHECK(s.target == graphs[i].labels);
    CHECK(s.inputs.size() == ds.constraints[i].slot_names.size());
    CHECK(s.inputs.at("x").size() == 64);
  }
}

TEST_CASE("shortcut task geometry") {
  const ShortcutTask t = gen_shortcut_task(2000, 1);
  CHECK(t.points.size() == 2000);
  CHECK(t.rule.clauses.size() == 1);
  REQUIRE(t.rule.clauses[0].size() == 2);
  std::set<std::string> tags;
  for (const auto& a : t.rule.clauses[0]) tags.insert(a.tag);
  CHECK(tags == std::set<std::string>{"not_p", "q"});
  std::size_t correct = 0;
  std::vector<std::size_t> per_class(kShortcutClasses, 0);
  for (const auto& p : t.points) {
    correct += nearest_centroid(p.x) == p.cls;
    ++per_class[p.cls];
    REQUIRE(p.x.size() == kShortcutInputWidth);
    CHECK(p.rx == reflect(p.x));
    for (std::size_t i = 0; i < p.x.size(); ++i) CHECK(p.rx[i] == -p.x[i]);
  }
  CHECK(static_cast<double>(correct) / t.points.size() >= 0.99);
  for (std::size_t n : per_class) CHECK(n == 500);

  // reflected centroid of class 1 matches class 3 in position, not in orientation
  const auto r1 = reflect(shortcut_centroid(1)), c3 = shortcut_centroid(kShortcutHiddenClass);
  CHECK(r1[0] == c3[0]);
  CHECK(r1[1] == c3[1]);
  CHECK(r1[2] == -c3[2]);
  CHECK_THROWS_AS(gen_shortcut_task(10, 1), ConfigError);
}

TEST_CASE("shortcut datasets hide the hidden class") {
  const ShortcutTask t = gen_shortcut_task(400, 2);
  const Dataset train = make_shortcut_dataset(t, true), test = make_shortcut_dataset(t, false);
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    const bool hidden = t.points[i].cls == kShortcutHiddenClass;
    CHECK(train.samples[i].label.has_value() == !hidden);
    CHECK(test.samples[i].label == t.points[i].cls);
    CHECK(train.samples[i].focus == hidden);
  }
  CHECK(train.literal_tags().size() == 2);

  CnfTemplate wrong = compile("x.p[0] >= 0.5");
  CHECK_THROWS_AS(tag_shortcut_rule(wrong), InputError);
}

TEST_CASE("fixture constraints") {
  const auto fx = fixture_constraints();
  const CnfTemplate& sc = fx.at("superclass");
  CHECK(sc.clauses.size() == 2);
  for (const auto& c : sc.clauses) CHECK(c.size() == 2);

  const CnfTemplate& hwf = fx.at("hwf");
  CHECK(hwf.clauses.size() == 12);
  for (const auto& c : hwf.clauses) CHECK(c.size() == 2);
  CHECK(hwf.num_groups == 3);

  // one-hot symbols: digit, op, digit, digit is well formed; op, op is not
  auto onehot = [](std::size_t k) {
    std::vector<double> p(14, 0.0);
    p[k] = 1.0;
    return p;
  };
  SlotBindings ok{{"x1", onehot(3)}, {"x2", onehot(11)}, {"x3", onehot(7)}, {"x4", onehot(0)}};
  CHECK(eval_bool(hwf, ground(hwf, ok).values, 0.0, TolMode::kStrictOnly));
  SlotBindings bad{{"x1", onehot(10)}, {"x2", onehot(11)}, {"x3", onehot(7)}, {"x4", onehot(0)}};
  CHECK_FALSE(eval_bool(hwf, ground(hwf, bad).values, 0.0, TolMode::kStrictOnly));

  // fixture sources survive print -> parse
  for (const std::string& src : {hwf_source(4), superclass_source({{0, 1}, {2, 3}})}) {
    const Formula f = desugar(parse(src));
    CHECK(desugar(parse(to_string(f))) == f);
  }
  CHECK_THROWS_AS(hwf_source(1), ConfigError);
}

TEST_CASE("jsonl round trips") {
  const auto graphs = gen_graphs(5, 7, 9);
  std::stringstream gs;
  write_graphs_jsonl(gs, graphs);
  const auto back = read_graphs_jsonl(gs);
  REQUIRE(back.size() == graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    CHECK(back[i].adjacency == graphs[i].adjacency);
    CHECK(back[i].labels == graphs[i].labels);
    CHECK(back[i].n == 5);
  }

  const ShortcutTask t = gen_shortcut_task(100, 3);
  std::stringstream ss;
  write_shortcut_jsonl(ss, t, true);
  const std::string text = ss.str();
  CHECK(json::parse(text.substr(0, text.find('\n'))).contains("rx"));
  const ShortcutTask tb = read_shortcut_jsonl(ss);
  REQUIRE(tb.points.size() == t.points.size());
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    CHECK(tb.points[i].x == t.points[i].x);
    CHECK(tb.points[i].cls == t.points[i].cls);
  }

  std::stringstream broken("{\"n\": 2, \"source\": 0, \"adjacency\": [[0]], \"labels\": [0]}\n");
  CHECK_THROWS_AS(read_graphs_jsonl(broken), InputError);
  std::stringstream garbage("not json\n");
  CHECK_THROWS_AS(read_graphs_jsonl(garbage), InputError);
}

TEST_CASE("config parsing") {
  const ExperimentConfig d = parse_config(json{{"task", "shortcut"}});
  CHECK(d.model.widths == std::vector<std::size_t>{3, 32, 32, 4});
  CHECK(d.train.tol == 0.01);
  CHECK(d.train.encoder == ConstraintEncoder::kDualVariational);

  const ExperimentConfig sp =
      parse_config(json{{"task", "shortest_path"}, {"data", {{"n_vertices", 6}}}, {"train", {{"epochs", 2}}}});
  CHECK(sp.model.widths == std::vector<std::size_t>{36, 128, 128, 6});
  CHECK(sp.model.head == Head::kReluRegression);
  CHECK(sp.train.tol_mode == TolMode::kBand);
  CHECK(sp.train.epochs == 2);

  CHECK_THROWS_AS(parse_config(json{{"task", "shortcut"}, {"extra", 1}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"task", "shortcut"}, {"train", {{"lr", 1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"task", "mnist"}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"task", "shortcut"}, {"train", {{"eta_w", "fast"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"task", "shortcut"}, {"train", {{"batch_size", 0}}}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);

  // round trip through the snapshot
  const ExperimentConfig file = load_config("configs/shortest_path.json");
  const ExperimentConfig again = parse_config(file.to_json());
  CHECK(again.to_json() == file.to_json());
  CHECK(file.train.eta_w == 0.001);
}

TEST_CASE("run ids are stable and sensitive") {
  const ExperimentConfig a = parse_config(json{{"task", "shortcut"}});
  ExperimentConfig b = a;
  CHECK(run_id(a, "r") == run_id(b, "r"));
  CHECK(run_id(a, "r").size() == 16);
  CHECK(run_id(a, "r") != run_id(a, "s"));
  b.train.seed = 9;
  CHECK(run_id(a, "r") != run_id(b, "r"));
}

TEST_CASE("experiment run writes artifacts") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "logicloss_harness_test";
  fs::remove_all(dir);
  ExperimentConfig cfg = parse_config(json{{"task", "shortcut"},
                                           {"train", {{"epochs", 1}}},
                                           {"data", {{"train_count", 200}, {"test_count", 100}}},
                                           {"out_dir", dir.string()}});
  const RunOutcome r = run_experiment(cfg);
  CHECK(r.result.rows.size() == 2);
  for (const auto& p : {r.artifacts.metrics_csv, r.artifacts.checkpoint, r.artifacts.manifest,
                        r.artifacts.config_snapshot, r.artifacts.constraint_copy})
    CHECK(fs::exists(p));
  std::ifstream f(r.artifacts.checkpoint);
  const ModelParameters m = load_checkpoint(f);
  const MetricsRow e = evaluate_checkpoint(cfg, m);
  CHECK(e.sat == r.result.rows.back().sat);
  CHECK(e.acc_or_mse == r.result.rows.back().acc_or_mse);
  std::ifstream man(r.artifacts.manifest);
  CHECK(json::parse(man).at("run_id") == r.artifacts.run_id);
  fs::remove_all(dir);
}

TEST_CASE("robustness example with a min-max encoding") {
  const DemoRun dual = example1_dual();
  CHECK(dual.final_cost < 1e-6);
  CHECK(dual.steps <= 2000);
  const DemoRun fuzzy = example1_fuzzy();
  CHECK(fuzzy.start_grad == 0.0);
  CHECK(fuzzy.final_v == fuzzy.start);
  CHECK(example1_cost(0.0) == 1.0);
  CHECK(example1_cost(1.0) == 0.0);
}

TEST_CASE("robustness example with a product encoding") {
  CHECK(example2_cnf().slot_names == std::vector<std::string>{"v"});
  for (double v : {1.0, 2.0, 3.0}) CHECK(example2_cost(v) == 0.0);
  CHECK(example2_cost(1.5) > 0.0);
  CHECK(std::abs(example2_dl2_grad(1.5)) < 1e-9);
  CHECK(std::abs(example2_dl2_grad(2.5)) < 1e-9);
  const DemoRun dl2 = example2_dl2();
  CHECK(dl2.final_v == 1.5);
  const DemoRun dual = example2_dual();
  CHECK(dual.final_cost < 1e-6);
  CHECK(bench_encoders("appendix-c-2").size() == 2);
  CHECK_THROWS_AS(bench_encoders("example-z"), ConfigError);
}

TEST_CASE("gradient suites") {
  CHECK(relative_error({1.0, 0.0}, {1.0, 0.0}) == 0.0);
  CHECK(relative_error({2.0}, {1.0}) == doctest::Approx(0.5));
  const auto suites = run_gradient_suites(20, 3);
  CHECK(suites.size() == 3);
  for (const auto& s : suites) {
    INFO(s.name);
    CHECK(s.points == 20);
    CHECK(s.passed());
  }
}
