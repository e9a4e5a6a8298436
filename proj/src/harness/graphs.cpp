#include <algorithm>
#include <limits>
#include <queue>
#include <set>

#include <fmt/format.h>

#include "logicloss/errors.hpp"
#include "logicloss/harness/tasks.hpp"

namespace logicloss::harness {

std::vector<double> dijkstra(const std::vector<std::vector<int>>& adjacency, std::size_t source) {
  const std::size_t n = adjacency.size();
  if (source >= n) throw IndexOutOfRange(fmt::format("source {} in a graph of {} vertices", source, n));
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (std::size_t v = 0; v < n; ++v) {
      const int w = adjacency[u][v];
      if (w <= 0) continue;
      if (d + w < dist[v]) {
        dist[v] = d + w;
        queue.emplace(dist[v], v);
      }
    }
  }
  return dist;
}

std::vector<GraphInstance> gen_graphs(std::size_t n_vertices, std::size_t count, std::uint64_t seed,
                                      double extra_edge_prob) {
  if (n_vertices < 2) throw ConfigError("graphs need at least two vertices");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> weight(1, kMaxEdgeWeight);
  std::bernoulli_distribution extra(extra_edge_prob);
  std::vector<GraphInstance> out;
  out.reserve(count);
  for (std::size_t g = 0; g < count; ++g) {
    GraphInstance inst;
    inst.n = n_vertices;
    inst.adjacency.assign(n_vertices, std::vector<int>(n_vertices, 0));
    std::vector<std::size_t> order(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    // spanning tree: attach each vertex to an earlier one
    for (std::size_t i = 1; i < n_vertices; ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      const std::size_t u = order[i], v = order[pick(rng)];
      inst.adjacency[u][v] = inst.adjacency[v][u] = weight(rng);
    }
    for (std::size_t u = 0; u < n_vertices; ++u)
      for (std::size_t v = u + 1; v < n_vertices; ++v)
        if (inst.adjacency[u][v] == 0 && extra(rng)) inst.adjacency[u][v] = inst.adjacency[v][u] = weight(rng);
    inst.labels = dijkstra(inst.adjacency, inst.source);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<std::vector<int>> swap_vertices(const std::vector<std::vector<int>>& adjacency,
                                            std::size_t k) {
  const std::size_t n = adjacency.size();
  if (k >= n) throw IndexOutOfRange(fmt::format("vertex {} in a graph of {} vertices", k, n));
  auto perm = [k](std::size_t i) { return i == 0 ? k : (i == k ? 0 : i); };
  std::vector<std::vector<int>> out(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i][j] = adjacency[perm(i)][perm(j)];
  return out;
}

std::vector<double> graph_features(const std::vector<std::vector<int>>& adjacency) {
  std::vector<double> f;
  f.reserve(adjacency.size() * adjacency.size());
  for (const auto& row : adjacency)
    for (int w : row) f.push_back(static_cast<double>(w) / kMaxEdgeWeight);
  return f;
}

std::vector<VertexPair> sample_pairs(std::size_t n_vertices, std::size_t count, std::mt19937_64& rng) {
  if (n_vertices < 3) throw ConfigError("triangle constraints need at least three vertices");
  std::vector<VertexPair> all;
  for (std::size_t j = 1; j < n_vertices; ++j)
    for (std::size_t k = 1; k < n_vertices; ++k)
      if (j != k) all.emplace_back(j, k);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(count, all.size()));
  return all;
}

ShortestPathConstraint shortest_path_constraints(std::size_t n_vertices,
                                                 const std::vector<VertexPair>& pairs,
                                                 const CompileOptions& options) {
  if (n_vertices < 3) throw ConfigError("triangle constraints need at least three vertices");
  ShortestPathConstraint out;
  std::set<std::size_t> sources;
  for (const auto& [j, k] : pairs) {
    if (j == 0 || k == 0 || j == k || j >= n_vertices || k >= n_vertices)
      throw IndexOutOfRange(fmt::format("bad vertex pair ({}, {})", j, k));
    sources.insert(k);
  }
  std::vector<CnfTemplate> parts;
  for (std::size_t k : sources) {
    CnfTemplate sym = compile(fmt::format("x.d[{0}] == {1}.d[{0}]", k, source_slot(k)), options);
    tag_atoms(sym, "sym");
    parts.push_back(std::move(sym));
  }
  for (const auto& [j, k] : pairs) {
    CnfTemplate tri =
        compile(fmt::format("x.d[{0}] - x.d[{1}] - {2}.d[{0}] <= 0", j, k, source_slot(k)), options);
    tag_atoms(tri, "tri");
    parts.push_back(std::move(tri));
  }
  out.cnf = merge_templates(parts, GroupStrategy::kSingle);
  out.sources.assign(sources.begin(), sources.end());
  return out;
}

Dataset make_shortest_path_dataset(const std::vector<GraphInstance>& graphs,
                                   std::size_t pairs_per_sample, std::uint64_t seed,
                                   const CompileOptions& options) {
  Dataset ds;
  ds.task_slot = "x";
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const GraphInstance& g = graphs[i];
    ShortestPathConstraint c = shortest_path_constraints(g.n, sample_pairs(g.n, pairs_per_sample, rng), options);
    Sample s;
    s.id = i;
    s.inputs.emplace("x", graph_features(g.adjacency));
    for (std::size_t k : c.sources) s.inputs.emplace(source_slot(k), graph_features(swap_vertices(g.adjacency, k)));
    s.target = g.labels;
    s.constraint = ds.constraints.size();
    ds.constraints.push_back(std::move(c.cnf));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace logicloss::harness
