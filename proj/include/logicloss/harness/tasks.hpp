#pragma once

// Desk-scale tasks: shortest distances on random weighted graphs, the synthetic
// shortcut-satisfaction task, and constraint fixtures used by parser/encoder tests.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "logicloss/formula.hpp"
#include "logicloss/trainer.hpp"

namespace logicloss::harness {

// ---------------------------------------------------------------------------
// Shortest distances

struct GraphInstance {
  std::size_t n = 0;
  std::vector<std::vector<int>> adjacency;  // symmetric, 0 = no edge
  std::size_t source = 0;
  std::vector<double> labels;  // distances from source
};

inline constexpr int kMaxEdgeWeight = 9;

// Connected graphs: a random spanning tree plus each remaining pair with probability
// `extra_edge_prob`; weights uniform in {1, ..., 9}; labels from Dijkstra.
std::vector<GraphInstance> gen_graphs(std::size_t n_vertices, std::size_t count, std::uint64_t seed,
                                      double extra_edge_prob = 0.3);

std::vector<double> dijkstra(const std::vector<std::vector<int>>& adjacency, std::size_t source);

// Graph with vertices 0 and k exchanged.
std::vector<std::vector<int>> swap_vertices(const std::vector<std::vector<int>>& adjacency,
                                            std::size_t k);
// Model input: adjacency / 9 flattened row-major.
std::vector<double> graph_features(const std::vector<std::vector<int>>& adjacency);

using VertexPair = std::pair<std::size_t, std::size_t>;  // (j, k): d(0,j) <= d(0,k) + d(k,j)

// Distinct (j, k) with j != k, both nonzero, sampled without replacement.
std::vector<VertexPair> sample_pairs(std::size_t n_vertices, std::size_t count, std::mt19937_64& rng);

inline std::string source_slot(std::size_t k) { return "s" + std::to_string(k); }

struct ShortestPathConstraint {
  CnfTemplate cnf;                  // atoms tagged "sym" and "tri"
  std::vector<std::size_t> sources;  // vertices whose swapped graph needs a forward pass
};

// Symmetry x.d[k] == s_k.d[k] for every source k in the pairs, plus the triangle atoms
// x.d[j] - x.d[k] - s_k.d[j] <= 0. Slot s_k is the model applied to the graph with vertices
// 0 and k swapped. All clauses share one cost dimension.
ShortestPathConstraint shortest_path_constraints(std::size_t n_vertices,
                                                 const std::vector<VertexPair>& pairs,
                                                 const CompileOptions& options = {});

Dataset make_shortest_path_dataset(const std::vector<GraphInstance>& graphs,
                                   std::size_t pairs_per_sample, std::uint64_t seed,
                                   const CompileOptions& options = {});

// ---------------------------------------------------------------------------
// Shortcut satisfaction

inline constexpr std::size_t kShortcutClasses = 4;
inline constexpr std::size_t kShortcutHiddenClass = 3;
inline constexpr double kShortcutRadius = 3.0;
// Third input coordinate: every natural point has orientation near +1 and R flips it, so
// R(x) resembles class 1 in position yet stays distinguishable from labeled class-1 points.
inline constexpr double kShortcutOrientation = 1.0;
inline constexpr double kShortcutOrientationSpread = 0.25;
inline constexpr std::size_t kShortcutInputWidth = 3;
inline constexpr double kShortcutSpread = 0.5;
inline constexpr const char* kShortcutRule = "rx.p[1] >= 0.95 -> x.p[3] >= 0.95";

struct ShortcutPoint {
  std::vector<double> x;
  std::vector<double> rx;  // R(x) = -x
  std::size_t cls = 0;
};

struct ShortcutTask {
  std::vector<ShortcutPoint> points;
  std::size_t hidden_class = kShortcutHiddenClass;
  CnfTemplate rule;  // one clause: (not P) tagged "not_p", Q tagged "q"
};

std::vector<double> shortcut_centroid(std::size_t cls);
std::vector<double> reflect(const std::vector<double>& x);

// `count` points split evenly over the four classes.
ShortcutTask gen_shortcut_task(std::size_t count, std::uint64_t seed,
                               const CompileOptions& options = {});

// Tags the two literals of a compiled implication rule.
void tag_shortcut_rule(CnfTemplate& rule);

// Training split hides the hidden-class labels; per-literal rates count hidden-class points.
Dataset make_shortcut_dataset(const ShortcutTask& task, bool hide_labels);

// ---------------------------------------------------------------------------
// Fixtures

// Tags every atom of `cnf`.
void tag_atoms(CnfTemplate& cnf, const std::string& tag);
// Concatenates clause lists, merges slot names and regroups.
CnfTemplate merge_templates(const std::vector<CnfTemplate>& parts, GroupStrategy grouping);

std::string hwf_source(std::size_t k_symbols, std::size_t num_digits = 10, std::size_t num_ops = 4);
std::string superclass_source(const std::vector<std::vector<std::size_t>>& superclasses);

// Named templates: "hwf" (4 symbols) and "superclass" (2 superclasses of 2 classes).
std::map<std::string, CnfTemplate> fixture_constraints();

}  // namespace logicloss::harness
