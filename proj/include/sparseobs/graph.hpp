#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sparseobs {

/// Parameters of the Bernoulli bipartite ensemble G(n, floor(alpha n), gamma/n).
struct EnsembleParams {
  int n = 0;
  double alpha = 0.0;
  double gamma = 0.0;

  int m() const;
  double p_edge() const { return gamma / n; }
  void validate() const;  // throws ValidationError
};

/// Bipartite factor graph: n variable nodes, m function nodes, adjacency both
/// ways. Immutable after construction; adjacency lists are sorted ascending.
class FactorGraph {
 public:
  FactorGraph() = default;
  FactorGraph(int n, int m, const std::vector<std::pair<int, int>>& edges);

  int n() const { return n_; }
  int m() const { return m_; }
  int num_edges() const { return num_edges_; }
  const std::vector<int>& var_neighbors(int i) const { return adj_var_.at(i); }
  const std::vector<int>& fac_neighbors(int a) const { return adj_fac_.at(a); }

  /// Edge list sorted lexicographically by (variable, factor).
  std::vector<std::pair<int, int>> edges() const;

  bool operator==(const FactorGraph&) const = default;

 private:
  int n_ = 0;
  int m_ = 0;
  int num_edges_ = 0;
  std::vector<std::vector<int>> adj_var_;  // per variable: incident factors
  std::vector<std::vector<int>> adj_fac_;  // per factor: incident variables
};

/// Samples from G(n, floor(alpha n), gamma/n): one Bernoulli stream in
/// row-major (variable, factor) order, so graphs are reproducible bit-exactly.
FactorGraph sample_graph(const EnsembleParams& params, std::uint64_t seed);

struct GwTree {
  FactorGraph graph;
  int root = 0;
  int depth = 0;
};

/// Galton-Watson local tree T(t): Poisson(gamma*alpha) function-node children
/// per variable node, Poisson(gamma) variable-node children per function node,
/// grown to `depth` variable generations. depth = 0 is a single variable node.
GwTree sample_gw_tree(double gamma, double alpha, int depth, std::uint64_t seed);

/// B(i,t): variables within distance t of the root (distance counts function
/// nodes traversed), the function nodes fully contained in that set, and the
/// boundary D(i,t) at distance exactly t.
struct Neighborhood {
  int root = 0;
  int radius = 0;
  std::vector<int> vars;      // sorted
  std::vector<int> facs;      // sorted
  std::vector<int> boundary;  // sorted
};

Neighborhood neighborhood(const FactorGraph& g, int i, int t);

/// Shortest-path distance in function-node count; nullopt when disconnected.
std::optional<int> distance(const FactorGraph& g, int i, int j);

/// Per-variable distances from i in one BFS; -1 marks unreachable nodes.
std::vector<int> distances_from(const FactorGraph& g, int i);

/// Result of removing one node. Dropping a variable j also removes every
/// function node touching j; dropping a function node removes only it.
/// Surviving nodes are re-indexed densely, preserving relative order.
struct SurgeryResult {
  FactorGraph graph;
  std::vector<int> var_map;  // old -> new, -1 if removed
  std::vector<int> fac_map;  // old -> new, -1 if removed
};

SurgeryResult graph_surgery(const FactorGraph& g, std::optional<int> drop_var,
                            std::optional<int> drop_fac);

/// Subsystem induced by a variable subset: keeps exactly the function nodes
/// whose neighborhoods lie inside the subset.
SurgeryResult induced_subsystem(const FactorGraph& g, const std::vector<int>& vars);

/// Textual edge list: line 1 "n m", then one "i a" per edge, zero-based,
/// sorted lexicographically. Round-trips bit-exactly.
std::string write_edge_list(const FactorGraph& g);
FactorGraph parse_edge_list(const std::string& text);
void save_edge_list(const FactorGraph& g, const std::string& path);
FactorGraph load_edge_list(const std::string& path);

/// True when the bipartite graph has no cycle.
bool is_forest(const FactorGraph& g);

/// Canonical form of the rooted radius-t exploration subgraph (factors
/// incident to variables at distance <= t-1 and everything they touch):
/// depth-first string with child lists sorted by subtree size then
/// lexicographically. Non-tree neighborhoods map to a distinct "cyclic" token
/// so they never match a tree shape.
std::string canonical_shape(const FactorGraph& g, int root, int t);

}  // namespace sparseobs
