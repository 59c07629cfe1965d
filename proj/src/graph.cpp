#include "sparseobs/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "sparseobs/errors.hpp"
#include "sparseobs/rng.hpp"

namespace sparseobs {

int EnsembleParams::m() const { return static_cast<int>(std::floor(alpha * n)); }

void EnsembleParams::validate() const {
  if (n < 1) throw ValidationError("EnsembleParams: n must be >= 1");
  if (!(alpha > 0)) throw ValidationError("EnsembleParams: alpha must be positive");
  if (m() < 1) throw ValidationError("EnsembleParams: floor(alpha*n) must be >= 1");
  if (gamma < 0) throw ValidationError("EnsembleParams: gamma must be nonnegative");
  if (p_edge() > 1.0)
    throw ValidationError("EnsembleParams: edge probability gamma/n exceeds 1");
}

FactorGraph::FactorGraph(int n, int m, const std::vector<std::pair<int, int>>& edges)
    : n_(n), m_(m) {
  if (n < 0 || m < 0) throw ValidationError("FactorGraph: negative node count");
  adj_var_.resize(n);
  adj_fac_.resize(m);
  for (const auto& [i, a] : edges) {
    if (i < 0 || i >= n) throw ValidationError("FactorGraph: variable id out of range");
    if (a < 0 || a >= m) throw ValidationError("FactorGraph: factor id out of range");
    adj_var_[i].push_back(a);
    adj_fac_[a].push_back(i);
  }
  for (auto& l : adj_var_) {
    std::sort(l.begin(), l.end());
    if (std::adjacent_find(l.begin(), l.end()) != l.end())
      throw ValidationError("FactorGraph: duplicate edge");
  }
  for (auto& l : adj_fac_) std::sort(l.begin(), l.end());
  num_edges_ = static_cast<int>(edges.size());
}

std::vector<std::pair<int, int>> FactorGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(num_edges_);
  for (int i = 0; i < n_; ++i)
    for (int a : adj_var_[i]) out.emplace_back(i, a);
  return out;
}

FactorGraph sample_graph(const EnsembleParams& params, std::uint64_t seed) {
  params.validate();
  const int n = params.n;
  const int m = params.m();
  const double p = params.p_edge();
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < m; ++a)
      if (rng.bernoulli(p)) edges.emplace_back(i, a);
  return FactorGraph(n, m, edges);
}

GwTree sample_gw_tree(double gamma, double alpha, int depth, std::uint64_t seed) {
  if (gamma < 0 || alpha < 0) throw ValidationError("sample_gw_tree: negative parameter");
  if (depth < 0) throw ValidationError("sample_gw_tree: negative depth");
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  int n_vars = 1;
  int n_facs = 0;
  // FIFO growth: each variable spawns Poisson(gamma*alpha) factors, each factor
  // Poisson(gamma) fresh variables.
  std::deque<std::pair<int, int>> frontier;  // (variable id, remaining depth)
  frontier.emplace_back(0, depth);
  while (!frontier.empty()) {
    const auto [v, d] = frontier.front();
    frontier.pop_front();
    if (d == 0) continue;
    const int l = rng.poisson(gamma * alpha);
    for (int fi = 0; fi < l; ++fi) {
      const int a = n_facs++;
      edges.emplace_back(v, a);
      const int k = rng.poisson(gamma);
      for (int ci = 0; ci < k; ++ci) {
        const int child = n_vars++;
        edges.emplace_back(child, a);
        frontier.emplace_back(child, d - 1);
      }
    }
  }
  return GwTree{FactorGraph(n_vars, n_facs, edges), 0, depth};
}

std::vector<int> distances_from(const FactorGraph& g, int i) {
  if (i < 0 || i >= g.n()) throw ValidationError("distances_from: variable id out of range");
  std::vector<int> dist(g.n(), -1);
  dist[i] = 0;
  std::deque<int> queue{i};
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int a : g.var_neighbors(v))
      for (int w : g.fac_neighbors(a))
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
  }
  return dist;
}

std::optional<int> distance(const FactorGraph& g, int i, int j) {
  if (j < 0 || j >= g.n()) throw ValidationError("distance: variable id out of range");
  const int d = distances_from(g, i)[j];
  if (d < 0) return std::nullopt;
  return d;
}

Neighborhood neighborhood(const FactorGraph& g, int i, int t) {
  if (i < 0 || i >= g.n()) throw ValidationError("neighborhood: variable id out of range");
  if (t < 0) throw ValidationError("neighborhood: negative radius");
  const std::vector<int> dist = distances_from(g, i);
  Neighborhood nb;
  nb.root = i;
  nb.radius = t;
  std::vector<char> in_vars(g.n(), 0);
  for (int v = 0; v < g.n(); ++v)
    if (dist[v] >= 0 && dist[v] <= t) {
      nb.vars.push_back(v);
      in_vars[v] = 1;
      if (dist[v] == t) nb.boundary.push_back(v);
    }
  for (int a = 0; a < g.m(); ++a) {
    const auto& nbrs = g.fac_neighbors(a);
    if (nbrs.empty()) continue;
    bool inside = true;
    for (int v : nbrs)
      if (!in_vars[v]) {
        inside = false;
        break;
      }
    if (inside) nb.facs.push_back(a);
  }
  return nb;
}

namespace {

SurgeryResult rebuild(const FactorGraph& g, const std::vector<char>& keep_var,
                      const std::vector<char>& keep_fac) {
  SurgeryResult r;
  r.var_map.assign(g.n(), -1);
  r.fac_map.assign(g.m(), -1);
  int nv = 0, nf = 0;
  for (int i = 0; i < g.n(); ++i)
    if (keep_var[i]) r.var_map[i] = nv++;
  for (int a = 0; a < g.m(); ++a)
    if (keep_fac[a]) r.fac_map[a] = nf++;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < g.n(); ++i) {
    if (!keep_var[i]) continue;
    for (int a : g.var_neighbors(i))
      if (keep_fac[a]) edges.emplace_back(r.var_map[i], r.fac_map[a]);
  }
  r.graph = FactorGraph(nv, nf, edges);
  return r;
}

}  // namespace

SurgeryResult graph_surgery(const FactorGraph& g, std::optional<int> drop_var,
                            std::optional<int> drop_fac) {
  if (drop_var.has_value() && drop_fac.has_value())
    throw ValidationError("graph_surgery: at most one of drop_var/drop_fac per call");
  std::vector<char> keep_var(g.n(), 1), keep_fac(g.m(), 1);
  if (drop_var) {
    const int j = *drop_var;
    if (j < 0 || j >= g.n()) throw ValidationError("graph_surgery: variable id out of range");
    keep_var[j] = 0;
    for (int a : g.var_neighbors(j)) keep_fac[a] = 0;  // drop everything touching j
  } else if (drop_fac) {
    const int a = *drop_fac;
    if (a < 0 || a >= g.m()) throw ValidationError("graph_surgery: factor id out of range");
    keep_fac[a] = 0;
  }
  return rebuild(g, keep_var, keep_fac);
}

SurgeryResult induced_subsystem(const FactorGraph& g, const std::vector<int>& vars) {
  std::vector<char> keep_var(g.n(), 0), keep_fac(g.m(), 0);
  for (int v : vars) {
    if (v < 0 || v >= g.n())
      throw ValidationError("induced_subsystem: variable id out of range");
    keep_var[v] = 1;
  }
  for (int a = 0; a < g.m(); ++a) {
    const auto& nbrs = g.fac_neighbors(a);
    if (nbrs.empty()) continue;  // degree-0 factors stay only in the full system
    bool inside = true;
    for (int v : nbrs)
      if (!keep_var[v]) {
        inside = false;
        break;
      }
    keep_fac[a] = inside;
  }
  return rebuild(g, keep_var, keep_fac);
}

std::string write_edge_list(const FactorGraph& g) {
  std::ostringstream os;
  os << g.n() << ' ' << g.m() << '\n';
  for (const auto& [i, a] : g.edges()) os << i << ' ' << a << '\n';
  return os.str();
}

FactorGraph parse_edge_list(const std::string& text) {
  std::istringstream is(text);
  int n = 0, m = 0;
  if (!(is >> n >> m)) throw ValidationError("edge list: missing 'n m' header");
  std::vector<std::pair<int, int>> edges;
  int i, a;
  while (is >> i >> a) edges.emplace_back(i, a);
  if (!is.eof() && is.fail()) {
    is.clear();
    std::string tail;
    is >> tail;
    if (!tail.empty()) throw ValidationError("edge list: trailing garbage '" + tail + "'");
  }
  return FactorGraph(n, m, edges);
}

void save_edge_list(const FactorGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << write_edge_list(g);
}

FactorGraph load_edge_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_edge_list(buf.str());
}

bool is_forest(const FactorGraph& g) {
  // Union-find over the bipartite node set.
  std::vector<int> parent(g.n() + g.m());
  for (std::size_t k = 0; k < parent.size(); ++k) parent[k] = static_cast<int>(k);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int i = 0; i < g.n(); ++i)
    for (int a : g.var_neighbors(i)) {
      const int ri = find(i), ra = find(g.n() + a);
      if (ri == ra) return false;
      parent[ri] = ra;
    }
  return true;
}

namespace {

struct ShapeNode {
  std::string canon;
  int size = 0;
};

// Recursive canonical form; `is_var` alternates along the bipartite structure.
ShapeNode canon_rec(const FactorGraph& g, int node, bool is_var, int parent,
                    const std::vector<char>& in_vars, const std::vector<char>& in_facs) {
  std::vector<ShapeNode> kids;
  if (is_var) {
    for (int a : g.var_neighbors(node))
      if (in_facs[a] && a != parent)
        kids.push_back(canon_rec(g, a, false, node, in_vars, in_facs));
  } else {
    for (int v : g.fac_neighbors(node))
      if (in_vars[v] && v != parent)
        kids.push_back(canon_rec(g, v, true, node, in_vars, in_facs));
  }
  std::sort(kids.begin(), kids.end(), [](const ShapeNode& x, const ShapeNode& y) {
    if (x.size != y.size) return x.size < y.size;
    return x.canon < y.canon;
  });
  ShapeNode out;
  out.size = 1;
  out.canon = is_var ? "V(" : "F(";
  for (const auto& k : kids) {
    out.canon += k.canon;
    out.size += k.size;
  }
  out.canon += ')';
  return out;
}

}  // namespace

std::string canonical_shape(const FactorGraph& g, int root, int t) {
  if (t < 0) throw ValidationError("canonical_shape: negative radius");
  // Exploration subgraph: factors incident to a variable at distance <= t-1,
  // plus every variable they touch. This is the object the local tree law
  // describes; the induced subgraph would add factors hanging entirely off
  // the frontier, which the depth-t tree never generates.
  const std::vector<int> dist = distances_from(g, root);
  std::vector<char> in_vars(g.n(), 0), in_facs(g.m(), 0);
  in_vars[root] = 1;
  int n_vars = 1, n_facs = 0, edge_count = 0;
  for (int a = 0; a < g.m(); ++a) {
    const auto& nbrs = g.fac_neighbors(a);
    bool reached = false;
    for (int v : nbrs)
      if (dist[v] >= 0 && dist[v] <= t - 1) {
        reached = true;
        break;
      }
    if (!reached) continue;
    in_facs[a] = 1;
    ++n_facs;
    edge_count += static_cast<int>(nbrs.size());
    for (int v : nbrs)
      if (!in_vars[v]) {
        in_vars[v] = 1;
        ++n_vars;
      }
  }
  if (edge_count != n_vars + n_facs - 1) {
    // Cycles never match a tree shape.
    std::ostringstream os;
    os << "CYC[v=" << n_vars << ",f=" << n_facs << ",e=" << edge_count << ']';
    return os.str();
  }
  return canon_rec(g, root, true, -1, in_vars, in_facs).canon;
}

}  // namespace sparseobs
