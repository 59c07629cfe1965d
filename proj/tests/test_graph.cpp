#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "sparseobs/errors.hpp"
#include "sparseobs/graph.hpp"
#include "sparseobs/rng.hpp"
#include "sparseobs/stats.hpp"

using namespace sparseobs;

namespace {

// Path x0 - a0 - x1 - a1 - x2.
FactorGraph path_graph() { return FactorGraph(3, 2, {{0, 0}, {1, 0}, {1, 1}, {2, 1}}); }

void check_adjacency_consistency(const FactorGraph& g) {
  for (int i = 0; i < g.n(); ++i) {
    const auto& facs = g.var_neighbors(i);
    std::set<int> seen(facs.begin(), facs.end());
    CHECK(seen.size() == facs.size());
    for (int a : facs) {
      const auto& back = g.fac_neighbors(a);
      CHECK(std::find(back.begin(), back.end(), i) != back.end());
    }
  }
  for (int a = 0; a < g.m(); ++a)
    for (int i : g.fac_neighbors(a)) {
      const auto& back = g.var_neighbors(i);
      CHECK(std::find(back.begin(), back.end(), a) != back.end());
    }
}

}  // namespace

TEST_CASE("ensemble parameter validation") {
  CHECK_THROWS_AS(sample_graph(EnsembleParams{0, 1.0, 1.0}, 1), ValidationError);
  CHECK_THROWS_AS(sample_graph(EnsembleParams{2, 0.3, 1.0}, 1), ValidationError);  // m = 0
  CHECK_THROWS_AS(sample_graph(EnsembleParams{1, 1.0, 2.0}, 1), ValidationError);  // p > 1
  CHECK_THROWS_AS(sample_graph(EnsembleParams{4, 1.0, -1.0}, 1), ValidationError);
}

TEST_CASE("sample_graph edge-probability extremes") {
  const FactorGraph g0 = sample_graph(EnsembleParams{3, 1.0, 0.0}, 42);
  CHECK(g0.n() == 3);
  CHECK(g0.m() == 3);
  CHECK(g0.num_edges() == 0);

  const FactorGraph g1 = sample_graph(EnsembleParams{1, 1.0, 1.0}, 42);
  CHECK(g1.num_edges() == 1);
  CHECK(g1.var_neighbors(0) == std::vector<int>{0});
}

TEST_CASE("sample_graph is deterministic in the seed") {
  const EnsembleParams p{50, 0.6, 2.0};
  CHECK(sample_graph(p, 7) == sample_graph(p, 7));
  CHECK(sample_graph(p, 7).edges() != sample_graph(p, 8).edges());
}

TEST_CASE("sample_graph mean degree matches the binomial mean") {
  // Degree of variable node 0 is Binomial(m, gamma/n) with mean gamma*alpha.
  const EnsembleParams p{200, 0.5, 2.0};
  const int reps = 10000;
  RunningStat deg;
  for (int r = 0; r < reps; ++r) {
    const FactorGraph g = sample_graph(p, 1000 + r);
    deg.add(static_cast<double>(g.var_neighbors(0).size()));
  }
  CHECK(std::fabs(deg.mean() - 1.0) <= 3.0 * deg.std_error());
}

TEST_CASE("gw tree degenerate cases") {
  const GwTree t0 = sample_gw_tree(2.0, 0.5, 0, 3);
  CHECK(t0.graph.n() == 1);
  CHECK(t0.graph.m() == 0);

  const GwTree t1 = sample_gw_tree(0.0, 0.0, 5, 3);
  CHECK(t1.graph.n() == 1);
  CHECK(t1.graph.m() == 0);
}

TEST_CASE("gw tree branching means") {
  const int reps = 10000;
  RunningStat root_children, leaves;
  for (int r = 0; r < reps; ++r) {
    const GwTree t = sample_gw_tree(2.0, 0.5, 1, 5000 + r);
    root_children.add(static_cast<double>(t.graph.var_neighbors(t.root).size()));
    leaves.add(static_cast<double>(t.graph.n() - 1));
  }
  CHECK(std::fabs(root_children.mean() - 1.0) <= 3.0 * root_children.std_error());
  CHECK(std::fabs(leaves.mean() - 2.0) <= 3.0 * leaves.std_error());
}

TEST_CASE("gw trees are forests") {
  for (int r = 0; r < 50; ++r) CHECK(is_forest(sample_gw_tree(1.5, 0.8, 3, r).graph));
}

TEST_CASE("neighborhood on the path graph") {
  const FactorGraph g = path_graph();

  const Neighborhood n0 = neighborhood(g, 0, 0);
  CHECK(n0.vars == std::vector<int>{0});
  CHECK(n0.facs.empty());
  CHECK(n0.boundary == std::vector<int>{0});

  const Neighborhood n1 = neighborhood(g, 0, 1);
  CHECK(n1.vars == std::vector<int>{0, 1});
  CHECK(n1.facs == std::vector<int>{0});
  CHECK(n1.boundary == std::vector<int>{1});

  const Neighborhood n2 = neighborhood(g, 0, 2);
  CHECK(n2.vars == std::vector<int>{0, 1, 2});
  CHECK(n2.facs == std::vector<int>{0, 1});
  CHECK(n2.boundary == std::vector<int>{2});

  CHECK_THROWS_AS(neighborhood(g, 5, 1), ValidationError);
}

TEST_CASE("distance on the path graph") {
  const FactorGraph g = path_graph();
  CHECK(distance(g, 0, 0) == 0);
  CHECK(distance(g, 0, 2) == 2);
  const FactorGraph disconnected(2, 1, {{0, 0}});
  CHECK(!distance(disconnected, 0, 1).has_value());
}

TEST_CASE("neighborhood agrees with distances") {
  for (int r = 0; r < 20; ++r) {
    const FactorGraph g = sample_graph(EnsembleParams{25, 0.6, 2.0}, 900 + r);
    for (int t = 0; t <= 3; ++t) {
      const Neighborhood nb = neighborhood(g, 3, t);
      std::vector<int> expect;
      for (int j = 0; j < g.n(); ++j) {
        const auto d = distance(g, 3, j);
        if (d && *d <= t) expect.push_back(j);
      }
      CHECK(nb.vars == expect);
    }
  }
}

TEST_CASE("graph surgery on small graphs") {
  // Dropping an isolated variable removes one node and no factor.
  const FactorGraph iso(2, 1, {{0, 0}});
  const SurgeryResult r1 = graph_surgery(iso, 1, std::nullopt);
  CHECK(r1.graph.n() == 1);
  CHECK(r1.graph.m() == 1);
  CHECK(r1.var_map == std::vector<int>{0, -1});

  // Path x0 - a0 - x1: dropping x1 takes a0 with it.
  const FactorGraph pair(2, 1, {{0, 0}, {1, 0}});
  const SurgeryResult r2 = graph_surgery(pair, 1, std::nullopt);
  CHECK(r2.graph.n() == 1);
  CHECK(r2.graph.m() == 0);
  CHECK(r2.graph.num_edges() == 0);

  // Dropping a factor removes exactly its edges.
  const FactorGraph k(3, 2, {{0, 0}, {1, 0}, {2, 0}, {0, 1}});
  const SurgeryResult r3 = graph_surgery(k, std::nullopt, 0);
  CHECK(r3.graph.n() == 3);
  CHECK(r3.graph.m() == 1);
  CHECK(r3.graph.num_edges() == 1);
  CHECK(r3.fac_map == std::vector<int>{-1, 0});

  CHECK_THROWS_AS(graph_surgery(k, 0, 0), ValidationError);
  CHECK_THROWS_AS(graph_surgery(k, 9, std::nullopt), ValidationError);
}

TEST_CASE("surgery preserves adjacency consistency") {
  for (int r = 0; r < 20; ++r) {
    const FactorGraph g = sample_graph(EnsembleParams{20, 0.7, 2.5}, 40 + r);
    Rng rng(r);
    const SurgeryResult sv = graph_surgery(g, rng.uniform_int(g.n()), std::nullopt);
    check_adjacency_consistency(sv.graph);
    if (g.m() > 0) {
      const SurgeryResult sf = graph_surgery(g, std::nullopt, rng.uniform_int(g.m()));
      check_adjacency_consistency(sf.graph);
    }
  }
}

TEST_CASE("edge list round trip is bit exact") {
  const FactorGraph g = sample_graph(EnsembleParams{40, 0.5, 2.0}, 11);
  const std::string text = write_edge_list(g);
  const FactorGraph back = parse_edge_list(text);
  CHECK(back == g);
  CHECK(write_edge_list(back) == text);

  CHECK_THROWS_AS(parse_edge_list(""), ValidationError);
  CHECK_THROWS_AS(parse_edge_list("2 1\n0 0\n0 0\n"), ValidationError);  // duplicate
  CHECK_THROWS_AS(parse_edge_list("2 1\n5 0\n"), ValidationError);       // out of range
}

TEST_CASE("is_forest") {
  CHECK(is_forest(path_graph()));
  // 4-cycle: x0 and x1 both in a0 and a1.
  CHECK(!is_forest(FactorGraph(2, 2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}})));
}

TEST_CASE("canonical shapes separate and identify") {
  const std::string single = canonical_shape(FactorGraph(1, 0, {}), 0, 1);
  const std::string bare_fac = canonical_shape(FactorGraph(1, 1, {{0, 0}}), 0, 1);
  const std::string leaf = canonical_shape(FactorGraph(2, 1, {{0, 0}, {1, 0}}), 0, 1);
  CHECK(single != bare_fac);
  CHECK(bare_fac != leaf);

  // Relabeling the leaves does not change the shape.
  const FactorGraph a(3, 2, {{0, 0}, {1, 0}, {0, 1}, {2, 1}});
  const FactorGraph b(3, 2, {{2, 1}, {0, 1}, {2, 0}, {1, 0}});
  CHECK(canonical_shape(a, 0, 1) == canonical_shape(b, 2, 1));

  // A cycle through the root cannot match any tree.
  const FactorGraph cyc(2, 2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  CHECK(canonical_shape(cyc, 0, 1).substr(0, 3) == "CYC");
}
