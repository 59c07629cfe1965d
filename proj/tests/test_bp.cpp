#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sparseobs/bp.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/oracle.hpp"
#include "sparseobs/rng.hpp"

using namespace sparseobs;

namespace {

World blank_world(const FactorGraph& g) {
  World w;
  w.x.assign(g.n(), 0);
  w.y.assign(g.m(), 0);
  w.z.assign(g.n(), 0);
  w.reveal.assign(g.n(), kMasked);
  return w;
}

FactorGraph sample_forest(const EnsembleParams& p, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const FactorGraph g = sample_graph(p, mix_seed(seed, attempt));
    if (is_forest(g)) return g;
  }
}

}  // namespace

TEST_CASE("bp on a factorless graph converges immediately") {
  const FactorGraph g(4, 0, {});
  const ObservationModel m = builtin_model("group_testing", {{"prior_one", 0.3}});
  const World w = blank_world(g);
  const BpResult res = bp_run(g, m, w);
  CHECK(res.converged);
  CHECK(res.iters == 1);
  CHECK(res.msgs.var_to_fac.empty());
  const Marginal mu = bp_marginal(g, m, w, res.msgs, 0);
  CHECK(mu[1] == doctest::Approx(0.3));
}

TEST_CASE("revealed variables send point-mass messages") {
  const FactorGraph g(2, 1, {{0, 0}, {1, 0}});
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.1}, {"theta", 1.0}});
  const World w = sample_world(g, m, 4);
  const BpResult res = bp_run(g, m, w);
  const EdgeIndex idx(g);
  for (int e = 0; e < idx.num_edges(); ++e)
    CHECK(res.msgs.var_to_fac[e][w.x[idx.var_of(e)]] == doctest::Approx(1.0));
  // And every marginal is a point mass on the truth.
  for (int i = 0; i < g.n(); ++i)
    CHECK(bp_marginal(g, m, w, res.msgs, i)[w.x[i]] == doctest::Approx(1.0));
}

TEST_CASE("bp is exact on sampled trees") {
  int done = 0;
  for (int r = 0; done < 25; ++r) {
    const GwTree t = sample_gw_tree(1.6, 0.8, 2, 1000 + r);
    if (t.graph.n() > 14) continue;
    ++done;
    const ObservationModel m =
        builtin_model(r % 2 ? "group_testing" : "parity_bsc",
                      {{r % 2 ? "f" : "p", r % 2 ? 0.05 : 0.1}, {"theta", 0.2}});
    const World w = sample_world(t.graph, m, 2000 + r);
    BpOptions opts;
    opts.tol = 0.0;
    opts.max_iter = 2 * (t.depth + 1);
    const BpResult res = bp_run(t.graph, m, w, opts);
    const std::vector<Marginal> exact = ExactPosterior(t.graph, m, w).all_marginals();
    const std::vector<Marginal> bp = bp_all_marginals(t.graph, m, w, res.msgs);
    double worst = 0.0;
    for (int i = 0; i < t.graph.n(); ++i)
      worst = std::max(worst, total_variation(exact[i], bp[i]));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("local update with no factors returns the evidence") {
  const ObservationModel m =
      builtin_model("parity_bsc", {{"prior_one", 0.3}, {"p", 0.1}, {"r", 0.2}});
  LocalStar star;
  star.z = 0;
  star.reveal = kMasked;
  const Marginal f = local_update_F(m, star, {});
  const double w0 = 0.7 * 0.8, w1 = 0.3 * 0.2;
  CHECK(f[0] == doctest::Approx(w0 / (w0 + w1)));
}

TEST_CASE("local update with an or factor observing 0") {
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.0}});
  LocalStar star;
  star.factors.push_back({0, {7}});
  std::map<int, Marginal> incoming{{7, {0.5, 0.5}}};
  const Marginal f = local_update_F(m, star, incoming);
  CHECK(f[0] == doctest::Approx(1.0));
}

TEST_CASE("local update with a parity factor pins the center") {
  const ObservationModel m = builtin_model("parity_bsc", {{"p", 0.0}});
  LocalStar star;
  star.factors.push_back({0, {3}});
  std::map<int, Marginal> incoming{{3, {0.0, 1.0}}};  // neighbor surely 1
  const Marginal f = local_update_F(m, star, incoming);
  CHECK(f[1] == doctest::Approx(1.0));  // 1 xor 1 = 0 matches y
}

TEST_CASE("local update is invariant under slot permutations") {
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.2}});
  std::map<int, Marginal> incoming{{1, {0.7, 0.3}}, {2, {0.4, 0.6}}, {3, {0.9, 0.1}}};
  LocalStar a, b;
  a.factors.push_back({1, {1, 2, 3}});
  b.factors.push_back({1, {3, 1, 2}});
  CHECK(total_variation(local_update_F(m, a, incoming), local_update_F(m, b, incoming)) <=
        1e-15);
}

TEST_CASE("missing incoming marginal is reported") {
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.2}});
  LocalStar star;
  star.factors.push_back({1, {5}});
  CHECK_THROWS_AS(local_update_F(m, star, {}), ValidationError);
}

TEST_CASE("cavity marginals of an isolated center are empty") {
  const FactorGraph g(3, 1, {{1, 0}, {2, 0}});
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.1}});
  const World w = sample_world(g, m, 6);
  CHECK(cavity_marginals(g, m, w, 0, CavityMethod::oracle).empty());
}

TEST_CASE("cavity marginals of star leaves are their singleton posteriors") {
  // Star: center 0 in both factors, leaves 1 and 2. Removing the center
  // isolates the leaves.
  const FactorGraph g(3, 2, {{0, 0}, {1, 0}, {0, 1}, {2, 1}});
  const ObservationModel m =
      builtin_model("group_testing", {{"prior_one", 0.3}, {"f", 0.1}, {"r", 0.2}, {"theta", 0.3}});
  const World w = sample_world(g, m, 8);
  const auto cav = cavity_marginals(g, m, w, 0, CavityMethod::oracle);
  REQUIRE(cav.size() == 2);
  for (int j : {1, 2})
    CHECK(total_variation(cav.at(j), local_evidence(m, w.z[j], w.reveal[j])) <= 1e-12);
}

TEST_CASE("cavity oracle and cavity bp agree on forests") {
  for (int r = 0; r < 10; ++r) {
    const FactorGraph g = sample_forest(EnsembleParams{10, 0.5, 1.5}, 700 + r);
    const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.2}});
    const World w = sample_world(g, m, 800 + r);
    Rng rng(r);
    const int i = rng.uniform_int(g.n());
    BpOptions opts;
    opts.tol = 1e-13;
    opts.max_iter = 200;
    const auto oracle = cavity_marginals(g, m, w, i, CavityMethod::oracle);
    const auto bp = cavity_marginals(g, m, w, i, CavityMethod::bp, opts);
    REQUIRE(oracle.size() == bp.size());
    for (const auto& [j, mu] : oracle)
      CHECK(total_variation(mu, bp.at(j)) <= 1e-6);
  }
}

TEST_CASE("boundary factorized marginal covering the whole graph is exact") {
  const FactorGraph g = sample_graph(EnsembleParams{8, 0.5, 2.0}, 31);
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.2}});
  const World w = sample_world(g, m, 32);
  const ExactPosterior ep(g, m, w);
  // Radius n covers every reachable node, so the boundary is empty and the
  // summation is the exact posterior of the component.
  for (int i = 0; i < g.n(); ++i) {
    const Marginal mt = boundary_factorized_marginal(g, m, w, i, g.n(), CavityMethod::oracle);
    CHECK(total_variation(mt, ep.marginal(i)) <= 1e-10);
  }
}

TEST_CASE("boundary factorized marginal at t=1 equals F of the cavity marginals") {
  int checked = 0;
  for (int r = 0; checked < 25; ++r) {
    const FactorGraph g = sample_graph(EnsembleParams{9, 0.6, 2.0}, 5000 + r);
    const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.25}});
    const World w = sample_world(g, m, 6000 + r);
    Rng rng(r);
    const int i = rng.uniform_int(g.n());
    if (g.var_neighbors(i).empty()) continue;
    ++checked;
    const auto cav = cavity_marginals(g, m, w, i, CavityMethod::oracle);
    const Marginal f = local_update_F(m, make_local_star(g, w, i), cav);
    const Marginal mt = boundary_factorized_marginal(g, m, w, i, 1, CavityMethod::oracle);
    CHECK(total_variation(f, mt) <= 1e-12);
  }
}

TEST_CASE("the t=1 identity survives short loops through the center") {
  // Center 0 shares both factors with variable 1 (a 4-cycle), so the star sum
  // must treat the repeated neighbor jointly.
  const FactorGraph g(3, 2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 1}});
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.1}, {"theta", 0.2}});
  const World w = sample_world(g, m, 44);
  const auto cav = cavity_marginals(g, m, w, 0, CavityMethod::oracle);
  const Marginal f = local_update_F(m, make_local_star(g, w, 0), cav);
  const Marginal mt = boundary_factorized_marginal(g, m, w, 0, 1, CavityMethod::oracle);
  CHECK(total_variation(f, mt) <= 1e-12);
}

TEST_CASE("boundary factorization is exact on trees for any t") {
  int done = 0;
  for (int r = 0; done < 10; ++r) {
    const GwTree t = sample_gw_tree(1.5, 0.8, 3, 7000 + r);
    if (t.graph.n() > 12 || t.graph.m() == 0) continue;
    ++done;
    const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.2}});
    const World w = sample_world(t.graph, m, 7100 + r);
    const ExactPosterior ep(t.graph, m, w);
    for (int radius = 1; radius <= 3; ++radius) {
      const Marginal mt =
          boundary_factorized_marginal(t.graph, m, w, t.root, radius, CavityMethod::oracle);
      CHECK(total_variation(mt, ep.marginal(t.root)) <= 1e-9);
    }
  }
}

TEST_CASE("theta = 1 collapses every bp marginal onto the truth") {
  const FactorGraph g = sample_graph(EnsembleParams{12, 0.5, 2.0}, 77);
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 1.0}});
  const World w = sample_world(g, m, 78);
  const BpResult res = bp_run(g, m, w);
  for (int i = 0; i < g.n(); ++i)
    CHECK(bp_marginal(g, m, w, res.msgs, i)[w.x[i]] == doctest::Approx(1.0));
}

TEST_CASE("contradictory evidence with a non-soft kernel aborts with the edge") {
  // Path x0 - a - x1 - b - x2, everything revealed 0, but factor a saw y = 1:
  // under noiseless parity the message product at x1 vanishes.
  const FactorGraph g(3, 2, {{0, 0}, {1, 0}, {1, 1}, {2, 1}});
  const ObservationModel m = builtin_model("parity_bsc", {{"p", 0.0}, {"theta", 1.0}});
  World w = blank_world(g);
  w.reveal = {0, 0, 0};
  w.y = {1, 0};
  try {
    bp_run(g, m, w);
    FAIL("expected ZeroNormalizerError");
  } catch (const ZeroNormalizerError& e) {
    CHECK(e.var_id == 1);
  }

  // With a single factor the contradiction surfaces at the marginal.
  const FactorGraph g1(2, 1, {{0, 0}, {1, 0}});
  World w1 = blank_world(g1);
  w1.reveal = {0, 0};
  w1.y = {1};
  const BpResult res = bp_run(g1, m, w1);
  CHECK_THROWS_AS(bp_marginal(g1, m, w1, res.msgs, 0), ZeroNormalizerError);
}

TEST_CASE("message dump format") {
  const FactorGraph g(2, 1, {{0, 0}, {1, 0}});
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.1}});
  const World w = sample_world(g, m, 9);
  const BpResult res = bp_run(g, m, w);
  const std::string csv = dump_messages_csv(g, res.msgs);
  CHECK(csv.rfind("direction,var,fac,symbol,value\n", 0) == 0);
  CHECK(csv.find("v2f,0,0,") != std::string::npos);
  CHECK(csv.find("f2v,1,0,") != std::string::npos);
}

TEST_CASE("messages stay on the simplex") {
  const FactorGraph g = sample_graph(EnsembleParams{15, 0.6, 2.0}, 91);
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.1}});
  const World w = sample_world(g, m, 92);
  BpOptions opts;
  opts.damping = 0.3;
  opts.max_iter = 30;
  const BpResult res = bp_run(g, m, w, opts);
  for (const Marginal& msg : res.msgs.var_to_fac) CHECK(is_distribution(msg));
  for (const Marginal& msg : res.msgs.fac_to_var) CHECK(is_distribution(msg));
}
