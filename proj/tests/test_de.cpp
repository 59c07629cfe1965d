#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sparseobs/de.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/stats.hpp"

using namespace sparseobs;

TEST_CASE("de_init with full reveal is all point masses at the truth") {
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.1}, {"theta", 1.0}});
  const Population pop = de_init(m, 2.0, 0.5, 500, 3);
  for (int e = 0; e < pop.size(); ++e)
    CHECK(pop.messages[e][pop.truth[e]] == doctest::Approx(1.0));
}

TEST_CASE("de_init without observations is the prior") {
  const ObservationModel m = builtin_model("group_testing", {{"prior_one", 0.3}});
  const Population pop = de_init(m, 2.0, 0.5, 200, 3);
  for (const Marginal& nu : pop.messages) CHECK(nu[1] == doctest::Approx(0.3));
}

TEST_CASE("de_init with a bsc side channel is the two-point law") {
  const ObservationModel m = builtin_model("parity_bsc", {{"p", 0.1}, {"r", 0.1}});
  const Population pop = de_init(m, 2.0, 0.5, 20000, 7);
  int lo = 0, hi = 0;
  for (const Marginal& nu : pop.messages) {
    if (std::fabs(nu[1] - 0.1) < 1e-12)
      ++lo;
    else if (std::fabs(nu[1] - 0.9) < 1e-12)
      ++hi;
  }
  CHECK(lo + hi == pop.size());
  const double frac = double(hi) / pop.size();
  CHECK(std::fabs(frac - 0.5) <= 3.0 * std::sqrt(0.25 / pop.size()));
}

TEST_CASE("de_step with gamma = 0 reproduces the initial law") {
  const ObservationModel m = builtin_model("parity_bsc", {{"p", 0.1}, {"r", 0.1}, {"theta", 0.2}});
  const Population init = de_init(m, 0.0, 0.5, 10000, 11);
  const Population step = de_step(init, m, 12);
  CHECK(population_distance(init, step) <= 0.03);
}

TEST_CASE("de_step with theta = 1 propagates point masses") {
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 1.0}});
  Population pop = de_init(m, 2.0, 0.5, 1000, 13);
  pop = de_step(pop, m, 14);
  for (int e = 0; e < pop.size(); ++e)
    CHECK(pop.messages[e][pop.truth[e]] == doctest::Approx(1.0));
}

TEST_CASE("calibration is preserved generation by generation") {
  // E nu(xi) = p(xi) holds exactly for true posteriors; the population version
  // must track it within MC noise.
  const ObservationModel m =
      builtin_model("group_testing", {{"prior_one", 0.5}, {"f", 0.05}, {"theta", 0.1}});
  const int n_pop = 10000;
  Population pop = de_init(m, 2.0, 0.5, n_pop, 21);
  for (int gen = 0; gen < 6; ++gen) {
    const PopulationSummary s = population_stats(pop);
    for (int xi = 0; xi < 2; ++xi)
      CHECK(std::fabs(s.mean_message[xi] - m.prior().probs[xi]) <=
            4.0 / std::sqrt(double(n_pop)));
    pop = de_step(pop, m, 100 + gen);
  }
}

TEST_CASE("pair consistency: conditioning on the message value calibrates the truth") {
  const ObservationModel m =
      builtin_model("group_testing", {{"prior_one", 0.5}, {"f", 0.05}, {"theta", 0.1}});
  Population pop = de_init(m, 2.0, 0.5, 20000, 31);
  for (int gen = 0; gen < 3; ++gen) pop = de_step(pop, m, 200 + gen);
  const int bins = 10;
  std::vector<double> count(bins, 0), pred(bins, 0), freq(bins, 0);
  for (int e = 0; e < pop.size(); ++e) {
    int b = static_cast<int>(pop.messages[e][1] * bins);
    if (b >= bins) b = bins - 1;
    count[b] += 1;
    pred[b] += pop.messages[e][1];
    freq[b] += pop.truth[e] == 1 ? 1.0 : 0.0;
  }
  for (int b = 0; b < bins; ++b) {
    if (count[b] < 300) continue;
    const double p = pred[b] / count[b];
    const double f = freq[b] / count[b];
    const double se = std::sqrt(std::max(p * (1 - p), 1e-6) / count[b]);
    CHECK(std::fabs(p - f) <= std::max(0.05, 4.0 * se));
  }
}

TEST_CASE("population stats") {
  const ObservationModel m = builtin_model("group_testing", {{"theta", 1.0}});
  const Population pm = de_init(m, 1.0, 0.5, 300, 41);
  const PopulationSummary s = population_stats(pm);
  CHECK(s.error_proxy == doctest::Approx(0.0));

  Population uni;
  uni.gamma = 0;
  uni.alpha = 0;
  uni.theta = 0;
  uni.truth = {0, 1};
  uni.messages = {{0.5, 0.5}, {0.5, 0.5}};
  const PopulationSummary su = population_stats(uni);
  CHECK(su.mean_entropy == doctest::Approx(std::log(2.0)));
  for (const auto& h : su.histogram) {
    double mass = 0;
    for (double v : h) mass += v;
    CHECK(mass == doctest::Approx(1.0));
  }

  // Two-point law lands in the bins holding 0.1 and 0.9.
  const ObservationModel tp = builtin_model("parity_bsc", {{"p", 0.1}, {"r", 0.1}});
  const PopulationSummary st = population_stats(de_init(tp, 1.0, 0.5, 5000, 42));
  CHECK(st.histogram[1][10] + st.histogram[1][90] == doctest::Approx(1.0));
}

TEST_CASE("population distance") {
  const ObservationModel m = builtin_model("parity_bsc", {{"p", 0.1}, {"r", 0.1}});
  const Population a = de_init(m, 1.0, 0.5, 5000, 51);
  CHECK(population_distance(a, a) == 0.0);

  Population zeros, ones;
  zeros.truth = {0};
  zeros.messages = {{1.0, 0.0}};
  ones.truth = {1};
  ones.messages = {{0.0, 1.0}};
  CHECK(population_distance(zeros, ones) == doctest::Approx(1.0));

  const Population b = de_init(m, 1.0, 0.5, 10000, 52);
  const Population c = de_init(m, 1.0, 0.5, 10000, 53);
  CHECK(population_distance(b, c) <= 0.03);
}

TEST_CASE("de_run bookkeeping") {
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.1}});
  const DeRunResult r0 = de_run(m, 2.0, 0.5, 500, 0, 61);
  CHECK(r0.history.size() == 1);
  CHECK(r0.population.generation == 0);

  const ObservationModel sure = builtin_model("group_testing", {{"f", 0.05}, {"theta", 1.0}});
  const DeRunResult r1 = de_run(sure, 2.0, 0.5, 4000, 6, 62);
  CHECK(r1.stationary_at == 1);
}

TEST_CASE("mean message entropy settles and does not climb") {
  // Observed behavior of this recursion: after a couple of generations the
  // entropy trace is non-increasing up to MC noise.
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.1}});
  const int n_pop = 10000;
  const DeRunResult r = de_run(m, 2.0, 0.5, n_pop, 12, 93);
  const double noise = 0.015;  // ~4 sd of the entropy mean at N = 10^4
  for (std::size_t g = 2; g + 1 < r.history.size(); ++g)
    CHECK(r.history[g + 1].mean_entropy <= r.history[g].mean_entropy + noise);
}

TEST_CASE("history csv shape") {
  const ObservationModel m = builtin_model("group_testing", {{"f", 0.05}, {"theta", 0.2}});
  const DeRunResult r = de_run(m, 1.5, 0.5, 300, 3, 71);
  const std::string csv = de_history_to_csv(r.history);
  CHECK(csv.rfind("generation,mean_entropy,error_proxy,ks_to_prev\n", 0) == 0);
  const std::string snap = population_to_csv(r.population);
  CHECK(snap.rfind("x,nu_0,nu_1\n", 0) == 0);
}
