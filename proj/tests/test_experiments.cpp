#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sparseobs/errors.hpp"
#include "sparseobs/experiments.hpp"

using namespace sparseobs;
using nlohmann::json;

namespace {

json soft_model() {
  return {{"builtin", "group_testing"}, {"params", {{"f", 0.05}, {"theta", 0.1}}}};
}

std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

double cell(const ResultTable& t, std::size_t row, const std::string& column) {
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    if (t.columns[c] == column) return std::stod(t.rows.at(row).at(c));
  throw std::runtime_error("no column " + column);
}

}  // namespace

TEST_CASE("config errors name the field") {
  CHECK(error_message([] { run_experiment(json{{"experiment", "wat"}}); })
            .find("unknown experiment") != std::string::npos);
  CHECK(error_message([] {
          run_experiment(json{{"experiment", "correlation"}, {"model", soft_model()}});
        }).find("n_grid") != std::string::npos);
  CHECK(error_message([] {
          run_experiment(json{{"experiment", "graph_stats"}, {"bogus", 1}});
        }).find("bogus") != std::string::npos);
  CHECK(error_message([] {
          run_experiment(json{{"experiment", "graph_stats"}, {"samples", "many"}});
        }).find("samples") != std::string::npos);
}

TEST_CASE("correlation experiment with k = 1 is identically zero") {
  json cfg = {{"experiment", "correlation"}, {"model", soft_model()},
              {"n_grid", {5}},              {"k", 1},
              {"replicas", 8},              {"seed", 3},
              {"epsilon", 0.3}};
  const ExperimentRun run = run_experiment(cfg);
  CHECK(cell(run.table, 0, "statistic") <= 1e-13);
}

TEST_CASE("correlation experiment with revealed variables is zero") {
  json cfg = {{"experiment", "correlation"}, {"model", soft_model()},
              {"n_grid", {5}},              {"k", 2},
              {"replicas", 8},              {"seed", 3},
              {"epsilon", 1.0},             {"theta_override", 1.0}};
  const ExperimentRun run = run_experiment(cfg);
  CHECK(cell(run.table, 0, "statistic") <= 1e-13);
}

TEST_CASE("bound column carries the analytic value") {
  json cfg = {{"experiment", "correlation"}, {"model", soft_model()},
              {"n_grid", {6}},              {"k", 2},
              {"replicas", 5},              {"seed", 3},
              {"epsilon", 0.3}};
  const ExperimentRun run = run_experiment(cfg);
  const double h1 = std::log(2.0);
  const double expect = 9.0 * std::exp(4.0 / 12.0) * std::sqrt(h1 * 0.3 / 6.0);
  CHECK(cell(run.table, 0, "bound") == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("bp_exact refuses non-soft models") {
  json cfg = {{"experiment", "bp_exact"},
              {"model", {{"builtin", "mod2_storage"}}},
              {"n_grid", {6}},
              {"replicas", 4},
              {"seed", 3}};
  CHECK(error_message([&] { run_experiment(cfg); }).find("soft") != std::string::npos);
}

TEST_CASE("bp_exact on forests is exact") {
  json cfg = {{"experiment", "bp_exact"}, {"model", soft_model()}, {"n_grid", {6}},
              {"replicas", 6},           {"seed", 5},             {"epsilon", 0.3},
              {"forest_only", true},     {"t_list", {2}}};
  const ExperimentRun run = run_experiment(cfg);
  CHECK(cell(run.table, 0, "statistic") <= 1e-9);   // one-step map
  CHECK(cell(run.table, 1, "statistic") <= 1e-9);   // boundary factorized, t=2
}

TEST_CASE("entropy identity guard on the step size") {
  json cfg = {{"experiment", "entropy_identity"},
              {"model", soft_model()},
              {"delta_theta", 0.01},
              {"seed", 1}};
  CHECK(error_message([&] { run_experiment(cfg); }).find("delta_theta") !=
        std::string::npos);
}

TEST_CASE("graph stats with gamma = 0") {
  json cfg = {{"experiment", "graph_stats"}, {"n", 40},      {"gamma", 0.0},
              {"alpha", 0.5},                {"samples", 60}, {"seed", 2},
              {"t_list", {1}},               {"tail_max", 3}};
  const ExperimentRun run = run_experiment(cfg);
  // Row 0 is the single-node shape: empirical and GW probability both 1.
  CHECK(cell(run.table, 0, "empirical") == doctest::Approx(1.0));
  CHECK(cell(run.table, 0, "expected") == doctest::Approx(1.0));
  // Tail at M = 1 is probability 1.
  bool saw_tail1 = false;
  for (std::size_t r = 0; r < run.table.rows.size(); ++r)
    if (run.table.rows[r][1] == "tail" && run.table.rows[r][2] == "t1_M1") {
      saw_tail1 = true;
      CHECK(cell(run.table, r, "empirical") == doctest::Approx(1.0));
    }
  CHECK(saw_tail1);
}

TEST_CASE("bp_exact with everything revealed is zero") {
  json cfg = {{"experiment", "bp_exact"}, {"model", soft_model()}, {"n_grid", {6}},
              {"replicas", 6},           {"seed", 5},             {"epsilon", 1.0},
              {"theta_override", 1.0}};
  CHECK(cell(run_experiment(cfg).table, 0, "statistic") <= 1e-13);
}

TEST_CASE("de_match with gamma = 0 compares identical laws") {
  // No factors anywhere: both the BP marginals and the population follow the
  // zero-factor posterior law, so KS sits at the sampling noise floor.
  json model = {{"builtin", "parity_bsc"},
                {"params", {{"p", 0.1}, {"r", 0.1}, {"theta", 0.1}}}};
  json cfg = {{"experiment", "de_match"}, {"model", model}, {"n", 1000},
              {"graphs", 2},             {"nodes_per_graph", 500},
              {"gamma", 0.0},            {"alpha", 0.5},
              {"n_pop", 10000},          {"max_generations", 3},
              {"seed", 8}};
  const ExperimentRun run = run_experiment(cfg);
  for (std::size_t r = 0; r < run.table.rows.size(); ++r)
    if (run.table.rows[r][1] == "ks_symbol")
      CHECK(cell(run.table, r, "value") <= 0.03);
}

TEST_CASE("radius-1 shapes converge to the branching-process law") {
  json cfg = {{"experiment", "graph_stats"}, {"n", 500},         {"gamma", 2.0},
              {"alpha", 0.5},                {"samples", 3000},  {"seed", 23},
              {"t_list", {1}},               {"tail_max", 2}};
  const ExperimentRun run = run_experiment(cfg);
  int shape_rows = 0;
  for (std::size_t r = 0; r < run.table.rows.size(); ++r) {
    if (run.table.rows[r][1] != "shape") continue;
    ++shape_rows;
    const double gap = std::fabs(cell(run.table, r, "empirical") -
                                 cell(run.table, r, "expected"));
    CHECK(gap <= 3.0 * cell(run.table, r, "std_error"));
  }
  CHECK(shape_rows == 4);
}

TEST_CASE("neighborhood-size tails decay log-linearly") {
  json cfg = {{"experiment", "graph_stats"}, {"n", 300},        {"gamma", 2.0},
              {"alpha", 0.5},                {"samples", 3000}, {"seed", 17},
              {"t_list", {1, 2}},            {"tail_max", 20}};
  const ExperimentRun run = run_experiment(cfg);
  for (const int t : {1, 2}) {
    std::vector<std::pair<double, double>> pts;  // (M, log p)
    double prev = 1.0;
    for (std::size_t r = 0; r < run.table.rows.size(); ++r) {
      if (run.table.rows[r][1] != "tail") continue;
      const std::string& key = run.table.rows[r][2];
      if (key.rfind("t" + std::to_string(t) + "_M", 0) != 0) continue;
      const double p = cell(run.table, r, "empirical");
      CHECK(p <= prev + 1e-12);  // tails are non-increasing in M
      prev = p;
      if (p * 3000 >= 30) pts.emplace_back(std::stod(key.substr(4)), std::log(p));
    }
    // Least-squares slope of log P{|B| >= M} against M must be negative.
    REQUIRE(pts.size() >= 3);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n_pts = static_cast<double>(pts.size());
    const double slope = (n_pts * sxy - sx * sy) / (n_pts * sxx - sx * sx);
    CHECK(slope < 0.0);
  }
}

TEST_CASE("experiments are deterministic and thread-count independent") {
  json cfg = {{"experiment", "correlation"}, {"model", soft_model()},
              {"n_grid", {5, 6}},           {"k", 2},
              {"replicas", 12},             {"seed", 9},
              {"epsilon", 0.3}};
  const std::string a = run_experiment(cfg).table.to_csv();
  const std::string b = run_experiment(cfg).table.to_csv();
  CHECK(a == b);
  json cfg4 = cfg;
  cfg4["threads"] = 4;
  CHECK(run_experiment(cfg4).table.to_csv() == a);
}

TEST_CASE("manifest round trip reproduces the table") {
  json cfg = {{"experiment", "graph_stats"}, {"n", 30},       {"gamma", 1.5},
              {"alpha", 0.5},                {"samples", 40}, {"seed", 4}};
  const ExperimentRun first = run_experiment(cfg);
  const json manifest = make_manifest(first.resolved_config, "out.csv");
  const ExperimentRun second = run_experiment(unwrap_config(manifest));
  CHECK(second.table.to_csv() == first.table.to_csv());
}

TEST_CASE("csv format is stable") {
  ResultTable t;
  t.columns = {"a", "b"};
  t.add_row({"1", format_double(0.1)});
  CHECK(t.to_csv() == "a,b\n1,0.10000000000000001\n");
  CHECK_THROWS_AS(t.add_row({"only-one"}), ValidationError);
}
