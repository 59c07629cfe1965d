#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparseobs/model.hpp"

#include "json.hpp"

namespace sparseobs {

/// CSV-backed result rows: fixed column order, 17 significant digits for
/// floats, so identical configs and seeds reproduce byte-identical files.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
  std::string to_csv() const;
};

std::string format_double(double v);

/// Common experiment fields parsed out of the config JSON.
struct ExpBase {
  ObservationModel model;
  nlohmann::json model_json;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct CorrelationConfig {
  ExpBase base;
  std::vector<int> n_grid;
  double alpha = 0.5;
  double gamma = 2.0;
  double epsilon = 0.3;
  int k = 2;
  int replicas = 200;
  double theta_override = -1.0;  // < 0 means sample theta ~ U[0, epsilon]
};

struct BpExactConfig {
  ExpBase base;
  std::vector<int> n_grid;
  double alpha = 0.5;
  double gamma = 2.0;
  double epsilon = 0.3;
  int replicas = 200;
  std::vector<int> t_list;  // extra boundary-factorized radii
  bool forest_only = false;
  double theta_override = -1.0;
};

struct DeMatchConfig {
  ExpBase base;
  int n = 2000;
  int graphs = 4;
  int nodes_per_graph = 500;
  double alpha = 0.5;
  double gamma = 2.0;
  int n_pop = 10000;
  int max_generations = 40;
  double bp_tol = 1e-8;
  int bp_max_iter = 300;
  double bp_damping = 0.0;
};

struct EntropyIdentityConfig {
  ExpBase base;
  int n = 6;
  double alpha = 0.5;
  double gamma = 2.0;
  double theta = 0.3;
  double delta_theta = 0.05;
  int worlds = 2000;
};

struct GraphStatsConfig {
  ExpBase base;  // model unused; kept for the uniform CLI surface
  int n = 500;
  double alpha = 0.5;
  double gamma = 2.0;
  int samples = 4000;
  std::vector<int> t_list{1, 2};
  int tail_max = 24;
  bool has_model = false;
};

/// Posterior decoupling check: for each n, the theta-integrated mean
/// factorization gap at k random distinct nodes, its standard error, and the
/// analytic bound (|X|+1)^k exp(k^2/2n) sqrt(H(X_1) eps / n).
ResultTable exp_correlation_decay(const CorrelationConfig& cfg);

/// One-step-map accuracy: theta-integrated E tv(exact marginal, F applied to
/// oracle cavity marginals), plus the boundary-factorized gap per requested t.
ResultTable exp_bp_vs_exact(const BpExactConfig& cfg);

/// Distributional match: per-symbol KS between BP marginals on large sampled
/// graphs and the stationary density-evolution population.
ResultTable exp_de_match(const DeMatchConfig& cfg);

/// Entropy derivative identity: centered finite difference of H(X|Y,Z(theta))
/// against -sum_i H(X_i | Y, Z^(i)(theta)) on common-random-number worlds.
ResultTable exp_entropy_identity(const EntropyIdentityConfig& cfg);

/// Ensemble statistics: neighborhood shapes vs Galton-Watson probabilities,
/// neighborhood-size tails, root-degree-zero mass, residual-graph edge
/// frequency.
ResultTable exp_graph_stats(const GraphStatsConfig& cfg);

/// Parses the "experiment" field and dispatches. Returns the table plus the
/// fully-resolved config (defaults filled in) for the run manifest.
struct ExperimentRun {
  ResultTable table;
  nlohmann::json resolved_config;
};

ExperimentRun run_experiment(const nlohmann::json& config);

/// Manifest written next to every experiment CSV; feeding it back as --config
/// reproduces the table.
nlohmann::json make_manifest(const nlohmann::json& resolved_config,
                             const std::string& csv_path);

/// Accepts either a plain config or a manifest (unwraps its "config" field).
nlohmann::json unwrap_config(const nlohmann::json& j);

}  // namespace sparseobs
