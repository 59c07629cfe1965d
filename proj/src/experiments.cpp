#include "sparseobs/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sparseobs/bp.hpp"
#include "sparseobs/de.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/oracle.hpp"
#include "sparseobs/rng.hpp"
#include "sparseobs/stats.hpp"
#include "sparseobs/version.hpp"

namespace sparseobs {

void ResultTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size())
    throw ValidationError("ResultTable: row width does not match the header");
  rows.push_back(std::move(cells));
}

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << '\n';
  }
  return os.str();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string fmt_int(long long v) { return std::to_string(v); }

/// Runs fn(0..count-1) on up to `threads` workers. Results must be written
/// into preallocated per-index slots; any subsequent reduction happens in
/// index order, so output does not depend on the thread count.
void parallel_map(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int i = t; i < count; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// --- config field access, with errors that name the offending field ---------

const nlohmann::json& require_field(const nlohmann::json& j, const std::string& name) {
  if (!j.contains(name))
    throw ValidationError("config: missing field '" + name + "'");
  return j.at(name);
}

int get_int(const nlohmann::json& j, const std::string& name, std::optional<int> def = {}) {
  if (!j.contains(name)) {
    if (def) return *def;
    throw ValidationError("config: missing field '" + name + "'");
  }
  if (!j.at(name).is_number_integer())
    throw ValidationError("config: field '" + name + "' must be an integer");
  return j.at(name).get<int>();
}

double get_double(const nlohmann::json& j, const std::string& name,
                  std::optional<double> def = {}) {
  if (!j.contains(name)) {
    if (def) return *def;
    throw ValidationError("config: missing field '" + name + "'");
  }
  if (!j.at(name).is_number())
    throw ValidationError("config: field '" + name + "' must be a number");
  return j.at(name).get<double>();
}

bool get_bool(const nlohmann::json& j, const std::string& name, bool def) {
  if (!j.contains(name)) return def;
  if (!j.at(name).is_boolean())
    throw ValidationError("config: field '" + name + "' must be a boolean");
  return j.at(name).get<bool>();
}

std::uint64_t get_u64(const nlohmann::json& j, const std::string& name,
                      std::optional<std::uint64_t> def = {}) {
  if (!j.contains(name)) {
    if (def) return *def;
    throw ValidationError("config: missing field '" + name + "'");
  }
  if (!j.at(name).is_number_unsigned() && !j.at(name).is_number_integer())
    throw ValidationError("config: field '" + name + "' must be an integer seed");
  return j.at(name).get<std::uint64_t>();
}

std::vector<int> get_int_list(const nlohmann::json& j, const std::string& name,
                              std::optional<std::vector<int>> def = {}) {
  if (!j.contains(name)) {
    if (def) return *def;
    throw ValidationError("config: missing field '" + name + "'");
  }
  if (!j.at(name).is_array())
    throw ValidationError("config: field '" + name + "' must be an array of integers");
  std::vector<int> out;
  for (const auto& v : j.at(name)) {
    if (!v.is_number_integer())
      throw ValidationError("config: field '" + name + "' must contain integers only");
    out.push_back(v.get<int>());
  }
  return out;
}

void reject_unknown_fields(const nlohmann::json& j, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ValidationError("config: unknown field '" + key + "'");
}

/// Resolves config["model"]: inline object or {"file": path}. Returns the
/// model plus its inline JSON (manifests must be file-free).
std::pair<ObservationModel, nlohmann::json> resolve_model(const nlohmann::json& j) {
  const nlohmann::json& mj = require_field(j, "model");
  if (!mj.is_object()) throw ValidationError("config: field 'model' must be an object");
  if (mj.contains("file")) {
    if (!mj.at("file").is_string())
      throw ValidationError("config: field 'model.file' must be a string path");
    std::ifstream in(mj.at("file").get<std::string>());
    if (!in)
      throw ValidationError("config: cannot open model file '" +
                            mj.at("file").get<std::string>() + "'");
    nlohmann::json inner;
    try {
      in >> inner;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config: model file is not valid JSON: ") + e.what());
    }
    return {ObservationModel::from_json(inner), inner};
  }
  return {ObservationModel::from_json(mj), mj};
}

ExpBase parse_base(const nlohmann::json& j, bool model_required) {
  ExpBase base;
  if (model_required || j.contains("model")) {
    auto [model, mj] = resolve_model(j);
    base.model = std::move(model);
    base.model_json = std::move(mj);
  }
  base.seed = get_u64(j, "seed", std::uint64_t{1});
  base.threads = get_int(j, "threads", 1);
  if (base.threads < 1) throw ValidationError("config: field 'threads' must be >= 1");
  return base;
}

void require_positive(int v, const std::string& name) {
  if (v < 1) throw ValidationError("config: field '" + name + "' must be >= 1");
}

void require_epsilon(double eps) {
  if (!(eps > 0.0 && eps <= 1.0))
    throw ValidationError("config: field 'epsilon' must lie in (0, 1]");
}

double draw_theta(double override_value, double epsilon, std::uint64_t seed) {
  if (override_value >= 0) return override_value;
  Rng rng(seed);
  return rng.uniform01() * epsilon;
}

std::vector<int> draw_distinct_nodes(int n, int k, std::uint64_t seed) {
  if (k > n) throw ValidationError("config: field 'k' exceeds n");
  Rng rng(seed);
  std::vector<int> out;
  std::set<int> seen;
  while (static_cast<int>(out.size()) < k) {
    const int v = rng.uniform_int(n);
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

void enforce_soft(const ObservationModel& model, const std::string& experiment) {
  if (model.non_soft_flagged())
    throw ValidationError("config: experiment '" + experiment +
                          "' requires a soft model, but the model is flagged non-soft");
}

}  // namespace

ResultTable exp_correlation_decay(const CorrelationConfig& cfg) {
  if (cfg.n_grid.empty()) throw ValidationError("config: field 'n_grid' must be nonempty");
  require_epsilon(cfg.epsilon);
  require_positive(cfg.k, "k");
  require_positive(cfg.replicas, "replicas");
  const int q = cfg.base.model.prior().q;
  const double h1 = cfg.base.model.prior().entropy();

  ResultTable table;
  table.columns = {"experiment", "n",          "alpha",     "gamma", "epsilon",
                   "k",          "replicas",   "statistic", "std_error", "bound"};
  for (const int n : cfg.n_grid) {
    EnsembleParams params{n, cfg.alpha, cfg.gamma};
    params.validate();
    std::vector<double> gaps(cfg.replicas);
    parallel_map(cfg.replicas, cfg.base.threads, [&](int r) {
      const std::uint64_t seed_r = cfg.base.seed + static_cast<std::uint64_t>(r);
      const FactorGraph g = sample_graph(params, mix_seed(seed_r, 11));
      const double theta = draw_theta(cfg.theta_override, cfg.epsilon, mix_seed(seed_r, 12));
      const ObservationModel m = cfg.base.model.with_theta(theta);
      const World w = sample_world(g, m, mix_seed(seed_r, 13));
      const std::vector<int> ids = draw_distinct_nodes(n, cfg.k, mix_seed(seed_r, 14));
      gaps[r] = factorization_gap(g, m, w, ids);
    });
    const RunningStat stat = RunningStat::from(gaps);
    const double bound = std::pow(q + 1.0, cfg.k) *
                         std::exp(cfg.k * cfg.k / (2.0 * n)) *
                         std::sqrt(h1 * cfg.epsilon / n);
    table.add_row({"correlation", fmt_int(n), format_double(cfg.alpha),
                   format_double(cfg.gamma), format_double(cfg.epsilon), fmt_int(cfg.k),
                   fmt_int(cfg.replicas), format_double(cfg.epsilon * stat.mean()),
                   format_double(cfg.epsilon * stat.std_error()), format_double(bound)});
  }
  return table;
}

ResultTable exp_bp_vs_exact(const BpExactConfig& cfg) {
  if (cfg.n_grid.empty()) throw ValidationError("config: field 'n_grid' must be nonempty");
  require_epsilon(cfg.epsilon);
  require_positive(cfg.replicas, "replicas");
  enforce_soft(cfg.base.model, "bp_exact");
  for (int t : cfg.t_list)
    if (t < 1) throw ValidationError("config: field 't_list' entries must be >= 1");

  ResultTable table;
  table.columns = {"experiment", "n",        "variant",   "t",         "alpha", "gamma",
                   "epsilon",    "replicas", "statistic", "std_error"};
  for (const int n : cfg.n_grid) {
    EnsembleParams params{n, cfg.alpha, cfg.gamma};
    params.validate();
    std::vector<double> gap_f(cfg.replicas);
    std::vector<std::vector<double>> gap_t(cfg.t_list.size(),
                                           std::vector<double>(cfg.replicas));
    parallel_map(cfg.replicas, cfg.base.threads, [&](int r) {
      const std::uint64_t seed_r = cfg.base.seed + static_cast<std::uint64_t>(r);
      FactorGraph g;
      for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt > 100000)
          throw ValidationError("exp_bp_vs_exact: forest rejection sampling stalled");
        g = sample_graph(params, mix_seed(seed_r, 11 + 1000 * attempt));
        if (!cfg.forest_only || is_forest(g)) break;
      }
      const double theta = draw_theta(cfg.theta_override, cfg.epsilon, mix_seed(seed_r, 12));
      const ObservationModel m = cfg.base.model.with_theta(theta);
      const World w = sample_world(g, m, mix_seed(seed_r, 13));
      Rng pick(mix_seed(seed_r, 14));
      const int i = pick.uniform_int(n);
      const ExactPosterior ep(g, m, w);
      const Marginal mu = ep.marginal(i);
      const auto cavity = cavity_marginals(g, m, w, i, CavityMethod::oracle);
      const Marginal f = local_update_F(m, make_local_star(g, w, i), cavity);
      gap_f[r] = total_variation(mu, f);
      for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti) {
        const Marginal mt =
            boundary_factorized_marginal(g, m, w, i, cfg.t_list[ti], CavityMethod::oracle);
        gap_t[ti][r] = total_variation(mu, mt);
      }
    });
    const RunningStat stat = RunningStat::from(gap_f);
    table.add_row({"bp_exact", fmt_int(n), "bp_one_step", "1", format_double(cfg.alpha),
                   format_double(cfg.gamma), format_double(cfg.epsilon),
                   fmt_int(cfg.replicas), format_double(cfg.epsilon * stat.mean()),
                   format_double(cfg.epsilon * stat.std_error())});
    for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti) {
      const RunningStat st = RunningStat::from(gap_t[ti]);
      table.add_row({"bp_exact", fmt_int(n), "boundary_factorized",
                     fmt_int(cfg.t_list[ti]), format_double(cfg.alpha),
                     format_double(cfg.gamma), format_double(cfg.epsilon),
                     fmt_int(cfg.replicas), format_double(cfg.epsilon * st.mean()),
                     format_double(cfg.epsilon * st.std_error())});
    }
  }
  return table;
}

ResultTable exp_de_match(const DeMatchConfig& cfg) {
  require_positive(cfg.n, "n");
  require_positive(cfg.graphs, "graphs");
  require_positive(cfg.nodes_per_graph, "nodes_per_graph");
  if (cfg.n_pop < 1000)
    throw ValidationError("config: field 'n_pop' must be >= 1000 for experiment runs");
  require_positive(cfg.max_generations, "max_generations");
  enforce_soft(cfg.base.model, "de_match");
  if (cfg.nodes_per_graph > cfg.n)
    throw ValidationError("config: field 'nodes_per_graph' exceeds n");
  EnsembleParams params{cfg.n, cfg.alpha, cfg.gamma};
  params.validate();

  const int q = cfg.base.model.prior().q;
  std::vector<std::vector<Marginal>> per_graph(cfg.graphs);
  std::vector<char> converged(cfg.graphs, 0);
  BpOptions bp_opts;
  bp_opts.tol = cfg.bp_tol;
  bp_opts.max_iter = cfg.bp_max_iter;
  bp_opts.damping = cfg.bp_damping;
  parallel_map(cfg.graphs, cfg.base.threads, [&](int gi) {
    const std::uint64_t seed_g = cfg.base.seed + static_cast<std::uint64_t>(gi);
    const FactorGraph g = sample_graph(params, mix_seed(seed_g, 11));
    const World w = sample_world(g, cfg.base.model, mix_seed(seed_g, 12));
    const BpResult res = bp_run(g, cfg.base.model, w, bp_opts);
    converged[gi] = res.converged ? 1 : 0;
    const std::vector<Marginal> all = bp_all_marginals(g, cfg.base.model, w, res.msgs);
    const std::vector<int> nodes =
        draw_distinct_nodes(cfg.n, cfg.nodes_per_graph, mix_seed(seed_g, 13));
    for (int v : nodes) per_graph[gi].push_back(all[v]);
  });

  DeRunOptions de_opts;
  de_opts.stop_when_stationary = true;
  const DeRunResult de = de_run(cfg.base.model, cfg.gamma, cfg.alpha, cfg.n_pop,
                                cfg.max_generations, mix_seed(cfg.base.seed, 999), de_opts);

  ResultTable table;
  table.columns = {"experiment", "row_type", "key", "value", "extra1", "extra2"};
  std::vector<double> bp_component, de_component;
  for (int xi = 0; xi < q; ++xi) {
    bp_component.clear();
    de_component.clear();
    for (const auto& graph_mus : per_graph)
      for (const auto& mu : graph_mus) bp_component.push_back(mu[xi]);
    for (const auto& nu : de.population.messages) de_component.push_back(nu[xi]);
    const double ks = ks_distance(bp_component, de_component);
    table.add_row({"de_match", "ks_symbol", fmt_int(xi), format_double(ks), "", ""});
  }
  double conv = 0;
  for (char c : converged) conv += c;
  table.add_row({"de_match", "bp_converged_frac", "",
                 format_double(conv / cfg.graphs), "", ""});
  table.add_row({"de_match", "de_stationary_at", "", fmt_int(de.stationary_at), "", ""});
  for (const auto& h : de.history)
    table.add_row({"de_match", "de_trace", fmt_int(h.generation),
                   format_double(h.ks_to_prev), format_double(h.mean_entropy),
                   format_double(h.error_proxy)});
  return table;
}

ResultTable exp_entropy_identity(const EntropyIdentityConfig& cfg) {
  require_positive(cfg.n, "n");
  if (cfg.worlds < 2) throw ValidationError("config: field 'worlds' must be >= 2");
  if (cfg.delta_theta < 0.02)
    throw ValidationError(
        "config: field 'delta_theta' below the MC-noise guard (need >= 0.02)");
  if (!(cfg.theta - cfg.delta_theta >= 0.0 && cfg.theta + cfg.delta_theta <= 1.0))
    throw ValidationError("config: theta +- delta_theta must stay inside [0,1]");
  EnsembleParams params{cfg.n, cfg.alpha, cfg.gamma};
  params.validate();
  const FactorGraph g = sample_graph(params, mix_seed(cfg.base.seed, 7));
  const ObservationModel m_plus = cfg.base.model.with_theta(cfg.theta + cfg.delta_theta);
  const ObservationModel m_minus = cfg.base.model.with_theta(cfg.theta - cfg.delta_theta);
  const ObservationModel m_center = cfg.base.model.with_theta(cfg.theta);

  std::vector<double> diffs(cfg.worlds), rhs(cfg.worlds);
  parallel_map(cfg.worlds, cfg.base.threads, [&](int wi) {
    // One seed per world index: the three thetas share x, y, z and the reveal
    // uniforms, so the finite difference uses common random numbers.
    const std::uint64_t crn = mix_seed(cfg.base.seed + static_cast<std::uint64_t>(wi), 21);
    const World w_plus = sample_world(g, m_plus, crn);
    const World w_minus = sample_world(g, m_minus, crn);
    diffs[wi] = (posterior_entropy(g, m_plus, w_plus) -
                 posterior_entropy(g, m_minus, w_minus)) /
                (2.0 * cfg.delta_theta);
    World w_center = sample_world(g, m_center, crn);
    double acc = 0.0;
    for (int i = 0; i < cfg.n; ++i) {
      const int saved = w_center.reveal[i];
      w_center.reveal[i] = kMasked;
      acc += dist_entropy(ExactPosterior(g, m_center, w_center).marginal(i));
      w_center.reveal[i] = saved;
    }
    rhs[wi] = -acc;
  });
  const RunningStat lhs_stat = RunningStat::from(diffs);
  const RunningStat rhs_stat = RunningStat::from(rhs);
  const double lhs = lhs_stat.mean();
  const double rhs_mean = rhs_stat.mean();
  const double rel =
      std::fabs(lhs - rhs_mean) / std::max({std::fabs(lhs), std::fabs(rhs_mean), 1e-300});

  ResultTable table;
  table.columns = {"experiment", "n",      "alpha", "gamma",  "theta",
                   "delta_theta", "worlds", "units", "lhs",    "lhs_se",
                   "rhs",         "rhs_se", "rel_error"};
  table.add_row({"entropy_identity", fmt_int(cfg.n), format_double(cfg.alpha),
                 format_double(cfg.gamma), format_double(cfg.theta),
                 format_double(cfg.delta_theta), fmt_int(cfg.worlds), "nats",
                 format_double(lhs), format_double(lhs_stat.std_error()),
                 format_double(rhs_mean), format_double(rhs_stat.std_error()),
                 format_double(rel)});
  return table;
}

ResultTable exp_graph_stats(const GraphStatsConfig& cfg) {
  require_positive(cfg.n, "n");
  require_positive(cfg.samples, "samples");
  for (int t : cfg.t_list)
    if (t < 0) throw ValidationError("config: field 't_list' entries must be >= 0");
  EnsembleParams params{cfg.n, cfg.alpha, cfg.gamma};
  params.validate();
  const double ga = cfg.gamma * cfg.alpha;

  // Reference shapes with at most 3 nodes in B(i,1), and their GW masses.
  struct RefShape {
    std::string label;
    std::string canon;
    double gw_prob;
  };
  std::vector<RefShape> shapes;
  shapes.push_back({"single_node", canonical_shape(FactorGraph(1, 0, {}), 0, 1),
                    std::exp(-ga)});
  shapes.push_back({"one_factor_deg1",
                    canonical_shape(FactorGraph(1, 1, {{0, 0}}), 0, 1),
                    ga * std::exp(-ga) * std::exp(-cfg.gamma)});
  shapes.push_back({"one_factor_one_leaf",
                    canonical_shape(FactorGraph(2, 1, {{0, 0}, {1, 0}}), 0, 1),
                    ga * std::exp(-ga) * cfg.gamma * std::exp(-cfg.gamma)});
  shapes.push_back({"two_factors_deg1",
                    canonical_shape(FactorGraph(1, 2, {{0, 0}, {0, 1}}), 0, 1),
                    0.5 * ga * ga * std::exp(-ga) * std::exp(-2.0 * cfg.gamma)});

  struct SampleRecord {
    int shape = -1;
    std::vector<int> b_sizes;
    char deg0 = 0;
    long long resid_edges = 0;
    long long resid_pairs = 0;
  };
  std::vector<SampleRecord> recs(cfg.samples);
  parallel_map(cfg.samples, cfg.base.threads, [&](int s) {
    const std::uint64_t seed_s = cfg.base.seed + static_cast<std::uint64_t>(s);
    const FactorGraph g = sample_graph(params, mix_seed(seed_s, 11));
    SampleRecord rec;
    const std::string canon = canonical_shape(g, 0, 1);
    for (std::size_t k = 0; k < shapes.size(); ++k)
      if (canon == shapes[k].canon) {
        rec.shape = static_cast<int>(k);
        break;
      }
    for (int t : cfg.t_list) {
      const Neighborhood nb = neighborhood(g, 0, t);
      rec.b_sizes.push_back(static_cast<int>(nb.vars.size() + nb.facs.size()));
    }
    rec.deg0 = g.var_neighbors(0).empty() ? 1 : 0;
    const Neighborhood nb1 = neighborhood(g, 0, 1);
    std::vector<char> in_v(g.n(), 0), in_f(g.m(), 0);
    for (int v : nb1.vars) in_v[v] = 1;
    for (int a : nb1.facs) in_f[a] = 1;
    long long edges = 0, pairs = 0;
    for (int j = 0; j < g.n(); ++j) {
      if (in_v[j]) continue;
      long long out_facs = 0;
      for (int a : g.var_neighbors(j))
        if (!in_f[a]) ++edges;
      for (int a = 0; a < g.m(); ++a)
        if (!in_f[a]) ++out_facs;
      pairs += out_facs;
    }
    rec.resid_edges = edges;
    rec.resid_pairs = pairs;
    recs[s] = std::move(rec);
  });

  std::vector<long long> shape_counts(shapes.size(), 0);
  std::map<std::pair<int, int>, long long> tail;  // (t_index, M) -> count of |B| >= M
  long long deg0 = 0, resid_edges = 0, resid_pairs = 0;
  for (const auto& rec : recs) {
    if (rec.shape >= 0) ++shape_counts[rec.shape];
    deg0 += rec.deg0;
    resid_edges += rec.resid_edges;
    resid_pairs += rec.resid_pairs;
    for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti)
      for (int m_size = 1; m_size <= cfg.tail_max; ++m_size)
        if (rec.b_sizes[ti] >= m_size) ++tail[{static_cast<int>(ti), m_size}];
  }

  ResultTable table;
  table.columns = {"experiment", "row_type", "key",       "n",        "gamma",
                   "alpha",      "samples",  "empirical", "expected", "std_error"};
  auto se_of = [&](double p, double count) {
    return std::sqrt(std::max(p * (1 - p), 0.0) / count);
  };
  const double s_count = cfg.samples;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const double p = shape_counts[k] / s_count;
    table.add_row({"graph_stats", "shape", shapes[k].label, fmt_int(cfg.n),
                   format_double(cfg.gamma), format_double(cfg.alpha),
                   fmt_int(cfg.samples), format_double(p),
                   format_double(shapes[k].gw_prob), format_double(se_of(p, s_count))});
  }
  for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti)
    for (int m_size = 1; m_size <= cfg.tail_max; ++m_size) {
      const double p = tail[{static_cast<int>(ti), m_size}] / s_count;
      table.add_row({"graph_stats", "tail",
                     "t" + std::to_string(cfg.t_list[ti]) + "_M" + std::to_string(m_size),
                     fmt_int(cfg.n), format_double(cfg.gamma), format_double(cfg.alpha),
                     fmt_int(cfg.samples), format_double(p), "",
                     format_double(se_of(p, s_count))});
    }
  {
    const double p = deg0 / s_count;
    table.add_row({"graph_stats", "degree0", "root_degree_zero", fmt_int(cfg.n),
                   format_double(cfg.gamma), format_double(cfg.alpha),
                   fmt_int(cfg.samples), format_double(p), format_double(std::exp(-ga)),
                   format_double(se_of(p, s_count))});
  }
  {
    const double p = resid_pairs > 0 ? double(resid_edges) / double(resid_pairs) : 0.0;
    table.add_row({"graph_stats", "residual", "residual_edge_freq", fmt_int(cfg.n),
                   format_double(cfg.gamma), format_double(cfg.alpha),
                   fmt_int(cfg.samples), format_double(p),
                   format_double(params.p_edge()),
                   format_double(se_of(p, double(resid_pairs)))});
  }
  return table;
}

namespace {

nlohmann::json resolved_base(const std::string& experiment, const ExpBase& base,
                             bool include_model = true) {
  nlohmann::json j;
  j["experiment"] = experiment;
  if (include_model) j["model"] = base.model_json;
  j["seed"] = base.seed;
  j["threads"] = base.threads;
  return j;
}

}  // namespace

ExperimentRun run_experiment(const nlohmann::json& config) {
  if (!config.is_object()) throw ValidationError("config: must be a JSON object");
  const nlohmann::json& ej = require_field(config, "experiment");
  if (!ej.is_string()) throw ValidationError("config: field 'experiment' must be a string");
  const std::string name = ej.get<std::string>();

  if (name == "correlation") {
    reject_unknown_fields(config,
                          {"experiment", "model", "seed", "threads", "n_grid", "alpha",
                           "gamma", "epsilon", "k", "replicas", "theta_override"});
    CorrelationConfig cfg;
    cfg.base = parse_base(config, true);
    cfg.n_grid = get_int_list(config, "n_grid");
    cfg.alpha = get_double(config, "alpha", 0.5);
    cfg.gamma = get_double(config, "gamma", 2.0);
    cfg.epsilon = get_double(config, "epsilon", 0.3);
    cfg.k = get_int(config, "k", 2);
    cfg.replicas = get_int(config, "replicas", 200);
    cfg.theta_override = get_double(config, "theta_override", -1.0);
    nlohmann::json rc = resolved_base(name, cfg.base);
    rc["n_grid"] = cfg.n_grid;
    rc["alpha"] = cfg.alpha;
    rc["gamma"] = cfg.gamma;
    rc["epsilon"] = cfg.epsilon;
    rc["k"] = cfg.k;
    rc["replicas"] = cfg.replicas;
    rc["theta_override"] = cfg.theta_override;
    return {exp_correlation_decay(cfg), rc};
  }
  if (name == "bp_exact") {
    reject_unknown_fields(config, {"experiment", "model", "seed", "threads", "n_grid",
                                   "alpha", "gamma", "epsilon", "replicas", "t_list",
                                   "forest_only", "theta_override"});
    BpExactConfig cfg;
    cfg.base = parse_base(config, true);
    cfg.n_grid = get_int_list(config, "n_grid");
    cfg.alpha = get_double(config, "alpha", 0.5);
    cfg.gamma = get_double(config, "gamma", 2.0);
    cfg.epsilon = get_double(config, "epsilon", 0.3);
    cfg.replicas = get_int(config, "replicas", 200);
    cfg.t_list = get_int_list(config, "t_list", std::vector<int>{});
    cfg.forest_only = get_bool(config, "forest_only", false);
    cfg.theta_override = get_double(config, "theta_override", -1.0);
    nlohmann::json rc = resolved_base(name, cfg.base);
    rc["n_grid"] = cfg.n_grid;
    rc["alpha"] = cfg.alpha;
    rc["gamma"] = cfg.gamma;
    rc["epsilon"] = cfg.epsilon;
    rc["replicas"] = cfg.replicas;
    rc["t_list"] = cfg.t_list;
    rc["forest_only"] = cfg.forest_only;
    rc["theta_override"] = cfg.theta_override;
    return {exp_bp_vs_exact(cfg), rc};
  }
  if (name == "de_match") {
    reject_unknown_fields(config,
                          {"experiment", "model", "seed", "threads", "n", "graphs",
                           "nodes_per_graph", "alpha", "gamma", "n_pop",
                           "max_generations", "bp_tol", "bp_max_iter", "bp_damping"});
    DeMatchConfig cfg;
    cfg.base = parse_base(config, true);
    cfg.n = get_int(config, "n", 2000);
    cfg.graphs = get_int(config, "graphs", 4);
    cfg.nodes_per_graph = get_int(config, "nodes_per_graph", 500);
    cfg.alpha = get_double(config, "alpha", 0.5);
    cfg.gamma = get_double(config, "gamma", 2.0);
    cfg.n_pop = get_int(config, "n_pop", 10000);
    cfg.max_generations = get_int(config, "max_generations", 40);
    cfg.bp_tol = get_double(config, "bp_tol", 1e-8);
    cfg.bp_max_iter = get_int(config, "bp_max_iter", 300);
    cfg.bp_damping = get_double(config, "bp_damping", 0.0);
    nlohmann::json rc = resolved_base(name, cfg.base);
    rc["n"] = cfg.n;
    rc["graphs"] = cfg.graphs;
    rc["nodes_per_graph"] = cfg.nodes_per_graph;
    rc["alpha"] = cfg.alpha;
    rc["gamma"] = cfg.gamma;
    rc["n_pop"] = cfg.n_pop;
    rc["max_generations"] = cfg.max_generations;
    rc["bp_tol"] = cfg.bp_tol;
    rc["bp_max_iter"] = cfg.bp_max_iter;
    rc["bp_damping"] = cfg.bp_damping;
    return {exp_de_match(cfg), rc};
  }
  if (name == "entropy_identity") {
    reject_unknown_fields(config, {"experiment", "model", "seed", "threads", "n", "alpha",
                                   "gamma", "theta", "delta_theta", "worlds"});
    EntropyIdentityConfig cfg;
    cfg.base = parse_base(config, true);
    cfg.n = get_int(config, "n", 6);
    cfg.alpha = get_double(config, "alpha", 0.5);
    cfg.gamma = get_double(config, "gamma", 2.0);
    cfg.theta = get_double(config, "theta", 0.3);
    cfg.delta_theta = get_double(config, "delta_theta", 0.05);
    cfg.worlds = get_int(config, "worlds", 2000);
    nlohmann::json rc = resolved_base(name, cfg.base);
    rc["n"] = cfg.n;
    rc["alpha"] = cfg.alpha;
    rc["gamma"] = cfg.gamma;
    rc["theta"] = cfg.theta;
    rc["delta_theta"] = cfg.delta_theta;
    rc["worlds"] = cfg.worlds;
    return {exp_entropy_identity(cfg), rc};
  }
  if (name == "graph_stats") {
    reject_unknown_fields(config, {"experiment", "model", "seed", "threads", "n", "alpha",
                                   "gamma", "samples", "t_list", "tail_max"});
    GraphStatsConfig cfg;
    cfg.base = parse_base(config, false);
    cfg.has_model = config.contains("model");
    cfg.n = get_int(config, "n", 500);
    cfg.alpha = get_double(config, "alpha", 0.5);
    cfg.gamma = get_double(config, "gamma", 2.0);
    cfg.samples = get_int(config, "samples", 4000);
    cfg.t_list = get_int_list(config, "t_list", std::vector<int>{1, 2});
    cfg.tail_max = get_int(config, "tail_max", 24);
    nlohmann::json rc = resolved_base(name, cfg.base, cfg.has_model);
    rc["n"] = cfg.n;
    rc["alpha"] = cfg.alpha;
    rc["gamma"] = cfg.gamma;
    rc["samples"] = cfg.samples;
    rc["t_list"] = cfg.t_list;
    rc["tail_max"] = cfg.tail_max;
    return {exp_graph_stats(cfg), rc};
  }
  throw ValidationError("config: unknown experiment '" + name + "'");
}

nlohmann::json make_manifest(const nlohmann::json& resolved_config,
                             const std::string& csv_path) {
  nlohmann::json m;
  m["tool"] = "sparseobs";
  m["version"] = kVersion;
  m["rng"] = kRngVersion;
  m["config"] = resolved_config;
  m["output_csv"] = csv_path;
  return m;
}

nlohmann::json unwrap_config(const nlohmann::json& j) {
  if (j.is_object() && j.contains("tool") && j.contains("config")) return j.at("config");
  return j;
}

}  // namespace sparseobs
