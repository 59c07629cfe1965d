#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "sparseobs/bp.hpp"
#include "sparseobs/de.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/experiments.hpp"
#include "sparseobs/graph.hpp"
#include "sparseobs/model.hpp"
#include "sparseobs/oracle.hpp"
#include "sparseobs/rng.hpp"
#include "sparseobs/version.hpp"

namespace {

using nlohmann::json;
using namespace sparseobs;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << content;
}

ObservationModel load_model(const std::string& path) {
  return ObservationModel::from_json(load_json(path));
}

std::string marginals_csv(const std::vector<Marginal>& marginals) {
  std::ostringstream os;
  os << "var,symbol,prob\n";
  for (std::size_t i = 0; i < marginals.size(); ++i)
    for (std::size_t s = 0; s < marginals[i].size(); ++s)
      os << i << ',' << s << ',' << format_double(marginals[i][s]) << '\n';
  return os.str();
}

struct ExpFlags {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_exp_command(CLI::App& app, const std::string& cmd, const std::string& experiment) {
  auto* sub = app.add_subcommand(cmd, "Run the '" + experiment + "' experiment");
  auto flags = std::make_shared<ExpFlags>();
  sub->add_option("--config", flags->config_path, "Experiment config JSON (or a manifest)")
      ->required();
  sub->add_option("--out", flags->out, "Output CSV path (overrides config 'out')");
  auto* seed_opt = sub->add_option("--seed", flags->seed, "Override the config seed");
  auto* threads_opt = sub->add_option("--threads", flags->threads, "Worker threads");
  sub->callback([flags, experiment, seed_opt, threads_opt]() {
    json config = unwrap_config(load_json(flags->config_path));
    if (!config.is_object()) throw ValidationError("config: must be a JSON object");
    if (!config.contains("experiment")) config["experiment"] = experiment;
    if (config["experiment"].get<std::string>() != experiment)
      throw ValidationError("config: field 'experiment' is '" +
                            config["experiment"].get<std::string>() + "', expected '" +
                            experiment + "'");
    std::string out = flags->out;
    if (config.contains("out")) {
      if (!config["out"].is_string())
        throw ValidationError("config: field 'out' must be a string path");
      if (out.empty()) out = config["out"].get<std::string>();
      config.erase("out");
    }
    if (out.empty())
      throw ValidationError("config: no output path (pass --out or set 'out')");
    if (seed_opt->count() > 0) config["seed"] = flags->seed;
    if (threads_opt->count() > 0) config["threads"] = flags->threads;
    ExperimentRun run = run_experiment(config);
    write_file(out, run.table.to_csv());
    run.resolved_config["out"] = out;
    write_file(out + ".manifest.json",
               make_manifest(run.resolved_config, out).dump(2) + "\n");
    std::cerr << "wrote " << out << " (" << run.table.rows.size() << " rows)\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse observation systems: graphs, models, exact oracle, BP, DE"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);


  // gen-graph
  {
    auto* sub = app.add_subcommand("gen-graph", "Sample a bipartite graph from the ensemble");
    auto n = std::make_shared<int>(0);
    auto alpha = std::make_shared<double>(0.5);
    auto gamma = std::make_shared<double>(1.0);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    sub->add_option("--n", *n, "Variable node count")->required();
    sub->add_option("--alpha", *alpha, "Factor/variable ratio")->required();
    sub->add_option("--gamma", *gamma, "Mean-degree parameter")->required();
    sub->add_option("--seed", *seed, "RNG seed");
    sub->add_option("--out", *out, "Edge-list output path")->required();
    sub->callback([=]() {
      const FactorGraph g = sample_graph(EnsembleParams{*n, *alpha, *gamma}, *seed);
      save_edge_list(g, *out);
      std::cerr << "wrote " << *out << " (" << g.num_edges() << " edges)\n";
    });
  }

  // sample-world
  {
    auto* sub = app.add_subcommand("sample-world", "Sample hidden variables and observations");
    auto graph = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    auto theta = std::make_shared<double>(-1.0);
    sub->add_option("--graph", *graph, "Edge-list path")->required();
    sub->add_option("--model", *model, "Model JSON path")->required();
    sub->add_option("--seed", *seed, "RNG seed");
    sub->add_option("--theta", *theta, "Override the model's reveal probability");
    sub->add_option("--out", *out, "World JSON output path")->required();
    sub->callback([=]() {
      const FactorGraph g = load_edge_list(*graph);
      ObservationModel m = load_model(*model);
      if (*theta >= 0) m = m.with_theta(*theta);
      const World w = sample_world(g, m, *seed);
      write_file(*out, world_to_json(w).dump() + "\n");
      std::cerr << "wrote " << *out << "\n";
    });
  }

  // oracle
  {
    auto* sub = app.add_subcommand("oracle", "Exact posterior marginals by enumeration");
    auto graph = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto world = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--graph", *graph)->required();
    sub->add_option("--model", *model)->required();
    sub->add_option("--world", *world, "World JSON path")->required();
    sub->add_option("--out", *out, "Marginals CSV output path")->required();
    sub->callback([=]() {
      const FactorGraph g = load_edge_list(*graph);
      const ObservationModel m = load_model(*model);
      const World w = world_from_json(load_json(*world));
      const ExactPosterior ep(g, m, w);
      write_file(*out, marginals_csv(ep.all_marginals()));
      std::cerr << "wrote " << *out << "\n";
    });
  }

  // bp
  {
    auto* sub = app.add_subcommand("bp", "Belief propagation marginals");
    auto graph = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto world = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    auto tol = std::make_shared<double>(1e-10);
    auto max_iter = std::make_shared<int>(200);
    auto damping = std::make_shared<double>(0.0);
    auto dump = std::make_shared<std::string>();
    sub->add_option("--graph", *graph)->required();
    sub->add_option("--model", *model)->required();
    sub->add_option("--world", *world, "World JSON (sampled from --seed when absent)");
    sub->add_option("--seed", *seed, "World seed when --world is absent");
    sub->add_option("--tol", *tol, "Convergence tolerance (max edge TV change)");
    sub->add_option("--max-iter", *max_iter, "Sweep cap");
    sub->add_option("--damping", *damping, "Damping in [0,1)");
    sub->add_option("--dump-messages", *dump, "Optional message CSV dump path");
    sub->add_option("--out", *out, "Marginals CSV output path")->required();
    sub->callback([=]() {
      const FactorGraph g = load_edge_list(*graph);
      const ObservationModel m = load_model(*model);
      const World w =
          world->empty() ? sample_world(g, m, *seed) : world_from_json(load_json(*world));
      BpOptions opts;
      opts.tol = *tol;
      opts.max_iter = *max_iter;
      opts.damping = *damping;
      const BpResult res = bp_run(g, m, w, opts);
      write_file(*out, marginals_csv(bp_all_marginals(g, m, w, res.msgs)));
      if (!dump->empty()) write_file(*dump, dump_messages_csv(g, res.msgs));
      std::cerr << (res.converged ? "converged" : "not converged") << " after "
                << res.iters << " sweeps, residual " << res.residual << "\n";
    });
  }

  // de
  {
    auto* sub = app.add_subcommand("de", "Density-evolution population dynamics");
    auto model = std::make_shared<std::string>();
    auto gamma = std::make_shared<double>(2.0);
    auto alpha = std::make_shared<double>(0.5);
    auto n_pop = std::make_shared<int>(10000);
    auto iters = std::make_shared<int>(20);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    auto snapshot = std::make_shared<std::string>();
    sub->add_option("--model", *model)->required();
    sub->add_option("--gamma", *gamma, "Mean-degree parameter")->required();
    sub->add_option("--alpha", *alpha, "Factor/variable ratio")->required();
    sub->add_option("--n-pop", *n_pop, "Population size");
    sub->add_option("--iters", *iters, "Generations");
    sub->add_option("--seed", *seed, "RNG seed");
    sub->add_option("--out", *out, "History CSV output path")->required();
    sub->add_option("--snapshot", *snapshot, "Final population CSV path");
    sub->callback([=]() {
      const ObservationModel m = load_model(*model);
      const DeRunResult res = de_run(m, *gamma, *alpha, *n_pop, *iters, *seed);
      write_file(*out, de_history_to_csv(res.history));
      if (!snapshot->empty()) write_file(*snapshot, population_to_csv(res.population));
      std::cerr << "stationary_at=" << res.stationary_at << "\n";
    });
  }

  add_exp_command(app, "exp-correlation", "correlation");
  add_exp_command(app, "exp-bp-exact", "bp_exact");
  add_exp_command(app, "exp-de-match", "de_match");
  add_exp_command(app, "exp-entropy", "entropy_identity");
  add_exp_command(app, "exp-graph-stats", "graph_stats");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
