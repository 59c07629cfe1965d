#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sparseobs/bp.hpp"
#include "sparseobs/de.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/experiments.hpp"
#include "sparseobs/graph.hpp"
#include "sparseobs/model.hpp"
#include "sparseobs/oracle.hpp"
#include "sparseobs/rng.hpp"
#include "sparseobs/version.hpp"

namespace py = pybind11;
using namespace sparseobs;

namespace {

ObservationModel model_from_json_str(const std::string& text) {
  return ObservationModel::from_json(nlohmann::json::parse(text));
}

py::tuple run_experiment_py(const std::string& config_text) {
  const ExperimentRun run = run_experiment(nlohmann::json::parse(config_text));
  return py::make_tuple(run.table.to_csv(), run.resolved_config.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse observation systems on random bipartite factor graphs";
  m.attr("__version__") = kVersion;
  m.attr("RNG_VERSION") = kRngVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<ImpossibleWorldError>(m, "ImpossibleWorldError", PyExc_RuntimeError);
  py::register_exception<ZeroNormalizerError>(m, "ZeroNormalizerError", PyExc_RuntimeError);

  py::class_<FactorGraph>(m, "FactorGraph")
      .def(py::init<int, int, const std::vector<std::pair<int, int>>&>(), py::arg("n"),
           py::arg("m"), py::arg("edges"))
      .def_property_readonly("n", &FactorGraph::n)
      .def_property_readonly("m", &FactorGraph::m)
      .def_property_readonly("num_edges", &FactorGraph::num_edges)
      .def("var_neighbors", &FactorGraph::var_neighbors, py::arg("i"))
      .def("fac_neighbors", &FactorGraph::fac_neighbors, py::arg("a"))
      .def("edges", &FactorGraph::edges)
      .def("__eq__", [](const FactorGraph& a, const FactorGraph& b) { return a == b; })
      .def("__repr__", [](const FactorGraph& g) {
        return "FactorGraph(n=" + std::to_string(g.n()) + ", m=" + std::to_string(g.m()) +
               ", edges=" + std::to_string(g.num_edges()) + ")";
      });

  m.def(
      "sample_graph",
      [](int n, double alpha, double gamma, std::uint64_t seed) {
        return sample_graph(EnsembleParams{n, alpha, gamma}, seed);
      },
      py::arg("n"), py::arg("alpha"), py::arg("gamma"), py::arg("seed"));
  m.def(
      "sample_gw_tree",
      [](double gamma, double alpha, int depth, std::uint64_t seed) {
        const GwTree t = sample_gw_tree(gamma, alpha, depth, seed);
        return py::make_tuple(t.graph, t.root);
      },
      py::arg("gamma"), py::arg("alpha"), py::arg("depth"), py::arg("seed"));

  py::class_<Neighborhood>(m, "Neighborhood")
      .def_readonly("root", &Neighborhood::root)
      .def_readonly("radius", &Neighborhood::radius)
      .def_readonly("vars", &Neighborhood::vars)
      .def_readonly("facs", &Neighborhood::facs)
      .def_readonly("boundary", &Neighborhood::boundary);
  m.def("neighborhood", &neighborhood, py::arg("graph"), py::arg("i"), py::arg("t"));
  m.def("distance", &distance, py::arg("graph"), py::arg("i"), py::arg("j"));

  py::class_<SurgeryResult>(m, "SurgeryResult")
      .def_readonly("graph", &SurgeryResult::graph)
      .def_readonly("var_map", &SurgeryResult::var_map)
      .def_readonly("fac_map", &SurgeryResult::fac_map);
  m.def("graph_surgery", &graph_surgery, py::arg("graph"), py::arg("drop_var") = py::none(),
        py::arg("drop_fac") = py::none());
  m.def("is_forest", &is_forest, py::arg("graph"));
  m.def("canonical_shape", &canonical_shape, py::arg("graph"), py::arg("root"), py::arg("t"));
  m.def("write_edge_list", &write_edge_list, py::arg("graph"));
  m.def("parse_edge_list", &parse_edge_list, py::arg("text"));

  py::class_<ObservationModel>(m, "ObservationModel")
      .def_property_readonly("theta", &ObservationModel::theta)
      .def_property_readonly("name", &ObservationModel::name)
      .def_property_readonly("q", [](const ObservationModel& mo) { return mo.prior().q; })
      .def_property_readonly("prior",
                             [](const ObservationModel& mo) { return mo.prior().probs; })
      .def("with_theta", &ObservationModel::with_theta, py::arg("theta"))
      .def("non_soft_flagged", &ObservationModel::non_soft_flagged)
      .def("softness", &ObservationModel::softness, py::arg("max_arity") = 12)
      .def("to_json", [](const ObservationModel& mo) { return mo.to_json().dump(); })
      .def("__repr__", [](const ObservationModel& mo) {
        return "ObservationModel(name=" + mo.name() + ")";
      });
  m.def("model_from_json", &model_from_json_str, py::arg("text"));
  m.def(
      "builtin_model",
      [](const std::string& name, const std::map<std::string, double>& params) {
        return builtin_model(name, params);
      },
      py::arg("name"), py::arg("params") = std::map<std::string, double>{});
  m.def(
      "softness_constant",
      [](const ObservationModel& mo, int arity) { return softness_constant(mo.Q(arity)); },
      py::arg("model"), py::arg("arity"), "Softness constant of one Q kernel");
  m.def(
      "softness_constant_r",
      [](const ObservationModel& mo) { return softness_constant(mo.R()); }, py::arg("model"),
      "Softness constant of the side channel R");

  py::class_<World>(m, "World")
      .def(py::init<>())
      .def_readwrite("x", &World::x)
      .def_readwrite("y", &World::y)
      .def_readwrite("z", &World::z)
      .def_readwrite("reveal", &World::reveal);
  m.def("sample_world", &sample_world, py::arg("graph"), py::arg("model"), py::arg("seed"));
  m.def("world_to_json", [](const World& w) { return world_to_json(w).dump(); });
  m.def("world_from_json",
        [](const std::string& text) { return world_from_json(nlohmann::json::parse(text)); });

  py::class_<JointTable>(m, "JointTable")
      .def_readonly("ids", &JointTable::ids)
      .def_readonly("q", &JointTable::q)
      .def_readonly("probs", &JointTable::probs)
      .def("marginalize_to", &JointTable::marginalize_to, py::arg("position"));
  m.def(
      "posterior_joint",
      [](const FactorGraph& g, const ObservationModel& mo, const World& w,
         const std::vector<int>& ids) { return posterior_joint(g, mo, w, ids); },
      py::arg("graph"), py::arg("model"), py::arg("world"), py::arg("ids"));
  m.def(
      "posterior_marginals",
      [](const FactorGraph& g, const ObservationModel& mo, const World& w) {
        return ExactPosterior(g, mo, w).all_marginals();
      },
      py::arg("graph"), py::arg("model"), py::arg("world"));
  m.def(
      "tv",
      [](const std::vector<double>& p, const std::vector<double>& r) {
        return total_variation(p, r);
      },
      py::arg("p"), py::arg("r"));
  m.def(
      "factorization_gap",
      [](const FactorGraph& g, const ObservationModel& mo, const World& w,
         const std::vector<int>& ids) { return factorization_gap(g, mo, w, ids); },
      py::arg("graph"), py::arg("model"), py::arg("world"), py::arg("ids"));
  m.def("conditional_mi", &conditional_mi, py::arg("graph"), py::arg("model"),
        py::arg("world"), py::arg("i"), py::arg("j"));
  m.def("overlap_variance", &overlap_variance, py::arg("graph"), py::arg("model"),
        py::arg("world"), py::arg("xi"));
  m.def("posterior_entropy", &posterior_entropy, py::arg("graph"), py::arg("model"),
        py::arg("world"));
  m.def(
      "conditional_entropy_mc",
      [](const FactorGraph& g, const ObservationModel& mo, double theta, int n_worlds,
         std::uint64_t seed) {
        const McEstimate e = conditional_entropy_mc(g, mo, theta, n_worlds, seed);
        return py::make_tuple(e.estimate, e.std_error);
      },
      py::arg("graph"), py::arg("model"), py::arg("theta"), py::arg("n_worlds"),
      py::arg("seed"));

  py::class_<MessageSet>(m, "MessageSet")
      .def_readonly("var_to_fac", &MessageSet::var_to_fac)
      .def_readonly("fac_to_var", &MessageSet::fac_to_var);
  py::class_<BpResult>(m, "BpResult")
      .def_readonly("msgs", &BpResult::msgs)
      .def_readonly("converged", &BpResult::converged)
      .def_readonly("iters", &BpResult::iters)
      .def_readonly("residual", &BpResult::residual);
  m.def(
      "bp_run",
      [](const FactorGraph& g, const ObservationModel& mo, const World& w, double damping,
         double tol, int max_iter, const std::string& init) {
        BpOptions opts;
        opts.damping = damping;
        opts.tol = tol;
        opts.max_iter = max_iter;
        if (init == "uniform")
          opts.init = BpOptions::Init::uniform;
        else if (init == "prior")
          opts.init = BpOptions::Init::prior;
        else
          throw ValidationError("bp_run: init must be 'uniform' or 'prior'");
        return bp_run(g, mo, w, opts);
      },
      py::arg("graph"), py::arg("model"), py::arg("world"), py::arg("damping") = 0.0,
      py::arg("tol") = 1e-10, py::arg("max_iter") = 200, py::arg("init") = "prior");
  m.def("bp_marginal", &bp_marginal, py::arg("graph"), py::arg("model"), py::arg("world"),
        py::arg("msgs"), py::arg("i"));
  m.def("bp_all_marginals", &bp_all_marginals, py::arg("graph"), py::arg("model"),
        py::arg("world"), py::arg("msgs"));

  py::class_<LocalStar>(m, "LocalStar")
      .def_readonly("z", &LocalStar::z)
      .def_readonly("reveal", &LocalStar::reveal);
  m.def("make_local_star", &make_local_star, py::arg("graph"), py::arg("world"), py::arg("i"));
  m.def("local_update_F", &local_update_F, py::arg("model"), py::arg("star"),
        py::arg("incoming"));
  m.def(
      "cavity_marginals",
      [](const FactorGraph& g, const ObservationModel& mo, const World& w, int i,
         const std::string& method) {
        return cavity_marginals(
            g, mo, w, i, method == "bp" ? CavityMethod::bp : CavityMethod::oracle);
      },
      py::arg("graph"), py::arg("model"), py::arg("world"), py::arg("i"),
      py::arg("method") = "oracle");
  m.def(
      "boundary_factorized_marginal",
      [](const FactorGraph& g, const ObservationModel& mo, const World& w, int i, int t,
         const std::string& method) {
        return boundary_factorized_marginal(
            g, mo, w, i, t, method == "bp" ? CavityMethod::bp : CavityMethod::oracle);
      },
      py::arg("graph"), py::arg("model"), py::arg("world"), py::arg("i"), py::arg("t"),
      py::arg("method") = "oracle");

  py::class_<Population>(m, "Population")
      .def_readonly("truth", &Population::truth)
      .def_readonly("messages", &Population::messages)
      .def_readonly("gamma", &Population::gamma)
      .def_readonly("alpha", &Population::alpha)
      .def_readonly("theta", &Population::theta)
      .def_readonly("generation", &Population::generation)
      .def("size", &Population::size);
  py::class_<PopulationSummary>(m, "PopulationSummary")
      .def_readonly("mean_message", &PopulationSummary::mean_message)
      .def_readonly("mean_entropy", &PopulationSummary::mean_entropy)
      .def_readonly("error_proxy", &PopulationSummary::error_proxy)
      .def_readonly("histogram", &PopulationSummary::histogram);
  m.def("de_init", &de_init, py::arg("model"), py::arg("gamma"), py::arg("alpha"),
        py::arg("n_pop"), py::arg("seed"));
  m.def("de_step", &de_step, py::arg("population"), py::arg("model"), py::arg("seed"));
  m.def("population_stats", &population_stats, py::arg("population"));
  m.def("population_distance", &population_distance, py::arg("a"), py::arg("b"));
  m.def(
      "de_run",
      [](const ObservationModel& mo, double gamma, double alpha, int n_pop, int iters,
         std::uint64_t seed, bool stop_when_stationary) {
        DeRunOptions opts;
        opts.stop_when_stationary = stop_when_stationary;
        const DeRunResult res = de_run(mo, gamma, alpha, n_pop, iters, seed, opts);
        py::list history;
        for (const auto& h : res.history)
          history.append(py::make_tuple(h.generation, h.mean_entropy, h.error_proxy,
                                        h.ks_to_prev));
        return py::make_tuple(res.population, history, res.stationary_at);
      },
      py::arg("model"), py::arg("gamma"), py::arg("alpha"), py::arg("n_pop"),
      py::arg("iters"), py::arg("seed"), py::arg("stop_when_stationary") = false);

  m.def("run_experiment", &run_experiment_py, py::arg("config_json"),
        "Returns (csv_text, resolved_config_json)");
  m.def("mix_seed", &mix_seed, py::arg("seed"), py::arg("stream"));
}
