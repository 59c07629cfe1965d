#include "sparseobs/bp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sparseobs/errors.hpp"
#include "sparseobs/oracle.hpp"

namespace sparseobs {

EdgeIndex::EdgeIndex(const FactorGraph& g) {
  fac_offset_.resize(g.m() + 1, 0);
  var_edges_.resize(g.n());
  for (int a = 0; a < g.m(); ++a) {
    fac_offset_[a] = static_cast<int>(edge_var_.size());
    for (int v : g.fac_neighbors(a)) {
      var_edges_[v].push_back(static_cast<int>(edge_var_.size()));
      edge_var_.push_back(v);
      edge_fac_.push_back(a);
    }
  }
  fac_offset_[g.m()] = static_cast<int>(edge_var_.size());
}

namespace {

Marginal raw_evidence(const ObservationModel& model, int z, int reveal) {
  const int q = model.prior().q;
  Marginal e(q);
  for (int xi = 0; xi < q; ++xi) {
    const int in[1] = {xi};
    e[xi] = model.prior().probs[xi] * model.R().value(z, in);
    if (reveal != kMasked && reveal != xi) e[xi] = 0.0;
  }
  return e;
}

}  // namespace

BpResult bp_run(const FactorGraph& g, const ObservationModel& model, const World& w,
                const BpOptions& opts, const MessageSet* init_msgs) {
  check_world(g, model, w);
  if (!(opts.damping >= 0.0 && opts.damping < 1.0))
    throw ValidationError("bp_run: damping must be in [0,1)");
  if (opts.tol < 0) throw ValidationError("bp_run: negative tolerance");
  const EdgeIndex idx(g);
  const int q = model.prior().q;
  const int n_edges = idx.num_edges();

  std::vector<Marginal> ev(g.n());
  for (int i = 0; i < g.n(); ++i) {
    ev[i] = raw_evidence(model, w.z[i], w.reveal[i]);
    if (normalize(ev[i]) <= 0)
      throw ZeroNormalizerError("bp_run: local evidence vanished at variable " +
                                    std::to_string(i),
                                i, -1);
  }

  MessageSet cur;
  cur.var_to_fac.assign(n_edges, uniform_dist(q));
  cur.fac_to_var.assign(n_edges, uniform_dist(q));
  if (opts.init == BpOptions::Init::prior) {
    for (int e = 0; e < n_edges; ++e) cur.var_to_fac[e] = ev[idx.var_of(e)];
  } else if (opts.init == BpOptions::Init::given) {
    if (!init_msgs || static_cast<int>(init_msgs->var_to_fac.size()) != n_edges ||
        static_cast<int>(init_msgs->fac_to_var.size()) != n_edges)
      throw ValidationError("bp_run: init=given requires a full MessageSet");
    cur = *init_msgs;
  }

  BpResult result;
  const double lambda = opts.damping;
  std::vector<int> tuple;
  int iter = 0;
  double residual = 0.0;
  for (iter = 1; iter <= std::max(opts.max_iter, 1); ++iter) {
    residual = 0.0;
    MessageSet next = cur;

    // Factor-to-variable updates from the current snapshot.
    for (int a = 0; a < g.m(); ++a) {
      const auto& nbrs = g.fac_neighbors(a);
      const int k = static_cast<int>(nbrs.size());
      if (k == 0) continue;
      const DiscreteKernel& kern = model.Q(k);
      for (int s = 0; s < k; ++s) {
        const int e = idx.edge_of(a, s);
        const int i = nbrs[s];
        Marginal upd(q, 0.0);
        // Sum over the other slots; the target symbol sits in tuple[0]
        // (kernel symmetry makes positions interchangeable).
        tuple.assign(k, 0);
        std::vector<int> others(k - 1, 0);
        while (true) {
          double pr = 1.0;
          for (int t = 0, oi = 0; t < k; ++t) {
            if (t == s) continue;
            pr *= cur.var_to_fac[idx.edge_of(a, t)][others[oi]];
            tuple[1 + oi] = others[oi];
            ++oi;
          }
          if (pr > 0)
            for (int xi = 0; xi < q; ++xi) {
              tuple[0] = xi;
              upd[xi] += kern.value(w.y[a], tuple) * pr;
            }
          int t = k - 2;
          for (; t >= 0; --t) {
            if (++others[t] < q) break;
            others[t] = 0;
          }
          if (t < 0) break;
        }
        if (normalize(upd) <= 0)
          throw ZeroNormalizerError("bp_run: zero normalizer on factor->variable edge (var " +
                                        std::to_string(i) + ", fac " + std::to_string(a) + ")",
                                    i, a);
        if (lambda > 0)
          for (int xi = 0; xi < q; ++xi)
            upd[xi] = (1 - lambda) * upd[xi] + lambda * cur.fac_to_var[e][xi];
        residual = std::max(residual, total_variation(upd, cur.fac_to_var[e]));
        next.fac_to_var[e] = std::move(upd);
      }
    }

    // Variable-to-factor updates from the fresh factor messages.
    for (int i = 0; i < g.n(); ++i) {
      const auto& edges = idx.edges_at_var(i);
      for (int e : edges) {
        Marginal upd = ev[i];
        for (int e2 : edges) {
          if (e2 == e) continue;
          for (int xi = 0; xi < q; ++xi) upd[xi] *= next.fac_to_var[e2][xi];
        }
        if (normalize(upd) <= 0)
          throw ZeroNormalizerError("bp_run: zero normalizer on variable->factor edge (var " +
                                        std::to_string(i) + ", fac " +
                                        std::to_string(idx.fac_of(e)) + ")",
                                    i, idx.fac_of(e));
        if (lambda > 0)
          for (int xi = 0; xi < q; ++xi)
            upd[xi] = (1 - lambda) * upd[xi] + lambda * cur.var_to_fac[e][xi];
        residual = std::max(residual, total_variation(upd, cur.var_to_fac[e]));
        next.var_to_fac[e] = std::move(upd);
      }
    }

    cur = std::move(next);
    if (residual <= opts.tol) {
      result.converged = true;
      break;
    }
  }
  result.msgs = std::move(cur);
  result.iters = std::min(iter, std::max(opts.max_iter, 1));
  result.residual = residual;
  return result;
}

Marginal bp_marginal(const FactorGraph& g, const ObservationModel& model, const World& w,
                     const MessageSet& msgs, int i) {
  if (i < 0 || i >= g.n()) throw ValidationError("bp_marginal: variable id out of range");
  const EdgeIndex idx(g);
  const int q = model.prior().q;
  Marginal out = raw_evidence(model, w.z[i], w.reveal[i]);
  for (int e : idx.edges_at_var(i)) {
    if (e >= static_cast<int>(msgs.fac_to_var.size()))
      throw ValidationError("bp_marginal: message set does not cover variable " +
                            std::to_string(i));
    for (int xi = 0; xi < q; ++xi) out[xi] *= msgs.fac_to_var[e][xi];
  }
  if (normalize(out) <= 0)
    throw ZeroNormalizerError("bp_marginal: zero normalizer at variable " + std::to_string(i),
                              i, -1);
  return out;
}

std::vector<Marginal> bp_all_marginals(const FactorGraph& g, const ObservationModel& model,
                                       const World& w, const MessageSet& msgs) {
  const EdgeIndex idx(g);
  const int q = model.prior().q;
  std::vector<Marginal> out(g.n());
  for (int i = 0; i < g.n(); ++i) {
    Marginal m = raw_evidence(model, w.z[i], w.reveal[i]);
    for (int e : idx.edges_at_var(i))
      for (int xi = 0; xi < q; ++xi) m[xi] *= msgs.fac_to_var[e][xi];
    if (normalize(m) <= 0)
      throw ZeroNormalizerError("bp_all_marginals: zero normalizer at variable " +
                                    std::to_string(i),
                                i, -1);
    out[i] = std::move(m);
  }
  return out;
}

std::string dump_messages_csv(const FactorGraph& g, const MessageSet& msgs) {
  const EdgeIndex idx(g);
  std::ostringstream os;
  os << "direction,var,fac,symbol,value\n";
  char buf[64];
  auto emit = [&](const char* dir, int e, const Marginal& m) {
    for (std::size_t s = 0; s < m.size(); ++s) {
      std::snprintf(buf, sizeof(buf), "%.17g", m[s]);
      os << dir << ',' << idx.var_of(e) << ',' << idx.fac_of(e) << ',' << s << ',' << buf
         << '\n';
    }
  };
  for (int e = 0; e < idx.num_edges(); ++e) emit("v2f", e, msgs.var_to_fac[e]);
  for (int e = 0; e < idx.num_edges(); ++e) emit("f2v", e, msgs.fac_to_var[e]);
  return os.str();
}

LocalStar make_local_star(const FactorGraph& g, const World& w, int i) {
  if (i < 0 || i >= g.n()) throw ValidationError("make_local_star: variable id out of range");
  LocalStar star;
  star.z = w.z[i];
  star.reveal = w.reveal[i];
  for (int a : g.var_neighbors(i)) {
    LocalStar::StarFactor f;
    f.y = w.y[a];
    for (int j : g.fac_neighbors(a))
      if (j != i) f.neighbors.push_back(j);
    star.factors.push_back(std::move(f));
  }
  return star;
}

Marginal local_update_F(const ObservationModel& model, const LocalStar& star,
                        const std::map<int, Marginal>& incoming) {
  const int q = model.prior().q;
  std::vector<int> ids;
  for (const auto& f : star.factors)
    ids.insert(ids.end(), f.neighbors.begin(), f.neighbors.end());
  std::sort(ids.begin(), ids.end());
  const bool repeated = std::adjacent_find(ids.begin(), ids.end()) != ids.end();
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids) {
    auto it = incoming.find(id);
    if (it == incoming.end())
      throw ValidationError("local_update_F: missing incoming marginal for neighbor " +
                            std::to_string(id));
    if (static_cast<int>(it->second.size()) != q)
      throw ValidationError("local_update_F: incoming marginal has wrong alphabet");
  }

  Marginal out = raw_evidence(model, star.z, star.reveal);
  std::vector<int> tuple;

  if (!repeated) {
    // Neighbors all distinct: the joint sum factorizes per factor.
    for (const auto& f : star.factors) {
      const int k = static_cast<int>(f.neighbors.size()) + 1;
      const DiscreteKernel& kern = model.Q(k);
      Marginal fac_term(q, 0.0);
      tuple.assign(k, 0);
      std::vector<int> others(k - 1, 0);
      while (true) {
        double pr = 1.0;
        for (int t = 0; t < k - 1; ++t) {
          pr *= incoming.at(f.neighbors[t])[others[t]];
          tuple[1 + t] = others[t];
        }
        if (pr > 0)
          for (int xc = 0; xc < q; ++xc) {
            tuple[0] = xc;
            fac_term[xc] += kern.value(f.y, tuple) * pr;
          }
        int t = k - 2;
        for (; t >= 0; --t) {
          if (++others[t] < q) break;
          others[t] = 0;
        }
        if (t < 0) break;
      }
      for (int xc = 0; xc < q; ++xc) out[xc] *= fac_term[xc];
    }
  } else {
    // A neighbor shared between factors gets a single summation variable.
    const int r = static_cast<int>(ids.size());
    if (r * std::log2(double(q)) > 22.0)
      throw InfeasibleError("local_update_F: joint star sum too large");
    std::vector<int> assign(r, 0);
    Marginal acc(q, 0.0);
    while (true) {
      double pr = 1.0;
      for (int t = 0; t < r; ++t) pr *= incoming.at(ids[t])[assign[t]];
      if (pr > 0) {
        auto value_of = [&](int id) {
          const int pos =
              static_cast<int>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
          return assign[pos];
        };
        for (int xc = 0; xc < q; ++xc) {
          double wgt = pr;
          for (const auto& f : star.factors) {
            tuple.clear();
            tuple.push_back(xc);
            for (int id : f.neighbors) tuple.push_back(value_of(id));
            wgt *= model.Q(static_cast<int>(tuple.size())).value(f.y, tuple);
            if (wgt == 0) break;
          }
          acc[xc] += wgt;
        }
      }
      int t = r - 1;
      for (; t >= 0; --t) {
        if (++assign[t] < q) break;
        assign[t] = 0;
      }
      if (t < 0) break;
    }
    for (int xc = 0; xc < q; ++xc) out[xc] *= acc[xc];
  }

  if (normalize(out) <= 0)
    throw ZeroNormalizerError("local_update_F: zero normalizer at the star center", -1, -1);
  return out;
}

std::map<int, Marginal> cavity_marginals(const FactorGraph& g, const ObservationModel& model,
                                         const World& w, int i, CavityMethod method,
                                         const BpOptions& bp_opts) {
  if (i < 0 || i >= g.n())
    throw ValidationError("cavity_marginals: variable id out of range");
  std::vector<int> targets;
  for (int a : g.var_neighbors(i))
    for (int j : g.fac_neighbors(a))
      if (j != i) targets.push_back(j);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  std::map<int, Marginal> out;
  if (targets.empty()) return out;

  const SurgeryResult surgery = graph_surgery(g, i, std::nullopt);
  const World sw = restrict_world(w, surgery);
  if (method == CavityMethod::oracle) {
    const ExactPosterior ep(surgery.graph, model, sw);
    const std::vector<Marginal> marg = ep.all_marginals();
    for (int j : targets) out[j] = marg[surgery.var_map[j]];
  } else {
    const BpResult res = bp_run(surgery.graph, model, sw, bp_opts);
    for (int j : targets)
      out[j] = bp_marginal(surgery.graph, model, sw, res.msgs, surgery.var_map[j]);
  }
  return out;
}

Marginal boundary_factorized_marginal(const FactorGraph& g, const ObservationModel& model,
                                      const World& w, int i, int t, CavityMethod method,
                                      const BpOptions& bp_opts) {
  if (t < 1) throw ValidationError("boundary_factorized_marginal: t must be >= 1");
  check_world(g, model, w);
  const int q = model.prior().q;
  const Neighborhood nb = neighborhood(g, i, t);
  const int b_size = static_cast<int>(nb.vars.size());
  if (b_size * std::log2(double(q)) > 24.0)
    throw InfeasibleError("boundary_factorized_marginal: interior sum too large");

  std::vector<char> in_boundary(g.n(), 0);
  for (int j : nb.boundary) in_boundary[j] = 1;

  // Boundary prior: single-site marginals on the complement system (variables
  // at distance >= t, factors fully inside it).
  std::map<int, Marginal> beta;
  if (!nb.boundary.empty()) {
    const std::vector<int> dist = distances_from(g, i);
    std::vector<int> far_vars;
    for (int v = 0; v < g.n(); ++v)
      if (dist[v] < 0 || dist[v] >= t) far_vars.push_back(v);
    const SurgeryResult sub = induced_subsystem(g, far_vars);
    const World sw = restrict_world(w, sub);
    if (method == CavityMethod::oracle) {
      const ExactPosterior ep(sub.graph, model, sw);
      const std::vector<Marginal> marg = ep.all_marginals();
      for (int j : nb.boundary) beta[j] = marg[sub.var_map[j]];
    } else {
      const BpResult res = bp_run(sub.graph, model, sw, bp_opts);
      for (int j : nb.boundary)
        beta[j] = bp_marginal(sub.graph, model, sw, res.msgs, sub.var_map[j]);
    }
  }

  // Interior weight: priors and side evidence for B \ D, observations of the
  // factors inside B that are not entirely on the boundary.
  std::vector<int> interior_facs;
  for (int a : nb.facs) {
    bool all_boundary = true;
    for (int v : g.fac_neighbors(a))
      if (!in_boundary[v]) {
        all_boundary = false;
        break;
      }
    if (!all_boundary) interior_facs.push_back(a);
  }

  std::vector<int> pos(g.n(), -1);
  for (int p = 0; p < b_size; ++p) pos[nb.vars[p]] = p;
  std::vector<Marginal> site(b_size);
  for (int p = 0; p < b_size; ++p) {
    const int v = nb.vars[p];
    site[p] = in_boundary[v] ? beta.at(v) : raw_evidence(model, w.z[v], w.reveal[v]);
  }

  Marginal out(q, 0.0);
  std::vector<int> x(b_size, 0);
  std::vector<int> tuple;
  const int center_pos = pos[i];
  while (true) {
    double wgt = 1.0;
    for (int p = 0; p < b_size; ++p) {
      wgt *= site[p][x[p]];
      if (wgt == 0) break;
    }
    if (wgt > 0) {
      for (int a : interior_facs) {
        tuple.clear();
        for (int v : g.fac_neighbors(a)) tuple.push_back(x[pos[v]]);
        wgt *= model.Q(static_cast<int>(tuple.size())).value(w.y[a], tuple);
        if (wgt == 0) break;
      }
      out[x[center_pos]] += wgt;
    }
    int p = b_size - 1;
    for (; p >= 0; --p) {
      if (++x[p] < q) break;
      x[p] = 0;
    }
    if (p < 0) break;
  }
  if (normalize(out) <= 0)
    throw ZeroNormalizerError("boundary_factorized_marginal: zero normalizer at variable " +
                                  std::to_string(i),
                              i, -1);
  return out;
}

}  // namespace sparseobs
