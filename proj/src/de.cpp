#include "sparseobs/de.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sparseobs/bp.hpp"
#include "sparseobs/errors.hpp"
#include "sparseobs/rng.hpp"

namespace sparseobs {

Population de_init(const ObservationModel& model, double gamma, double alpha, int n_pop,
                   std::uint64_t seed) {
  if (n_pop < 1) throw ValidationError("de_init: population size must be >= 1");
  if (gamma < 0 || alpha < 0) throw ValidationError("de_init: negative ensemble parameter");
  if (auto err = model.validate()) throw ValidationError(*err);
  Population pop;
  pop.gamma = gamma;
  pop.alpha = alpha;
  pop.theta = model.theta();
  pop.truth.resize(n_pop);
  pop.messages.resize(n_pop);
  Rng rng(seed);
  const int q = model.prior().q;
  for (int e = 0; e < n_pop; ++e) {
    const int x = rng.categorical(model.prior().probs);
    const int in[1] = {x};
    const int z = rng.categorical(model.R().row(in));
    const int reveal = rng.bernoulli(model.theta()) ? x : kMasked;
    pop.truth[e] = x;
    pop.messages[e] = local_evidence(model, z, reveal);
    if (static_cast<int>(pop.messages[e].size()) != q)
      throw ValidationError("de_init: bad message size");
  }
  return pop;
}

Population de_step(const Population& pop, const ObservationModel& model, std::uint64_t seed) {
  if (pop.size() < 1) throw ValidationError("de_step: empty population");
  Population next;
  next.gamma = pop.gamma;
  next.alpha = pop.alpha;
  next.theta = model.theta();
  next.generation = pop.generation + 1;
  const int n_pop = pop.size();
  next.truth.resize(n_pop);
  next.messages.resize(n_pop);
  Rng rng(seed);
  for (int e = 0; e < n_pop; ++e) {
    const int x0 = rng.categorical(model.prior().probs);
    LocalStar star;
    std::map<int, Marginal> incoming;
    const int l = rng.poisson(pop.gamma * pop.alpha);
    int next_id = 0;
    for (int fi = 0; fi < l; ++fi) {
      const int k = rng.poisson(pop.gamma);
      LocalStar::StarFactor f;
      std::vector<int> xs{x0};
      for (int t = 0; t < k; ++t) {
        const int donor = rng.uniform_int(n_pop);
        const int id = next_id++;
        f.neighbors.push_back(id);
        incoming[id] = pop.messages[donor];
        xs.push_back(pop.truth[donor]);
      }
      const auto probs = model.Q(static_cast<int>(xs.size())).row(xs);
      f.y = rng.categorical(probs);
      star.factors.push_back(std::move(f));
    }
    const int in[1] = {x0};
    star.z = rng.categorical(model.R().row(in));
    star.reveal = rng.bernoulli(model.theta()) ? x0 : kMasked;
    next.truth[e] = x0;
    next.messages[e] = local_update_F(model, star, incoming);
  }
  return next;
}

PopulationSummary population_stats(const Population& pop) {
  if (pop.size() < 1) throw ValidationError("population_stats: empty population");
  const int q = static_cast<int>(pop.messages.front().size());
  PopulationSummary s;
  s.mean_message.assign(q, 0.0);
  s.histogram.assign(q, std::vector<double>(kHistogramBins, 0.0));
  const double inv = 1.0 / pop.size();
  for (int e = 0; e < pop.size(); ++e) {
    const Marginal& nu = pop.messages[e];
    s.mean_entropy += dist_entropy(nu) * inv;
    s.error_proxy += (1.0 - nu[pop.truth[e]]) * inv;  // tv to the point mass at truth
    for (int xi = 0; xi < q; ++xi) {
      s.mean_message[xi] += nu[xi] * inv;
      int bin = static_cast<int>(nu[xi] * kHistogramBins);
      if (bin >= kHistogramBins) bin = kHistogramBins - 1;
      s.histogram[xi][bin] += inv;
    }
  }
  return s;
}

double population_distance(const Population& a, const Population& b) {
  if (a.size() < 1 || b.size() < 1)
    throw ValidationError("population_distance: empty population");
  const int q = static_cast<int>(a.messages.front().size());
  if (q != static_cast<int>(b.messages.front().size()))
    throw ValidationError("population_distance: alphabet mismatch");
  double d = 0.0;
  std::vector<double> xs(a.size()), ys(b.size());
  for (int xi = 0; xi < q; ++xi) {
    for (int e = 0; e < a.size(); ++e) xs[e] = a.messages[e][xi];
    for (int e = 0; e < b.size(); ++e) ys[e] = b.messages[e][xi];
    d = std::max(d, ks_distance(xs, ys));
  }
  return d;
}

DeRunResult de_run(const ObservationModel& model, double gamma, double alpha, int n_pop,
                   int iters, std::uint64_t seed, const DeRunOptions& opts) {
  if (iters < 0) throw ValidationError("de_run: negative iteration count");
  const double tol =
      opts.stationary_tol >= 0 ? opts.stationary_tol : 3.0 / std::sqrt(double(n_pop));
  DeRunResult out;
  out.population = de_init(model, gamma, alpha, n_pop, mix_seed(seed, 0));
  PopulationSummary s0 = population_stats(out.population);
  out.history.push_back({0, s0.mean_entropy, s0.error_proxy, 0.0});
  int streak = 0;
  for (int it = 1; it <= iters; ++it) {
    Population next = de_step(out.population, model, mix_seed(seed, it));
    const double ks = population_distance(next, out.population);
    out.population = std::move(next);
    const PopulationSummary s = population_stats(out.population);
    out.history.push_back({it, s.mean_entropy, s.error_proxy, ks});
    streak = ks <= tol ? streak + 1 : 0;
    if (streak >= opts.stationary_window && out.stationary_at < 0) {
      out.stationary_at = it - opts.stationary_window + 1;  // first generation of the streak
      if (opts.stop_when_stationary) break;
    }
  }
  return out;
}

std::string population_to_csv(const Population& pop) {
  std::ostringstream os;
  const int q = pop.size() ? static_cast<int>(pop.messages.front().size()) : 0;
  os << "x";
  for (int xi = 0; xi < q; ++xi) os << ",nu_" << xi;
  os << '\n';
  char buf[64];
  for (int e = 0; e < pop.size(); ++e) {
    os << pop.truth[e];
    for (int xi = 0; xi < q; ++xi) {
      std::snprintf(buf, sizeof(buf), "%.17g", pop.messages[e][xi]);
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string de_history_to_csv(const std::vector<DeGeneration>& history) {
  std::ostringstream os;
  os << "generation,mean_entropy,error_proxy,ks_to_prev\n";
  char buf[64];
  for (const auto& h : history) {
    os << h.generation;
    std::snprintf(buf, sizeof(buf), "%.17g", h.mean_entropy);
    os << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", h.error_proxy);
    os << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", h.ks_to_prev);
    os << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace sparseobs
