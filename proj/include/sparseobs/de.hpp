#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparseobs/dist.hpp"
#include "sparseobs/model.hpp"

namespace sparseobs {

/// Monte-Carlo representation of the message law: (true symbol, message)
/// pairs. Keeping the true symbols makes the coupling between observations
/// and incoming messages exact when resampling.
struct Population {
  std::vector<int> truth;
  std::vector<Marginal> messages;
  double gamma = 0.0;
  double alpha = 0.0;
  double theta = 0.0;
  int generation = 0;

  int size() const { return static_cast<int>(truth.size()); }
};

inline constexpr int kHistogramBins = 100;

struct PopulationSummary {
  Marginal mean_message;
  double mean_entropy = 0.0;
  /// Mean TV distance to the point mass at the true symbol.
  double error_proxy = 0.0;
  /// Per symbol: fixed 100-bin histogram of nu(xi) over [0,1], masses sum to 1.
  std::vector<std::vector<double>> histogram;
};

/// Generation-0 law: draw x ~ prior, z ~ R(.|x), reveal w.p. theta; the
/// message is the zero-factor posterior p * R^theta normalized.
Population de_init(const ObservationModel& model, double gamma, double alpha, int n_pop,
                   std::uint64_t seed);

/// One distributional update: fresh root symbol and observations, Poisson
/// (gamma*alpha) factors, Poisson(gamma) donor slots per factor, donors drawn
/// uniformly with replacement from the previous population.
Population de_step(const Population& pop, const ObservationModel& model, std::uint64_t seed);

PopulationSummary population_stats(const Population& pop);

/// Max over symbols of the two-sample KS distance between the laws of nu(xi).
double population_distance(const Population& a, const Population& b);

struct DeGeneration {
  int generation = 0;
  double mean_entropy = 0.0;
  double error_proxy = 0.0;
  double ks_to_prev = 0.0;
};

struct DeRunOptions {
  /// Declared stationary after `stationary_window` consecutive generations
  /// with ks_to_prev <= stationary_tol. tol < 0 picks 3/sqrt(N).
  double stationary_tol = -1.0;
  int stationary_window = 3;
  bool stop_when_stationary = false;
};

struct DeRunResult {
  Population population;
  std::vector<DeGeneration> history;  // entry 0 is the initial population
  int stationary_at = -1;             // first stationary generation, -1 if never
};

DeRunResult de_run(const ObservationModel& model, double gamma, double alpha, int n_pop,
                   int iters, std::uint64_t seed, const DeRunOptions& opts = {});

/// Snapshot CSV: x, nu_0, ..., nu_{q-1}.
std::string population_to_csv(const Population& pop);

/// History CSV: generation, mean_entropy, error_proxy, ks_to_prev.
std::string de_history_to_csv(const std::vector<DeGeneration>& history);

}  // namespace sparseobs
