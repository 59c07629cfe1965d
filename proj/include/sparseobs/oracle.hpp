#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sparseobs/dist.hpp"
#include "sparseobs/graph.hpp"
#include "sparseobs/model.hpp"

namespace sparseobs {

/// Exact conditional law of X_U given all observations, U in the given order
/// (first id outermost in the flat index).
struct JointTable {
  std::vector<int> ids;
  int q = 0;
  std::vector<double> probs;  // size q^|ids|

  double at(std::span<const int> xs) const;
  Marginal marginalize_to(int position) const;
};

/// Brute-force posterior over all q^n assignments, streamed in log space with
/// a single max-subtraction (no q^n storage). Ground truth for everything else;
/// deliberately does no graph-structure speedups.
class ExactPosterior {
 public:
  /// Throws InfeasibleError beyond q^n = 2^26, ImpossibleWorldError when the
  /// world has zero probability.
  ExactPosterior(const FactorGraph& g, const ObservationModel& model, const World& w);

  JointTable joint(std::span<const int> ids) const;
  Marginal marginal(int i) const;
  std::vector<Marginal> all_marginals() const;

  /// Pair law P{X_i = xi, X_j = xj | obs} for all ordered pairs, flattened as
  /// [((i*n + j)*q + xi)*q + xj]. Diagonal blocks hold the single marginal on
  /// their diagonal.
  std::vector<double> all_pair_joints() const;

  /// Entropy of the full posterior, nats.
  double entropy() const;

  int n() const { return n_; }
  int q() const { return q_; }

 private:
  template <class Visit>
  void enumerate(Visit&& visit) const;  // visit(config, log_weight)

  struct FacTable {
    std::vector<int> vars;
    std::vector<double> logq;  // dense over the factor's own config space
  };

  int n_ = 0;
  int q_ = 0;
  std::vector<std::vector<double>> log_evidence_;  // [i][xi], -inf allowed
  std::vector<FacTable> facs_;
  double max_logw_ = 0.0;
};

JointTable posterior_joint(const FactorGraph& g, const ObservationModel& model,
                           const World& w, std::span<const int> ids);

/// tv(joint law of ids, product of their single-variable laws).
double factorization_gap(const FactorGraph& g, const ObservationModel& model,
                         const World& w, std::span<const int> ids);

/// I(X_i; X_j | observations) in nats; for i == j returns the conditional
/// entropy H(X_i | observations) (the diagonal convention of the pair sums).
double conditional_mi(const FactorGraph& g, const ObservationModel& model, const World& w,
                      int i, int j);

/// Var(Q(xi) | Y, Z(theta)) in closed form:
/// (1/n^2) sum_{i,j} (P{X_i=xi, X_j=xi} - P{X_i=xi} P{X_j=xi})^2.
double overlap_variance(const FactorGraph& g, const ObservationModel& model, const World& w,
                        int xi);

/// Entropy of the exact posterior of one world, nats.
double posterior_entropy(const FactorGraph& g, const ObservationModel& model, const World& w);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo H(X | Y, Z(theta)) over sampled worlds. World w uses seed
/// mix_seed(seed, w); thanks to the reveal substream in sample_world, calls at
/// different theta with the same seed share all randomness, making finite
/// differences in theta common-random-number estimates.
McEstimate conditional_entropy_mc(const FactorGraph& g, const ObservationModel& model,
                                  double theta, int n_worlds, std::uint64_t seed);

}  // namespace sparseobs
