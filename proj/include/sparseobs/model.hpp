#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparseobs/dist.hpp"
#include "sparseobs/graph.hpp"

#include "json.hpp"

namespace sparseobs {

/// Marks an unrevealed entry in World::reveal.
inline constexpr int kMasked = -1;

struct Prior {
  int q = 0;
  std::vector<double> probs;

  void validate() const;
  double entropy() const;  // nats
};

/// Permutation-symmetric likelihood table L[y | x_1..x_k]. Values are stored
/// once per input multiset (canonical sorted tuple), which enforces the
/// symmetry invariant structurally.
class DiscreteKernel {
 public:
  DiscreteKernel() = default;

  /// From a dense table, flat index y * q^k + row-major tuple. Checks row
  /// stochasticity and permutation symmetry (exhaustively for k <= 4, by
  /// random probes otherwise) before canonicalizing.
  static DiscreteKernel from_table(int arity, int q, int s,
                                   const std::vector<double>& table);

  /// From a generator evaluated on sorted tuples only; symmetric by
  /// construction. Row sums are still validated.
  static DiscreteKernel from_function(
      int arity, int q, int s,
      const std::function<double(int, std::span<const int>)>& fn);

  int arity() const { return arity_; }
  int q() const { return q_; }
  int s() const { return s_; }

  double value(int y, std::span<const int> xs) const;

  /// Likelihood row over outputs for a fixed input tuple.
  std::vector<double> row(std::span<const int> xs) const;

  /// All canonical (sorted) input tuples.
  const std::vector<std::vector<int>>& representatives() const { return reps_; }

  /// Dense table in from_table layout (outputs outermost).
  std::vector<double> dense_table() const;

 private:
  int rank_sorted(std::span<const int> sorted) const;

  int arity_ = 0;
  int q_ = 0;
  int s_ = 0;
  std::vector<double> table_;  // [rank * s + y]
  std::vector<std::vector<int>> reps_;
};

/// M-softness of a kernel: max over input tuples x, x1, x2 of
/// sum_y L(y|x1) L(y|x) / L(y|x2); infinity when the outputs are not mutually
/// absolutely continuous. Applies to the unperturbed kernels only.
double softness_constant(const DiscreteKernel& kernel);

/// Prior + side channel R + arity-indexed symmetric kernels Q^(k) + reveal
/// probability theta.
class ObservationModel {
 public:
  using QGenerator = std::function<DiscreteKernel(int)>;

  ObservationModel() = default;
  ObservationModel(Prior prior, DiscreteKernel r, std::map<int, DiscreteKernel> q_tables,
                   double theta, std::string name = "custom", bool non_soft_flag = false);
  ObservationModel(Prior prior, DiscreteKernel r, QGenerator q_family, int max_arity,
                   double theta, std::string name, bool non_soft_flag);

  const Prior& prior() const { return prior_; }
  const DiscreteKernel& R() const { return r_; }
  double theta() const { return theta_; }
  const std::string& name() const { return name_; }

  bool has_arity(int k) const { return q_.count(k) > 0; }
  const DiscreteKernel& Q(int k) const;  // throws ValidationError when missing
  std::vector<int> arities() const;

  /// Marked by builtins whose kernels contain exact zeros (mod2_storage, f=0,
  /// p=0). Bound-checking experiments refuse to run on flagged models.
  bool non_soft_flagged() const { return non_soft_flag_; }

  /// Max softness constant over R and Q^(1..max_arity); infinity if any kernel
  /// is not soft.
  double softness(int max_arity) const;

  ObservationModel with_theta(double theta) const;

  /// Re-checks all numeric invariants; returns the first violation.
  std::optional<std::string> validate() const;

  static ObservationModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  Prior prior_;
  DiscreteKernel r_;
  std::map<int, DiscreteKernel> q_;
  double theta_ = 0.0;
  std::string name_ = "custom";
  bool non_soft_flag_ = false;
  nlohmann::json builtin_desc_;   // set for builtin_model() results
  nlohmann::json q_family_desc_;  // set when Q came from a named kernel family
  friend ObservationModel builtin_model(const std::string&,
                                        const std::map<std::string, double>&);
};

/// Validates a model description (JSON form) and reports the first violated
/// constraint, with indices; nullopt when the description is well-formed.
std::optional<std::string> validate_model_json(const nlohmann::json& j);

/// Built-in families:
///   group_testing: Y = OR(inputs) xor Bernoulli(f)    params: prior_one, f, theta, [r]
///   parity_bsc:    Y = XOR(inputs) xor Bernoulli(p)   params: prior_one, p, theta, [r]
///   mod2_storage:  parity_bsc with p = 0 (non-soft, flagged)
/// `r` adds a BSC(r) side channel; without it R is the trivial one-output
/// kernel (no side information).
ObservationModel builtin_model(const std::string& name,
                               const std::map<std::string, double>& params);

/// A sampled hidden assignment with its observations. reveal[i] is x[i] or
/// kMasked.
struct World {
  std::vector<int> x;
  std::vector<int> y;
  std::vector<int> z;
  std::vector<int> reveal;
};

/// Draws x ~ prior, y_a ~ Q^(|da|), z_i ~ R, reveal_i = x_i w.p. theta. Each
/// field uses its own substream of `seed`, so worlds sampled at different
/// theta from the same seed share all randomness (common random numbers) and
/// differ only in the reveal mask.
World sample_world(const FactorGraph& g, const ObservationModel& model, std::uint64_t seed);

void check_world(const FactorGraph& g, const ObservationModel& model, const World& w);

/// Restricts a world to a surgery/induced subsystem.
World restrict_world(const World& w, const SurgeryResult& surgery);

/// Normalized p(x) * R(z|x) * [reveal compatible]; the local evidence entering
/// BP updates and posterior weights (the perturbed kernel R^theta up to a
/// constant factor).
Marginal local_evidence(const ObservationModel& model, int z, int reveal);

nlohmann::json world_to_json(const World& w);
World world_from_json(const nlohmann::json& j);

}  // namespace sparseobs
