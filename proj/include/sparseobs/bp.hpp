#pragma once

#include <map>
#include <string>
#include <vector>

#include "sparseobs/dist.hpp"
#include "sparseobs/graph.hpp"
#include "sparseobs/model.hpp"

namespace sparseobs {

/// Edge enumeration shared by everything message-indexed: edge e = (factor a,
/// slot into fac_neighbors(a)), flattened factor-major.
class EdgeIndex {
 public:
  explicit EdgeIndex(const FactorGraph& g);

  int num_edges() const { return static_cast<int>(edge_var_.size()); }
  int edge_of(int a, int slot) const { return fac_offset_[a] + slot; }
  int var_of(int e) const { return edge_var_[e]; }
  int fac_of(int e) const { return edge_fac_[e]; }
  const std::vector<int>& edges_at_var(int i) const { return var_edges_[i]; }
  int fac_offset(int a) const { return fac_offset_[a]; }

 private:
  std::vector<int> fac_offset_;
  std::vector<int> edge_var_;
  std::vector<int> edge_fac_;
  std::vector<std::vector<int>> var_edges_;
};

/// One normalized message per edge per direction.
struct MessageSet {
  std::vector<Marginal> var_to_fac;
  std::vector<Marginal> fac_to_var;
};

struct BpOptions {
  enum class Init { uniform, prior, given };
  Init init = Init::prior;
  double damping = 0.0;  // new = (1-damping)*update + damping*old
  double tol = 1e-10;
  int max_iter = 200;
};

struct BpResult {
  MessageSet msgs;
  bool converged = false;
  int iters = 0;
  double residual = 0.0;
};

/// Synchronous (flooding) sum-product sweeps until the max edge TV change
/// drops below tol. Throws ZeroNormalizerError (with the edge) when an update
/// normalizer vanishes.
BpResult bp_run(const FactorGraph& g, const ObservationModel& model, const World& w,
                const BpOptions& opts = {}, const MessageSet* init_msgs = nullptr);

Marginal bp_marginal(const FactorGraph& g, const ObservationModel& model, const World& w,
                     const MessageSet& msgs, int i);

std::vector<Marginal> bp_all_marginals(const FactorGraph& g, const ObservationModel& model,
                                       const World& w, const MessageSet& msgs);

/// Debug CSV dump: direction, var, fac, symbol, value.
std::string dump_messages_csv(const FactorGraph& g, const MessageSet& msgs);

/// The local input of the one-step marginal map F: the center's observations
/// plus, per adjacent factor, its outcome and the neighbor ids behind each
/// slot. The same arithmetic serves the finite-n map and the Galton-Watson
/// (infinite) map.
struct LocalStar {
  struct StarFactor {
    int y = 0;
    std::vector<int> neighbors;  // ids key into the incoming map; arity = size + 1
  };
  int z = 0;
  int reveal = kMasked;
  std::vector<StarFactor> factors;
};

LocalStar make_local_star(const FactorGraph& g, const World& w, int i);

/// F applied to incoming neighbor marginals: the marginal of the center in the
/// star subsystem with neighbors biased by `incoming`. A neighbor id shared by
/// several factors is summed jointly (one summation variable per distinct id),
/// which reduces to the per-factor product form when ids are distinct.
Marginal local_update_F(const ObservationModel& model, const LocalStar& star,
                        const std::map<int, Marginal>& incoming);

enum class CavityMethod { oracle, bp };

/// Marginals of i's neighbors in the system with i taken out (i and every
/// factor touching i removed), keyed by original variable id.
std::map<int, Marginal> cavity_marginals(const FactorGraph& g, const ObservationModel& model,
                                         const World& w, int i, CavityMethod method,
                                         const BpOptions& bp_opts = {});

/// Boundary-factorized approximation of the marginal at i: exact summation
/// over B(i,t) with the boundary law replaced by the product of single-site
/// marginals computed on the complement system. t = 1 coincides with
/// local_update_F over cavity_marginals; B covering the whole graph gives the
/// exact marginal.
Marginal boundary_factorized_marginal(const FactorGraph& g, const ObservationModel& model,
                                      const World& w, int i, int t, CavityMethod method,
                                      const BpOptions& bp_opts = {});

}  // namespace sparseobs
