#include "sparseobs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sparseobs/errors.hpp"
#include "sparseobs/rng.hpp"
#include "sparseobs/stats.hpp"

namespace sparseobs {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kMaxConfigs = std::uint64_t{1} << 26;
}  // namespace

double JointTable::at(std::span<const int> xs) const {
  if (xs.size() != ids.size()) throw ValidationError("JointTable::at: arity mismatch");
  std::size_t idx = 0;
  for (int v : xs) {
    if (v < 0 || v >= q) throw ValidationError("JointTable::at: symbol out of range");
    idx = idx * q + v;
  }
  return probs[idx];
}

Marginal JointTable::marginalize_to(int position) const {
  if (position < 0 || position >= static_cast<int>(ids.size()))
    throw ValidationError("JointTable::marginalize_to: bad position");
  Marginal out(q, 0.0);
  std::size_t stride = 1;
  for (int j = static_cast<int>(ids.size()) - 1; j > position; --j) stride *= q;
  for (std::size_t idx = 0; idx < probs.size(); ++idx)
    out[(idx / stride) % q] += probs[idx];
  return out;
}

ExactPosterior::ExactPosterior(const FactorGraph& g, const ObservationModel& model,
                               const World& w)
    : n_(g.n()), q_(model.prior().q) {
  check_world(g, model, w);
  const double bits = n_ * std::log2(double(q_));
  if (bits > 26.0 + 1e-9)
    throw InfeasibleError("exact posterior: q^n exceeds 2^26 configurations");

  log_evidence_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    log_evidence_[i].resize(q_);
    for (int xi = 0; xi < q_; ++xi) {
      const int in[1] = {xi};
      double v = model.prior().probs[xi] * model.R().value(w.z[i], in);
      if (w.reveal[i] != kMasked && w.reveal[i] != xi) v = 0.0;
      log_evidence_[i][xi] = v > 0 ? std::log(v) : kNegInf;
    }
  }

  // Per-factor dense log tables over the factor's own configuration space, so
  // the q^n sweep avoids kernel lookups (and their tuple sorts) entirely.
  for (int a = 0; a < g.m(); ++a) {
    const auto& nbrs = g.fac_neighbors(a);
    if (nbrs.empty()) continue;  // constant outcome carries no weight
    const int k = static_cast<int>(nbrs.size());
    const DiscreteKernel& kern = model.Q(k);
    FacTable ft;
    ft.vars = nbrs;
    std::size_t count = 1;
    for (int j = 0; j < k; ++j) count *= q_;
    ft.logq.resize(count);
    std::vector<int> tuple(k, 0);
    for (std::size_t c = 0;; ++c) {
      const double v = kern.value(w.y[a], tuple);
      ft.logq[c] = v > 0 ? std::log(v) : kNegInf;
      if (c + 1 == count) break;
      for (int j = k - 1; j >= 0; --j) {
        if (++tuple[j] < q_) break;
        tuple[j] = 0;
      }
    }
    facs_.push_back(std::move(ft));
  }

  max_logw_ = kNegInf;
  enumerate([&](std::span<const int>, double lw) {
    if (lw > max_logw_) max_logw_ = lw;
  });
  if (max_logw_ == kNegInf)
    throw ImpossibleWorldError("exact posterior: world has zero probability");
}

template <class Visit>
void ExactPosterior::enumerate(Visit&& visit) const {
  std::vector<int> x(n_, 0);
  std::uint64_t total = 1;
  for (int i = 0; i < n_; ++i) total *= q_;
  for (std::uint64_t c = 0;; ++c) {
    double lw = 0.0;
    for (int i = 0; i < n_; ++i) lw += log_evidence_[i][x[i]];
    if (lw != kNegInf) {
      for (const FacTable& ft : facs_) {
        std::size_t idx = 0;
        for (int v : ft.vars) idx = idx * q_ + x[v];
        lw += ft.logq[idx];
        if (lw == kNegInf) break;
      }
    }
    visit(std::span<const int>(x), lw);
    if (c + 1 == total) break;
    for (int i = n_ - 1; i >= 0; --i) {
      if (++x[i] < q_) break;
      x[i] = 0;
    }
  }
}

JointTable ExactPosterior::joint(std::span<const int> ids) const {
  for (int i : ids)
    if (i < 0 || i >= n_) throw ValidationError("posterior_joint: variable id out of range");
  std::uint64_t bins = 1;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    bins *= q_;
    if (bins > kMaxConfigs) throw InfeasibleError("posterior_joint: target table too large");
  }
  JointTable out;
  out.ids.assign(ids.begin(), ids.end());
  out.q = q_;
  out.probs.assign(bins, 0.0);
  enumerate([&](std::span<const int> x, double lw) {
    if (lw == kNegInf) return;
    std::size_t idx = 0;
    for (int id : ids) idx = idx * q_ + x[id];
    out.probs[idx] += std::exp(lw - max_logw_);
  });
  normalize(out.probs);
  return out;
}

Marginal ExactPosterior::marginal(int i) const {
  const int ids[1] = {i};
  return joint(ids).probs;
}

std::vector<Marginal> ExactPosterior::all_marginals() const {
  std::vector<Marginal> out(n_, Marginal(q_, 0.0));
  enumerate([&](std::span<const int> x, double lw) {
    if (lw == kNegInf) return;
    const double wgt = std::exp(lw - max_logw_);
    for (int i = 0; i < n_; ++i) out[i][x[i]] += wgt;
  });
  for (auto& m : out) normalize(m);
  return out;
}

std::vector<double> ExactPosterior::all_pair_joints() const {
  const std::size_t qq = static_cast<std::size_t>(q_) * q_;
  std::vector<double> out(static_cast<std::size_t>(n_) * n_ * qq, 0.0);
  double total = 0.0;
  enumerate([&](std::span<const int> x, double lw) {
    if (lw == kNegInf) return;
    const double wgt = std::exp(lw - max_logw_);
    total += wgt;
    for (int i = 0; i < n_; ++i) {
      const std::size_t row = static_cast<std::size_t>(i) * n_;
      const int xi = x[i];
      for (int j = 0; j < n_; ++j)
        out[(row + j) * qq + xi * q_ + x[j]] += wgt;
    }
  });
  for (double& v : out) v /= total;
  return out;
}

double ExactPosterior::entropy() const {
  double s0 = 0.0, s1 = 0.0;
  enumerate([&](std::span<const int>, double lw) {
    if (lw == kNegInf) return;
    const double wgt = std::exp(lw - max_logw_);
    s0 += wgt;
    s1 += wgt * (lw - max_logw_);
  });
  return std::log(s0) - s1 / s0;
}

JointTable posterior_joint(const FactorGraph& g, const ObservationModel& model,
                           const World& w, std::span<const int> ids) {
  return ExactPosterior(g, model, w).joint(ids);
}

double factorization_gap(const FactorGraph& g, const ObservationModel& model,
                         const World& w, std::span<const int> ids) {
  const JointTable jt = posterior_joint(g, model, w, ids);
  const int k = static_cast<int>(ids.size());
  std::vector<Marginal> singles;
  singles.reserve(k);
  for (int pos = 0; pos < k; ++pos) singles.push_back(jt.marginalize_to(pos));
  std::vector<double> prod(jt.probs.size());
  for (std::size_t idx = 0; idx < prod.size(); ++idx) {
    double v = 1.0;
    std::size_t rest = idx;
    for (int pos = k - 1; pos >= 0; --pos) {
      v *= singles[pos][rest % jt.q];
      rest /= jt.q;
    }
    prod[idx] = v;
  }
  return total_variation(jt.probs, prod);
}

double conditional_mi(const FactorGraph& g, const ObservationModel& model, const World& w,
                      int i, int j) {
  ExactPosterior ep(g, model, w);
  if (i == j) return dist_entropy(ep.marginal(i));
  const int ids[2] = {i, j};
  const JointTable jt = ep.joint(ids);
  const Marginal pi = jt.marginalize_to(0);
  const Marginal pj = jt.marginalize_to(1);
  double mi = 0.0;
  for (int xi = 0; xi < jt.q; ++xi)
    for (int xj = 0; xj < jt.q; ++xj) {
      const double p = jt.probs[static_cast<std::size_t>(xi) * jt.q + xj];
      if (p > 0) mi += p * std::log(p / (pi[xi] * pj[xj]));
    }
  return std::max(mi, 0.0);
}

double overlap_variance(const FactorGraph& g, const ObservationModel& model, const World& w,
                        int xi) {
  ExactPosterior ep(g, model, w);
  const int n = ep.n();
  const int q = ep.q();
  if (xi < 0 || xi >= q) throw ValidationError("overlap_variance: symbol out of range");
  const std::vector<double> pairs = ep.all_pair_joints();
  const std::size_t qq = static_cast<std::size_t>(q) * q;
  std::vector<double> single(n);
  for (int i = 0; i < n; ++i)
    single[i] = pairs[(static_cast<std::size_t>(i) * n + i) * qq + xi * q + xi];
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double pij = pairs[(static_cast<std::size_t>(i) * n + j) * qq + xi * q + xi];
      const double cov = pij - single[i] * single[j];
      acc += cov * cov;
    }
  return acc / (static_cast<double>(n) * n);
}

double posterior_entropy(const FactorGraph& g, const ObservationModel& model,
                         const World& w) {
  return ExactPosterior(g, model, w).entropy();
}

McEstimate conditional_entropy_mc(const FactorGraph& g, const ObservationModel& model,
                                  double theta, int n_worlds, std::uint64_t seed) {
  if (n_worlds < 2) throw ValidationError("conditional_entropy_mc: need at least 2 worlds");
  const ObservationModel m = model.with_theta(theta);
  RunningStat stat;
  for (int wi = 0; wi < n_worlds; ++wi) {
    const World w = sample_world(g, m, mix_seed(seed, wi));
    stat.add(posterior_entropy(g, m, w));
  }
  return {stat.mean(), stat.std_error()};
}

}  // namespace sparseobs
