#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sparseobs/errors.hpp"

namespace sparseobs {

/// A point of the simplex over the hidden alphabet (posterior, message, ...).
using Marginal = std::vector<double>;

/// Total variation distance, (1/2) sum |p - r|.
inline double total_variation(std::span<const double> p, std::span<const double> r) {
  if (p.size() != r.size())
    throw ValidationError("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - r[i]);
  return 0.5 * s;
}

/// Shannon entropy in nats, with 0 log 0 = 0.
inline double dist_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

/// Normalizes in place; returns the pre-normalization mass (0 means failure,
/// vector left untouched).
inline double normalize(std::vector<double>& p) {
  double s = 0.0;
  for (double v : p) s += v;
  if (s > 0)
    for (double& v : p) v /= s;
  return s;
}

inline bool is_distribution(std::span<const double> p, double tol = 1e-10) {
  double s = 0.0;
  for (double v : p) {
    if (v < 0 || !std::isfinite(v)) return false;
    s += v;
  }
  return std::fabs(s - 1.0) <= tol;
}

inline Marginal point_mass(int q, int xi) {
  Marginal p(q, 0.0);
  p.at(xi) = 1.0;
  return p;
}

inline Marginal uniform_dist(int q) { return Marginal(q, 1.0 / q); }

/// Two-sample Kolmogorov-Smirnov distance between empirical laws.
/// Zero exactly when the sorted samples coincide.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw ValidationError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double v = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] == v) ++ia;
    while (ib < b.size() && b[ib] == v) ++ib;
    d = std::max(d, std::fabs(ia / na - ib / nb));
  }
  return d;
}

}  // namespace sparseobs
