#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sparseobs/errors.hpp"

namespace sparseobs {

/// Mean / standard error accumulator. Merging is exact in the sense that the
/// final reduction is always performed in a fixed (index) order, so results do
/// not depend on the number of worker threads.
class RunningStat {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / n_;
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / (n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double std_error() const { return n_ > 0 ? stddev() / std::sqrt(double(n_)) : 0.0; }

  static RunningStat from(std::span<const double> xs) {
    RunningStat s;
    for (double x : xs) s.add(x);
    return s;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Regularized upper incomplete gamma Q(s, x) = Gamma(s, x) / Gamma(s).
/// Series for x < s+1, continued fraction otherwise (Numerical-Recipes style).
inline double gamma_q(double s, double x) {
  if (s <= 0 || x < 0) throw ValidationError("gamma_q: bad arguments");
  if (x == 0) return 1.0;
  const double lg = std::lgamma(s);
  if (x < s + 1.0) {
    // P(s,x) by series, return 1 - P.
    double term = 1.0 / s;
    double sum = term;
    double a = s;
    for (int it = 0; it < 500; ++it) {
      a += 1.0;
      term *= x / a;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    const double p = sum * std::exp(-x + s * std::log(x) - lg);
    return 1.0 - p;
  }
  // Lentz continued fraction for Q.
  const double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + s * std::log(x) - lg) * h;
}

/// P-value of a chi-square statistic with `df` degrees of freedom.
inline double chi_square_pvalue(double stat, int df) {
  if (df <= 0) throw ValidationError("chi_square_pvalue: df must be positive");
  return gamma_q(0.5 * df, 0.5 * stat);
}

/// Chi-square goodness-of-fit against expected counts; bins with expected
/// count below `min_expected` are pooled into their neighbor.
struct ChiSquareResult {
  double statistic;
  int df;
  double p_value;
};

inline ChiSquareResult chi_square_gof(std::span<const double> observed,
                                      std::span<const double> expected,
                                      double min_expected = 5.0) {
  if (observed.size() != expected.size() || observed.empty())
    throw ValidationError("chi_square_gof: size mismatch");
  std::vector<double> obs, exp;
  double o_acc = 0, e_acc = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected[i];
    if (e_acc >= min_expected) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0;
    }
  }
  if (e_acc > 0 || o_acc > 0) {
    if (exp.empty()) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
    } else {
      obs.back() += o_acc;
      exp.back() += e_acc;
    }
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (exp[i] <= 0) continue;
    const double d = obs[i] - exp[i];
    stat += d * d / exp[i];
  }
  const int df = static_cast<int>(obs.size()) - 1;
  if (df < 1) return {stat, 0, 1.0};
  return {stat, df, chi_square_pvalue(stat, df)};
}

inline double poisson_pmf(int k, double mean) {
  if (k < 0) return 0.0;
  if (mean == 0) return k == 0 ? 1.0 : 0.0;
  return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

}  // namespace sparseobs
