#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "missinglens/error.hpp"

namespace missinglens {

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two-sided p-value for a standard-normal statistic.
inline double normal_two_sided_p(double z) {
  if (!std::isfinite(z)) return std::isnan(z) ? 1.0 : 0.0;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

namespace detail {

// Regularized lower incomplete gamma P(a,x): series for x < a+1,
// continued fraction otherwise.
inline double gamma_p(double a, double x) {
  if (x < 0 || a <= 0) throw ValueError("gamma_p: domain");
  if (x == 0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

}  // namespace detail

// Upper-tail probability of a chi-square with df degrees of freedom.
inline double chi2_sf(double x, double df) {
  if (df <= 0) throw ValueError("chi2_sf: df must be positive");
  if (x <= 0) return 1.0;
  return std::clamp(1.0 - detail::gamma_p(df / 2.0, x / 2.0), 0.0, 1.0);
}

// Linear-interpolated quantile (the "type 7" convention) of a sorted vector.
inline double quantile_sorted(const Eigen::VectorXd& sorted, double p) {
  const Eigen::Index n = sorted.size();
  if (n == 0) throw ValueError("quantile: empty input");
  if (n == 1) return sorted[0];
  const double h = std::clamp(p, 0.0, 1.0) * static_cast<double>(n - 1);
  const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(h));
  const Eigen::Index hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double weighted_mean(const Eigen::VectorXd& values, const Eigen::VectorXd& weights) {
  const double w = weights.sum();
  if (w <= 0) throw ValueError("weighted_mean: zero total weight");
  return values.dot(weights) / w;
}

inline double median_of(Eigen::VectorXd values) {
  const Eigen::Index n = values.size();
  if (n == 0) throw ValueError("median: empty input");
  std::sort(values.data(), values.data() + n);
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace missinglens
