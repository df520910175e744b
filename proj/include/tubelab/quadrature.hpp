#ifndef TUBELAB_QUADRATURE_HPP
#define TUBELAB_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "tubelab/common.hpp"

namespace tubelab {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Jacobi P_n^{(a,a)}(x) and its derivative by the three-term recurrence.
inline void gegenbauer_jacobi(std::size_t n, double a, double x, double& p, double& dp) {
  double p0 = 1.0;
  double p1 = (a + 1.0) * x;
  if (n == 0) {
    p = p0;
    dp = 0.0;
    return;
  }
  if (a == 0.0) {
    // Legendre: cheaper Bonnet recurrence
    for (std::size_t k = 2; k <= n; ++k) {
      const double kk = static_cast<double>(k);
      const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
      p0 = p1;
      p1 = p2;
    }
    p = p1;
    const double nn = static_cast<double>(n);
    dp = nn * (p0 - x * p1) / (1.0 - x * x);
    return;
  }
  for (std::size_t k = 2; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    const double c = 2.0 * kk + 2.0 * a;
    const double a1 = 2.0 * kk * (kk + 2.0 * a) * (c - 2.0);
    const double a3 = (c - 1.0) * c * (c - 2.0);
    const double a4 = 2.0 * (kk + a - 1.0) * (kk + a - 1.0) * c;
    const double p2 = (a3 * x * p1 - a4 * p0) / a1;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  const double nn = static_cast<double>(n);
  // (1 - x^2) P_n' = -n x P_n + (n + a) P_{n-1}
  dp = (-nn * x * p1 + (nn + a) * p0) / (1.0 - x * x);
}

}  // namespace detail

/// Gauss rule for the weight (1 - t^2)^a on [-1, 1]; a = 0 is Gauss-Legendre.
/// Nodes ascending. Newton iteration from the Tricomi-type angle guess; the
/// rule is symmetric, so only half of the roots are iterated.
inline GaussRule compute_gauss_gegenbauer(std::size_t n, double a) {
  if (n == 0) throw DomainError("gauss rule needs at least one node");
  if (a <= -1.0) throw DomainError("gauss_gegenbauer: exponent must exceed -1");
  GaussRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const double nn = static_cast<double>(n);
  // log of the weight-normalisation constant of the Jacobi rule
  const double log_c = std::log(2.0) * (2.0 * a + 1.0) + 2.0 * std::lgamma(nn + a + 1.0) -
                       std::lgamma(nn + 2.0 * a + 1.0) - std::lgamma(nn + 1.0);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double k = static_cast<double>(i) + 1.0;
    double x = (1.0 - (nn - 1.0) / (8.0 * nn * nn * nn)) * std::cos(pi * (k - 0.25 + 0.5 * a) / (nn + 0.5 + a));
    double p = 0.0;
    double dp = 0.0;
    for (int it = 0; it < 12; ++it) {
      detail::gegenbauer_jacobi(n, a, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-14) break;
    }
    detail::gegenbauer_jacobi(n, a, x, p, dp);
    const double w = std::exp(log_c) / ((1.0 - x * x) * dp * dp);
    // roots come out descending from the first guess; store ascending
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
    rule.nodes[i] = -x;
    rule.weights[i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Memoised gauss_gegenbauer; large Legendre rules are reused across grids.
inline GaussRule gauss_gegenbauer(std::size_t n, double a) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, double>, GaussRule> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find({n, a}); it != cache.end()) return it->second;
  }
  GaussRule r = compute_gauss_gegenbauer(n, a);
  std::lock_guard lock(mutex);
  cache.emplace(std::make_pair(n, a), r);
  return r;
}

inline GaussRule gauss_legendre(std::size_t n) { return gauss_gegenbauer(n, 0.0); }

/// Gauss-Legendre rule mapped to [lo, hi].
inline GaussRule gauss_legendre(std::size_t n, double lo, double hi) {
  GaussRule r = gauss_legendre(n);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (std::size_t i = 0; i < n; ++i) {
    r.nodes[i] = mid + half * r.nodes[i];
    r.weights[i] *= half;
  }
  return r;
}

}  // namespace tubelab

#endif  // TUBELAB_QUADRATURE_HPP
